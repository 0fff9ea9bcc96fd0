"""Exact phase-space maps for one particle meeting the sqrt(t) mirror.

A particle launched at (chi_s <= 0, nu_s) either never reaches the wall
before tau = 1 (nu_s <= 1 - chi_s) or bounces exactly once.  The bounce
time is tau_c = eta^2 with eta the positive root of

    nu_s * eta^2 - eta + chi_s = 0,

and the elastic reflection v -> 2 v_m - v at the wall gives the closed
forms implemented here.  ``trajectory_oracle`` re-derives the same result
by stepping the trajectory and bisecting the wall crossing; it exists to
test the closed forms, so it never uses them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .protocol import PhaseSpacePoint


@dataclass(frozen=True)
class MapResult:
    point: PhaseSpacePoint
    collided: bool
    collision_root: Optional[float] = None  # eta = sqrt(tau_c) when collided


def _require_left_of_wall(s: PhaseSpacePoint):
    if s.chi > 0.0:
        raise ValueError(
            f"map domain is chi_s <= 0 (particle behind the wall at t=0), got chi={s.chi}")


def has_collision(s: PhaseSpacePoint) -> bool:
    """True iff the particle reaches the wall strictly before tau = 1.

    The boundary nu_s = 1 - chi_s grazes the wall exactly at tau = 1 and
    counts as free motion.
    """
    _require_left_of_wall(s)
    return s.nu > 1.0 - s.chi


def eta(s: PhaseSpacePoint) -> float:
    """Positive root of nu*eta^2 - eta + chi = 0; eta^2 is the bounce time."""
    _require_left_of_wall(s)
    if s.nu <= 0.0:
        raise ValueError(f"eta requires nu_s > 0, got {s.nu}")
    if s.chi == 0.0:
        return 1.0 / s.nu  # algebraic limit, avoids the 0/0 quadratic
    return (1.0 + math.sqrt(1.0 - 4.0 * s.chi * s.nu)) / (2.0 * s.nu)


def forward_map(s: PhaseSpacePoint) -> MapResult:
    """Map initial (chi_s, nu_s) to the state at tau = 1."""
    _require_left_of_wall(s)
    if not has_collision(s):
        return MapResult(PhaseSpacePoint(s.chi + s.nu, s.nu), collided=False)
    e = eta(s)
    nu_f = 1.0 / e - s.nu
    chi_f = s.chi + 1.0 / e - s.nu + 2.0 * s.nu * e * e - e
    return MapResult(PhaseSpacePoint(chi_f, nu_f), collided=True, collision_root=e)


def lambda_inv(f: PhaseSpacePoint) -> float:
    """Inverse-map root lambda; equals 1/eta of the pre-image."""
    if not (f.chi > f.nu and f.nu <= 0.0):
        raise ValueError(
            f"lambda requires chi_f > nu_f and nu_f <= 0, got ({f.chi}, {f.nu})")
    diff = f.chi - f.nu
    return (1.0 + math.sqrt(1.0 - 4.0 * f.nu * diff)) / (2.0 * diff)


def inverse_map(f: PhaseSpacePoint) -> PhaseSpacePoint:
    """Recover the initial state from the final one (chi_f < 1)."""
    if f.chi >= 1.0:
        raise ValueError(f"inverse map requires chi_f < 1, got {f.chi}")
    if f.chi > f.nu and f.nu <= 0.0:
        lam = lambda_inv(f)
        nu_s = lam - f.nu
        chi_s = f.chi - f.nu + (2.0 / (lam * lam)) * (f.nu - lam / 2.0)
        return PhaseSpacePoint(chi_s, nu_s)
    return PhaseSpacePoint(f.chi - f.nu, f.nu)


def dnu_f_dnu_s(s: PhaseSpacePoint) -> float:
    """d(nu_f)/d(nu_s) = -1 + 1/sqrt(1 - 4 nu_s chi_s) on the collision branch."""
    _require_collision_branch(s)
    return -1.0 + 1.0 / math.sqrt(1.0 - 4.0 * s.nu * s.chi)


def dnu_f_dchi_s(s: PhaseSpacePoint) -> float:
    """d(nu_f)/d(chi_s) = 1/(eta^2 sqrt(1 - 4 nu_s chi_s)) >= 0 on the collision branch."""
    _require_collision_branch(s)
    e = eta(s)
    return 1.0 / (e * e * math.sqrt(1.0 - 4.0 * s.nu * s.chi))


def _require_collision_branch(s: PhaseSpacePoint):
    _require_left_of_wall(s)
    if s.nu <= 0.0:
        raise ValueError(f"derivatives need nu_s > 0, got {s.nu}")
    if not has_collision(s):
        raise ValueError(
            f"({s.chi}, {s.nu}) is on the free branch where the derivatives "
            "are trivially 1 and 0")


def trajectory_oracle(s: PhaseSpacePoint, dt: float) -> MapResult:
    """Brute-force one trajectory: step chi by nu*dt, bisect the wall crossing.

    Crossings are bracketed on a uniform tau grid of spacing dt and refined
    by bisection to 1e-12 relative; the bounce applies nu -> 1/sqrt(tau_c) - nu.
    Free flight is linear, so the result is dt-independent up to bracketing.
    """
    _require_left_of_wall(s)
    if dt <= 0.0:
        raise ValueError(f"oracle time step must be positive, got {dt}")
    chi_f, nu_f, collided, root, bounces = _kernels.oracle_scalar(s.chi, s.nu, dt)
    if bounces > 1:
        raise AssertionError(
            f"oracle saw {bounces} bounces from ({s.chi}, {s.nu}); "
            "at most one is possible for chi_s <= 0")
    return MapResult(PhaseSpacePoint(chi_f, nu_f), collided=collided,
                     collision_root=root if collided else None)


# ---------------------------------------------------------------------------
# batch interfaces (numpy arrays in, numpy arrays out)
# ---------------------------------------------------------------------------

def forward_map_batch(chi: np.ndarray, nu: np.ndarray):
    """Vectorized forward_map; returns (chi_f, nu_f, collided, eta)."""
    chi = np.asarray(chi, dtype=np.float64)
    if np.any(chi > 0.0):
        raise ValueError("map domain is chi_s <= 0")
    return _kernels.forward_map_batch(chi, nu)


def trajectory_oracle_batch(chi: np.ndarray, nu: np.ndarray, dt: float):
    """Vectorized trajectory_oracle; returns (chi_f, nu_f, collided, root, bounces)."""
    chi = np.asarray(chi, dtype=np.float64)
    if np.any(chi > 0.0):
        raise ValueError("map domain is chi_s <= 0")
    if dt <= 0.0:
        raise ValueError(f"oracle time step must be positive, got {dt}")
    return _kernels.oracle_batch(chi, nu, dt)


def inverse_map_batch(chi_f: np.ndarray, nu_f: np.ndarray):
    """Vectorized inverse_map; returns (chi_s, nu_s)."""
    chi_f = np.asarray(chi_f, dtype=np.float64)
    nu_f = np.asarray(nu_f, dtype=np.float64)
    if np.any(chi_f >= 1.0):
        raise ValueError("inverse map requires chi_f < 1")
    chi_s = chi_f - nu_f
    nu_s = nu_f.copy()
    coll = (chi_f > nu_f) & (nu_f <= 0.0)
    if np.any(coll):
        diff = chi_f[coll] - nu_f[coll]
        lam = (1.0 + np.sqrt(1.0 - 4.0 * nu_f[coll] * diff)) / (2.0 * diff)
        nu_s[coll] = lam - nu_f[coll]
        chi_s[coll] = diff + (2.0 / (lam * lam)) * (nu_f[coll] - lam / 2.0)
    return chi_s, nu_s
