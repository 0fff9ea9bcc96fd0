"""Mirror trajectory parameters and unit scaling.

The wall follows x_m(t) = d*sqrt(t/t_f), so two numbers fix a stopping
protocol: the sweep distance d and the final time t_f.  Everything else
(boundary velocity v_b = d/t_f, trajectory coefficient alpha = d/sqrt(t_f),
the dimensionless variables chi = x/d, nu = v/v_b, tau = t/t_f) derives
from them.  All dimensional quantities are SI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InfeasibleDesignError


@dataclass(frozen=True)
class StoppingProtocol:
    """Mirror design parameters; v_b and alpha are derived, never stored."""

    d: float
    t_f: float

    def __post_init__(self):
        if not (self.d > 0.0 and math.isfinite(self.d)):
            raise ValueError(f"wall displacement d must be positive, got {self.d}")
        if not (self.t_f > 0.0 and math.isfinite(self.t_f)):
            raise ValueError(f"final time t_f must be positive, got {self.t_f}")

    @property
    def v_b(self) -> float:
        """Boundary velocity d/t_f: slowest launch from the origin that still collides."""
        return self.d / self.t_f

    @property
    def alpha(self) -> float:
        """Trajectory coefficient in x_m(t) = alpha*sqrt(t)."""
        return self.d / math.sqrt(self.t_f)


@dataclass(frozen=True)
class PhaseSpacePoint:
    """Dimensionless phase-space coordinates chi = x/d, nu = v/v_b."""

    chi: float
    nu: float

    def __post_init__(self):
        if not (math.isfinite(self.chi) and math.isfinite(self.nu)):
            raise ValueError(f"phase-space point must be finite, got ({self.chi}, {self.nu})")


def mirror_position(t: float, p: StoppingProtocol) -> float:
    """Wall position d*sqrt(t/t_f); monotone increasing on [0, t_f]."""
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    return p.d * math.sqrt(t / p.t_f)


def mirror_velocity(t: float, p: StoppingProtocol) -> float:
    """Wall velocity d/(2*sqrt(t*t_f)); diverges as t -> 0."""
    if t <= 0.0:
        raise ValueError(f"mirror velocity is singular at t <= 0, got {t}")
    return p.d / (2.0 * math.sqrt(t * p.t_f))


def to_dimensionless(x: float, v: float, p: StoppingProtocol) -> PhaseSpacePoint:
    return PhaseSpacePoint(chi=x / p.d, nu=v / p.v_b)


def from_dimensionless(s: PhaseSpacePoint, p: StoppingProtocol) -> tuple[float, float]:
    return s.chi * p.d, s.nu * p.v_b


def design_protocol(x_s_worst: float, v_s_min: float, v_f_target: float,
                    v_b: float, max_doublings: int = 200) -> StoppingProtocol:
    """Pick the smallest d on a doubling grid that stops the worst-case particle.

    v_b is held fixed (t_f = d/v_b grows with d).  A candidate d is accepted
    when the worst-case particle both collides before t_f, i.e.
    v_b*(1 - x_s/d) < v_s, and leaves with |v_f| <= v_f_target according to
    the exact map.  |v_f| -> 0 as d -> inf at fixed v_b, so the search
    terminates for any positive target.
    """
    from .classical_map import forward_map

    if x_s_worst > 0.0:
        raise ValueError(f"worst-case start must satisfy x_s <= 0, got {x_s_worst}")
    if v_s_min <= 0.0 or v_f_target <= 0.0 or v_b <= 0.0:
        raise ValueError("v_s_min, v_f_target and v_b must be positive")
    if v_b >= v_s_min:
        raise InfeasibleDesignError(
            f"v_b = {v_b} must be below v_s_min = {v_s_min}: the slowest "
            "particle would never reach the wall for any d")

    d = -10.0 * x_s_worst if x_s_worst < 0.0 else 1e-3
    for _ in range(max_doublings):
        p = StoppingProtocol(d=d, t_f=d / v_b)
        collides = v_b * (1.0 - x_s_worst / d) < v_s_min
        if collides:
            res = forward_map(to_dimensionless(x_s_worst, v_s_min, p))
            if abs(res.point.nu) * v_b <= v_f_target:
                return p
        d *= 2.0
    raise InfeasibleDesignError(
        f"no d on the doubling grid up to {d} met |v_f| <= {v_f_target}")
