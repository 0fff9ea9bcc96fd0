"""Hot numeric kernels: batch phase-space maps, the brute-force bounce
oracle, and the Crank-Nicolson stepping loop.

Every kernel exists twice: a numba ``@njit`` version and a pure
numpy/scipy fallback.  The fallback is selected by setting the
environment variable ``CATCHER_NO_NUMBA=1`` (or automatically when numba
is not importable).  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import math
import os

import numpy as np
import scipy.linalg

_WANT_NUMBA = os.environ.get("CATCHER_NO_NUMBA", "0") not in ("1", "true", "yes")

if _WANT_NUMBA:
    try:
        from numba import njit

        USE_NUMBA = True
    except ImportError:  # pragma: no cover
        USE_NUMBA = False
else:
    USE_NUMBA = False


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


# bounce guard: with chi_s <= 0 a reflected particle can never catch the
# wall again, so more than one bounce signals a bug
_MAX_BOUNCES = 16

# wall kinds shared with quantum.py
WALL_NONE = 0
WALL_IDEAL = 1
WALL_GAUSSIAN = 2

# width of the evaluated Gaussian-wall window, in units of dx_V
_GAUSS_CUTOFF_SIGMAS = 8.0


# ---------------------------------------------------------------------------
# forward map (closed form)
# ---------------------------------------------------------------------------

def _forward_map_numpy(chi, nu, out_chi, out_nu, out_eta, out_coll):
    coll = nu > 1.0 - chi
    out_coll[:] = coll
    # free branch
    out_chi[:] = chi + nu
    out_nu[:] = nu
    out_eta[:] = np.nan
    if np.any(coll):
        c = chi[coll]
        v = nu[coll]
        # collision requires nu > 1 - chi >= 1 > 0, so 1/(2 nu) is safe;
        # chi == 0 uses the algebraic limit eta = 1/nu to avoid 0/0
        eta = np.where(c == 0.0, 1.0 / v,
                       (1.0 + np.sqrt(1.0 - 4.0 * c * v)) / (2.0 * v))
        out_eta[coll] = eta
        out_nu[coll] = 1.0 / eta - v
        out_chi[coll] = c + 1.0 / eta - v + 2.0 * v * eta * eta - eta


def _make_forward_map_numba():
    @njit(cache=True)
    def _forward_map(chi, nu, out_chi, out_nu, out_eta, out_coll):
        for i in range(chi.shape[0]):
            c = chi[i]
            v = nu[i]
            if v > 1.0 - c:
                if c == 0.0:
                    eta = 1.0 / v
                else:
                    eta = (1.0 + math.sqrt(1.0 - 4.0 * c * v)) / (2.0 * v)
                out_eta[i] = eta
                out_nu[i] = 1.0 / eta - v
                out_chi[i] = c + 1.0 / eta - v + 2.0 * v * eta * eta - eta
                out_coll[i] = True
            else:
                out_chi[i] = c + v
                out_nu[i] = v
                out_eta[i] = np.nan
                out_coll[i] = False

    return _forward_map


# ---------------------------------------------------------------------------
# trajectory oracle (event-stepping with bisection)
# ---------------------------------------------------------------------------
#
# Free flight is piecewise linear, so stepping serves only to bracket the
# crossing chi(tau) = sqrt(tau); bisection then refines it.  Two analytic
# skips keep the cost bounded without using the closed-form map:
#   * chi + nu*tau < sqrt(tau) whenever nu*tau' bounds fail (tau <= sqrt(tau)
#     on [0,1]), so scanning starts at tau_start = -chi/(nu-1);
#   * after a bounce with nu' < 1/2 the gap sqrt(tau) - chi(tau) is strictly
#     increasing (wall speed >= 1/2 on tau <= 1), so no second crossing.

def _oracle_scalar_py(chi0, nu0, dt):
    if nu0 <= 0.0:
        return chi0 + nu0, nu0, False, np.nan, 0
    if nu0 <= 1.0 and chi0 <= 0.0:
        return chi0 + nu0, nu0, False, np.nan, 0
    if chi0 == 0.0:
        tau_start = max(0.0, 1.0 / (nu0 * nu0) - 2.0 * dt)
    else:
        tau_start = -chi0 / (nu0 - 1.0)
        if tau_start >= 1.0:
            return chi0 + nu0, nu0, False, np.nan, 0

    leg_t = tau_start
    leg_chi = chi0 + nu0 * tau_start
    nu = nu0
    bounces = 0
    first_root = np.nan
    chunk = 1 << 15
    while True:
        # vectorized scan of the next chunk for the first point above the wall
        n_left = int(math.ceil((1.0 - leg_t) / dt))
        if n_left <= 0:
            return leg_chi + nu * (1.0 - leg_t), nu, bounces > 0, first_root, bounces
        m = min(chunk, n_left)
        k = np.arange(1, m + 1)
        tau = np.minimum(leg_t + k * dt, 1.0)
        f = leg_chi + nu * (tau - leg_t) - np.sqrt(tau)
        hit = np.nonzero(f > 0.0)[0]
        if hit.size == 0:
            leg_chi = leg_chi + nu * (tau[-1] - leg_t)
            leg_t = tau[-1]
            if leg_t >= 1.0:
                return leg_chi, nu, bounces > 0, first_root, bounces
            continue
        j = hit[0]
        lo = leg_t if j == 0 else tau[j - 1]
        hi = tau[j]
        while hi - lo > 1e-12 * hi:
            mid = 0.5 * (lo + hi)
            if leg_chi + nu * (mid - leg_t) - math.sqrt(mid) > 0.0:
                hi = mid
            else:
                lo = mid
        tau_c = 0.5 * (lo + hi)
        root = math.sqrt(tau_c)
        nu = 1.0 / root - nu  # elastic bounce: v -> 2 v_m - v, v_m = 1/(2 sqrt(tau))
        bounces += 1
        if bounces == 1:
            first_root = root
        if bounces >= _MAX_BOUNCES:
            return root + nu * (1.0 - tau_c), nu, True, first_root, bounces
        if nu < 0.5:
            return root + nu * (1.0 - tau_c), nu, True, first_root, bounces
        leg_t = tau_c
        leg_chi = root


def _oracle_batch_numpy(chi, nu, dt, out_chi, out_nu, out_coll, out_root, out_bounces):
    for i in range(chi.shape[0]):
        c, v, coll, root, nb = _oracle_scalar_py(chi[i], nu[i], dt)
        out_chi[i] = c
        out_nu[i] = v
        out_coll[i] = coll
        out_root[i] = root
        out_bounces[i] = nb


def _make_oracle_numba():
    @njit(cache=True)
    def _oracle_scalar(chi0, nu0, dt):
        if nu0 <= 0.0:
            return chi0 + nu0, nu0, False, np.nan, 0
        if nu0 <= 1.0 and chi0 <= 0.0:
            return chi0 + nu0, nu0, False, np.nan, 0
        if chi0 == 0.0:
            tau_start = max(0.0, 1.0 / (nu0 * nu0) - 2.0 * dt)
        else:
            tau_start = -chi0 / (nu0 - 1.0)
            if tau_start >= 1.0:
                return chi0 + nu0, nu0, False, np.nan, 0

        leg_t = tau_start
        leg_chi = chi0 + nu0 * tau_start
        nu = nu0
        bounces = 0
        first_root = np.nan
        while True:
            k = 0
            prev = leg_t
            hit = False
            tau = leg_t
            while tau < 1.0:
                k += 1
                tau = leg_t + k * dt
                if tau > 1.0:
                    tau = 1.0
                if leg_chi + nu * (tau - leg_t) - math.sqrt(tau) > 0.0:
                    hit = True
                    break
                prev = tau
            if not hit:
                return leg_chi + nu * (1.0 - leg_t), nu, bounces > 0, first_root, bounces
            lo = prev
            hi = tau
            while hi - lo > 1e-12 * hi:
                mid = 0.5 * (lo + hi)
                if leg_chi + nu * (mid - leg_t) - math.sqrt(mid) > 0.0:
                    hi = mid
                else:
                    lo = mid
            tau_c = 0.5 * (lo + hi)
            root = math.sqrt(tau_c)
            nu = 1.0 / root - nu
            bounces += 1
            if bounces == 1:
                first_root = root
            if bounces >= _MAX_BOUNCES or nu < 0.5:
                return root + nu * (1.0 - tau_c), nu, True, first_root, bounces
            leg_t = tau_c
            leg_chi = root

    @njit(cache=True)
    def _oracle_batch(chi, nu, dt, out_chi, out_nu, out_coll, out_root, out_bounces):
        for i in range(chi.shape[0]):
            c, v, coll, root, nb = _oracle_scalar(chi[i], nu[i], dt)
            out_chi[i] = c
            out_nu[i] = v
            out_coll[i] = coll
            out_root[i] = root
            out_bounces[i] = nb

    return _oracle_scalar, _oracle_batch


# ---------------------------------------------------------------------------
# Crank-Nicolson segment runner
# ---------------------------------------------------------------------------
#
# One step of (1 + i dt H/2) psi' = (1 - i dt H/2) psi with
# H = -(1/2 mu) d2/dx2 + U(x - x_m(t_mid)).  With U real the A-matrix is the
# conjugate of the B-matrix, so only bdiag is stored.  The wall is snapped to
# the nearest grid node; between snaps the matrices are constant, which lets
# the Thomas pivots (cp, r) be precomputed so the per-step sweeps are
# division-free.

def _wall_window(wall_kind, j, n, w):
    if wall_kind == WALL_IDEAL:
        return max(0, min(j, n)), n
    lo = max(0, j - w)
    hi = min(n, j + w + 1)
    return lo, hi


def _eval_wall_numpy(U, wall_kind, j, x_min, dx, V0, dxV, Vinf, w):
    n = U.shape[0]
    U[:] = 0.0
    if wall_kind == WALL_IDEAL:
        U[max(0, min(j, n)):] = Vinf
    elif wall_kind == WALL_GAUSSIAN:
        lo, hi = _wall_window(wall_kind, j, n, w)
        if lo < hi:
            y = (np.arange(lo, hi) - j) * dx
            U[lo:hi] = V0 * np.exp(-y * y / (2.0 * dxV * dxV))


def _cn_segment_numpy(psi, n_steps, t0, dt, g, half_dt, x_min, dx,
                      d, t_f, wall_kind, V0, dxV, Vinf, tol_left, tol_right):
    n = psi.shape[0]
    U = np.zeros(n)
    w = int(math.ceil(_GAUSS_CUTOFF_SIGMAS * dxV / dx)) if wall_kind == WALL_GAUSSIAN else 0
    off_b = 0.5j * g
    ab = np.zeros((3, n), dtype=np.complex128)
    ab[0, 1:] = -off_b
    ab[2, :-1] = -off_b
    j_prev = -(1 << 62)
    bdiag = np.empty(n, dtype=np.complex128)
    for k in range(n_steps):
        t_mid = t0 + (k + 0.5) * dt
        if wall_kind == WALL_NONE:
            j = -1
        else:
            j = int(round((d * math.sqrt(t_mid / t_f) - x_min) / dx))
        if j != j_prev:
            _eval_wall_numpy(U, wall_kind, j, x_min, dx, V0, dxV, Vinf, w)
            bdiag[:] = 1.0 - 1j * g - 1j * half_dt * U
            ab[1, :] = np.conj(bdiag)
            j_prev = j
        rhs = bdiag * psi
        rhs[:-1] += off_b * psi[1:]
        rhs[1:] += off_b * psi[:-1]
        psi[:] = scipy.linalg.solve_banded((1, 1), ab, rhs,
                                           overwrite_ab=False, check_finite=False)
        if abs(psi[0]) > tol_left:
            return 1, k + 1
        if abs(psi[n - 1]) > tol_right:
            return 2, k + 1
    return 0, n_steps


def _make_cn_segment_numba():
    @njit(cache=True)
    def _refactor(bdiag, U, cp, r, off_a, g, half_dt, start):
        # rebuild bdiag and the Thomas pivots from the first changed row on
        n = bdiag.shape[0]
        for i in range(start, n):
            bdiag[i] = 1.0 - 1j * g - 1j * half_dt * U[i]
        if start == 0:
            beta = np.conj(bdiag[0])
            r[0] = 1.0 / beta
            cp[0] = off_a * r[0]
            start = 1
        for i in range(start, n):
            beta = np.conj(bdiag[i]) - off_a * cp[i - 1]
            r[i] = 1.0 / beta
            cp[i] = off_a * r[i]

    @njit(cache=True)
    def _cn_segment(psi, n_steps, t0, dt, g, half_dt, x_min, dx,
                    d, t_f, wall_kind, V0, dxV, Vinf, tol_left, tol_right,
                    U, bdiag, cp, r, F):
        n = psi.shape[0]
        off_a = -0.5j * g
        off_b = 0.5j * g
        w = 0
        if wall_kind == WALL_GAUSSIAN:
            w = int(math.ceil(_GAUSS_CUTOFF_SIGMAS * dxV / dx))
        j_prev = -(1 << 62)
        for k in range(n_steps):
            t_mid = t0 + (k + 0.5) * dt
            j = -1
            if wall_kind != WALL_NONE:
                j = int(round((d * math.sqrt(t_mid / t_f) - x_min) / dx))
            if j != j_prev:
                if j_prev == -(1 << 62):
                    first = 0
                    U[:] = 0.0
                else:
                    if wall_kind == WALL_IDEAL:
                        first = max(0, min(min(j, j_prev), n))
                    else:
                        first = max(0, min(j, j_prev) - w)
                if wall_kind == WALL_IDEAL:
                    for i in range(first, n):
                        U[i] = Vinf if i >= j else 0.0
                elif wall_kind == WALL_GAUSSIAN:
                    lo = max(0, j - w)
                    hi = min(n, j + w + 1)
                    for i in range(first, n):
                        U[i] = 0.0
                    for i in range(lo, hi):
                        y = (i - j) * dx
                        U[i] = V0 * math.exp(-y * y / (2.0 * dxV * dxV))
                _refactor(bdiag, U, cp, r, off_a, g, half_dt, first)
                j_prev = j
            # fused B matvec + forward elimination
            rhs = bdiag[0] * psi[0] + off_b * psi[1]
            F[0] = rhs * r[0]
            for i in range(1, n - 1):
                rhs = bdiag[i] * psi[i] + off_b * (psi[i - 1] + psi[i + 1])
                F[i] = (rhs - off_a * F[i - 1]) * r[i]
            rhs = bdiag[n - 1] * psi[n - 1] + off_b * psi[n - 2]
            F[n - 1] = (rhs - off_a * F[n - 2]) * r[n - 1]
            # back substitution
            psi[n - 1] = F[n - 1]
            for i in range(n - 2, -1, -1):
                psi[i] = F[i] - cp[i] * psi[i + 1]
            if abs(psi[0]) > tol_left:
                return 1, k + 1
            if abs(psi[n - 1]) > tol_right:
                return 2, k + 1
        return 0, n_steps

    return _cn_segment


class _CNWorkspace:
    """Scratch arrays reused across segments of one propagation run."""

    def __init__(self, n):
        self.U = np.zeros(n)
        self.bdiag = np.empty(n, dtype=np.complex128)
        self.cp = np.empty(n, dtype=np.complex128)
        self.r = np.empty(n, dtype=np.complex128)
        self.F = np.empty(n, dtype=np.complex128)


def cn_segment(psi, n_steps, t0, dt, g, half_dt, x_min, dx, d, t_f,
               wall_kind, V0, dxV, Vinf, tol_left, tol_right, workspace=None):
    """Advance psi by n_steps of Crank-Nicolson; returns (status, steps_done).

    status 0 means completed; 1 (left) or 2 (right) means that grid-edge
    amplitude exceeded its tolerance after `steps_done` steps.
    """
    if USE_NUMBA:
        ws = workspace if workspace is not None else _CNWorkspace(psi.shape[0])
        return _cn_segment_numba_impl(
            psi, n_steps, t0, dt, g, half_dt, x_min, dx, d, t_f,
            wall_kind, V0, dxV, Vinf, tol_left, tol_right,
            ws.U, ws.bdiag, ws.cp, ws.r, ws.F)
    return _cn_segment_numpy(psi, n_steps, t0, dt, g, half_dt, x_min, dx,
                             d, t_f, wall_kind, V0, dxV, Vinf, tol_left, tol_right)


def forward_map_batch(chi, nu):
    """Vectorized closed-form map; returns (chi_f, nu_f, collided, eta)."""
    chi = np.ascontiguousarray(chi, dtype=np.float64)
    nu = np.ascontiguousarray(nu, dtype=np.float64)
    out_chi = np.empty_like(chi)
    out_nu = np.empty_like(chi)
    out_eta = np.empty_like(chi)
    out_coll = np.empty(chi.shape, dtype=np.bool_)
    _forward_map_impl(chi, nu, out_chi, out_nu, out_eta, out_coll)
    return out_chi, out_nu, out_coll, out_eta


def oracle_batch(chi, nu, dt):
    """Brute-force bounce trajectories; returns (chi_f, nu_f, collided, root, bounces)."""
    chi = np.ascontiguousarray(chi, dtype=np.float64)
    nu = np.ascontiguousarray(nu, dtype=np.float64)
    out_chi = np.empty_like(chi)
    out_nu = np.empty_like(chi)
    out_root = np.empty_like(chi)
    out_coll = np.empty(chi.shape, dtype=np.bool_)
    out_bounces = np.empty(chi.shape, dtype=np.int64)
    _oracle_batch_impl(chi, nu, dt, out_chi, out_nu, out_coll, out_root, out_bounces)
    return out_chi, out_nu, out_coll, out_root, out_bounces


def oracle_scalar(chi, nu, dt):
    return _oracle_scalar_impl(float(chi), float(nu), float(dt))


if USE_NUMBA:
    _forward_map_impl = _make_forward_map_numba()
    _oracle_scalar_impl, _oracle_batch_impl = _make_oracle_numba()
    _cn_segment_numba_impl = _make_cn_segment_numba()
else:
    _forward_map_impl = _forward_map_numpy
    _oracle_scalar_impl = _oracle_scalar_py
    _oracle_batch_impl = _oracle_batch_numpy
