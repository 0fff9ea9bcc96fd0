"""Transport of a truncated-Gaussian phase-space density through the map.

Two independent routes to the final density: exact pull-back of the
initial density through the inverse map on a grid (the map is
volume-preserving, so no Jacobian appears), and Monte Carlo push-forward
of samples through the forward map.  Cross-checking the two is part of
the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .classical_map import forward_map_batch, inverse_map_batch
from .protocol import StoppingProtocol

# quadrature box half-width for the normalization integral, in sigmas
_NORM_SIGMAS = 8.0
_NORM_POINTS = 1 << 18

# samples drawn per independent RNG stream
_STREAM_BLOCK = 1 << 16


@dataclass(frozen=True)
class EnsembleSpec:
    """Truncated-Gaussian density: Gaussian in (x, v), cut to x < 0."""

    x0: float
    dx: float
    v0: float
    dv: float
    normalization: float = field(init=False)

    def __post_init__(self):
        if not self.x0 < 0.0:
            raise ValueError(f"ensemble center x0 must be negative, got {self.x0}")
        if not (self.dx > 0.0 and self.dv > 0.0):
            raise ValueError("ensemble widths dx and dv must be positive")
        object.__setattr__(self, "normalization", self._compute_normalization())

    def _compute_normalization(self) -> float:
        # 2-D trapezoid over the +-8 sigma box intersected with x < 0;
        # the integrand separates, so the tensor-grid quadrature is the
        # product of two 1-D trapezoids
        x_hi = min(0.0, self.x0 + _NORM_SIGMAS * self.dx)
        x = np.linspace(self.x0 - _NORM_SIGMAS * self.dx, x_hi, _NORM_POINTS + 1)
        ix = np.trapezoid(np.exp(-((x - self.x0) ** 2) / (2.0 * self.dx ** 2)), x)
        v = np.linspace(self.v0 - _NORM_SIGMAS * self.dv,
                        self.v0 + _NORM_SIGMAS * self.dv, _NORM_POINTS + 1)
        iv = np.trapezoid(np.exp(-((v - self.v0) ** 2) / (2.0 * self.dv ** 2)), v)
        return ix * iv


@dataclass
class DensityGrid:
    """Dimensionless density samples on a uniform (chi, nu) grid."""

    chi_axis: np.ndarray
    nu_axis: np.ndarray
    values: np.ndarray  # shape (len(chi_axis), len(nu_axis)), per unit chi*nu

    def __post_init__(self):
        if self.values.shape != (self.chi_axis.size, self.nu_axis.size):
            raise ValueError(f"grid shape mismatch: {self.values.shape}")
        if np.any(self.values < 0.0):
            raise ValueError("density values must be nonnegative")
        total = np.trapezoid(np.trapezoid(self.values, self.nu_axis, axis=1),
                             self.chi_axis)
        if total > 1.0 + 1e-6:
            raise ValueError(f"grid integrates to {total} > 1")


def initial_density(e: EnsembleSpec, x, v):
    """Truncated-Gaussian density value(s) at dimensional (x, v); zero for x >= 0."""
    x = np.asarray(x, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    val = np.exp(-((v - e.v0) ** 2) / (2.0 * e.dv ** 2)
                 - ((x - e.x0) ** 2) / (2.0 * e.dx ** 2)) / e.normalization
    return np.where(x >= 0.0, 0.0, val)


def final_density(e: EnsembleSpec, p: StoppingProtocol, chi_f, nu_f):
    """Final-time density at dimensionless (chi_f, nu_f), pulled back exactly.

    The map preserves phase-space volume, so the final density is the
    initial one evaluated at the inverse image (no interpolation).
    Returned in dimensional units, like ``initial_density``.
    """
    chi_f = np.asarray(chi_f, dtype=np.float64)
    nu_f = np.asarray(nu_f, dtype=np.float64)
    chi_s, nu_s = inverse_map_batch(chi_f, nu_f)
    return initial_density(e, chi_s * p.d, nu_s * p.v_b)


def default_grid_axes(e: EnsembleSpec, p: StoppingProtocol, n: int = 512):
    """Default dimensionless axes covering both the remnant and the stopped bulk."""
    chi0 = e.x0 / p.d
    dchi = e.dx / p.d
    nu0 = e.v0 / p.v_b
    dnu = e.dv / p.v_b
    chi_axis = np.linspace(min(-1.0, chi0 - 8.0 * dchi), 1.0, n)
    nu_axis = np.linspace(min(nu0 - 8.0 * dnu, -2.0), max(nu0 + 8.0 * dnu, 0.0), n)
    return chi_axis, nu_axis


def initial_density_grid(e: EnsembleSpec, p: StoppingProtocol,
                         chi_axis: np.ndarray, nu_axis: np.ndarray) -> DensityGrid:
    chi, nu = np.meshgrid(chi_axis, nu_axis, indexing="ij")
    vals = initial_density(e, chi * p.d, nu * p.v_b) * p.d * p.v_b
    return DensityGrid(chi_axis, nu_axis, vals)


def final_density_grid(e: EnsembleSpec, p: StoppingProtocol,
                       chi_axis: np.ndarray, nu_axis: np.ndarray) -> DensityGrid:
    chi, nu = np.meshgrid(chi_axis, nu_axis, indexing="ij")
    vals = final_density(e, p, chi.ravel(), nu.ravel()).reshape(chi.shape)
    return DensityGrid(chi_axis, nu_axis, vals * p.d * p.v_b)


def marginals(g: DensityGrid):
    """Integrate out one axis; returns (p_chi, p_nu) by trapezoid."""
    p_chi = np.trapezoid(g.values, g.nu_axis, axis=1)
    p_nu = np.trapezoid(g.values, g.chi_axis, axis=0)
    return p_chi, p_nu


def sample_ensemble(e: EnsembleSpec, p: StoppingProtocol, n: int, seed: int):
    """Draw n i.i.d. dimensionless samples; returns (chi, nu) arrays.

    Deterministic for a given seed: the index range is split into blocks of
    2^16 samples, each filled from its own counter-based Philox stream keyed
    (seed, block).  x >= 0 draws are rejected.
    """
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    xs = np.empty(n)
    vs = np.empty(n)
    for block in range(0, n, _STREAM_BLOCK):
        m = min(_STREAM_BLOCK, n - block)
        key = [np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(block // _STREAM_BLOCK)]
        rng = np.random.Generator(np.random.Philox(key=key))
        got = 0
        # acceptance is Phi(-x0/dx) >= ~16% for x0/dx <= -1; guard anyway
        for _ in range(10000):
            if got >= m:
                break
            draw = rng.normal(e.x0, e.dx, size=2 * (m - got) + 64)
            draw = draw[draw < 0.0][:m - got]
            xs[block + got:block + got + draw.size] = draw
            got += draw.size
        else:
            raise RuntimeError("rejection sampling failed to converge")
        vs[block:block + m] = rng.normal(e.v0, e.dv, size=m)
    return xs / p.d, vs / (p.d / p.t_f)


def push_forward(chi: np.ndarray, nu: np.ndarray):
    """Map every sample to tau = 1; returns (chi_f, nu_f, collided, eta)."""
    return forward_map_batch(chi, nu)


def histogram(values: np.ndarray, bins: int, range_: tuple, n_total: int | None = None):
    """Density histogram normalized so sum(density)*binwidth equals the
    fraction of all n_total samples inside `range_`; returns (density, edges)."""
    values = np.asarray(values)
    if n_total is None:
        n_total = values.size
    counts, edges = np.histogram(values, bins=bins, range=range_)
    width = edges[1] - edges[0]
    return counts / (n_total * width), edges


def stopped_fraction(final_nu: np.ndarray, threshold: float) -> float:
    """Fraction of samples with |nu_f| below the threshold."""
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    final_nu = np.asarray(final_nu)
    return float(np.count_nonzero(np.abs(final_nu) < threshold) / final_nu.size)


def analytic_free_fraction(e: EnsembleSpec, p: StoppingProtocol) -> float:
    """P(nu_s <= 1 - chi_s) under the truncated Gaussian, by 1-D quadrature.

    Serves as the independent oracle for the Monte Carlo remnant fraction:
    the nu-integral is a normal CDF, leaving one numerical integral over chi.
    """
    from scipy.stats import norm

    chi0 = e.x0 / p.d
    dchi = e.dx / p.d
    nu0 = e.v0 / p.v_b
    dnu = e.dv / p.v_b
    hi = min(0.0, chi0 + _NORM_SIGMAS * dchi)
    chi = np.linspace(chi0 - _NORM_SIGMAS * dchi, hi, _NORM_POINTS + 1)
    wx = np.exp(-((chi - chi0) ** 2) / (2.0 * dchi ** 2))
    wx /= np.trapezoid(wx, chi)
    return float(np.trapezoid(wx * norm.cdf((1.0 - chi - nu0) / dnu), chi))
