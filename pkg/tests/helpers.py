"""Shared oracles for the test suite: brute-force reference implementations
that the fast closed-form code is checked against."""

import numpy as np

from tabsynth import SplineCoeffs, build_spline, knot_values, uniform_knots

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

_ALPHA_GRID = {}


def _alpha_grid(nodes):
    if nodes not in _ALPHA_GRID:
        _ALPHA_GRID[nodes] = np.linspace(0.0, 1.0, nodes)
    return _ALPHA_GRID[nodes]


def crps_quadrature(coeffs: SplineCoeffs, x: float, nodes: int = 1_000_001) -> float:
    """2 * integral of the check loss over alpha, by trapezoid quadrature.

    The spline is piecewise linear between knots, so np.interp over the knot
    values reproduces it exactly at every quadrature node.
    """
    alphas = _alpha_grid(nodes)
    kv = knot_values(np.array([coeffs.gamma]), coeffs.b[None, :], coeffs.knots)[0]
    d = np.interp(alphas, coeffs.knots, kv)
    u = x - d
    rho = u * (alphas - (u < 0.0))
    return 2.0 * float(_trapezoid(rho, alphas))


def random_spline(rng: np.random.Generator, knot_count: int | None = None):
    """A random (coeffs, x) fixture. Mixes steep, gentle, and nearly flat
    slopes, and places x both inside and outside the spline's range."""
    m = int(knot_count) if knot_count is not None else int(rng.integers(1, 13))
    gamma_raw = float(rng.normal(0.0, 2.0))
    slope_raw = rng.normal(0.0, 2.5, size=m + 1)
    if rng.random() < 0.15:
        slope_raw[rng.integers(0, m + 1)] = -40.0  # force a flat segment
    coeffs = build_spline(gamma_raw, slope_raw, uniform_knots(m))
    lo = coeffs.gamma
    hi = lo + float(np.sum(coeffs.b * (1.0 - coeffs.knots)))
    x = float(rng.normal((lo + hi) / 2.0, 1.0 + (hi - lo)))
    return coeffs, x


def brute_ks(a, b) -> float:
    """Sup distance between empirical CDFs, checked at every sample point."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    best = 0.0
    for x in np.concatenate([a, b]):
        fa = np.searchsorted(a, x, side="right") / a.size
        fb = np.searchsorted(b, x, side="right") / b.size
        best = max(best, abs(fa - fb))
    return best


def brute_wd(a, b) -> float:
    """Area between empirical CDF step functions, by explicit segment sums."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    grid = np.unique(np.concatenate([a, b]))
    total = 0.0
    for left, right in zip(grid[:-1], grid[1:]):
        fa = np.searchsorted(a, left, side="right") / a.size
        fb = np.searchsorted(b, left, side="right") / b.size
        total += abs(fa - fb) * (right - left)
    return total


def grad_rel_err(analytic: float, numeric: float) -> float:
    denom = max(abs(analytic), abs(numeric), 1e-6)
    return abs(analytic - numeric) / denom


def central_diff(f, x0: float, eps: float = 1e-5) -> float:
    return (f(x0 + eps) - f(x0 - eps)) / (2.0 * eps)
