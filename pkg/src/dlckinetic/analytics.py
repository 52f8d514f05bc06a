"""Closed-form moment evolution, Fourier-type metrics and the drift region."""
from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .density import DiscreteDensity, ModelSpec, pgf_difference
from .errors import DomainError

INF_THRESHOLD = 1e12
DEFAULT_ZGRID = 1.0 - np.logspace(-4, math.log10(0.99), 101)
DEFAULT_XIGRID = np.logspace(-4, 1, 101)
DEGENERATE_TOL = 1e-12


def mean_at(m0: float, model: ModelSpec, t: float) -> float:
    return m0 * math.exp(model.alpha1 * t)


def _rate_integral(a: float, t: float) -> float:
    """``(exp(a t) - 1) / a`` with the ``a -> 0`` limit ``t``."""
    if abs(a) * max(t, 1.0) < DEGENERATE_TOL:
        return t
    return math.expm1(a * t) / a


def variance_at(var0: float, m0: float, model: ModelSpec, t: float) -> float:
    """Variance at time ``t`` of the solution started from a density with
    mean ``m0`` and variance ``var0``.

    The two resonant cases ``alpha_1 == alpha_2`` and ``2 alpha_1 == alpha_2``
    switch to their ``t exp(alpha_2 t)`` limits.
    """
    a1, a2 = model.alpha1, model.alpha(2)
    beta, gamma = model.beta, model.gamma
    e2 = math.exp(a2 * t)
    m2_0 = var0 + m0 * m0
    # (e^{a t} - e^{a2 t}) / (a - a2) == e^{a2 t} * expm1((a - a2) t) / (a - a2)
    lin = e2 * _rate_integral(a1 - a2, t)
    quad = e2 * _rate_integral(2 * a1 - a2, t)
    return m2_0 * e2 - m0 * m0 * math.exp(2 * a1 * t) + beta * m0 * lin + 2 * gamma * m0 * m0 * quad


def stationary_variance(m0: float, model: ModelSpec) -> float:
    """Variance of the steady state of a mean-conserving model."""
    return model.beta * m0 / (1.0 - model.lawX.mean ** 2 - model.lawY.mean ** 2)


def alpha(model: ModelSpec, r: float) -> float:
    return model.alpha(r)


def delta(model: ModelSpec, r: float) -> float:
    return model.delta(r)


@dataclass(frozen=True)
class MetricEstimate:
    """Maximum of a metric's ratio over a finite grid.

    ``value`` is a lower bound of the supremum.  ``infinite`` is set when the
    grid maximum exceeds ``1e12`` or when the supremum is known to diverge
    (order ``r > 1`` with different means).
    """

    value: float
    grid: np.ndarray
    r: float
    infinite: bool
    argmax: float


def _metric(diff: np.ndarray, base: np.ndarray, grid: np.ndarray, r: float,
            means_differ: bool) -> MetricEstimate:
    ratio = np.abs(diff) / base ** r
    i = int(np.argmax(ratio))
    value = float(ratio[i])
    return MetricEstimate(value, grid, r, value > INF_THRESHOLD or (r > 1 and means_differ),
                          float(grid[i]))


def _means_differ(f: DiscreteDensity, g: DiscreteDensity) -> bool:
    mf, mg = f.mean, g.mean
    return abs(mf - mg) > 1e-9 * max(1.0, abs(mf), abs(mg))


def d_r(f: DiscreteDensity, g: DiscreteDensity, r: float, zgrid=DEFAULT_ZGRID) -> MetricEstimate:
    """Grid estimate of ``sup_z |f^(z) - g^(z)| / (1 - z)^r`` over ``z`` in ``(0, 1)``.

    For ``r > 1`` the supremum is finite only when ``f`` and ``g`` share the
    same mean.
    """
    z = np.asarray(zgrid, dtype=float)
    if np.any(z <= 0) or np.any(z >= 1):
        raise DomainError("zgrid must lie inside (0, 1)")
    return _metric(pgf_difference(f, g, z), 1.0 - z, z, r, _means_differ(f, g))


def d_r_star(f: DiscreteDensity, g: DiscreteDensity, r: float, xigrid=DEFAULT_XIGRID) -> MetricEstimate:
    """Grid estimate of ``sup_xi |f~(xi) - g~(xi)| / xi^r`` with Laplace transforms."""
    xi = np.asarray(xigrid, dtype=float)
    if np.any(xi <= 0):
        raise DomainError("xigrid must be positive")
    return _metric(pgf_difference(f, g, np.exp(-xi)), xi, xi, r, _means_differ(f, g))


def laplace_metric_from_values(diff: np.ndarray, xigrid, r: float) -> MetricEstimate:
    """``d_r*`` from precomputed Laplace-transform differences on ``xigrid``."""
    xi = np.asarray(xigrid, dtype=float)
    return _metric(np.asarray(diff), xi, xi, r, False)


def drift_gap(ex: float, ey: float, r):
    """``alpha_r / r - alpha_1`` for means ``ex``, ``ey``, accurate near ``r = 1``."""
    r = np.asarray(r, dtype=float)
    h = r - 1.0
    # a^r = a * exp(h log a); subtracting a exactly removes the O(1) part
    g = ex * np.expm1(h * math.log(ex)) + ey * np.expm1(h * math.log(ey)) - h * (ex + ey - 1.0)
    return g / r


def drift_criterion(ex: float, ey: float) -> float:
    """Slope of ``r -> alpha_r / r`` at ``r = 1``: ``a(log a - 1) + b(log b - 1) + 1``."""
    return ex * (math.log(ex) - 1.0) + ey * (math.log(ey) - 1.0) + 1.0


# step 1e-3 on (1, 2] plus a geometric approach to r = 1 so that a negative
# gap confined to a thin layer above r = 1 is not stepped over
R_GRID = np.unique(np.concatenate([1.0 + np.logspace(-10, -3, 71), np.arange(1001, 2001) / 1000.0]))


@dataclass(frozen=True)
class RegionDecision:
    inside: bool
    grid_inside: bool
    criterion: float
    min_gap: float
    argmin_r: float

    @property
    def agree(self) -> bool:
        return self.grid_inside == (self.criterion < 0)


def drift_decision(ex: float, ey: float) -> RegionDecision:
    """Both deciders for the existence of ``r`` in ``(1, 2]`` with ``alpha_r/r < alpha_1``."""
    if not (ex > 0 and ey > 0):
        raise DomainError("expectations must be positive")
    gaps = drift_gap(ex, ey, R_GRID)
    i = int(np.argmin(gaps))
    crit = drift_criterion(ex, ey)
    grid_inside = bool(gaps[i] < 0)
    return RegionDecision(crit < 0, grid_inside, crit, float(gaps[i]), float(R_GRID[i]))


def drift_region(ex: float, ey: float) -> bool:
    d = drift_decision(ex, ey)
    if abs(d.criterion) > 1e-6 and not d.agree:
        raise AssertionError(
            f"drift deciders disagree at ({ex}, {ey}): criterion={d.criterion:.3g}, "
            f"min gap={d.min_gap:.3g} at r={d.argmin_r}"
        )
    return d.inside


def region_scan(ex_grid=None, ey_grid=None):
    """Evaluate the drift region on a rectangular grid restricted to ``ex + ey > 1``.

    Returns a list of ``(ex, ey, RegionDecision)``.
    """
    ex_grid = np.round(np.arange(1, 61) * 0.05, 10) if ex_grid is None else np.asarray(ex_grid)
    ey_grid = ex_grid if ey_grid is None else np.asarray(ey_grid)
    rows = []
    for a in ex_grid:
        for b in ey_grid:
            if a + b > 1:
                rows.append((float(a), float(b), drift_decision(float(a), float(b))))
    return rows


def region_csv(rows, header: str = "") -> str:
    buf = io.StringIO()
    buf.write(header)
    buf.write("ex,ey,inside,grid_inside,criterion\n")
    for a, b, d in rows:
        buf.write(f"{a:.17g},{b:.17g},{str(d.inside).lower()},{str(d.grid_inside).lower()},{d.criterion:.17g}\n")
    return buf.getvalue()


def gamma_ratio(d: float, n) -> np.ndarray:
    """``Gamma(d + n) / (Gamma(d) Gamma(n + 1))``, the growth factor of Wild-term moments."""
    n = np.asarray(n, dtype=float)
    return np.exp(gammaln(d + n) - gammaln(d) - gammaln(n + 1))


def wild_moment_series(d: float, t: float, n_terms: int = 200) -> float:
    """Partial sum ``sum_{n<n_terms} e^{-t} (1-e^{-t})^n Gamma(d+n)/(Gamma(d) n!)``.

    The full series equals ``exp((d - 1) t)`` for ``d > 0``.
    """
    if not d > 0:
        raise DomainError("d must be positive")
    n = np.arange(n_terms)
    logw = -t + n * math.log(-math.expm1(-t))
    return math.fsum(np.exp(logw + gammaln(d + n) - gammaln(d) - gammaln(n + 1)))
