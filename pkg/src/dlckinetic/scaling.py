"""Growing-mean regime: scaled profiles and the smoothing-transformation fixed point."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .analytics import drift_region
from .density import DiscreteDensity, ModelSpec
from .ensemble import Ensemble
from .errors import DomainError, NotGrowing, OutsideRegion


def _require_growing(model: ModelSpec):
    if not model.alpha1 > 0:
        raise NotGrowing(f"needs alpha_1 > 0, got {model.alpha1:.3g}")


@dataclass
class FixedPointSample:
    """Population approximating the mean-one fixed point ``h_inf``."""

    particles: np.ndarray
    iteration: int
    seed: int
    m2_history: np.ndarray

    def moment(self, k: float) -> float:
        return float(np.mean(self.particles ** k))

    def moment_se(self, k: float) -> float:
        x = self.particles ** k
        return float(x.std(ddof=1) / math.sqrt(x.size))

    def laplace(self, xi):
        return laplace_of_sample(self.particles, xi)

    def to_csv(self, header: str = "") -> str:
        return header + "particle\n" + "".join(f"{v:.17g}\n" for v in self.particles)


def smoothing_iterate(model: ModelSpec, n_particles: int, n_iters: int, seed: int,
                      init: np.ndarray | None = None) -> FixedPointSample:
    """Population iteration of ``V <- U^{alpha_1} (E[X] V' + E[Y] V'')``.

    ``V'`` and ``V''`` are resampled from the current population and ``U`` is
    uniform on (0, 1).  The population is rescaled to mean one after every
    step.  Iteration ``k`` draws from a generator seeded by ``(seed, k)``, so
    any iteration can be replayed on its own.
    """
    _require_growing(model)
    ex, ey, a1 = model.lawX.mean, model.lawY.mean, model.alpha1
    if not drift_region(ex, ey):
        raise OutsideRegion(f"(E[X], E[Y]) = ({ex}, {ey}) is outside the drift region")
    if n_particles < 2:
        raise DomainError("need at least two particles")
    v = np.ones(n_particles) if init is None else np.asarray(init, dtype=float).copy()
    m2 = np.empty(n_iters)
    for k in range(n_iters):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
        i = rng.integers(0, n_particles, n_particles)
        j = rng.integers(0, n_particles, n_particles)
        u = rng.random(n_particles)
        v = u ** a1 * (ex * v[i] + ey * v[j])
        v /= v.mean()
        m2[k] = np.mean(v * v)
    return FixedPointSample(v, n_iters, seed, m2)


def moment_recursion(model: ModelSpec, i_max: int) -> list[float]:
    """Integer moments ``m_1..m_{i_max}`` of the mean-one fixed point.

    ``m_i`` is ``inf`` when its denominator
    ``(E[X]+E[Y]-1) i + 1 - E[X]^i - E[Y]^i`` is not positive.
    """
    _require_growing(model)
    a, b = model.lawX.mean, model.lawY.mean
    return moment_recursion_means(a, b, i_max)


def recursion_denominator(a: float, b: float, i: int) -> float:
    return (a + b - 1) * i + 1 - a ** i - b ** i


def moment_recursion_means(a: float, b: float, i_max: int) -> list[float]:
    """:func:`moment_recursion` from the two means directly."""
    if not a + b > 1:
        raise NotGrowing("needs E[X] + E[Y] > 1")
    m = [1.0, 1.0]
    for i in range(2, i_max + 1):
        den = recursion_denominator(a, b, i)
        if den <= 0 or not all(math.isfinite(x) for x in m):
            m.append(math.inf)
            continue
        num = math.fsum(comb(i, j, exact=True) * a ** j * b ** (i - j) * m[j] * m[i - j]
                        for j in range(1, i))
        m.append(num / den)
    return m[1:]


@dataclass
class ScaledProfile:
    """Weighted point cloud ``v / (m0 e^{alpha_1 t})``."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.dot(self.points, self.weights))

    def moment(self, k: float) -> float:
        return float(np.dot(self.points ** k, self.weights))

    def laplace(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.exp(-np.multiply.outer(xi, self.points)) @ self.weights

    def laplace_se(self, xi):
        """Standard error of :meth:`laplace` for an equally weighted sample."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        e = np.exp(-np.multiply.outer(xi, self.points))
        return e.std(axis=1, ddof=1) / math.sqrt(self.points.size)


def scaled_profile(source, model: ModelSpec, m0: float, t: float) -> ScaledProfile:
    """Rescale an ensemble or a density by the mean ``m0 e^{alpha_1 t}``."""
    _require_growing(model)
    if not t > 0:
        raise DomainError("t must be positive")
    scale = m0 * math.exp(model.alpha1 * t)
    if isinstance(source, Ensemble):
        pts = source.values.astype(float) / scale
        return ScaledProfile(pts, np.full(pts.size, 1.0 / pts.size))
    if isinstance(source, DiscreteDensity):
        return ScaledProfile(source.support / scale, source.probs.copy())
    raise DomainError("source must be an Ensemble or a DiscreteDensity")


def laplace_of_sample(sample, xi):
    """``mean(exp(-xi v))`` for ``xi > 0``."""
    xa = np.asarray(xi, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("xi must be positive")
    s = np.asarray(sample, dtype=float)
    out = np.exp(-np.multiply.outer(xa, s)).mean(axis=-1)
    return float(out) if out.ndim == 0 else out
