"""Mean-field particle Monte Carlo and the Lea-Coulson mutant-count sampler."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import DiscreteDensity, ModelSpec
from .errors import DomainError, InvalidParams

_CHUNK = 1 << 15


@dataclass
class Ensemble:
    """``N`` agents carrying integer counts, a clock and a seeded generator."""

    values: np.ndarray
    time: float = 0.0
    seed: int | None = None
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.int64).copy()
        if self.values.ndim != 1 or self.values.size < 2:
            raise DomainError("an ensemble needs at least two agents")
        if np.any(self.values < 0):
            raise DomainError("agent values must be non-negative")
        if self.rng is None:
            if self.seed is None:
                raise DomainError("a seed is required")
            self.rng = np.random.default_rng(self.seed)

    @classmethod
    def constant(cls, N: int, value: int, seed: int) -> "Ensemble":
        return cls(np.full(N, value, dtype=np.int64), seed=seed)

    @classmethod
    def from_density(cls, f: DiscreteDensity, N: int, seed: int) -> "Ensemble":
        """Agents drawn iid from the represented part of ``f`` (renormalized)."""
        rng = np.random.default_rng(seed)
        p = f.probs / f.probs.sum()
        return cls(rng.choice(p.size, size=N, p=p), seed=seed, rng=rng)

    @property
    def N(self) -> int:
        return self.values.size

    def copy(self) -> "Ensemble":
        rng = np.random.Generator(type(self.rng.bit_generator)())
        rng.bit_generator.state = self.rng.bit_generator.state
        return Ensemble(self.values, self.time, self.seed, rng)

    def summary(self) -> dict:
        v = self.values.astype(float)
        return {
            "mean": float(v.mean()),
            "variance": float(v.var()),
            "std_error": float(v.std(ddof=1) / math.sqrt(v.size)),
            "time": float(self.time),
            "seed": self.seed,
            "agents": int(v.size),
        }


def collide_pair(vi: int, vj: int, model: ModelSpec, rng: np.random.Generator):
    """One binary interaction: each object is replaced by ``X`` copies kept and ``Y`` sent."""
    X, Y = model.lawX, model.lawY
    sx = rng.multinomial([vi, vj], X.probs) @ X.values
    sy = rng.multinomial([vj, vi], Y.probs) @ Y.values
    return int(sx[0] + sy[0]), int(sx[1] + sy[1])


def simulate(ens: Ensemble, model: ModelSpec, t_end: float) -> Ensemble:
    """Event-driven evolution up to ``t_end``.

    Pair events arrive at total rate ``N/2`` so that every agent interacts at
    unit rate; each event picks an unordered pair uniformly and updates both
    agents.  The input ensemble is not modified.
    """
    if t_end < ens.time:
        raise DomainError(f"t_end={t_end} is before the ensemble time {ens.time}")
    out = ens.copy()
    rng, vals, N = out.rng, out.values, out.N
    X, Y = model.lawX, model.lawY
    px, py, xv, yv = X.probs, Y.probs, X.values, Y.values
    t = out.time
    scale = 2.0 / N
    while True:
        gaps = rng.exponential(scale, _CHUNK)
        first = rng.integers(0, N, _CHUNK)
        second = rng.integers(0, N - 1, _CHUNK)
        second += second >= first
        times = t + np.cumsum(gaps)
        n_ev = int(np.searchsorted(times, t_end, side="right"))
        for i, j in zip(first[:n_ev].tolist(), second[:n_ev].tolist()):
            vi, vj = vals[i], vals[j]
            if vi == 0 and vj == 0:
                continue
            sx = rng.multinomial([vi, vj], px) @ xv
            sy = rng.multinomial([vj, vi], py) @ yv
            vals[i] = sx[0] + sy[0]
            vals[j] = sx[1] + sy[1]
        if n_ev < _CHUNK:
            break
        t = times[-1]
    out.time = float(t_end)
    return out


def empirical_density(ens: Ensemble, K: int) -> DiscreteDensity:
    counts = np.bincount(np.minimum(ens.values, K + 1), minlength=K + 2)
    return DiscreteDensity(counts[: K + 1] / ens.N, counts[K + 1] / ens.N)


@dataclass(frozen=True)
class LeaCoulsonSpec:
    """Mutation rate ``mu``, normal-cell growth ``beta1``, mutant birth rate ``beta2``."""

    mu: float
    beta1: float
    beta2: float
    t_end: float

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidParams("mu must be positive")
        if not self.beta2 > 0:
            raise InvalidParams("beta2 must be positive")
        if not self.t_end > 0:
            raise InvalidParams("t_end must be positive")

    @classmethod
    def from_kinetic(cls, p: float, q: float, b1: float, b2: float, m0: float, t_end: float):
        """Coefficients induced by the grazing limit of the clonal mutation model."""
        return cls(mu=b2 * q * m0, beta1=p * b1 + q * b2, beta2=b1 * p, t_end=t_end)

    def mutation_intensity(self, t: float | None = None) -> float:
        """``int_0^t mu exp(beta1 s) ds``."""
        t = self.t_end if t is None else t
        if self.beta1 == 0:
            return self.mu * t
        return self.mu * math.expm1(self.beta1 * t) / self.beta1

    def expected_mutants(self, t: float | None = None) -> float:
        """``int_0^t mu exp(beta1 s + beta2 (t - s)) ds``."""
        t = self.t_end if t is None else t
        d = self.beta1 - self.beta2
        if abs(d) * t < 1e-12:
            return self.mu * t * math.exp(self.beta2 * t)
        return self.mu * math.exp(self.beta2 * t) * math.expm1(d * t) / d


def lea_coulson_sample(spec: LeaCoulsonSpec, rng: np.random.Generator, size: int | None = None):
    """Number of mutants at ``spec.t_end``.

    Mutations form a Poisson process with intensity ``mu exp(beta1 s)``; a
    clone founded at ``tau`` has the Yule marginal at age ``t - tau``, which is
    geometric on ``{1, 2, ...}`` with success probability ``exp(-beta2 (t - tau))``.
    """
    n = 1 if size is None else int(size)
    t = spec.t_end
    m = rng.poisson(spec.mutation_intensity(), n)
    total = int(m.sum())
    u = rng.random(total)
    if spec.beta1 == 0:
        tau = u * t
    else:
        tau = np.log1p(u * math.expm1(spec.beta1 * t)) / spec.beta1
    clones = rng.geometric(np.exp(-spec.beta2 * (t - tau)))
    owner = np.repeat(np.arange(n), m)
    w = np.bincount(owner, weights=clones, minlength=n).astype(np.int64)
    return int(w[0]) if size is None else w
