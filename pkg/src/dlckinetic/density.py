"""Truncated densities on ``{0..K}`` and the gain collision operator.

A :class:`DiscreteDensity` stores the probabilities of ``0..K`` plus the mass
known to sit beyond ``K``.  That tail is never silently renormalized away;
every operation that truncates adds what it dropped to ``tail_mass``.
"""
from __future__ import annotations

import enum
import io
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .errors import DomainError, MismatchedTruncation, TruncationTooSmall
from .laws import OffspringLaw, moment as law_moment

MASS_TOL = 1e-9
TAIL_WARN = 1e-6


class TruncationWarning(UserWarning):
    """Moments of a density with non-negligible tail are lower bounds."""


@dataclass(frozen=True, eq=False)
class DiscreteDensity:
    probs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DomainError("probs must be a non-empty vector")
        if np.any(p < -1e-15) or self.tail_mass < -1e-15:
            raise DomainError("densities must be non-negative")
        total = math.fsum(p) + self.tail_mass
        if abs(total - 1.0) > MASS_TOL:
            raise DomainError(f"density mass {total!r} is not 1")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "tail_mass", max(0.0, float(self.tail_mass)))

    @property
    def K(self) -> int:
        return self.probs.size - 1

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.probs.size, dtype=float)

    def _check_tail(self):
        if self.tail_mass > TAIL_WARN:
            warnings.warn(
                f"tail mass {self.tail_mass:.3g} beyond K={self.K}; moments are lower bounds",
                TruncationWarning,
                stacklevel=3,
            )

    def moment(self, r: float) -> float:
        self._check_tail()
        v = self.support
        return float(np.dot(self.probs, np.where(v > 0, v, 0.0) ** r))

    @property
    def mean(self) -> float:
        self._check_tail()
        return float(np.dot(self.probs, self.support))

    @property
    def variance(self) -> float:
        # centred sum avoids cancellation between M2 and M1^2
        m = self.mean
        return float(np.dot(self.probs, (self.support - m) ** 2))

    def pgf(self, z):
        """Probability generating function of the represented part of the density."""
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for p in self.probs[::-1]:
            out = out * z + p
        return out if out.ndim else float(out)

    def laplace(self, xi):
        return self.pgf(np.exp(-np.asarray(xi, dtype=float)))

    def resized(self, K: int) -> "DiscreteDensity":
        """Same density on ``0..K``; mass beyond a smaller ``K`` moves to the tail."""
        if K >= self.K:
            return DiscreteDensity(np.pad(self.probs, (0, K - self.K)), self.tail_mass)
        cut = self.probs[K + 1:]
        return DiscreteDensity(self.probs[: K + 1].copy(), self.tail_mass + math.fsum(cut))

    def to_csv(self, header: str = "") -> str:
        buf = io.StringIO()
        if header:
            buf.write(header)
        buf.write("v,prob\n")
        for v, p in enumerate(self.probs):
            buf.write(f"{v},{p:.17g}\n")
        buf.write(f"tail,{self.tail_mass:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DiscreteDensity":
        probs, tail = {}, 0.0
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#") or line == "v,prob":
                continue
            key, val = line.split(",")
            if key == "tail":
                tail = float(val)
            else:
                probs[int(key)] = float(val)
        arr = np.zeros(max(probs) + 1)
        for k, p in probs.items():
            arr[k] = p
        return cls(arr, tail)

    @classmethod
    def from_array(cls, probs, tail_mass: float | None = None) -> "DiscreteDensity":
        """Wrap a raw probability vector, inferring the tail from the missing mass."""
        probs = np.asarray(probs, dtype=float)
        if tail_mass is None:
            tail_mass = max(0.0, 1.0 - math.fsum(probs))
        return cls(probs, tail_mass)


class Regime(enum.Enum):
    CONSERVED = "ConservedMean"
    GROWING = "GrowingMean"
    SHRINKING = "ShrinkingMean"


@dataclass(frozen=True)
class ModelSpec:
    """Pair of offspring laws defining the interaction."""

    lawX: OffspringLaw
    lawY: OffspringLaw

    def delta(self, r: float) -> float:
        if not r >= 1:
            raise DomainError("r must be >= 1")
        return self.lawX.mean ** r + self.lawY.mean ** r

    def alpha(self, r: float) -> float:
        return self.delta(r) - 1.0

    @property
    def alpha1(self) -> float:
        return self.lawX.mean + self.lawY.mean - 1.0

    @property
    def regime(self) -> Regime:
        a = self.alpha1
        if abs(a) <= 1e-12:
            return Regime.CONSERVED
        return Regime.GROWING if a > 0 else Regime.SHRINKING

    @property
    def beta(self) -> float:
        """``Var(X) + Var(Y)``."""
        return self.lawX.variance + self.lawY.variance

    @property
    def gamma(self) -> float:
        """``E[X] E[Y]``."""
        return self.lawX.mean * self.lawY.mean

    def rmoment_sum(self, r: float) -> float:
        """``E[X^r] + E[Y^r]``."""
        return law_moment(self.lawX, r) + law_moment(self.lawY, r)


def from_pointmass(m0: int, K: int) -> DiscreteDensity:
    if m0 < 0 or int(m0) != m0:
        raise DomainError(f"point mass location must be a non-negative integer, got {m0}")
    if m0 > K:
        raise TruncationTooSmall(f"point mass at {m0} does not fit in 0..{K}")
    p = np.zeros(K + 1)
    p[int(m0)] = 1.0
    return DiscreteDensity(p, 0.0)


def from_poisson(m0: float, K: int) -> DiscreteDensity:
    if not m0 > 0:
        raise DomainError(f"Poisson mean must be positive, got {m0}")
    v = np.arange(K + 1)
    return DiscreteDensity(stats.poisson.pmf(v, m0), float(stats.poisson.sf(K, m0)))


@lru_cache(maxsize=64)
def _power_matrix(law: OffspringLaw, K: int) -> np.ndarray:
    """Row ``v`` holds the pmf of ``X_1 + ... + X_v`` truncated to ``0..K``."""
    pm = law.pmf_vector()[: K + 1]
    P = np.zeros((K + 1, K + 1))
    row = np.zeros(K + 1)
    row[0] = 1.0
    P[0] = row
    for v in range(1, K + 1):
        row = np.convolve(row, pm)[: K + 1]
        P[v] = row
    P.setflags(write=False)
    return P


def compound_array(base: np.ndarray, law: OffspringLaw, K: int) -> np.ndarray:
    """Represented part of the compound law for a raw weight vector ``base``."""
    n = min(base.size, K + 1)
    return base[:n] @ _power_matrix(law, K)[:n]


def compound(base: DiscreteDensity, law: OffspringLaw, K: int | None = None) -> DiscreteDensity:
    """Law of ``X_1 + ... + X_V`` with ``V ~ base`` and iid ``X_k ~ law``.

    Mass that would land beyond ``K`` (and any mass of ``base`` beyond its own
    truncation) is reported in ``tail_mass``.
    """
    K = base.K if K is None else K
    b = base.probs
    out = compound_array(b, law, K)
    dropped = math.fsum(b[K + 1:]) if b.size > K + 1 else 0.0
    tail = base.tail_mass + dropped + max(0.0, math.fsum(b[: K + 1]) - math.fsum(out))
    return DiscreteDensity(out, tail)


def qplus_array(f: np.ndarray, g: np.ndarray, model: ModelSpec, K: int) -> np.ndarray:
    """Gain operator on raw vectors: ``f`` counts the ``Y`` sum, ``g`` the ``X`` sum."""
    a = compound_array(f, model.lawY, K)
    b = compound_array(g, model.lawX, K)
    return np.convolve(a, b)[: K + 1]


def qplus(f: DiscreteDensity, g: DiscreteDensity, model: ModelSpec) -> DiscreteDensity:
    """Gain collision operator ``Q+(f, g)``.

    The result is the law of ``sum_{i<=V1} Y_i + sum_{i<=V2} X_i`` with
    ``V1 ~ f`` and ``V2 ~ g``.
    """
    if f.K != g.K:
        raise MismatchedTruncation(f"K differs: {f.K} vs {g.K}")
    out = qplus_array(f.probs, g.probs, model, f.K)
    return DiscreteDensity(out, max(0.0, 1.0 - math.fsum(out)))


def total_variation(f: DiscreteDensity, g: DiscreteDensity) -> float:
    """``1/2 sum |f - g|`` over the common support, tails counted as one extra cell."""
    K = max(f.K, g.K)
    a, b = f.resized(K), g.resized(K)
    return 0.5 * (float(np.abs(a.probs - b.probs).sum()) + abs(a.tail_mass - b.tail_mass))


def pgf_difference(f: DiscreteDensity, g: DiscreteDensity, z) -> np.ndarray:
    """``pgf_f(z) - pgf_g(z)`` evaluated without cancellation near ``z = 1``.

    Uses ``sum d_v z^v = c0 - c1 (1-z) + (1-z)^2 sum d_v w_v(z)`` with
    ``d = f - g``, ``c0 = sum d_v``, ``c1 = sum v d_v`` and
    ``w_v(z) = sum_{j<=v-2} (v-1-j) z^j``.
    """
    K = max(f.K, g.K)
    d = f.resized(K).probs - g.resized(K).probs
    z = np.atleast_1d(np.asarray(z, dtype=float))
    v = np.arange(K + 1, dtype=float)
    c0 = math.fsum(d)
    c1 = math.fsum(v * d)
    u = 1.0 - z
    # Horner on the w-weights: W(z) = sum_j z^j * sum_{v>=j+2} (v-1-j) d_v
    coef = np.zeros(max(K - 1, 1))
    for j in range(K - 1):
        coef[j] = np.dot(v[j + 2:] - 1 - j, d[j + 2:])
    W = np.zeros_like(z)
    for c in coef[::-1]:
        W = W * z + c
    return c0 - c1 * u + u * u * W
