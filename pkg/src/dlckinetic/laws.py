"""Finite-support offspring laws for the duplication/loss/copy interaction.

An interaction between agents carrying ``v_i`` and ``v_j`` objects replaces
each object by an independent number of copies kept (law ``X``) and sent to
the partner (law ``Y``).  This module builds and queries those laws.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Literal

import numpy as np

from .errors import (
    DomainError,
    EmptySupport,
    InvalidParams,
    InvalidProbability,
    MassNotOne,
    NegativeProbability,
)

MASS_TOL = 1e-9
MAX_SUPPORT = 64


@dataclass(frozen=True, eq=False)
class OffspringLaw:
    """Probability mass function on a finite set of non-negative integers.

    Use :func:`make_law` rather than the constructor; it validates and
    normalizes the entries.
    """

    values: np.ndarray
    probs: np.ndarray
    degenerate_ok: bool = False
    _raw: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self.values.setflags(write=False)
        self.probs.setflags(write=False)
        raw = tuple(float(np.dot(self.probs, self.values.astype(float) ** k)) for k in range(5))
        object.__setattr__(self, "_raw", raw)

    @property
    def mean(self) -> float:
        return self._raw[1]

    def raw_moment(self, k: int) -> float:
        """Cached integer raw moment ``E[X^k]`` for ``k <= 4``."""
        return self._raw[k]

    @property
    def variance(self) -> float:
        return self._raw[2] - self._raw[1] ** 2

    @property
    def max_value(self) -> int:
        return int(self.values[-1])

    def pmf_vector(self) -> np.ndarray:
        """Dense pmf on ``0..max_value``."""
        out = np.zeros(self.max_value + 1)
        out[self.values] = self.probs
        return out

    def survival(self) -> np.ndarray:
        """``P(X > m)`` for ``m = 0..max_value-1``."""
        return 1.0 - np.cumsum(self.pmf_vector())[:-1]

    def pgf(self, z):
        return pgf_eval(self, z)

    def phi(self, z):
        """``sum_m z^m P(X > m)``, i.e. ``(1 - pgf(z)) / (1 - z)`` without cancellation."""
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        for c in self.survival()[::-1]:
            out = out * z + c
        return out

    def sample_sums(self, rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        """Draw ``sum_{k<=n} X_k`` for every ``n`` in ``counts``."""
        counts = np.asarray(counts, dtype=np.int64)
        draws = rng.multinomial(counts, self.probs)
        return draws @ self.values

    def __eq__(self, other):
        if not isinstance(other, OffspringLaw):
            return NotImplemented
        return (
            self.values.shape == other.values.shape
            and bool(np.all(self.values == other.values))
            and bool(np.allclose(self.probs, other.probs, rtol=0, atol=1e-12))
        )

    def __hash__(self):
        return hash((tuple(self.values.tolist()), tuple(np.round(self.probs, 12).tolist())))

    def to_entries(self) -> list[list]:
        return [[int(v), float(p)] for v, p in zip(self.values, self.probs)]


def make_law(entries: Iterable, degenerate_ok: bool = False) -> OffspringLaw:
    """Build an :class:`OffspringLaw` from ``(value, probability)`` pairs.

    Duplicate values are merged and zero-probability entries dropped.  A total
    mass within ``1e-9`` of one is renormalized; anything further off raises
    :class:`MassNotOne`.  The point mass at zero is rejected unless
    ``degenerate_ok`` is set, since it makes the interaction trivial.
    """
    entries = [(v, p) for v, p in entries]
    if not entries:
        raise EmptySupport("offspring law needs at least one entry")
    acc: dict[int, float] = {}
    for v, p in entries:
        if isinstance(v, float) and not float(v).is_integer():
            raise DomainError(f"support value {v!r} is not an integer")
        v = int(v)
        p = float(p)
        if v < 0:
            raise DomainError(f"support value {v} is negative")
        if not math.isfinite(p):
            raise InvalidProbability(f"probability {p!r} is not finite")
        if p < 0:
            raise NegativeProbability(f"probability {p} for value {v} is negative")
        acc[v] = acc.get(v, 0.0) + p
    total = math.fsum(acc.values())
    if abs(total - 1.0) > MASS_TOL:
        raise MassNotOne(f"probabilities sum to {total!r}, expected 1")
    items = sorted((v, p) for v, p in acc.items() if p > 0)
    if len(items) > MAX_SUPPORT:
        raise DomainError(f"support has {len(items)} values, at most {MAX_SUPPORT} allowed")
    values = np.array([v for v, _ in items], dtype=np.int64)
    probs = np.array([p for _, p in items], dtype=float)
    probs = probs / math.fsum(probs)
    if values.tolist() == [0] and not degenerate_ok:
        raise InvalidParams("the point mass at 0 is excluded; pass degenerate_ok=True to allow it")
    return OffspringLaw(values, probs, degenerate_ok)


def point_mass(v: int) -> OffspringLaw:
    return make_law([(v, 1.0)], degenerate_ok=True)


def pgf_eval(law: OffspringLaw, z):
    """Probability generating function ``E[z^X]`` for ``z`` in ``[0, 1]``."""
    za = np.asarray(z, dtype=float)
    if np.any(za < 0) or np.any(za > 1) or np.any(np.isnan(za)):
        raise DomainError("pgf argument must lie in [0, 1]")
    out = np.zeros_like(za)
    for p in law.pmf_vector()[::-1]:
        out = out * za + p
    return float(out) if np.ndim(z) == 0 else out


def cumulant(law: OffspringLaw, xi):
    """Cumulant ``log E[exp(-xi X)]`` for ``xi > 0``."""
    xa = np.asarray(xi, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError("cumulant argument must be positive")
    # log-sum-exp over the support keeps large xi finite
    expo = -np.multiply.outer(xa, law.values.astype(float)) + np.log(law.probs)
    top = expo.max(axis=-1)
    out = top + np.log(np.exp(expo - top[..., None]).sum(axis=-1))
    return float(out) if np.ndim(xi) == 0 else out


def moment(law: OffspringLaw, r: float) -> float:
    """Raw moment ``E[X^r]`` for real ``r >= 1`` (exact on a finite support)."""
    if not r >= 1:
        raise DomainError(f"moment order must be >= 1, got {r}")
    v = law.values.astype(float)
    return float(np.dot(law.probs, np.where(v > 0, v, 0.0) ** r))


@dataclass(frozen=True)
class GrazingSpec:
    """Quasi-invariant scaling of an interaction.

    With probability ``b1*epsilon`` an object is replaced by ``tildeX`` copies
    (otherwise it is kept), and with probability ``b2*epsilon`` it sends
    ``tildeY`` copies (otherwise none).
    """

    tildeX: OffspringLaw
    tildeY: OffspringLaw
    b1: float
    b2: float
    m0: float
    epsilon: float = 1.0
    alpha_bar: float = field(init=False)

    def __post_init__(self):
        for name in ("b1", "b2", "m0"):
            if not getattr(self, name) > 0:
                raise InvalidParams(f"{name} must be positive")
        eps = self.epsilon
        if not eps > 0 or self.b1 * eps > 1 + 1e-12 or self.b2 * eps > 1 + 1e-12:
            raise InvalidParams(
                f"epsilon={eps} must be in (0, min(1/b1, 1/b2)] with b1={self.b1}, b2={self.b2}"
            )
        object.__setattr__(
            self, "alpha_bar", self.b1 * (self.tildeX.mean - 1.0) + self.b2 * self.tildeY.mean
        )

    def with_epsilon(self, epsilon: float) -> "GrazingSpec":
        return GrazingSpec(self.tildeX, self.tildeY, self.b1, self.b2, self.m0, epsilon)

    def drift(self, z):
        """``b1 (pgf_tildeX(z) - z)``, the transport speed of the limit equation."""
        z = np.asarray(z, dtype=float)
        return self.b1 * (1.0 - z) * (1.0 - self.tildeX.phi(z))

    def source(self, z):
        """``b2 (pgf_tildeY(z) - 1)``, to be multiplied by the current mean."""
        z = np.asarray(z, dtype=float)
        return -self.b2 * (1.0 - z) * self.tildeY.phi(z)


def graze(spec: GrazingSpec, which: Literal["X", "Y"]) -> OffspringLaw:
    """Law of ``X`` (or ``Y``) at the ``epsilon`` stored in ``spec``."""
    if which == "X":
        w = spec.b1 * spec.epsilon
        mix = {1: 1.0 - w}
        base = spec.tildeX
    elif which == "Y":
        w = spec.b2 * spec.epsilon
        mix = {0: 1.0 - w}
        base = spec.tildeY
    else:
        raise DomainError(f"which must be 'X' or 'Y', got {which!r}")
    for v, p in zip(base.values, base.probs):
        mix[int(v)] = mix.get(int(v), 0.0) + w * p
    return make_law(list(mix.items()), degenerate_ok=True)


def _check_prob(name, p):
    if not (0.0 <= p <= 1.0) or not math.isfinite(p):
        raise InvalidProbability(f"{name}={p} is not a probability")


def hgt_case1(p_l: float, p_d: float, p_h: float):
    """Gene loss/duplication/transfer laws.

    Returns ``(X, Y, conserving)`` where ``conserving`` tells whether
    ``p_d + p_h == p_l`` so the mean family size is preserved.
    """
    for name, p in (("p_l", p_l), ("p_d", p_d), ("p_h", p_h)):
        _check_prob(name, p)
    if p_l + p_d > 1 + 1e-12:
        raise InvalidProbability(f"p_l + p_d = {p_l + p_d} exceeds 1")
    X = make_law([(0, p_l), (1, max(0.0, 1 - p_l - p_d)), (2, p_d)], degenerate_ok=True)
    Y = make_law([(0, 1 - p_h), (1, p_h)], degenerate_ok=True)
    return X, Y, abs(p_d + p_h - p_l) <= 1e-12


def mutation_case2(p: float, q: float):
    """Clonal mutation laws: a clone stays with probability ``p``, migrates with ``q``."""
    _check_prob("p", p)
    _check_prob("q", q)
    X = make_law([(1, 1 - p), (2, p)], degenerate_ok=True)
    Y = make_law([(0, 1 - q), (1, q)], degenerate_ok=True)
    return X, Y
