"""Analytic steady states of the gene-transfer model and of the grazing limit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, stats

from .density import DiscreteDensity
from .errors import (
    InvalidParams,
    NotBalanced,
    SingularDenominator,
    TruncationTooSmall,
    ZeroMean,
)
from .laws import GrazingSpec, make_law

PARAM_TOL = 1e-12
TAIL_LIMIT = 1e-6
DEFAULT_ZGRID = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class HgtParams:
    """``P(tildeX = k) = p_k`` and ``P(tildeY = k) = q_k`` for ``k = 0, 1, 2``."""

    p0: float
    p1: float
    p2: float
    q0: float
    q1: float
    q2: float
    m0: float

    def __post_init__(self):
        ps = (self.p0, self.p1, self.p2)
        qs = (self.q0, self.q1, self.q2)
        if any(not (0 <= x <= 1) for x in ps + qs):
            raise InvalidParams("p_k and q_k must be probabilities")
        if abs(sum(ps) - 1) > PARAM_TOL or abs(sum(qs) - 1) > PARAM_TOL:
            raise InvalidParams("p_k and q_k must each sum to 1")
        if abs(self.p1 + self.q1 + 2 * (self.p2 + self.q2) - 1) > PARAM_TOL:
            raise InvalidParams("unbalanced: need p1 + q1 + 2(p2 + q2) = 1")
        if not self.m0 > 0:
            raise InvalidParams("m0 must be positive")
        if self.p2 > 0 and not self.p2 < self.p0:
            raise InvalidParams("need p2 < p0")
        if self.p0 <= 0:
            raise InvalidParams("need p0 > 0")

    @classmethod
    def from_rates(cls, p_l: float, p_d: float, p_h: float, m0: float) -> "HgtParams":
        """Loss, duplication and transfer probabilities; balance means ``p_l = p_d + p_h``."""
        return cls(p_l, 1 - p_l - p_d, p_d, 1 - p_h, p_h, 0.0, m0)

    @classmethod
    def from_dict(cls, d: dict) -> "HgtParams":
        q0 = d.get("q0", 1 - d.get("q1", 0) - d.get("q2", 0))
        p1 = d.get("p1", 1 - d["p0"] - d.get("p2", 0))
        return cls(d["p0"], p1, d.get("p2", 0.0), q0, d.get("q1", 0.0), d.get("q2", 0.0), d["m0"])

    def grazing_spec(self, b1: float = 1.0, b2: float = 1.0) -> GrazingSpec:
        tx = make_law([(0, self.p0), (1, self.p1), (2, self.p2)], degenerate_ok=True)
        ty = make_law([(0, self.q0), (1, self.q1), (2, self.q2)], degenerate_ok=True)
        return GrazingSpec(tx, ty, b1, b2, self.m0)

    @property
    def negbin(self) -> tuple[float, float]:
        """``(r, p)`` of the negative binomial factor (requires ``p2 > 0``)."""
        p = self.p2 / self.p0
        r = self.m0 * ((self.q1 + self.q2) * self.p2 + self.p0 * self.q2) / self.p2 ** 2
        return r, p

    @property
    def poisson_part(self) -> float:
        return self.m0 * self.q2 / self.p2

    @property
    def compound_rate(self) -> float:
        """Poisson rate of the compound representation when ``p2 = 0``."""
        return self.m0 * (2 * self.q1 + 3 * self.q2) / (2 * self.p0)

    @property
    def q2_star(self) -> float:
        return self.q2 / (2 * self.q1 + 3 * self.q2)


def hgt_steady_pgf(params: HgtParams, z):
    """Closed-form p.g.f. of the steady state."""
    z = np.asarray(z, dtype=float)
    m0 = params.m0
    if params.p2 > 0:
        r, p = params.negbin
        # the linear term enters with a minus sign: the factor is the reciprocal
        # of a Poisson p.g.f., not a Poisson p.g.f.
        out = np.exp(-params.poisson_part * (z - 1) + r * (np.log1p(-p) - np.log1p(-p * z)))
    elif params.q2 > 0:
        lam, s = params.compound_rate, params.q2_star
        out = np.exp(lam * ((1 - s) * z + s * z * z - 1))
    else:
        out = np.exp(m0 * (z - 1))
    return float(out) if out.ndim == 0 else out


def _infinitely_divisible(g0: float, jlam: np.ndarray, K: int) -> np.ndarray:
    """Density with p.g.f. ``g0 exp(sum_j lam_j z^j)`` from ``jlam[j] = j lam_j``.

    Uses ``k g_k = sum_j j lam_j g_{k-j}``, exact for any non-negative ``lam``.
    """
    g = np.zeros(K + 1)
    g[0] = g0
    for k in range(1, K + 1):
        m = min(k, jlam.size - 1)
        g[k] = np.dot(jlam[1:m + 1], g[k - 1::-1][:m]) / k
    return g


def hgt_steady_density(params: HgtParams, K: int) -> DiscreteDensity:
    """Exact steady density on ``0..K``."""
    v = np.arange(K + 1)
    if params.p2 > 0:
        r, p = params.negbin
        if params.q2 == 0:
            # scipy's nbinom counts failures with success probability 1 - p
            probs = stats.nbinom.pmf(v, r, 1 - p)
        else:
            # log pgf = const + (r p - poisson_part) z + sum_{j>=2} r p^j z^j / j
            jlam = r * p ** v.astype(float)
            jlam[0] = 0.0
            jlam[1] -= params.poisson_part
            probs = _infinitely_divisible(float(hgt_steady_pgf(params, 0.0)), jlam, K)
    elif params.q2 > 0:
        s = params.q2_star
        lam = params.compound_rate
        probs = _infinitely_divisible(math.exp(-lam), np.array([0.0, lam * (1 - s), 2 * lam * s]), K)
    else:
        probs = stats.poisson.pmf(v, params.m0)
    tail = max(0.0, 1.0 - math.fsum(probs))
    if tail > TAIL_LIMIT:
        raise TruncationTooSmall(f"K={K} leaves {tail:.3g} of the steady mass in the tail")
    return DiscreteDensity(probs, tail)


def _check_balanced(gspec: GrazingSpec):
    if abs(gspec.alpha_bar) > 1e-12:
        raise NotBalanced(f"steady state needs alpha_bar = 0, got {gspec.alpha_bar:.3g}")
    s = np.linspace(0.0, 1.0, 1001)
    den = 1.0 - gspec.tildeX.phi(s)
    if np.any(den <= 0):
        raise SingularDenominator("pgf_tildeX(s) = s has a root below 1")


def _rate_function(gspec: GrazingSpec, s):
    # (1 - pgf_Y(s)) / (pgf_X(s) - s) with the common factor (1 - s) removed
    return gspec.b2 / gspec.b1 * gspec.tildeY.phi(s) / (1.0 - gspec.tildeX.phi(s))


def grazing_steady_pgf(gspec: GrazingSpec, z):
    """Steady p.g.f. ``exp(-m0 int_z^1 R(s) ds)`` of the balanced grazing equation.

    The integrand is written as ``phi_Y / (1 - phi_X)`` so that the removable
    0/0 at ``s = 1`` never has to be evaluated.
    """
    _check_balanced(gspec)
    za = np.atleast_1d(np.asarray(z, dtype=float))
    f = lambda s: float(_rate_function(gspec, s))
    out = np.empty_like(za)
    for i, zi in enumerate(za):
        if zi >= 1.0:
            out[i] = 1.0
            continue
        val, _ = integrate.quad(f, zi, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
        out[i] = math.exp(-gspec.m0 * val)
    return float(out[0]) if np.ndim(z) == 0 else out


def size_biased_check(density: DiscreteDensity, gspec: GrazingSpec, zgrid=DEFAULT_ZGRID) -> float:
    """Sup-norm residual of ``z R(z) g(z) = g*(z)`` on ``zgrid``.

    ``g*`` is the size-biased law ``k g(k) / M1(g)``.  Only steady states of
    the grazing equation make the residual vanish.
    """
    m = float(np.dot(density.probs, density.support))
    if not m > 0:
        raise ZeroMean("size-biasing needs a positive mean")
    z = np.asarray(zgrid, dtype=float)
    lhs = z * _rate_function(gspec, z) * density.pgf(z)
    biased = DiscreteDensity.from_array(density.support * density.probs / m)
    return float(np.max(np.abs(lhs - biased.pgf(z))))
