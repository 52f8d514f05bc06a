"""Deterministic solvers for the kinetic equation ``df/dt = Q+(f, f) - f``."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .density import (
    DiscreteDensity,
    ModelSpec,
    Regime,
    compound_array,
    qplus_array,
)
from .errors import DomainError, MaxIterExceeded, NotConservative, TailOverflow

TAIL_ABORT = 1e-6
CANONICAL_ZGRID = np.linspace(0.0, 1.0, 101)


@dataclass(frozen=True)
class WildExpansion:
    terms: list
    model: ModelSpec

    @property
    def N(self) -> int:
        return len(self.terms) - 1


@dataclass(frozen=True)
class WildSolution:
    """Partial Wild sum at time ``t``.

    ``probs`` is *not* renormalized; ``residual`` bounds the mass of the
    omitted terms and ``tail_mass`` the truncation loss of the kept ones.
    """

    probs: np.ndarray
    residual: float
    tail_mass: float
    t: float

    def to_density(self) -> DiscreteDensity:
        """Density whose tail collects both the series residual and truncation loss."""
        return DiscreteDensity(self.probs, self.residual + self.tail_mass)


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    model: ModelSpec | None = None

    def at(self, t: float, tol: float = 1e-9) -> DiscreteDensity:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > tol:
            raise DomainError(f"time {t} was not recorded (closest {self.times[i]})")
        return self.states[i]

    @property
    def final(self) -> DiscreteDensity:
        return self.states[-1]

    def summary_rows(self):
        for t, s in zip(self.times, self.states):
            yield t, s.mean, s.variance, s.tail_mass


def wild_terms(f0: DiscreteDensity, model: ModelSpec, N: int) -> WildExpansion:
    """Terms ``q_0..q_N`` of the Wild expansion.

    ``q_n = (1/n) sum_j Q+(q_j, q_{n-1-j})``.  The compound laws of each
    ``q_j`` are computed once and reused across all ``n``.
    """
    if N < 0:
        raise DomainError("N must be >= 0")
    K = f0.K
    q = [f0.probs.copy()]
    comp_y = [compound_array(q[0], model.lawY, K)]
    comp_x = [compound_array(q[0], model.lawX, K)]
    terms = [f0]
    for n in range(1, N + 1):
        acc = np.zeros(K + 1)
        for j in range(n):
            acc += np.convolve(comp_y[j], comp_x[n - 1 - j])[: K + 1]
        qn = acc / n
        q.append(qn)
        comp_y.append(compound_array(qn, model.lawY, K))
        comp_x.append(compound_array(qn, model.lawX, K))
        terms.append(DiscreteDensity.from_array(qn))
    return WildExpansion(terms, model)


def wild_weights(t: float, N: int) -> np.ndarray:
    """``exp(-t) (1 - exp(-t))^n`` for ``n = 0..N``, computed in log space."""
    if not t > 0:
        raise DomainError("t must be positive")
    n = np.arange(N + 1)
    return np.exp(-t + n * math.log(-math.expm1(-t)))


def wild_solution(f0: DiscreteDensity, model: ModelSpec, t: float, N: int,
                  expansion: WildExpansion | None = None) -> WildSolution:
    exp_ = expansion if expansion is not None else wild_terms(f0, model, N)
    if exp_.N < N:
        raise DomainError(f"expansion has {exp_.N} terms, {N} requested")
    w = wild_weights(t, N)
    probs = np.zeros(f0.K + 1)
    tail = 0.0
    for wn, qn in zip(w, exp_.terms[: N + 1]):
        probs += wn * qn.probs
        tail += wn * qn.tail_mass
    residual = math.exp((N + 1) * math.log(-math.expm1(-t)))
    return WildSolution(probs, residual, tail, t)


def _gain(f: np.ndarray, model: ModelSpec, K: int) -> np.ndarray:
    # Q+(f,f) has mass (sum f)^2; dividing by sum f leaves it unchanged for a
    # probability vector and keeps rounding drift in the mass from compounding.
    return qplus_array(f, f, model, K) / math.fsum(f)


def _rhs(f: np.ndarray, model: ModelSpec, K: int) -> np.ndarray:
    return _gain(f, model, K) - f


def integrate(f0: DiscreteDensity, model: ModelSpec, t_end: float, dt: float,
              save_every: int = 1) -> Trajectory:
    """Classical RK4 for the ``K+1`` dimensional system.

    The step is shrunk slightly if needed so that the last step lands on
    ``t_end`` exactly.  Raises :class:`TailOverflow` as soon as more than
    ``1e-6`` of the mass has left ``0..K``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if not t_end >= dt:
        raise DomainError("t_end must be >= dt")
    K = f0.K
    n_steps = max(1, math.ceil(t_end / dt - 1e-9))
    h = t_end / n_steps
    f = f0.probs.copy()
    traj = Trajectory([0.0], [f0], model)
    for step in range(1, n_steps + 1):
        k1 = _rhs(f, model, K)
        k2 = _rhs(f + 0.5 * h * k1, model, K)
        k3 = _rhs(f + 0.5 * h * k2, model, K)
        k4 = _rhs(f + h * k3, model, K)
        f = f + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tail = 1.0 - math.fsum(f)
        if tail - f0.tail_mass > TAIL_ABORT:
            raise TailOverflow(
                f"tail mass {tail:.3g} at t={step * h:.6g} exceeds {TAIL_ABORT}; increase K={K}"
            )
        if step % save_every == 0 or step == n_steps:
            clean = np.clip(f, 0.0, None)
            traj.times.append(step * h)
            traj.states.append(DiscreteDensity(clean, max(0.0, 1.0 - math.fsum(clean))))
    return traj


def fixed_point_iterates(f0: DiscreteDensity, model: ModelSpec):
    """Yield ``f_0, f_1, ...`` with ``f_{n+1} = Q+(f_n, f_n)``."""
    K = f0.K
    f = f0.probs.copy()
    yield f0
    while True:
        f = _gain(f, model, K)
        yield DiscreteDensity.from_array(f)


def fixed_point(f0: DiscreteDensity, model: ModelSpec, tol: float = 1e-12,
                max_iter: int = 10_000, zgrid=CANONICAL_ZGRID, full_output: bool = False):
    """Steady state of a mean-conserving model by iterating the gain operator.

    Stops when the sup over ``zgrid`` of successive p.g.f. differences drops
    below ``tol``.  With ``full_output`` returns ``(density, n_iter)``.
    """
    if model.regime is not Regime.CONSERVED:
        raise NotConservative(f"fixed point needs E[X]+E[Y]=1, got alpha_1={model.alpha1:.3g}")
    it = fixed_point_iterates(f0, model)
    prev = next(it)
    prev_hat = prev.pgf(zgrid)
    for n in range(1, max_iter + 1):
        cur = next(it)
        if cur.tail_mass > TAIL_ABORT:
            raise TailOverflow(f"tail mass {cur.tail_mass:.3g} after {n} iterations; increase K")
        cur_hat = cur.pgf(zgrid)
        if np.max(np.abs(cur_hat - prev_hat)) < tol:
            return (cur, n) if full_output else cur
        prev_hat = cur_hat
    raise MaxIterExceeded(f"no convergence to tol={tol} within {max_iter} iterations")
