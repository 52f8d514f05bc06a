"""The quasi-invariant limit equation solved along characteristics.

The limit p.g.f. satisfies ``d_t g = D(z) d_z g + S(t, z) g``.  Along a
backward characteristic ``zeta`` with ``zeta(t) = z`` and ``zeta' = -D(zeta)``
the solution is ``g0(zeta(0)) exp(int_0^t S(s, zeta(s)) ds)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boltzmann import integrate
from .density import DiscreteDensity, ModelSpec
from .ensemble import LeaCoulsonSpec
from .errors import CharacteristicEscape, DomainError, InvalidParams
from .laws import GrazingSpec, graze

ESCAPE_TOL = 1e-9
DEFAULT_STEP = 1e-3
DEFAULT_ZGRID = np.linspace(0.0, 1.0, 101)
MAX_RESCALED_TIME = 1e3


@dataclass
class CharacteristicSolution:
    """``ghat[i, j]`` is the limit p.g.f. at ``times[i]`` and ``zgrid[j]``."""

    zgrid: np.ndarray
    times: list
    ghat: np.ndarray
    gspec: GrazingSpec | None = None
    feet: np.ndarray = field(default=None, repr=False)
    log_factor: np.ndarray = field(default=None, repr=False)

    def at(self, t: float) -> np.ndarray:
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-12:
            raise DomainError(f"time {t} was not computed")
        return self.ghat[i]

    def to_csv(self, header: str = "") -> str:
        lines = [header + "t,z,ghat"] if header else ["t,z,ghat"]
        for t, row in zip(self.times, self.ghat):
            lines.extend(f"{t:.17g},{z:.17g},{g:.17g}" for z, g in zip(self.zgrid, row))
        return "\n".join(lines) + "\n"


def _clamp(zeta: np.ndarray) -> np.ndarray:
    lo, hi = zeta.min(), zeta.max()
    if lo < -ESCAPE_TOL or hi > 1 + ESCAPE_TOL:
        raise CharacteristicEscape(f"characteristic left [0, 1]: range [{lo:.3g}, {hi:.3g}]")
    return np.clip(zeta, 0.0, 1.0)


def characteristics(drift: Callable, source: Callable, t: float, zgrid, step: float = DEFAULT_STEP):
    """Follow every characteristic ending at ``(t, z)`` back to time 0.

    ``drift(z)`` is ``D``; ``source(s, z)`` is ``S``.  Returns the feet
    ``zeta(0)`` and ``int_0^t S(s, zeta(s)) ds``, both by classical RK4 in the
    backward time ``sigma = t - s``.
    """
    zeta = np.asarray(zgrid, dtype=float).copy()
    acc = np.zeros_like(zeta)
    if t == 0:
        return zeta, acc
    n = max(1, math.ceil(t / step - 1e-9))
    h = t / n
    for k in range(n):
        sig = k * h
        # d zeta / d sigma = D(zeta), d acc / d sigma = S(t - sigma, zeta)
        k1z = drift(zeta)
        k1a = source(t - sig, zeta)
        z2 = _clamp(zeta + 0.5 * h * k1z)
        k2z = drift(z2)
        k2a = source(t - sig - 0.5 * h, z2)
        z3 = _clamp(zeta + 0.5 * h * k2z)
        k3z = drift(z3)
        k3a = source(t - sig - 0.5 * h, z3)
        z4 = _clamp(zeta + h * k3z)
        k4z = drift(z4)
        k4a = source(t - sig - h, z4)
        zeta = _clamp(zeta + h / 6 * (k1z + 2 * k2z + 2 * k3z + k4z))
        acc = acc + h / 6 * (k1a + 2 * k2a + 2 * k3a + k4a)
    return zeta, acc


def _as_pgf(f0hat) -> Callable:
    if isinstance(f0hat, DiscreteDensity):
        return f0hat.pgf
    if f0hat is None:
        return lambda z: np.ones_like(np.asarray(z, dtype=float))
    return f0hat


def _solve(drift, source, f0hat, times, zgrid, step, gspec=None) -> CharacteristicSolution:
    z = np.asarray(zgrid, dtype=float)
    if np.any(z < 0) or np.any(z > 1):
        raise DomainError("zgrid must lie in [0, 1]")
    g0 = _as_pgf(f0hat)
    rows, feet, logs = [], [], []
    for t in times:
        if t < 0:
            raise DomainError("times must be non-negative")
        foot, acc = characteristics(drift, source, t, z, step)
        rows.append(np.asarray(g0(foot), dtype=float) * np.exp(acc))
        feet.append(foot)
        logs.append(acc)
    return CharacteristicSolution(z, list(times), np.array(rows), gspec, np.array(feet), np.array(logs))


def grazing_evolve(gspec: GrazingSpec, f0hat, t_end: float, zgrid=DEFAULT_ZGRID,
                   ode_step: float = DEFAULT_STEP, times=None) -> CharacteristicSolution:
    """Solve the limit equation of ``gspec`` (its ``epsilon`` is ignored).

    ``f0hat`` is a p.g.f. callable or a :class:`DiscreteDensity`.  The
    solution is reported at ``times`` (default ``[0, t_end]``).
    """
    if not t_end > 0:
        raise DomainError("t_end must be positive")
    times = [0.0, t_end] if times is None else list(times)
    ab, m0 = gspec.alpha_bar, gspec.m0
    source = lambda s, z: m0 * math.exp(ab * s) * gspec.source(z)
    return _solve(gspec.drift, source, f0hat, times, zgrid, ode_step, gspec)


def grazed_model(gspec: GrazingSpec, epsilon: float) -> ModelSpec:
    g = gspec.with_epsilon(epsilon)
    return ModelSpec(graze(g, "X"), graze(g, "Y"))


def epsilon_sweep(gspec: GrazingSpec, f0: DiscreteDensity, t: float, eps_list,
                  zgrid=DEFAULT_ZGRID, dt: float = 0.02, ode_step: float = DEFAULT_STEP):
    """Distance between the rescaled kinetic solution and the limit.

    For each ``epsilon`` the kinetic equation with grazed laws is integrated
    up to ``t / epsilon`` and ``sup_z |f_hat - g_hat(t)|`` is reported.
    Returns a list of ``(epsilon, sup_error)``.
    """
    for eps in eps_list:
        if t / eps > MAX_RESCALED_TIME:
            raise InvalidParams(f"t/epsilon = {t / eps:.3g} exceeds the cap {MAX_RESCALED_TIME:g}")
    z = np.asarray(zgrid, dtype=float)
    limit = grazing_evolve(gspec, f0, t, z, ode_step).at(t)
    out = []
    for eps in eps_list:
        model = grazed_model(gspec, eps)
        traj = integrate(f0, model, t / eps, dt, save_every=10 ** 9)
        out.append((float(eps), float(np.max(np.abs(traj.final.pgf(z) - limit)))))
    return out


def sweep_csv(rows, header: str = "") -> str:
    return header + "epsilon,sup_error\n" + "".join(f"{e:.17g},{v:.17g}\n" for e, v in rows)


def lea_coulson_pgf(spec: LeaCoulsonSpec, t: float | None = None, zgrid=DEFAULT_ZGRID,
                    f0hat=None, ode_step: float = DEFAULT_STEP) -> np.ndarray:
    """P.g.f. of the mutant count at time ``t`` (default ``spec.t_end``).

    Solves ``d_t g = (z - 1)(beta2 z d_z g + mu e^{beta1 t} g)`` starting from
    no mutants unless ``f0hat`` is given.
    """
    t = spec.t_end if t is None else t
    drift = lambda z: spec.beta2 * z * (z - 1.0)
    source = lambda s, z: spec.mu * math.exp(spec.beta1 * s) * (z - 1.0)
    return _solve(drift, source, f0hat, [t], zgrid, ode_step).ghat[0]


def slope_at_one(values_near_one: Callable[[np.ndarray], np.ndarray], h: float = 1e-4) -> float:
    """Second-order one-sided derivative at ``z = 1`` of a p.g.f. evaluator."""
    g = values_near_one(np.array([1.0, 1.0 - h, 1.0 - 2 * h]))
    return float((3 * g[0] - 4 * g[1] + g[2]) / (2 * h))


def grazing_mean(gspec: GrazingSpec, f0hat, t: float, h: float = 1e-4,
                 ode_step: float = DEFAULT_STEP) -> float:
    """Mean of the limit solution at ``t`` from the slope of its p.g.f. at 1."""
    return slope_at_one(lambda z: grazing_evolve(gspec, f0hat, t, z, ode_step).at(t), h)
