"""Acceptance suite shared by ``dlckinetic verify`` and the test-suite.

Each check returns a :class:`Outcome`.  A check passes when its numerical
condition holds *and* it ran within its time budget.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import analytics as A
from .boltzmann import fixed_point, integrate, wild_solution
from .density import ModelSpec, from_pointmass, from_poisson, qplus, total_variation
from .ensemble import Ensemble, LeaCoulsonSpec, empirical_density, lea_coulson_sample, simulate
from .grazing import epsilon_sweep, grazing_evolve, grazing_mean, lea_coulson_pgf, slope_at_one
from .laws import hgt_case1, make_law, mutation_case2
from .scaling import moment_recursion, moment_recursion_means, smoothing_iterate
from .steady import (
    HgtParams,
    grazing_steady_pgf,
    hgt_steady_density,
    hgt_steady_pgf,
    size_biased_check,
)

MC_SEED = 20240601


@dataclass
class Outcome:
    number: int
    title: str
    ok: bool
    detail: str
    elapsed: float = 0.0
    budget: float = math.inf

    @property
    def passed(self) -> bool:
        return self.ok and self.elapsed <= self.budget

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        timing = f"{self.elapsed:.2f}s/{self.budget:g}s"
        return f"{tag} [{self.number:2d}] {self.title}: {self.detail} ({timing})"


def case1_model() -> ModelSpec:
    X, Y, _ = hgt_case1(0.3, 0.1, 0.2)
    return ModelSpec(X, Y)


def case2_model() -> ModelSpec:
    return ModelSpec(*mutation_case2(0.2, 0.1))


def hgt_params() -> HgtParams:
    return HgtParams(p0=0.3, p1=0.6, p2=0.1, q0=0.8, q1=0.2, q2=0.0, m0=5.0)


def c01():
    f = integrate(from_pointmass(5, 200), case1_model(), 5.0, 0.01, save_every=100).final
    err = abs(f.mean - 5.0)
    return err < 1e-8, f"|M1 - 5| = {err:.3g}"


def c02():
    f = integrate(from_pointmass(1, 200), case2_model(), 2.0, 0.01, save_every=100).final
    rel = abs(f.mean / math.exp(0.6) - 1)
    return rel < 1e-6, f"relative error {rel:.3g}"


def c03():
    f = fixed_point(from_pointmass(5, 200), case1_model())
    err = abs(f.variance - 8.125)
    return err < 1e-3, f"variance {f.variance:.10g}, error {err:.3g}"


def c04():
    traj = integrate(from_pointmass(5, 200), case1_model(), 2.0, 0.01, save_every=10)
    errs = [abs(traj.at(t).variance - 8.125 * -math.expm1(-0.32 * t)) for t in (0.5, 1.0, 2.0)]
    return max(errs) < 1e-5, "errors " + ", ".join(f"{e:.3g}" for e in errs)


def c05():
    model = ModelSpec(make_law([(0, 0.4), (1, 0.6)]), make_law([(0, 0.6), (1, 0.4)]))
    p = from_poisson(5, 100)
    tv = total_variation(qplus(p, p, model), p)
    return tv < 1e-10, f"TV {tv:.3g}"


def c06():
    P = hgt_params()
    z = np.linspace(0.0, 1.0, 101)
    err = float(np.max(np.abs(grazing_steady_pgf(P.grazing_spec(), z) - hgt_steady_pgf(P, z))))
    d = hgt_steady_density(P, 200)
    mean, var = d.mean, d.variance
    ok = (err < 1e-8 and abs(mean - 5) < 1e-9 and abs(var - 7.5) < 1e-9
          and abs(var / mean - 1.5) < 1e-9 and abs(var - P.m0 * P.p0 / P.q1) < 1e-9)
    return ok, f"sup error {err:.3g}, mean {mean:.12g}, variance {var:.12g}, dispersion {var / mean:.12g}"


def c07():
    m = case1_model()
    a = integrate(from_pointmass(5, 200), m, 2.0, 0.01, save_every=50)
    b = integrate(from_poisson(5, 200), m, 2.0, 0.01, save_every=50)
    d0 = A.d_r(a.at(0), b.at(0), 2).value
    ratios = []
    for t in (0.5, 1.0, 2.0):
        d = A.d_r(a.at(t), b.at(t), 2).value
        ratios.append(d / (d0 * math.exp(m.alpha(2) * t) * (1 + 1e-6)))
    return max(ratios) <= 1.0, "d/bound " + ", ".join(f"{r:.8f}" for r in ratios)


def c08(N: int = 60):
    m = case1_model()
    f0 = from_pointmass(5, 80)
    ode = integrate(f0, m, 2.0, 0.01, save_every=100).final
    w = wild_solution(f0, m, 2.0, N)
    tv = total_variation(w.to_density(), ode)
    return tv < 1e-5, f"TV {tv:.3g} with series residual {w.residual:.3g} (N={N})"


def c09():
    m = case1_model()
    ens = simulate(Ensemble.constant(100_000, 5, seed=MC_SEED), m, 2.0)
    det = integrate(from_pointmass(5, 200), m, 2.0, 0.01, save_every=100).final
    tv = total_variation(empirical_density(ens, 200), det)
    s = ens.summary()
    z = (s["mean"] - 5.0) / s["std_error"]
    return tv <= 0.02 and abs(z) <= 3, f"TV {tv:.4f}, mean {s['mean']:.5f} ({z:+.2f} SE)"


def c10():
    P = hgt_params()
    rows = epsilon_sweep(P.grazing_spec(), from_pointmass(5, 100), 1.0, [0.2, 0.1, 0.05])
    errs = [e for _, e in rows]
    ratios = [errs[1] / errs[0], errs[2] / errs[1]]
    ok = errs[0] > errs[1] > errs[2] and all(0.3 <= r <= 0.8 for r in ratios)
    return ok, "errors " + ", ".join(f"{e:.3g}" for e in errs) + "; ratios " + ", ".join(f"{r:.3f}" for r in ratios)


def c11():
    P = hgt_params()
    g = P.grazing_spec()
    # a growing spec: tildeY sends more than tildeX loses
    grow = type(g)(g.tildeX, make_law([(0, 0.5), (1, 0.5)]), 1.0, 1.0, 5.0)
    rels = []
    for spec in (g, grow):
        for t in (1.0, 2.0, 5.0):
            rels.append(abs(grazing_mean(spec, from_pointmass(5, 100), t) / (5 * math.exp(spec.alpha_bar * t)) - 1))
    return max(rels) < 1e-4, f"max relative error {max(rels):.3g}"


def c12():
    spec = LeaCoulsonSpec(mu=1.0, beta1=0.5, beta2=0.5, t_end=2.0)
    zs = np.array([0.2, 0.5, 0.8])
    g = lea_coulson_pgf(spec, zgrid=zs)
    w = lea_coulson_sample(spec, np.random.default_rng(MC_SEED), 100_000)
    zscores = []
    for z, gv in zip(zs, g):
        x = z ** w.astype(float)
        zscores.append((x.mean() - gv) / (x.std(ddof=1) / math.sqrt(x.size)))
    mean = slope_at_one(lambda z: lea_coulson_pgf(spec, zgrid=z))
    rel = abs(mean / spec.expected_mutants() - 1)
    rel2e = abs(spec.expected_mutants() / (2 * math.e) - 1)
    ok = max(abs(s) for s in zscores) <= 3 and rel < 1e-3 and rel2e < 1e-12
    return ok, "z-scores " + ", ".join(f"{s:+.2f}" for s in zscores) + f"; mean rel error {rel:.3g}"


def c13():
    rows = A.region_scan()
    lookup = {(a, b): d for a, b, d in rows}
    agree = [d.agree for _, _, d in rows if abs(d.criterion) > 1e-6]
    frac = sum(agree) / len(agree)
    marks = (A.drift_region(1, 1), A.drift_region(0.9, 0.9), A.drift_region(3, 0.1))
    ok = marks == (True, True, False) and frac == 1.0 and lookup[(1.0, 1.0)].inside
    return ok, f"marks {marks}, deciders agree on {frac:.1%} of {len(agree)} points"


def c14():
    m = moment_recursion_means(1.0, 1.0, 3)
    exact = m[1] == 2.0 and m[2] == 6.0
    model = case2_model()
    target = moment_recursion(model, 2)[1]
    s = smoothing_iterate(model, 100_000, 200, MC_SEED)
    z = (s.moment(2) - target) / s.moment_se(2)
    return exact and abs(z) <= 3, f"m2, m3 = {m[1]:g}, {m[2]:g}; Case-2 m2 {s.moment(2):.4f} vs {target:.4f} ({z:+.2f} SE)"


def c15():
    err = abs(A.wild_moment_series(1.3, 1.0, 200) - math.exp(0.3))
    return err < 1e-10, f"error {err:.3g}"


def c16():
    P = hgt_params()
    g = P.grazing_spec()
    r1 = size_biased_check(hgt_steady_density(P, 200), g)
    r2 = size_biased_check(from_pointmass(5, 200), g)
    return r1 < 1e-8 and r2 > 0.01, f"steady residual {r1:.3g}, point mass residual {r2:.3g}"


def grazing_contraction(rate: Callable[[float, float], float]):
    """Ratios of measured d_r* decay to the bound ``exp(-rate(r, E[tildeX]) t)``."""
    P = hgt_params()
    g = P.grazing_spec()
    r = 1.5
    xi = A.DEFAULT_XIGRID
    z = np.exp(-xi)
    times = [0.0, 1.0, 2.0]
    s1 = grazing_evolve(g, from_pointmass(5, 100), 2.0, z, times=times)
    s2 = grazing_evolve(g, from_poisson(5, 100), 2.0, z, times=times)
    d = [A.laplace_metric_from_values(s1.ghat[i] - s2.ghat[i], xi, r).value for i in range(3)]
    k = rate(r, g.tildeX.mean)
    return [d[i] / (d[0] * math.exp(-k * t) * (1 + 1e-6)) for i, t in ((1, 1.0), (2, 2.0))]


def c17():
    ratios = grazing_contraction(lambda r, ex: r * (1 - ex) ** (r - 1))
    return max(ratios) <= 1.0, "d/bound " + ", ".join(f"{x:.4f}" for x in ratios)


CRITERIA = [
    (1, "mean conservation (Case 1)", c01, 10),
    (2, "mean growth (Case 2)", c02, 10),
    (3, "stationary variance", c03, 30),
    (4, "variance relaxation", c04, 20),
    (5, "Poisson fixed point", c05, 5),
    (6, "negative binomial steady state", c06, 5),
    (7, "contraction rate in d_2", c07, 30),
    (8, "Wild series vs ODE", c08, 60),
    (9, "Monte Carlo consistency", c09, 60),
    (10, "grazing limit order", c10, 120),
    (11, "grazing mean law", c11, 10),
    (12, "Lea-Coulson p.g.f. vs sampler", c12, 60),
    (13, "drift region", c13, 10),
    (14, "moment recursion", c14, 120),
    (15, "series identity", c15, 1),
    (16, "size-biased identity", c16, 5),
    (17, "grazing-limit contraction", c17, 30),
]


def run_one(number: int) -> Outcome:
    for n, title, fn, budget in CRITERIA:
        if n == number:
            t0 = time.perf_counter()
            try:
                ok, detail = fn()
            except Exception as exc:  # a crash is reported as a failure
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            return Outcome(n, title, bool(ok), detail, time.perf_counter() - t0, budget)
    raise KeyError(number)


def run_all(numbers=None, echo=print) -> list[Outcome]:
    out = []
    for n, *_ in CRITERIA:
        if numbers is None or n in numbers:
            res = run_one(n)
            if echo is not None:
                echo(res.line())
            out.append(res)
    return out
