import math

import numpy as np
import pytest

from dlckinetic import analytics as A
from dlckinetic.acceptance import grazing_contraction
from dlckinetic.density import from_pointmass, from_poisson
from dlckinetic.ensemble import LeaCoulsonSpec, lea_coulson_sample
from dlckinetic.errors import CharacteristicEscape, DomainError, InvalidParams
from dlckinetic.grazing import (
    characteristics,
    epsilon_sweep,
    grazing_evolve,
    grazing_mean,
    lea_coulson_pgf,
    slope_at_one,
    sweep_csv,
)
from dlckinetic.laws import GrazingSpec, make_law, mutation_case2, point_mass
from dlckinetic.steady import HgtParams, hgt_steady_pgf

HGT = HgtParams(p0=0.3, p1=0.6, p2=0.1, q0=0.8, q1=0.2, q2=0.0, m0=5.0)
Z = np.linspace(0, 1, 101)


@pytest.fixture(scope="module")
def gspec():
    return HGT.grazing_spec()


def test_short_time_returns_initial(gspec):
    f0 = from_poisson(4, 60)
    sol = grazing_evolve(gspec, f0, 1e-9, Z)
    assert np.max(np.abs(sol.at(1e-9) - f0.pgf(Z))) < 1e-8
    assert np.array_equal(sol.at(0.0), f0.pgf(Z))


def test_normalization_at_one(gspec):
    sol = grazing_evolve(gspec, from_pointmass(5, 100), 3.0, Z, times=[0.0, 1.0, 3.0])
    assert np.all(sol.ghat[:, -1] == 1.0)
    assert float(gspec.drift(np.array([1.0]))[0]) == 0.0


def test_characteristics_stay_in_unit_interval(gspec):
    sol = grazing_evolve(gspec, from_pointmass(5, 100), 2.0, Z)
    assert np.all((sol.feet >= 0) & (sol.feet <= 1))
    assert sol.feet[-1, 0] == pytest.approx(0.0, abs=1e-15) or sol.feet[-1, 0] > 0


def test_steady_state_is_stationary(gspec):
    g_inf = lambda z: hgt_steady_pgf(HGT, z)
    sol = grazing_evolve(gspec, g_inf, 5.0, Z, times=[1.0, 2.5, 5.0])
    assert np.max(np.abs(sol.ghat - g_inf(Z))) < 1e-6


@pytest.mark.parametrize("t", [1.0, 2.0, 5.0])
def test_mean_law(gspec, t):
    grow = GrazingSpec(gspec.tildeX, make_law([(0, 0.5), (1, 0.5)]), 1.0, 1.0, 5.0)
    for spec in (gspec, grow):
        m = grazing_mean(spec, from_pointmass(5, 100), t)
        assert m == pytest.approx(5 * math.exp(spec.alpha_bar * t), rel=1e-4)


def test_mean_law_general_initial_mean(gspec):
    # y(t) = m0 e^{ab t} + e^{b1 E[tildeY] t}(y(0) - m0) with ab = 0
    y0, t = 3.0, 1.5
    m = grazing_mean(gspec, from_poisson(y0, 80), t)
    expect = 5.0 + math.exp(-gspec.b1 * (1 - gspec.tildeX.mean) * t) * (y0 - 5.0)
    assert m == pytest.approx(expect, rel=1e-4)


def test_shape_preserved(gspec):
    sol = grazing_evolve(gspec, from_pointmass(5, 100), 3.0, Z, times=[0.5, 1.0, 3.0])
    for row in sol.ghat:
        assert np.all(np.diff(row) >= -1e-14)
        assert np.all(np.diff(row, 2) >= -1e-12)


def test_epsilon_sweep_hgt(gspec):
    rows = epsilon_sweep(gspec, from_pointmass(5, 100), 1.0, [0.2, 0.1, 0.05])
    errs = [e for _, e in rows]
    assert errs[0] > errs[1] > errs[2]
    assert all(0.3 <= errs[k + 1] / errs[k] <= 0.8 for k in range(2))


def test_epsilon_sweep_mutation():
    X, Y = mutation_case2(0.2, 0.1)
    spec = GrazingSpec(X, Y, 1.0, 1.0, 1.0)
    rows = epsilon_sweep(spec, from_pointmass(1, 120), 0.5, [0.2, 0.1, 0.05])
    errs = [e for _, e in rows]
    assert errs[0] > errs[1] > errs[2]


def test_epsilon_sweep_trivial_dynamics():
    spec = GrazingSpec(point_mass(1), make_law([(0, 0.5), (1, 0.5)]), 1.0, 1e-12, 1.0)
    rows = epsilon_sweep(spec, from_pointmass(3, 20), 1.0, [0.5, 0.1])
    assert all(e < 1e-9 for _, e in rows)


def test_epsilon_sweep_cap(gspec):
    with pytest.raises(InvalidParams):
        epsilon_sweep(gspec, from_pointmass(5, 100), 2.0, [0.1, 1e-3])


def test_sweep_csv():
    assert sweep_csv([(0.5, 0.25)], "# h\n") == "# h\nepsilon,sup_error\n0.5,0.25\n"


def test_solution_csv(gspec):
    sol = grazing_evolve(gspec, from_pointmass(5, 100), 1.0, np.array([0.0, 1.0]))
    lines = sol.to_csv("# h\n").splitlines()
    assert lines[:2] == ["# h", "t,z,ghat"]
    assert lines[-1] == "1,1,1"
    assert len(lines) == 6


def test_escape_detected():
    with pytest.raises(CharacteristicEscape):
        characteristics(lambda z: np.full_like(z, 5.0), lambda s, z: 0 * z, 1.0, np.array([0.9]))


def test_domain_errors(gspec):
    with pytest.raises(DomainError):
        grazing_evolve(gspec, from_pointmass(5, 100), 0.0, Z)
    with pytest.raises(DomainError):
        grazing_evolve(gspec, from_pointmass(5, 100), 1.0, np.array([1.5]))


def test_lea_coulson_no_mutation():
    g = lea_coulson_pgf(LeaCoulsonSpec(1e-300, 0.5, 0.5, 2.0), zgrid=Z)
    assert np.max(np.abs(g - 1)) < 1e-12


@pytest.mark.parametrize("spec", [LeaCoulsonSpec(1.0, 0.5, 0.5, 2.0), LeaCoulsonSpec(2.0, 0.3, 0.8, 1.5)])
def test_lea_coulson_mean(spec):
    mean = slope_at_one(lambda z: lea_coulson_pgf(spec, zgrid=z))
    assert mean == pytest.approx(spec.expected_mutants(), rel=1e-3)


def test_lea_coulson_matches_sampler():
    spec = LeaCoulsonSpec(2.0, 0.3, 0.8, 1.5)
    zs = np.array([0.2, 0.5, 0.8])
    g = lea_coulson_pgf(spec, zgrid=zs)
    w = lea_coulson_sample(spec, np.random.default_rng(4), 40_000).astype(float)
    for z, gv in zip(zs, g):
        x = z ** w
        assert abs(x.mean() - gv) < 3 * x.std(ddof=1) / math.sqrt(x.size)


def test_lea_coulson_with_initial_population():
    # with mu -> 0 only the initial mutants grow: a Yule process from each
    spec = LeaCoulsonSpec(1e-300, 0.5, 0.7, 1.0)
    g = lea_coulson_pgf(spec, zgrid=Z, f0hat=lambda z: z)
    p = math.exp(-0.7)
    assert np.max(np.abs(g - p * Z / (1 - (1 - p) * Z))) < 1e-9


def test_slope_at_one_is_second_order():
    assert slope_at_one(lambda z: z ** 3) == pytest.approx(3.0, abs=1e-7)


def test_grazing_contraction_at_corrected_rate():
    # the decay rate that follows from expanding the grazed contraction
    # factor to first order in epsilon is r (1 - E[tildeX])
    ratios = grazing_contraction(lambda r, ex: r * (1 - ex))
    assert max(ratios) <= 1.0


def test_grazing_contraction_metric_decreases(gspec):
    xi = A.DEFAULT_XIGRID
    z = np.exp(-xi)
    s1 = grazing_evolve(gspec, from_pointmass(5, 100), 4.0, z, times=[0, 1, 2, 4])
    s2 = grazing_evolve(gspec, from_poisson(5, 100), 4.0, z, times=[0, 1, 2, 4])
    d = [A.laplace_metric_from_values(s1.ghat[i] - s2.ghat[i], xi, 1.5).value for i in range(4)]
    assert all(d[k + 1] < d[k] for k in range(3))
