import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dlckinetic.errors import (
    DomainError,
    EmptySupport,
    InvalidParams,
    InvalidProbability,
    MassNotOne,
    NegativeProbability,
)
from dlckinetic.laws import (
    GrazingSpec,
    cumulant,
    graze,
    hgt_case1,
    make_law,
    moment,
    mutation_case2,
    pgf_eval,
    point_mass,
)

ZGRID = np.linspace(0, 1, 101)


@st.composite
def laws(draw, max_value=6):
    values = draw(st.lists(st.integers(0, max_value), min_size=1, max_size=5, unique=True))
    weights = draw(st.lists(st.floats(0.05, 1.0), min_size=len(values), max_size=len(values)))
    total = sum(weights)
    return make_law([(v, w / total) for v, w in zip(values, weights)], degenerate_ok=True)


def test_make_law_point_mass():
    law = make_law([(1, 1.0)])
    assert law.mean == 1.0
    assert law.values.tolist() == [1]


def test_make_law_case1_x():
    law = make_law([(0, 0.3), (1, 0.6), (2, 0.1)])
    assert law.mean == pytest.approx(0.8, abs=1e-12)


def test_make_law_second_moment():
    law = make_law([(0, 0.5), (2, 0.5)])
    assert law.mean == 1.0
    assert law.raw_moment(2) == 2.0


def test_make_law_merges_and_sorts():
    law = make_law([(2, 0.25), (0, 0.5), (2, 0.25)])
    assert law.values.tolist() == [0, 2]
    assert law.probs.tolist() == [0.5, 0.5]


def test_make_law_renormalizes_small_error():
    law = make_law([(0, 0.5 + 4e-10), (1, 0.5)])
    assert math.fsum(law.probs) == pytest.approx(1.0, abs=1e-15)


@pytest.mark.parametrize(
    "entries, exc",
    [
        ([], EmptySupport),
        ([(0, -0.1), (1, 1.1)], NegativeProbability),
        ([(0, 0.5), (1, 0.4)], MassNotOne),
        ([(0, float("nan")), (1, 1.0)], InvalidProbability),
        ([(-1, 1.0)], DomainError),
        ([(0, 1.0)], InvalidParams),
    ],
)
def test_make_law_rejects(entries, exc):
    with pytest.raises(exc):
        make_law(entries)


def test_delta_zero_allowed_when_flagged():
    assert make_law([(0, 1.0)], degenerate_ok=True).mean == 0.0


def test_pgf_examples():
    assert pgf_eval(make_law([(1, 1.0)]), 0.7) == pytest.approx(0.7)
    assert pgf_eval(make_law([(0, 0.5), (2, 0.5)]), 0.5) == pytest.approx(0.625)
    assert pgf_eval(make_law([(0, 0.3), (1, 0.6), (2, 0.1)]), 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("z", [-0.1, 1.1, float("nan")])
def test_pgf_domain(z):
    with pytest.raises(DomainError):
        pgf_eval(make_law([(1, 1.0)]), z)


def test_cumulant_examples():
    assert cumulant(make_law([(1, 1.0)]), 1.0) == pytest.approx(-1.0)
    assert cumulant(make_law([(1, 1.0)]), 0.5) == pytest.approx(-0.5)
    assert cumulant(make_law([(0, 0.5), (2, 0.5)]), 1.0) == pytest.approx(math.log(0.5 + 0.5 * math.exp(-2)), abs=1e-12)


def test_cumulant_large_argument_is_finite():
    law = make_law([(0, 0.5), (60, 0.5)])
    assert cumulant(law, 1e4) == pytest.approx(math.log(0.5))


@pytest.mark.parametrize("xi", [0.0, -1.0])
def test_cumulant_domain(xi):
    with pytest.raises(DomainError):
        cumulant(make_law([(1, 1.0)]), xi)


def test_moment_examples():
    assert moment(point_mass(2), 3) == 8.0
    assert moment(make_law([(0, 0.3), (1, 0.6), (2, 0.1)]), 2) == pytest.approx(1.0)
    assert moment(make_law([(0, 0.8), (1, 0.2)]), 1.5) == pytest.approx(0.2)
    with pytest.raises(DomainError):
        moment(point_mass(2), 0.5)


def test_graze_examples():
    g = GrazingSpec(point_mass(2), make_law([(1, 1.0)]), b1=0.5, b2=1.0, m0=1.0, epsilon=0.1)
    X = graze(g, "X")
    assert X.values.tolist() == [1, 2]
    assert X.probs == pytest.approx([0.95, 0.05])
    tx = make_law([(0, 0.3), (1, 0.6), (2, 0.1)])
    full = graze(GrazingSpec(tx, point_mass(1), 1.0, 1.0, 1.0, epsilon=1.0), "X")
    assert full == tx
    Y = graze(GrazingSpec(tx, make_law([(1, 1.0)]), 1.0, 1.0, 1.0, epsilon=0.2), "Y")
    assert Y.values.tolist() == [0, 1]
    assert Y.probs == pytest.approx([0.8, 0.2])


def test_graze_rejects_bad_epsilon():
    with pytest.raises(InvalidParams):
        GrazingSpec(point_mass(2), point_mass(1), b1=2.0, b2=1.0, m0=1.0, epsilon=0.6)
    with pytest.raises(DomainError):
        graze(GrazingSpec(point_mass(2), point_mass(1), 1.0, 1.0, 1.0), "Z")


def test_grazing_alpha_bar():
    g = GrazingSpec(make_law([(0, 0.3), (1, 0.6), (2, 0.1)]), make_law([(0, 0.8), (1, 0.2)]), 1.5, 0.5, 2.0, epsilon=0.5)
    assert g.alpha_bar == pytest.approx(1.5 * (0.8 - 1) + 0.5 * 0.2, abs=1e-12)


def test_hgt_case1():
    X, Y, cons = hgt_case1(0.3, 0.1, 0.2)
    assert cons
    assert X.mean + Y.mean == pytest.approx(1.0, abs=1e-12)
    X, Y, cons = hgt_case1(0.3, 0.1, 0.1)
    assert not cons
    assert X.mean + Y.mean - 1 == pytest.approx(-0.1, abs=1e-12)
    X, Y, _ = hgt_case1(0, 0, 0)
    assert X == point_mass(1) and Y == make_law([(0, 1.0)], degenerate_ok=True)
    with pytest.raises(InvalidProbability):
        hgt_case1(0.7, 0.5, 0.1)
    with pytest.raises(InvalidProbability):
        hgt_case1(-0.1, 0.1, 0.1)


def test_mutation_case2():
    X, Y = mutation_case2(0.2, 0.1)
    assert (X.mean, Y.mean) == pytest.approx((1.2, 0.1))
    assert X.mean + Y.mean - 1 == pytest.approx(0.3)
    X, Y = mutation_case2(0, 0)
    assert X == point_mass(1)
    X, _ = mutation_case2(1, 0)
    assert X == point_mass(2)
    with pytest.raises(InvalidProbability):
        mutation_case2(1.5, 0)


@settings(max_examples=60, deadline=None)
@given(laws())
def test_pgf_shape_and_tail_bound(law):
    p = pgf_eval(law, ZGRID)
    assert p[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all(np.diff(p) >= -1e-14)
    assert np.all(np.diff(p, 2) >= -1e-12)
    assert np.all(1 - p <= (1 - ZGRID) * law.mean + 1e-12)


@settings(max_examples=60, deadline=None)
@given(laws())
def test_phi_matches_pgf(law):
    z = ZGRID[:-1]
    assert law.phi(z) * (1 - z) == pytest.approx(1 - pgf_eval(law, z), abs=1e-12)
    assert float(law.phi(1.0)) == pytest.approx(law.mean, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(laws(), st.sampled_from([1.25, 1.5, 2.0]))
def test_cumulant_ratio_sup(law, r):
    xi = np.logspace(-6, 2, 400)
    sup = np.max(np.abs(cumulant(law, xi)) ** r / xi ** r)
    assert sup <= law.mean ** r * (1 + 1e-9) + 1e-300
    assert sup == pytest.approx(law.mean ** r, rel=1e-2)


@settings(max_examples=40, deadline=None)
@given(laws(), laws(), st.floats(0.05, 1.0), st.floats(0.1, 1.0), st.floats(0.1, 1.0))
def test_graze_pgf_identities(tx, ty, eps, b1, b2):
    g = GrazingSpec(tx, ty, b1, b2, 1.0, epsilon=eps)
    X, Y = graze(g, "X"), graze(g, "Y")
    z = ZGRID
    assert pgf_eval(X, z) == pytest.approx(z + eps * b1 * (pgf_eval(tx, z) - z), abs=1e-12)
    assert pgf_eval(Y, z) == pytest.approx(1 + eps * b2 * (pgf_eval(ty, z) - 1), abs=1e-12)


def test_sample_sums_matches_mean():
    law = make_law([(0, 0.3), (1, 0.6), (2, 0.1)])
    rng = np.random.default_rng(1)
    s = law.sample_sums(rng, np.full(20000, 10))
    assert abs(s.mean() - 8.0) < 3 * s.std() / math.sqrt(s.size)


def test_laws_are_hashable_values():
    a = make_law([(0, 0.5), (1, 0.5)])
    b = make_law([(1, 0.5), (0, 0.5)])
    assert a == b and hash(a) == hash(b)
    assert a.to_entries() == [[0, 0.5], [1, 0.5]]
