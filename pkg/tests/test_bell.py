import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iqm_lab.bell import (
    CHSH_ANGLES,
    CorrelationTable,
    LHVModel,
    anti_copy_model,
    bell1964_check,
    bell1964_from_model,
    chsh_from_model,
    chsh_value,
    lhv_correlation_exact,
    lhv_max_bruteforce,
    paired_correlation,
    random_lhv_model,
    singlet_correlation_exact,
    world_chsh,
    world_correlation,
)
from iqm_lab.errors import MalformedModel
from oracles import singlet_joint, singlet_state_vector_joint


def oracle_E(theta):
    j = singlet_joint(theta)
    return sum(s1 * s2 * p for (s1, s2), p in j.items())


def test_singlet_exact_matches_two_oracles():
    for a, b in [(0.0, 0.0), (0.0, math.pi / 3), (0.4, 2.1), (math.pi / 4, 3 * math.pi / 4)]:
        e = singlet_correlation_exact(a, b)
        j = singlet_state_vector_joint(a, b)
        assert e == pytest.approx(sum(s1 * s2 * p for (s1, s2), p in j.items()), abs=1e-12)
        assert e == pytest.approx(oracle_E(b - a), abs=1e-12)


def test_two_point_model_exact():
    m = LHVModel.from_tables(
        ("u", "d"), (Fraction(1, 4), Fraction(3, 4)),
        {(0.0, "u"): 1, (0.0, "d"): -1}, {(1.0, "u"): 1, (1.0, "d"): 1},
    )
    assert lhv_correlation_exact(m, 0.0, 1.0) == Fraction(-1, 2)


@pytest.mark.parametrize("geometry,n,tol", [("circle", 360, 4 / 360), ("circle", 3600, 4 / 3600), ("sphere", 4000, 0.03), ("sphere", 40000, 0.01)])
@pytest.mark.parametrize("theta", [0.0, math.pi / 6, math.pi / 3, math.pi / 2, 2.0, math.pi])
def test_anti_copy_is_linear_in_angle(geometry, n, tol, theta):
    m = anti_copy_model(n, geometry)
    assert float(lhv_correlation_exact(m, 0.0, theta)) == pytest.approx(-1 + 2 * theta / math.pi, abs=tol)


def test_anti_copy_sixty_degrees():
    assert float(lhv_correlation_exact(anti_copy_model(3600, "circle"), 0.0, math.pi / 3)) == pytest.approx(-1 / 3, abs=2e-3)


def test_unknown_geometry_rejected():
    with pytest.raises(MalformedModel):
        anti_copy_model(10, "torus")


@pytest.mark.parametrize("theta", [0.0, math.pi / 3, math.pi / 2])
def test_sampled_singlet_correlation(singlet, theta):
    est = world_correlation(singlet, 0.0, theta, 100_000, 11)
    assert abs(est.E - oracle_E(theta)) <= 4 * est.sigma + 1e-12
    lo, hi = est.ci
    assert -1 <= lo <= est.E <= hi <= 1


def test_sampled_singlet_over_angle_grid(singlet):
    n = 20_000
    for theta in np.linspace(0, math.pi, 10):
        est = world_correlation(singlet, 0.0, float(theta), n, 12)
        assert abs(est.E + math.cos(theta)) <= 4 / math.sqrt(n)


def test_correlation_from_pair_counts():
    assert paired_correlation([25, 0, 0, 25])[0] == 1.0
    assert paired_correlation([0, 10, 10, 0])[0] == -1.0
    E, s = paired_correlation([1, 1, 1, 1])
    assert E == 0.0 and s > 0


def test_correlation_csv_columns(singlet):
    text = CorrelationTable([world_correlation(singlet, 0.0, 1.0, 1000, 1)]).to_csv()
    assert text.splitlines()[0] == "a,b,E,ci,N"


# -- CHSH --------------------------------------------------------------------------------


def test_chsh_value_examples():
    assert chsh_value(1, -1, 1, 1) == 4
    assert chsh_value(1, 1, 1, 1) == 2
    r = 1 / math.sqrt(2)
    assert chsh_value(-r, r, -r, -r) == pytest.approx(2 * math.sqrt(2))


def test_bruteforce_local_maximum():
    assert lhv_max_bruteforce() == (2, (1, 1, 1, 1))
    with pytest.raises(ValueError):
        lhv_max_bruteforce((0.0, 1.0))


def test_singlet_exact_chsh_is_tsirelson():
    a, a2, b, b2 = CHSH_ANGLES
    s = chsh_value(*(singlet_correlation_exact(x, y) for x, y in ((a, b), (a, b2), (a2, b), (a2, b2))))
    assert s == pytest.approx(2 * math.sqrt(2), abs=1e-12)


def test_anti_copy_respects_chsh():
    s = chsh_from_model(anti_copy_model(3600, "circle"))
    assert s <= 2 and s == pytest.approx(2.0, abs=1e-2)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 12))
def test_random_local_models_respect_chsh(seed, n):
    m = random_lhv_model(np.random.default_rng(seed), CHSH_ANGLES, n)
    assert chsh_from_model(m) <= 2


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 12))
def test_anticorrelated_models_respect_1964(seed, n):
    a, b, c = 0.0, 1.0, 2.0
    m = random_lhv_model(np.random.default_rng(seed), (a, b, c), n, anticorrelated=True)
    assert bell1964_from_model(m, a, b, c).margin <= 0


def test_1964_over_deterministic_strategies():
    best = max(
        bell1964_check(-x * y, -x * z, -y * z).margin
        for x, y, z in itertools.product((1, -1), repeat=3)
    )
    assert best == 0


def test_1964_examples():
    a, b, c = 0.0, math.pi / 3, 2 * math.pi / 3
    r = bell1964_check(oracle_E(b - a), oracle_E(c - a), oracle_E(c - b))
    assert float(r.margin) == pytest.approx(0.5, abs=1e-12) and r.violated
    r = bell1964_check(0, 0, 0)
    assert r.margin == -1 and r.satisfied
    with pytest.raises(ValueError):
        bell1964_check(1.5, 0, 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_flipping_both_sides_keeps_correlations(seed):
    m = random_lhv_model(np.random.default_rng(seed), CHSH_ANGLES, 6)
    flipped = LHVModel(m.lambdas, m.rho, lambda s, lam: -m.response_a(s, lam), lambda s, lam: -m.response_b(s, lam))
    for x, y in itertools.product(CHSH_ANGLES[:2], CHSH_ANGLES[2:]):
        assert lhv_correlation_exact(flipped, x, y) == lhv_correlation_exact(m, x, y)
    assert chsh_from_model(flipped) == chsh_from_model(m)


def test_sampled_chsh_violates(singlet):
    r = world_chsh(singlet, CHSH_ANGLES, 100_000, 3)
    assert r.violated and r.S - 4 * r.sigma > 2
    assert abs(r.S - 2 * math.sqrt(2)) <= 4 * r.sigma
    assert r.summary().startswith("CHSH S=2.83 ± ") and r.summary().endswith("LHV bound 2.00: VIOLATED")


@pytest.mark.parametrize(
    "lambdas,rho",
    [((), ()), ((0, 1), (Fraction(1, 2),)), ((0,), (Fraction(-1, 2),)), ((0, 1), (Fraction(1, 2), Fraction(1, 3))), ((0,), (0.7,))],
)
def test_malformed_models(lambdas, rho):
    with pytest.raises(MalformedModel):
        LHVModel(lambdas, rho, lambda s, lam: 1, lambda s, lam: 1)


def test_responses_must_be_signs():
    m = LHVModel((0,), (Fraction(1),), lambda s, lam: 0, lambda s, lam: 1)
    with pytest.raises(MalformedModel):
        lhv_correlation_exact(m, 0.0, 0.0)
    m = LHVModel.from_tables((0,), (Fraction(1),), {(0.0, 0): 1}, {(0.0, 0): 1})
    with pytest.raises(MalformedModel):
        lhv_correlation_exact(m, 1.0, 0.0)
