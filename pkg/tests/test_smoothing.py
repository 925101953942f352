import math

import numpy as np
import pytest

from gravicut.errors import BudgetExhausted
from gravicut.geometry import IsotropicFrame
from gravicut.harness.validate import check_linear_slope, fd_gradient_oracle
from gravicut.oracle import NoiseModel, QueryLedger, make_constant, make_quadratic
from gravicut.smoothing import (
    SmoothedQuery, estimate_gradient, estimate_value, eta_conc, sample_ball, sample_sphere,
)

NOISELESS = NoiseModel("noiseless")
BIG = 10 ** 9


def test_ball_and_sphere_norms(rng):
    ball = sample_ball(4, 0.7, rng, 1000)
    sphere = sample_sphere(4, 0.7, rng, 1000)
    assert np.all(np.linalg.norm(ball, axis=1) <= 0.7)
    np.testing.assert_allclose(np.linalg.norm(sphere, axis=1), 0.7, atol=1e-12)
    assert sample_ball(3, 1.0, rng).shape == (3,)
    np.testing.assert_array_equal(sample_ball(3, 0.0, rng, 2), 0.0)


def test_ball_second_moment(rng):
    z = sample_ball(3, 1.0, rng, 100_000)
    assert np.mean(np.sum(z * z, axis=1)) == pytest.approx(3 / 5, abs=0.01)


def test_sphere_is_centered(rng):
    assert np.linalg.norm(sample_sphere(2, 1.0, rng, 100_000).mean(axis=0)) < 0.02


@pytest.mark.parametrize("arg, expected", [(math.e / 2, 4.0), (20, 7.684), (0.5, 0.0)])
def test_eta_conc_values(arg, expected):
    assert eta_conc(arg) == pytest.approx(expected, abs=2e-3)


def test_eta_conc_domain():
    assert 0 < eta_conc(0.75) < 4
    with pytest.raises(ValueError):
        eta_conc(0.4)


def test_query_validation():
    frame = IsotropicFrame.identity(2)
    with pytest.raises(ValueError):
        SmoothedQuery(frame, np.zeros(2), -0.1, 10)
    with pytest.raises(ValueError):
        SmoothedQuery(frame, np.zeros(2), 0.1, 0)


def test_constant_value_exact(rng):
    spec = make_constant(2, 0.4)
    for c in (0.0, 0.3):
        q = SmoothedQuery(IsotropicFrame.identity(2), np.zeros(2), c, 10)
        assert estimate_value(q, spec, NOISELESS, QueryLedger(BIG), rng) == 0.4


def test_one_dimensional_smoothed_quadratic(rng):
    spec = make_quadratic(1, q=1.0, minimizer=np.zeros(1))
    q = SmoothedQuery(IsotropicFrame.identity(1), np.zeros(1), 0.5, 100_000)
    value = estimate_value(q, spec, NOISELESS, QueryLedger(BIG), rng)
    assert value == pytest.approx(0.25 / 3, abs=0.005)


def test_bernoulli_value(rng):
    spec = make_constant(2, 0.5)
    q = SmoothedQuery(IsotropicFrame.identity(2), np.zeros(2), 0.2, 10_000)
    value = estimate_value(q, spec, NoiseModel("bernoulli"), QueryLedger(BIG), rng)
    assert value == pytest.approx(0.5, abs=0.015)


def test_infeasible_counts_as_one(rng):
    spec = make_constant(1, 0.2)
    # identity frame in d=1: x = z, so every query at 2.0 is outside [-1, 1]
    q = SmoothedQuery(IsotropicFrame.identity(1), np.array([2.0]), 0.0, 5)
    assert estimate_value(q, spec, NoiseModel("bernoulli"), QueryLedger(BIG), rng) == 1.0


def test_value_partial_on_exhaustion(rng):
    spec = make_constant(2, 0.4)
    ledger = QueryLedger(6)
    q = SmoothedQuery(IsotropicFrame.identity(2), np.zeros(2), 0.1, 10)
    with pytest.raises(BudgetExhausted) as info:
        estimate_value(q, spec, NOISELESS, ledger, rng)
    assert info.value.partial == pytest.approx(0.4) and info.value.samples == 6
    assert ledger.used == 6


def test_gradient_partial_on_exhaustion(rng):
    spec = make_constant(2, 0.4)
    ledger = QueryLedger(0)
    q = SmoothedQuery(IsotropicFrame.identity(2), np.zeros(2), 0.1, 10)
    with pytest.raises(BudgetExhausted) as info:
        estimate_gradient(q, spec, NOISELESS, ledger, rng)
    assert info.value.partial is None


def test_gradient_needs_radius(rng):
    q = SmoothedQuery(IsotropicFrame.identity(2), np.zeros(2), 0.0, 10)
    with pytest.raises(ValueError):
        estimate_gradient(q, make_constant(2, 0.1), NOISELESS, QueryLedger(BIG), rng)


def test_constant_gradient_vanishes(rng):
    d, c, n = 3, 0.2, 100_000
    q = SmoothedQuery(IsotropicFrame.identity(d), np.zeros(d), c, n)
    g = estimate_gradient(q, make_constant(d, 0.6), NOISELESS, QueryLedger(BIG), rng)
    assert np.all(np.abs(g) <= 3 * (d / c) / math.sqrt(n))


def test_affine_gradient_is_slope(rng):
    (check,) = check_linear_slope(rng)
    assert check.passed, check.stats


def test_quadratic_gradient_matches_finite_differences(rng):
    spec = make_quadratic(2)
    frame = IsotropicFrame.identity(2)
    z, c = np.array([0.3, 0.0]), 0.1
    oracle = fd_gradient_oracle(spec, frame, z, c, 10_000_000, rng)
    q = SmoothedQuery(frame, z, c, 20_000)
    ledger = QueryLedger(BIG)
    mean = np.mean([estimate_gradient(q, spec, NOISELESS, ledger, rng) for _ in range(200)],
                   axis=0)
    big = np.abs(oracle) > 0.05
    assert big.any()
    np.testing.assert_array_less(np.abs(mean - oracle)[big], 0.05 * np.abs(oracle)[big])
