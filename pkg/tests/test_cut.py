import math

import numpy as np
import pytest

from gravicut.cut import (
    OptState, derive_params, raw_cut_samples, run_cut_iteration, run_driver, solve_fcp_samples,
)
from gravicut.errors import BudgetTooSmall
from gravicut.fcp import max_rounds
from gravicut.geometry import ConvexBody
from gravicut.harness.config import run_stream
from gravicut.oracle import NoiseModel, QueryLedger, evaluate, make_linear, make_quadratic

NOISELESS = NoiseModel("noiseless")


def literal_fixed_point(n_cut, steps=50):
    """Iterate ``N <- floor(n_cut / (4 M(N)))`` from ``N = n_cut``."""
    n = n_cut
    for _ in range(steps):
        if n < 1:
            return 0
        nxt = n_cut // (4 * max_rounds(n))
        if nxt == n:
            break
        n = nxt
    return n


def test_cut_sample_count_example():
    raw = raw_cut_samples(10 ** 6, 5, 2.0, 0.1)
    assert raw == pytest.approx(10 ** 6 * math.log(10 / 9) / (20 * math.log(10 ** 8)))
    assert raw == pytest.approx(286, abs=0.05)
    # 285.98 before flooring
    assert derive_params(10 ** 6, 5, 2.0, 0.1, 0.1).n_cut == 285


def test_tiny_budget_raises():
    with pytest.raises(BudgetTooSmall):
        derive_params(100, 10, 1.0, 0.5, 0.1)


def test_fcp_sample_solution_at_286():
    n = solve_fcp_samples(286)
    assert n >= 1 and 4 * n * max_rounds(n) <= 286 < 4 * (n + 1) * max_rounds(n + 1)
    # iterating the map from N_Cut overshoots to 0 at this scale
    assert literal_fixed_point(286) == 0


def test_fcp_sample_count_large_budget():
    p = derive_params(10 ** 8, 5, 2.0, 0.1, 0.1)
    assert p.n_fcp >= 1
    assert 4 * p.n_fcp * p.m_fcp <= p.n_cut
    assert abs(literal_fixed_point(p.n_cut) - p.n_fcp) <= 0.05 * p.n_fcp + 2


def test_derived_fields():
    p = derive_params(10 ** 6, 2, 2 * math.sqrt(2), 0.75, 0.1)
    assert p.m_fcp == max_rounds(p.n_fcp)
    assert p.m_cut == math.ceil(5 * p.n / p.n_cut)
    assert p.c == pytest.approx(1 / (8 * math.e * p.m_fcp * math.sqrt(2)))
    assert 2 * p.m_fcp * p.c == pytest.approx(1 / (4 * math.e * math.sqrt(2)))


def test_derive_params_validation():
    with pytest.raises(ValueError):
        derive_params(10 ** 6, 2, 1.0, 2.0, 0.1)


def test_driver_requires_inner_ball(rng):
    with pytest.raises(ValueError):
        run_driver(make_linear(2, [0.1, 0.1]), NOISELESS, 10 ** 6, 0.1, rng)


def test_degraded_path(rng):
    spec = make_quadratic(2)
    x_hat, report = run_driver(spec, NoiseModel("bernoulli"), 10_000, 0.1, rng)
    np.testing.assert_array_equal(x_hat, spec.domain.center)
    assert report.degraded and report.terminal == "budget_too_small"
    assert report.queries_by_phase == {"init": 10_000, "fcp": 0, "gradient": 0}


def test_zero_budget_iteration(rng):
    spec = make_quadratic(2)
    params = derive_params(10 ** 6, 2, spec.diameter, spec.inner_radius, 0.1)
    body = ConvexBody.cube(2)
    state = OptState(body, body.center, 0.5, QueryLedger(0))
    run_cut_iteration(state, params, spec, NOISELESS, rng)
    assert state.terminal == "budget" and state.iteration == 0
    assert state.body is body and state.incumbent_f == 0.5 and not state.history


@pytest.fixture(scope="module")
def noiseless_run():
    spec = make_quadratic(2)
    x_hat, report = run_driver(spec, NOISELESS, 200_000, 0.1, run_stream(0, 2, 200_000, 0))
    return spec, x_hat, report


def test_run_accounting(noiseless_run):
    spec, x_hat, report = noiseless_run
    assert sum(report.queries_by_phase.values()) <= report.budget
    assert report.queries_by_phase["init"] == report.params.n_fcp
    assert spec.domain.contains(x_hat)
    assert report.simple_regret >= -1e-12
    assert report.simple_regret == pytest.approx(evaluate(spec, x_hat) - spec.min_value)


def test_history_invariants(noiseless_run, rng):
    spec, _, report = noiseless_run
    p = report.params
    fs = [h.incumbent_f for h in report.history]
    assert all(b <= a for a, b in zip(fs, fs[1:]))
    for h in report.history:
        assert np.linalg.norm(h.z) <= 1 / (4 * math.e * math.sqrt(2)) + 1e-12
        assert h.fcp_queries <= 4 * p.m_fcp * p.n_fcp
        assert spec.domain.contains(np.array(h.incumbent_x))


def test_bodies_are_nested(noiseless_run, rng):
    _, _, report = noiseless_run
    final = report.final_body
    pts = rng.uniform(-1, 1, (1000, 2))
    inside = [final.prefix(k).contains(pts) for k in range(len(final.cuts) + 1)]
    for outer, inner in zip(inside, inside[1:]):
        assert np.all(~inner | outer)


def test_driver_is_deterministic():
    spec = make_quadratic(2)
    runs = [run_driver(spec, NoiseModel("bernoulli"), 200_000, 0.1, run_stream(4, 2, 200_000, 1))
            for _ in range(2)]
    (xa, ra), (xb, rb) = runs
    np.testing.assert_array_equal(xa, xb)
    assert ra.simple_regret == rb.simple_regret and ra.queries_by_phase == rb.queries_by_phase


def test_trace_records(rng):
    records = []
    run_driver(make_quadratic(2), NOISELESS, 200_000, 0.1, rng, trace=records.append)
    kinds = {r["event"] for r in records}
    assert kinds == {"fcp_round", "iteration"}


def test_noiseless_regret_improves_with_budget():
    spec = make_quadratic(2)
    medians = []
    for n in (10 ** 5, 10 ** 6):
        regrets = [run_driver(spec, NOISELESS, n, 0.1, run_stream(0, 2, n, s))[1].simple_regret
                   for s in range(20)]
        medians.append(float(np.median(regrets)))
    print(f"noiseless median regret n=1e5: {medians[0]:.4g}, n=1e6: {medians[1]:.4g}")
    assert medians[1] < medians[0]
