"""Property batteries checking the estimators, the cutting-point search and
the geometry against independent Monte-Carlo / finite-difference oracles.

Each battery returns a list of :class:`Check` results. ``run_validation``
runs a named selection and ``format_check`` renders one line per property.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import smoothing
from ..fcp import FcpParams, run_fcp
from ..geometry import (
    ConvexBody, Halfspace, IsotropicFrame, apply_cut, estimate_frame,
    estimate_volume_fraction, sample_interior,
)
from ..oracle import NoiseModel, QueryLedger, evaluate, make_linear, make_quadratic
from ..smoothing import SmoothedQuery, estimate_gradient, estimate_value, sample_ball

UNLIMITED = 10 ** 15


@dataclass
class Check:
    name: str
    passed: bool
    stats: dict = field(default_factory=dict)


def format_check(check):
    stats = ", ".join(f"{k}={_fmt(v)}" for k, v in check.stats.items())
    return f"[{'PASS' if check.passed else 'FAIL'}] {check.name}: {stats}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def coverage_floor(target, trials):
    """Lowest acceptable empirical coverage: ``target`` minus 3 binomial sigmas."""
    return target - 3.0 * math.sqrt(target * (1.0 - target) / trials)


# -- noiseless oracles -------------------------------------------------------

def _g(spec, frame, z):
    y = evaluate(spec, frame.unwhiten(z))
    return np.where(np.isinf(y), smoothing.INFEASIBLE_SUBSTITUTE, y)


def smoothed_value_oracle(spec, frame, z, c, samples, rng, chunk=1_000_000):
    """Monte-Carlo ``g_c(z)`` from noiseless values; returns ``(mean, stderr)``."""
    z = np.asarray(z, dtype=float)
    total = total_sq = 0.0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        offsets = sample_ball(z.size, c, rng, m) if c > 0 else np.zeros((m, z.size))
        y = _g(spec, frame, z + offsets)
        total += y.sum()
        total_sq += (y * y).sum()
        done += m
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return mean, math.sqrt(var / samples)


def fd_gradient_oracle(spec, frame, z, c, samples, rng, step=1e-3, chunk=1_000_000):
    """Central finite differences of Monte-Carlo ``g_c`` with common random numbers."""
    z = np.asarray(z, dtype=float)
    d = z.size
    grad = np.zeros(d)
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        offsets = sample_ball(d, c, rng, m)
        for k in range(d):
            e = np.zeros(d)
            e[k] = step
            diff = _g(spec, frame, z + e + offsets) - _g(spec, frame, z - e + offsets)
            grad[k] += diff.sum() / (2 * step)
        done += m
    return grad / samples


# -- batteries ----------------------------------------------------------------

def _concentration_problem(d):
    spec = make_quadratic(d)
    frame = IsotropicFrame.for_box(spec.domain)
    # a point where f is near 1/2, so Bernoulli observations are noisiest
    x = -0.6 * np.sign(spec.minimizer)
    return spec, frame, frame.whiten(x)


def check_concentration(rng, trials=500, n=4096, d=3, c=0.1, delta=0.1):
    """Deviation bounds for the value and gradient estimators under Bernoulli noise."""
    spec, frame, z = _concentration_problem(d)
    noise = NoiseModel("bernoulli")
    g_c, _ = smoothed_value_oracle(spec, frame, z, c, 10_000_000, rng)
    grad_c = fd_gradient_oracle(spec, frame, z, c, 2_000_000, rng)
    eta = smoothing.eta_conc(1.0 / delta)
    value_bound = eta / math.sqrt(n)
    grad_bound = eta * math.sqrt(d) / (c * math.sqrt(n))
    value_hits = grad_hits = 0
    ledger = QueryLedger(UNLIMITED)
    for _ in range(trials):
        q = SmoothedQuery(frame, z, c, n, "fcp")
        if abs(estimate_value(q, spec, noise, ledger, rng) - g_c) <= value_bound:
            value_hits += 1
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        g_hat = estimate_gradient(q, spec, noise, ledger, rng)
        if abs((g_hat - grad_c) @ u) <= grad_bound:
            grad_hits += 1
    floor = coverage_floor(1 - delta, trials)
    return [
        Check("concentration.value", value_hits / trials >= floor,
              {"coverage": value_hits / trials, "floor": floor, "bound": value_bound,
               "g_c": g_c}),
        Check("concentration.gradient", grad_hits / trials >= floor,
              {"coverage": grad_hits / trials, "floor": floor, "bound": grad_bound,
               "n_ok": n >= d * math.log(2 / delta)}),
    ]


def check_stokes(rng, dims=(2, 5), replicates=200, n=20_000, c=0.1, rel_tol=0.05):
    """Mean of sphere-sampling gradient estimates against finite differences of ``g_c``."""
    checks = []
    noise = NoiseModel("noiseless")
    for d in dims:
        spec = make_quadratic(d)
        frame = IsotropicFrame.for_box(spec.domain)
        z = frame.whiten(-spec.minimizer)
        oracle = fd_gradient_oracle(spec, frame, z, c, 10_000_000, rng)
        ledger = QueryLedger(UNLIMITED)
        q = SmoothedQuery(frame, z, c, n, "gradient")
        mean = np.mean([estimate_gradient(q, spec, noise, ledger, rng)
                        for _ in range(replicates)], axis=0)
        big = np.abs(oracle) > 0.05
        rel = np.abs(mean - oracle)[big] / np.abs(oracle)[big]
        worst = float(rel.max()) if rel.size else 0.0
        checks.append(Check(f"stokes.d{d}", bool(rel.size) and worst <= rel_tol,
                            {"max_rel_err": worst, "components": int(big.sum())}))
    return checks


def check_linear_slope(rng, d=3, replicates=200, n=5_000, c=0.1, rel_tol=0.05):
    """The smoothed gradient of an affine function is its slope."""
    slope = np.array([0.2, -0.1, 0.15][:d])
    spec = make_linear(d, slope, anchor=np.zeros(d), anchor_value=0.5)
    frame = IsotropicFrame.identity(d)
    q = SmoothedQuery(frame, np.zeros(d), c, n, "gradient")
    ledger = QueryLedger(UNLIMITED)
    mean = np.mean([estimate_gradient(q, spec, NoiseModel("noiseless"), ledger, rng)
                    for _ in range(replicates)], axis=0)
    # identity frame: g(z) = f(sqrt(d) z)
    expected = math.sqrt(d) * slope
    rel = float(np.max(np.abs(mean - expected) / np.abs(expected)))
    return [Check("stokes.affine", rel <= rel_tol, {"max_rel_err": rel})]


def _random_instance(rng):
    d = int(rng.choice([2, 3, 5]))
    x_star = rng.uniform(-0.5, 0.5, d)
    spec = make_quadratic(d, minimizer=x_star, min_value=float(rng.uniform(0, 0.2)))
    frame = IsotropicFrame.for_box(spec.domain)
    z = frame.whiten(rng.uniform(-0.7, 0.7, d))
    z_tilde = frame.whiten(rng.uniform(-0.7, 0.7, d))
    c = float(rng.uniform(0.02, 0.15))
    return spec, frame, z, z_tilde, c


def check_correlation(rng, instances=100, oracle_samples=400_000, replicates=40, n=10_000,
                 max_draws=10_000):
    """Correlation of the smoothed gradient with ``z - z_tilde`` under the gap premise."""
    noise = NoiseModel("noiseless")
    passed = tested = drawn = 0
    worst_margin = math.inf
    while tested < instances and drawn < max_draws:
        drawn += 1
        spec, frame, z, z_tilde, c = _random_instance(rng)
        g_c, se_c = smoothed_value_oracle(spec, frame, z, c, oracle_samples, rng)
        g_2c, _ = smoothed_value_oracle(spec, frame, z, 2 * c, oracle_samples, rng)
        g_tilde = float(_g(spec, frame, z_tilde))
        gap = g_c - g_tilde
        if not (gap > 0 and g_2c - g_c <= 0.25 * gap):
            continue
        tested += 1
        ledger = QueryLedger(UNLIMITED)
        q = SmoothedQuery(frame, z, c, n, "gradient")
        inner = np.array([estimate_gradient(q, spec, noise, ledger, rng) @ (z - z_tilde)
                          for _ in range(replicates)])
        se = math.hypot(inner.std(ddof=1) / math.sqrt(replicates), 0.75 * se_c)
        margin = (inner.mean() - 0.75 * gap + 3 * se) / max(gap, 1e-12)
        worst_margin = min(worst_margin, margin)
        passed += margin >= 0
    return [Check("correlation", tested == instances and passed == tested,
                  {"instances": tested, "passed": passed, "draws": drawn,
                   "worst_rel_margin": worst_margin})]


def check_monotone_smoothing(rng, instances=50, samples=400_000):
    """``g_{2c} >= g_c`` up to three Monte-Carlo standard errors."""
    ok = 0
    for _ in range(instances):
        spec, frame, z, _, c = _random_instance(rng)
        g_c, se_c = smoothed_value_oracle(spec, frame, z, c, samples, rng)
        g_2c, se_2c = smoothed_value_oracle(spec, frame, z, 2 * c, samples, rng)
        ok += g_2c >= g_c - 3 * math.hypot(se_c, se_2c)
    return [Check("smoothing.monotone", ok == instances, {"instances": instances, "ok": ok})]


def random_cut_box(d, cuts, rng, depth=0.3):
    """Cube ``[-1, 1]^d`` with random cuts, each keeping the origin."""
    body = ConvexBody.cube(d)
    for _ in range(cuts):
        normal = rng.standard_normal(d)
        p = depth * rng.uniform(0.2, 1.0) * normal / np.linalg.norm(normal)
        body = body.with_cut(Halfspace(normal, normal @ p), np.zeros(d))
    return body


def check_kls(rng, dims=(2, 5, 10), samples=100_000, cuts=3, slack=1.1):
    """Whitened interior samples stay within ``2 sqrt(d)`` (times ``slack``)."""
    checks = []
    for d in dims:
        body = random_cut_box(d, cuts, rng)
        frame = estimate_frame(body, rng)
        w = frame.whiten(sample_interior(body, samples, 100 * d, rng))
        radius = float(np.linalg.norm(w, axis=1).max())
        bound = 2 * math.sqrt(d) * slack
        checks.append(Check(f"kls.d{d}", radius <= bound,
                            {"max_norm": radius, "bound": bound}))
    return checks


def check_whitening(rng, dims=(2, 3), samples=10_000, frame_samples=20_000):
    """Fresh samples mapped through an estimated frame look isotropic / d."""
    checks = []
    for d in dims:
        body = random_cut_box(d, 2, rng)
        frame = estimate_frame(body, rng, sample_count=frame_samples)
        w = frame.whiten(sample_interior(body, samples, 100 * d, rng))
        mean_norm = float(np.linalg.norm(w.mean(axis=0)))
        cov_err = float(np.linalg.norm(np.atleast_2d(np.cov(w, rowvar=False))
                                       - np.eye(d) / d, 2))
        checks.append(Check(f"whitening.d{d}", mean_norm <= 0.05 and cov_err <= 0.1,
                            {"mean_norm": mean_norm, "cov_err": cov_err}))
    return checks


def check_cut_volume(rng, bodies=30, samples=20_000, slack=0.03):
    """Cuts through whitened points with ``||z|| <= 1/(4 e sqrt(d))`` split the
    volume so that each side keeps at least ``1/e - sqrt(d) ||z||``."""
    kept_all = []
    ok = 0
    for k in range(bodies):
        d = (2, 3, 5)[k % 3]
        body = random_cut_box(d, int(rng.integers(0, 4)), rng)
        frame = estimate_frame(body, rng)
        z = sample_ball(d, 1.0 / (4 * math.e * math.sqrt(d)), rng)
        u = rng.standard_normal(d)
        after = apply_cut(body, frame, z, u, rng)
        kept = estimate_volume_fraction(after, body, samples, rng)
        floor = 1 / math.e - math.sqrt(d) * float(np.linalg.norm(z)) - slack
        good = min(kept, 1 - kept) >= floor and kept <= 0.9 and 1 - kept >= 0.1
        ok += good
        kept_all.append(kept)
    return [Check("cut_volume", ok == bodies,
                  {"bodies": bodies, "ok": ok, "min_kept": min(kept_all),
                   "max_kept": max(kept_all)})]


def check_fcp_accounting(rng, delta=0.1):
    """Budget, displacement, escalation and value accuracy of the cutting-point search."""
    checks = []
    spec = make_quadratic(2, q=1.0, minimizer=np.zeros(2))
    frame = IsotropicFrame.identity(2)
    noise = NoiseModel("noiseless")
    budget_ok = disp_ok = esc_ok = exact_ok = True
    moved = 0
    runs = 5
    for _ in range(runs):
        params = FcpParams(0.35, 100_000, delta)
        rounds = []
        ledger = QueryLedger(UNLIMITED)
        res = run_fcp(np.zeros(2), frame, params, spec, noise, ledger, rng,
                      trace=rounds.append)
        budget_ok &= res.queries_used <= 4 * params.max_depth * params.n
        disp_ok &= np.linalg.norm(res.z) <= 2 * params.max_depth * params.c + 1e-12
        # a float mean of identical values may differ from them by a few ulps
        exact_ok &= abs(res.g_hat - float(_g(spec, frame, res.z))) <= 1e-12
        values = [float(_g(spec, frame, np.array(r["z"]))) for r in rounds]
        if res.depth > len(rounds) - 1:
            values.append(float(_g(spec, frame, res.z)))
        esc_ok &= all(b > a for a, b in zip(values, values[1:]))
        moved += res.depth >= 1
    checks.append(Check("fcp.noiseless", budget_ok and disp_ok and esc_ok and exact_ok
                        and moved > 0,
                        {"budget": budget_ok, "displacement": disp_ok, "escalation": esc_ok,
                         "exact": exact_ok, "moved": moved}))

    trials = 200
    spec = make_quadratic(3)
    frame = IsotropicFrame.for_box(spec.domain)
    params = FcpParams(0.05, 4096, delta)
    bound = smoothing.eta_conc(params.max_depth / delta) / math.sqrt(params.n)
    hits = 0
    for _ in range(trials):
        z0 = frame.whiten(rng.uniform(-0.8, 0.8, 3))
        res = run_fcp(z0, frame, params, spec, NoiseModel("bernoulli"),
                      QueryLedger(UNLIMITED), rng)
        hits += abs(res.g_hat - float(_g(spec, frame, res.z))) <= bound
    floor = coverage_floor(1 - delta, trials)
    checks.append(Check("fcp.bernoulli_accuracy", hits / trials >= floor,
                        {"coverage": hits / trials, "floor": floor, "bound": bound}))
    return checks


SUITES = {
    "concentration": check_concentration,
    "stokes": lambda rng: check_stokes(rng) + check_linear_slope(rng),
    "correlation": check_correlation,
    "monotone": check_monotone_smoothing,
    "kls": lambda rng: check_kls(rng) + check_whitening(rng),
    "cut_volume": check_cut_volume,
    "fcp": check_fcp_accounting,
}


def run_validation(suite="all", seed=0, report=print):
    """Run the selected batteries; ``report`` receives one line per property."""
    names = list(SUITES) if suite == "all" else [s.strip() for s in suite.split(",")]
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suite(s): {', '.join(unknown)}")
    checks = []
    for k, name in enumerate(names):
        rng = np.random.default_rng([seed, k])
        for check in SUITES[name](rng):
            if report is not None:
                report(format_check(check))
            checks.append(check)
    return checks
