"""Noisy center-of-gravity cutting: parameters, one cut iteration, driver.

Each iteration whitens the current body, finds a cutting point with
:func:`~gravicut.fcp.run_fcp`, possibly moves the incumbent there, estimates
the smoothed gradient at the cutting point and keeps the halfspace on the
side opposite to it. The query ledger is the only stopping rule; geometric
failures end the run early with a recorded anomaly.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExhausted, BudgetTooSmall, DegenerateBody, EmptyCut
from .fcp import FcpParams, max_rounds, run_fcp
from .geometry import (
    ConvexBody, IsotropicFrame, apply_cut, estimate_frame, estimate_volume_fraction,
)
from .oracle import PHASES, QueryLedger, evaluate
from .smoothing import SmoothedQuery, estimate_gradient, estimate_value

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CutParams:
    n: int
    d: int
    diam: float
    r: float
    delta: float
    n_cut: int
    m_cut: int
    n_fcp: int
    m_fcp: int
    c: float

    def fcp_params(self):
        return FcpParams(self.c, self.n_fcp, self.delta)


def raw_cut_samples(n, d, diam, r):
    """Real-valued gradient sample count ``n log(10/9) / (4 d log(n d diam / r))``."""
    denom = 4 * d * math.log(n * d * diam / r)
    if denom <= 0:
        return 0.0
    return n * math.log(10 / 9) / denom


def solve_fcp_samples(n_cut):
    """Largest ``N >= 1`` with ``4 N M_FCP(N) <= n_cut``, or 0 if none.

    Since ``N -> 4 N M_FCP(N)`` is increasing this is the largest integer
    fixed point of ``N = floor(n_cut / (4 M_FCP(N)))`` from below.
    """
    if 4 * max_rounds(1) > n_cut:
        return 0
    lo, hi = 1, max(1, n_cut // (4 * max_rounds(1)))
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if 4 * mid * max_rounds(mid) <= n_cut:
            lo = mid
        else:
            hi = mid - 1
    return lo


def derive_params(n, d, diam, r, delta):
    """Budget split and smoothing radius for a run with budget ``n``.

    Raises
    ------
    BudgetTooSmall
        If fewer than one gradient sample, or fewer than one cutting-point
        sample, can be afforded per iteration.
    """
    if n < 1 or d < 1 or diam <= 0 or not 0 < r <= diam or not 0 < delta < 1:
        raise ValueError("need n, d >= 1, 0 < r <= diam and 0 < delta < 1")
    n_cut = math.floor(raw_cut_samples(n, d, diam, r))
    if n_cut < 1:
        raise BudgetTooSmall(f"n_cut = {n_cut} < 1")
    n_fcp = solve_fcp_samples(n_cut)
    if n_fcp < 1:
        raise BudgetTooSmall(f"n_fcp < 1 for n_cut = {n_cut}")
    m_fcp = max_rounds(n_fcp)
    return CutParams(
        n=n, d=d, diam=diam, r=r, delta=delta,
        n_cut=n_cut, m_cut=math.ceil(5 * n / n_cut), n_fcp=n_fcp, m_fcp=m_fcp,
        c=1.0 / (8 * math.e * m_fcp * math.sqrt(d)),
    )


@dataclass
class IterationRecord:
    iteration: int
    frame_mu: list
    frame_scale: tuple
    z: list
    g_hat: float
    fcp_depth: int
    fcp_queries: int
    gradient_norm: float
    n_cuts: int
    incumbent_x: list
    incumbent_f: float
    kept_fraction: float = None
    anomalies: list = field(default_factory=list)


@dataclass
class OptState:
    body: object
    incumbent_x: np.ndarray
    incumbent_f: float
    ledger: QueryLedger
    iteration: int = 0
    history: list = field(default_factory=list)
    anomalies: list = field(default_factory=list)
    terminal: str = None


def _frame_summary(frame):
    eig = np.linalg.eigvalsh(frame.sqrt_cov)
    return frame.mu.tolist(), (float(eig[0]), float(eig[-1]))


def run_cut_iteration(state, params, spec, noise, rng, volume_samples=0, trace=None):
    """One cut of ``state.body``; updates and returns ``state``.

    ``state.terminal`` is set to ``"budget"``, ``"degenerate_body"`` or
    ``"empty_cut"`` when the run must stop. With ``volume_samples > 0`` the
    kept volume fraction of the cut is estimated (no queries are spent).
    """
    body = state.body
    try:
        frame = estimate_frame(body, rng)
    except DegenerateBody as exc:
        state.terminal = "degenerate_body"
        state.anomalies.append("degenerate_body")
        log.debug("stopping: %s", exc)
        return state

    fcp = run_fcp(np.zeros(body.dim), frame, params.fcp_params(), spec, noise,
                  state.ledger, rng, trace=trace)
    state.anomalies.extend(fcp.anomalies)
    if fcp.exhausted:
        state.terminal = "budget"
        return state

    if fcp.g_hat <= state.incumbent_f:
        x = frame.unwhiten(fcp.z)
        state.incumbent_x = np.clip(x, spec.domain.lower, spec.domain.upper)
        state.incumbent_f = fcp.g_hat

    try:
        grad = estimate_gradient(
            SmoothedQuery(frame, fcp.z, params.c, params.n_cut, "gradient"),
            spec, noise, state.ledger, rng)
    except BudgetExhausted:
        state.terminal = "budget"
        return state

    anomalies = list(fcp.anomalies)
    kept = None
    if np.linalg.norm(grad) > 0.0:
        try:
            new_body = apply_cut(body, frame, fcp.z, grad, rng)
        except EmptyCut:
            state.terminal = "empty_cut"
            state.anomalies.append("empty_cut")
            return state
        if volume_samples:
            try:
                kept = estimate_volume_fraction(new_body, body, volume_samples, rng)
            except DegenerateBody:
                anomalies.append("volume_estimate_failed")
                state.anomalies.append("volume_estimate_failed")
        state.body = new_body
    else:
        anomalies.append("zero_gradient")
        state.anomalies.append("zero_gradient")

    state.iteration += 1
    mu, scale = _frame_summary(frame)
    record = IterationRecord(
        iteration=state.iteration, frame_mu=mu, frame_scale=scale,
        z=fcp.z.tolist(), g_hat=fcp.g_hat, fcp_depth=fcp.depth,
        fcp_queries=fcp.queries_used, gradient_norm=float(np.linalg.norm(grad)),
        n_cuts=len(state.body.cuts), incumbent_x=state.incumbent_x.tolist(),
        incumbent_f=state.incumbent_f, kept_fraction=kept, anomalies=anomalies,
    )
    state.history.append(record)
    if trace is not None:
        trace({"event": "iteration", **record.__dict__})
    return state


@dataclass
class RunReport:
    dim: int
    budget: int
    seed: object
    simple_regret: float
    iterations: int
    queries_by_phase: dict
    anomalies: list
    wall_time: float
    params: CutParams = None
    degraded: bool = False
    terminal: str = None
    final_body: object = None
    history: list = field(default_factory=list)


def run_driver(spec, noise, n, delta, rng, seed=None, volume_samples=0, trace=None):
    """Minimize ``spec`` with ``n`` noisy queries.

    Returns
    -------
    x_hat : ndarray
        Final incumbent, always inside the domain box.
    report : RunReport
    """
    if not spec.satisfies_assumption:
        raise ValueError("the minimizer must have a ball around it inside the domain")
    started = time.perf_counter()
    ledger = QueryLedger(n)
    # fresh copy: sampling moves the witness of the body it runs on
    body = ConvexBody(spec.domain.lower, spec.domain.upper)
    center = body.center
    box_frame = IsotropicFrame.for_box(body)
    try:
        params = derive_params(n, spec.dim, spec.diameter, spec.inner_radius, delta)
    except BudgetTooSmall:
        params = None

    if params is None:
        # Nothing to cut with: spend the budget on the box center.
        if n > 0:
            estimate_value(SmoothedQuery(box_frame, np.zeros(spec.dim), 0.0, n, "init"),
                           spec, noise, ledger, rng)
        state = OptState(body, center, math.inf, ledger, terminal="budget_too_small")
    else:
        state = OptState(body, center, math.inf, ledger)
        try:
            state.incumbent_f = estimate_value(
                SmoothedQuery(box_frame, np.zeros(spec.dim), 0.0, params.n_fcp, "init"),
                spec, noise, ledger, rng)
        except BudgetExhausted as exc:
            state.incumbent_f = exc.partial
            state.terminal = "budget"
        while state.terminal is None:
            run_cut_iteration(state, params, spec, noise, rng,
                              volume_samples=volume_samples, trace=trace)

    x_hat = state.incumbent_x
    report = RunReport(
        dim=spec.dim, budget=n, seed=seed,
        simple_regret=float(evaluate(spec, x_hat)) - spec.min_value,
        iterations=state.iteration,
        queries_by_phase={p: ledger.per_phase.get(p, 0) for p in PHASES},
        anomalies=list(state.anomalies),
        wall_time=time.perf_counter() - started,
        params=params, degraded=params is None, terminal=state.terminal,
        final_body=state.body, history=state.history,
    )
    return x_hat, report
