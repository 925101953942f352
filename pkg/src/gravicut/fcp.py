"""Search for a good cutting point near the whitened barycenter.

Starting from ``z0``, each round estimates ``g`` at the current point and at
``2**i`` random points of the ball of radius ``2c`` for every level
``i = 1 .. I_N``. If some candidate beats the current estimate by more than
a round-dependent threshold, the search moves there and starts a new round;
otherwise the current point is returned. Each move grows the required gap
by a factor ``17/16``, so with values in ``[0, 1]`` the number of rounds is
logarithmic in ``N``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import smoothing
from .errors import BudgetExhausted
from .oracle import query_many
from .smoothing import INFEASIBLE_SUBSTITUTE, SmoothedQuery, estimate_value, sample_ball

GROWTH = 17.0 / 16.0


def level_count(n):
    return math.ceil(math.log2(n)) + 1


def max_rounds(n):
    return math.ceil(math.log(2 * n) / math.log(GROWTH) + 1)


@dataclass(frozen=True)
class FcpParams:
    c: float
    n: int
    delta: float

    def __post_init__(self):
        if self.c <= 0 or self.n < 1 or not 0 < self.delta < 1:
            raise ValueError("need c > 0, n >= 1 and 0 < delta < 1")

    @property
    def levels(self):
        return level_count(self.n)

    @property
    def max_depth(self):
        return max_rounds(self.n)

    def candidate_samples(self, i):
        return max(1, math.ceil(self.n / (2 ** i * i * i)))

    def threshold(self, s, i):
        """Gain a level-``i`` candidate needs at round ``s`` to be selected."""
        eta = smoothing.eta_conc(2 ** i * i * i * self.max_depth / self.delta)
        return GROWTH ** s / (16 * self.n) + 4 * eta * math.sqrt(i * i * 2 ** i / self.n)


@dataclass
class FcpResult:
    z: np.ndarray
    g_hat: float
    depth: int
    queries_used: int
    exhausted: bool = False
    anomalies: list = field(default_factory=list)


def _estimate_points(frame, points, m, spec, noise, ledger, rng):
    # Same queries, in the same order, as one estimate_value(c=0) per point.
    x = np.repeat(frame.unwhiten(points), m, axis=0)
    y = query_many(spec, noise, x, "fcp", ledger, rng)
    y = np.where(np.isinf(y), INFEASIBLE_SUBSTITUTE, y)
    return y.reshape(len(points), m).mean(axis=1)


def run_fcp(z0, frame, params, spec, noise, ledger, rng, trace=None):
    """Find a cutting point starting from the whitened point ``z0``.

    Among passing candidates the one with the largest excess over its
    threshold is taken. At depth ``params.max_depth`` the search stops and
    records a ``fcp_depth_cap`` anomaly, returning the last selected
    candidate with its own estimate. If the budget runs out, the current
    point is returned with ``exhausted`` set.

    ``trace``, if given, is called with one dict per round.
    """
    z = np.asarray(z0, dtype=float).copy()
    d = z.size
    start = ledger.used
    g_z = None
    s = 0

    def result(exhausted=False, anomalies=()):
        return FcpResult(z, g_z, s, ledger.used - start, exhausted, list(anomalies))

    while True:
        if s >= params.max_depth:
            return result(anomalies=["fcp_depth_cap"])
        try:
            g_z = estimate_value(
                SmoothedQuery(frame, z, 0.0, params.n, "fcp"), spec, noise, ledger, rng)
        except BudgetExhausted as exc:
            if exc.partial is not None:
                g_z = exc.partial
            return result(exhausted=True)

        best = None
        passing = 0
        for i in range(1, params.levels + 1):
            candidates = z + sample_ball(d, 2 * params.c, rng, 2 ** i)
            try:
                g_cand = _estimate_points(frame, candidates, params.candidate_samples(i),
                                          spec, noise, ledger, rng)
            except BudgetExhausted:
                return result(exhausted=True)
            excess = g_cand - g_z - params.threshold(s, i)
            ok = np.flatnonzero(excess >= 0)
            passing += ok.size
            if ok.size:
                j = ok[np.argmax(excess[ok])]
                if best is None or excess[j] > best[0]:
                    best = (excess[j], candidates[j], float(g_cand[j]))

        if trace is not None:
            trace({"event": "fcp_round", "s": s, "z": z.tolist(), "g_hat": g_z,
                   "passing": passing})
        if best is None:
            return result()
        _, z, g_z = best
        s += 1
