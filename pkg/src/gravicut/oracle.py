"""Bounded convex test objectives, the noisy observation channel and the
query budget.

Points outside the domain box evaluate to :data:`INFEASIBLE` (``+inf``).
The noise channel leaves that marker untouched; estimators replace it with
the worst in-range value before averaging.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import BudgetExhausted
from .geometry import ConvexBody

INFEASIBLE = math.inf

OBJECTIVES = ("quadratic", "linear", "max_affine", "constant")
NOISE_KINDS = ("bernoulli", "additive_uniform", "noiseless")
PHASES = ("init", "fcp", "gradient")


def is_infeasible(y):
    return np.isinf(y)


@dataclass(frozen=True)
class ProblemSpec:
    """A test problem: objective, domain box and known minimizer.

    ``inner_radius`` is the radius of a Euclidean ball around the minimizer
    that fits in the domain; it is 0 for objectives whose minimizer sits on
    the boundary.
    """

    dim: int
    domain: ConvexBody
    objective_id: str
    minimizer: np.ndarray
    min_value: float
    inner_radius: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.objective_id not in OBJECTIVES:
            raise ValueError(f"unknown objective {self.objective_id!r}")
        if self.domain.dim != self.dim:
            raise ValueError("domain dimension mismatch")
        if not 0.0 <= self.min_value <= 1.0:
            raise ValueError("min_value must lie in [0, 1]")
        if self.inner_radius < 0.0:
            raise ValueError("inner_radius must be nonnegative")
        x_star = np.asarray(self.minimizer, dtype=float)
        gap = np.minimum(x_star - self.domain.lower, self.domain.upper - x_star)
        if np.min(gap) < self.inner_radius - 1e-12:
            raise ValueError("ball around the minimizer leaves the domain")
        object.__setattr__(self, "minimizer", x_star)

    @property
    def diameter(self):
        return self.domain.diameter

    @property
    def satisfies_assumption(self):
        return self.inner_radius > 0.0


def _clip01(v):
    return np.clip(v, 0.0, 1.0)


def evaluate(spec, x):
    """Noiseless objective value; :data:`INFEASIBLE` outside the domain.

    Vectorized over leading axes of ``x``.
    """
    x = np.asarray(x, dtype=float)
    p = spec.params
    kind = spec.objective_id
    if kind == "quadratic":
        diff = x - spec.minimizer
        value = np.minimum(1.0, spec.min_value + p["q"] * np.sum(diff * diff, axis=-1))
    elif kind == "linear":
        value = _clip01((x - p["anchor"]) @ p["slope"] + p["anchor_value"])
    elif kind == "max_affine":
        value = _clip01(np.max((x - spec.minimizer) @ p["slopes"].T, axis=-1)
                        + spec.min_value)
    else:
        value = np.full(x.shape[:-1], p["value"])
    inside = np.all((x >= spec.domain.lower) & (x <= spec.domain.upper), axis=-1)
    value = np.where(inside, value, INFEASIBLE)
    return float(value) if value.ndim == 0 else value


def _default_minimizer(dim, domain):
    signs = np.where(np.arange(dim) % 2 == 0, 1.0, -1.0)
    return domain.center + 0.125 * (domain.upper - domain.lower) * signs


def _inner_radius(domain, x_star):
    return float(np.min(np.minimum(x_star - domain.lower, domain.upper - x_star)))


def _domain(dim, domain):
    return ConvexBody.cube(dim) if domain is None else domain


def make_quadratic(dim, q=None, minimizer=None, min_value=0.0, domain=None):
    """``f(x) = min(1, min_value + q * ||x - minimizer||^2)``.

    The default ``q`` is the largest curvature for which the clip at 1 never
    binds on the domain, which keeps ``f`` convex there.
    """
    domain = _domain(dim, domain)
    x_star = _default_minimizer(dim, domain) if minimizer is None else np.asarray(
        minimizer, dtype=float)
    far = np.maximum(np.abs(domain.upper - x_star), np.abs(x_star - domain.lower))
    if q is None:
        q = (1.0 - min_value) / float(far @ far)
    if q < 0.0:
        raise ValueError("q must be nonnegative")
    return ProblemSpec(dim, domain, "quadratic", x_star, float(min_value),
                       _inner_radius(domain, x_star), {"q": float(q)})


def make_linear(dim, slope, anchor=None, anchor_value=0.5, domain=None):
    """``f(x) = clip(<slope, x - anchor> + anchor_value, 0, 1)``.

    The minimizer is a box corner, so ``inner_radius`` is 0: this objective
    is meant for estimator tests, not end-to-end runs.
    """
    domain = _domain(dim, domain)
    slope = np.asarray(slope, dtype=float)
    anchor = domain.center if anchor is None else np.asarray(anchor, dtype=float)
    params = {"slope": slope, "anchor": anchor, "anchor_value": float(anchor_value)}
    corner = np.where(slope >= 0.0, domain.lower, domain.upper)
    value = float(_clip01((corner - anchor) @ slope + anchor_value))
    return ProblemSpec(dim, domain, "linear", corner, value, 0.0, params)


def make_max_affine(dim, slopes=None, minimizer=None, min_value=0.0, domain=None):
    """``f(x) = clip(max_k <slopes[k], x - minimizer> + min_value, 0, 1)``.

    ``minimizer`` is a true minimizer only if the origin lies in the convex
    hull of the slopes; this is checked with a linear program. The default
    slopes ``+-s e_i`` give ``min_value + s * ||x - minimizer||_inf``.
    """
    domain = _domain(dim, domain)
    x_star = _default_minimizer(dim, domain) if minimizer is None else np.asarray(
        minimizer, dtype=float)
    if slopes is None:
        far = np.max(np.maximum(domain.upper - x_star, x_star - domain.lower))
        s = (1.0 - min_value) / far
        slopes = np.vstack([s * np.eye(dim), -s * np.eye(dim)])
    slopes = np.atleast_2d(np.asarray(slopes, dtype=float))
    # min t  s.t.  <a_k, v> <= t,  v in domain - x_star
    k = slopes.shape[0]
    res = scipy.optimize.linprog(
        np.r_[np.zeros(dim), 1.0],
        A_ub=np.hstack([slopes, -np.ones((k, 1))]),
        b_ub=np.zeros(k),
        bounds=[(lo, hi) for lo, hi in zip(domain.lower - x_star, domain.upper - x_star)]
        + [(None, None)],
    )
    if not res.success or res.fun < -1e-9:
        raise ValueError("minimizer is not a minimizer of the max-affine objective")
    return ProblemSpec(dim, domain, "max_affine", x_star, float(min_value),
                       _inner_radius(domain, x_star), {"slopes": slopes})


def make_constant(dim, value, domain=None):
    domain = _domain(dim, domain)
    x_star = domain.center
    return ProblemSpec(dim, domain, "constant", x_star, float(value),
                       _inner_radius(domain, x_star), {"value": float(value)})


def make_problem(objective_id, dim, **params):
    """Build a zoo problem from a string identifier and keyword parameters."""
    factories = {
        "quadratic": make_quadratic,
        "linear": make_linear,
        "max_affine": make_max_affine,
        "constant": make_constant,
    }
    try:
        factory = factories[objective_id]
    except KeyError:
        raise ValueError(f"unknown objective {objective_id!r}") from None
    return factory(dim, **params)


@dataclass(frozen=True)
class NoiseModel:
    """Observation channel: ``bernoulli``, ``additive_uniform`` or ``noiseless``."""

    kind: str = "bernoulli"
    width: float = 0.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "additive_uniform" and not 0.0 < self.width <= 0.25:
            raise ValueError("additive_uniform width must lie in (0, 0.25]")

    def observe(self, values, rng):
        values = np.asarray(values, dtype=float)
        if self.kind == "noiseless":
            return values.copy()
        feasible = np.isfinite(values)
        if self.kind == "bernoulli":
            draws = (rng.random(values.shape) < values).astype(float)
        else:
            draws = values + rng.uniform(-self.width, self.width, values.shape)
        return np.where(feasible, draws, INFEASIBLE)


class QueryLedger:
    """Hard counter of noisy queries, tallied per phase label."""

    def __init__(self, budget):
        if budget < 0:
            raise ValueError("budget must be nonnegative")
        self.budget = int(budget)
        self.used = 0
        self.per_phase = {}

    @property
    def remaining(self):
        return self.budget - self.used

    def charge(self, count, phase):
        if count > self.remaining:
            raise BudgetExhausted()
        self.used += count
        self.per_phase[phase] = self.per_phase.get(phase, 0) + count

    def __repr__(self):
        return f"QueryLedger(budget={self.budget}, used={self.used}, per_phase={self.per_phase})"


def query(spec, noise, x, phase, ledger, rng):
    """One noisy observation at ``x``.

    Raises
    ------
    BudgetExhausted
        If the ledger is already at its budget; nothing is evaluated.
    """
    if ledger.remaining <= 0:
        raise BudgetExhausted()
    ledger.charge(1, phase)
    return float(noise.observe(evaluate(spec, x), rng))


def query_many(spec, noise, points, phase, ledger, rng):
    """Sequential noisy observations at each row of ``points``.

    When fewer queries remain than rows, only the leading rows are observed
    and :class:`BudgetExhausted` is raised with those observations attached
    as ``partial``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    take = min(len(points), ledger.remaining)
    observed = np.empty(0)
    if take > 0:
        ledger.charge(take, phase)
        observed = noise.observe(evaluate(spec, points[:take]), rng)
    if take < len(points):
        raise BudgetExhausted(partial=observed, samples=take)
    return observed
