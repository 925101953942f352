"""Estimators of the ball-smoothed objective and of its gradient.

For a frame ``F`` and radius ``c`` the smoothed function in whitened
coordinates is ``g_c(z) = E f(F^{-1}(z + Z))`` with ``Z`` uniform in the
ball of radius ``c``. Its gradient equals ``(d / c^2) E[Z f(F^{-1}(z + Z))]``
with ``Z`` uniform on the sphere of radius ``c``, which gives a one-point
estimator from zeroth-order observations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExhausted
from .oracle import query_many

# Observation substituted for out-of-domain queries.
INFEASIBLE_SUBSTITUTE = 1.0


def sample_sphere(dim, radius, rng, size=None):
    """Uniform draw(s) on the sphere of the given radius (normalized Gaussians)."""
    if radius <= 0:
        raise ValueError("sphere radius must be positive")
    shape = (dim,) if size is None else (size, dim)
    g = rng.standard_normal(shape)
    return radius * g / np.linalg.norm(g, axis=-1, keepdims=True)


def sample_ball(dim, radius, rng, size=None):
    """Uniform draw(s) in the ball: Gaussian direction times ``radius * U**(1/dim)``."""
    if radius < 0:
        raise ValueError("ball radius must be nonnegative")
    direction = sample_sphere(dim, 1.0, rng, size)
    u = rng.random(() if size is None else (size, 1))
    return radius * u ** (1.0 / dim) * direction


def eta_conc(inverse_delta):
    """Concentration width ``4 sqrt(log(2 / delta))`` given ``1 / delta``."""
    if inverse_delta <= 0 or 2.0 * inverse_delta < 1.0:
        raise ValueError("eta_conc needs 2 * inverse_delta >= 1")
    return 4.0 * math.sqrt(math.log(2.0 * inverse_delta))


@dataclass(frozen=True)
class SmoothedQuery:
    """Where and how to estimate ``g_c``: whitened point, radius, sample count."""

    frame: object
    z: np.ndarray
    c: float
    n_samples: int
    phase: str = "fcp"

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("smoothing radius must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("sample count must be positive")
        object.__setattr__(self, "z", np.asarray(self.z, dtype=float))


def _observe(q, offsets, spec, noise, ledger, rng):
    points = q.frame.unwhiten(q.z + offsets)
    try:
        y = query_many(spec, noise, points, q.phase, ledger, rng)
        return y, False
    except BudgetExhausted as exc:
        return exc.partial, True


def estimate_value(q, spec, noise, ledger, rng):
    """Average of ``n_samples`` noisy observations around ``q.z``.

    With ``c == 0`` every observation is taken at ``F^{-1}(z)`` itself.

    Raises
    ------
    BudgetExhausted
        With the average of the observations actually taken as ``partial``
        (``None`` if there were none).
    """
    d = q.z.size
    if q.c == 0:
        offsets = np.zeros((q.n_samples, d))
    else:
        offsets = sample_ball(d, q.c, rng, q.n_samples)
    y, exhausted = _observe(q, offsets, spec, noise, ledger, rng)
    y = np.where(np.isinf(y), INFEASIBLE_SUBSTITUTE, y)
    value = float(np.mean(y)) if y.size else None
    if exhausted:
        raise BudgetExhausted(partial=value, samples=y.size)
    return value


def estimate_gradient(q, spec, noise, ledger, rng):
    """Sphere-sampling estimate ``(d / (c^2 N)) sum_i Z_i y_i`` of ``grad g_c(z)``.

    Raises
    ------
    BudgetExhausted
        With the estimate over the observations actually taken as
        ``partial`` (``None`` if there were none).
    """
    if q.c <= 0:
        raise ValueError("gradient estimation needs a positive radius")
    d = q.z.size
    offsets = sample_sphere(d, q.c, rng, q.n_samples)
    y, exhausted = _observe(q, offsets, spec, noise, ledger, rng)
    y = np.where(np.isinf(y), INFEASIBLE_SUBSTITUTE, y)
    m = y.size
    grad = d / (q.c ** 2 * m) * (y @ offsets[:m]) if m else None
    if exhausted:
        raise BudgetExhausted(partial=grad, samples=m)
    return grad
