"""Convex bodies built from a box and halfspace cuts.

A :class:`ConvexBody` is an axis-aligned box intersected with a list of
halfspaces ``<normal, x> <= offset``. It is sampled with a hit-and-run chain
whose chords are computed in closed form, and its barycenter / covariance
estimates define an :class:`IsotropicFrame`, the affine map sending the body
to (near) isotropic position scaled by ``d**-0.5``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np

from .errors import DegenerateBody, EmptyCut, NotInterior

# Relative eigenvalue floor applied to empirical covariances.
COV_FLOOR = 1e-10
# Raw covariance condition number above which a body counts as degenerate.
MAX_CONDITION = 1e12
# Smallest body scale (std. dev.) relative to its position that float64
# still resolves comfortably.
MIN_RELATIVE_SCALE = 1e-9
# Attempts allowed when moving the witness onto the kept side of a cut.
WITNESS_RETRIES = 50


def default_burn_in(dim):
    return 100 * dim


def default_frame_samples(dim):
    return max(2000, 50 * dim * dim)


@dataclass(frozen=True)
class Halfspace:
    """The set ``{x : <normal, x> <= offset}``."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        normal = np.asarray(self.normal, dtype=float).copy()
        if normal.ndim != 1 or not np.all(np.isfinite(normal)):
            raise ValueError("halfspace normal must be a finite vector")
        if not np.linalg.norm(normal) > 0.0:
            raise ValueError("halfspace normal must be nonzero")
        if not math.isfinite(self.offset):
            raise ValueError("halfspace offset must be finite")
        normal.setflags(write=False)
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", float(self.offset))

    def contains(self, x):
        return np.asarray(x) @ self.normal <= self.offset


@dataclass
class ConvexBody:
    """Box ``[lower, upper]`` intersected with halfspace cuts.

    ``witness`` is a point strictly inside the body; it seeds every
    hit-and-run chain and is refreshed by :func:`sample_interior`.
    """

    lower: np.ndarray
    upper: np.ndarray
    cuts: tuple = ()
    witness: np.ndarray = field(default=None)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float).copy()
        self.upper = np.asarray(self.upper, dtype=float).copy()
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length")
        if not np.all(self.upper > self.lower):
            raise ValueError("box must have positive side lengths")
        self.cuts = tuple(self.cuts)
        for cut in self.cuts:
            if cut.normal.shape != self.lower.shape:
                raise ValueError("cut dimension does not match the box")
        if self.witness is None:
            self.witness = self.center.copy()
        self.witness = np.asarray(self.witness, dtype=float).copy()
        if not self.strictly_contains(self.witness):
            raise NotInterior("witness is not strictly inside the body")

    @classmethod
    def box(cls, lower, upper):
        return cls(lower, upper)

    @classmethod
    def cube(cls, dim, half_width=1.0):
        return cls(-half_width * np.ones(dim), half_width * np.ones(dim))

    @property
    def dim(self):
        return self.lower.size

    @property
    def center(self):
        """Center of the base box (its exact barycenter)."""
        return 0.5 * (self.lower + self.upper)

    @property
    def diameter(self):
        """Diameter of the base box."""
        return float(np.linalg.norm(self.upper - self.lower))

    @cached_property
    def cut_matrix(self):
        if not self.cuts:
            return np.zeros((0, self.dim)), np.zeros(0)
        A = np.array([c.normal for c in self.cuts])
        b = np.array([c.offset for c in self.cuts])
        return A, b

    def contains(self, x):
        """Membership test; vectorized over leading axes of ``x``."""
        x = np.asarray(x, dtype=float)
        inside = np.all((x >= self.lower) & (x <= self.upper), axis=-1)
        A, b = self.cut_matrix
        if len(b):
            inside &= np.all(x @ A.T <= b, axis=-1)
        return inside

    def strictly_contains(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.all((x > self.lower) & (x < self.upper), axis=-1)
        A, b = self.cut_matrix
        if len(b):
            inside &= np.all(x @ A.T < b, axis=-1)
        return inside

    def with_cut(self, halfspace, witness=None):
        """New body with one more cut. The witness must be supplied if the
        current one is not strictly on the kept side."""
        if witness is None:
            witness = self.witness
        return ConvexBody(self.lower, self.upper, self.cuts + (halfspace,), witness)

    def prefix(self, n_cuts):
        """Body made of the base box and the first ``n_cuts`` cuts."""
        return ConvexBody(self.lower, self.upper, self.cuts[:n_cuts], self.witness)


@dataclass(frozen=True)
class IsotropicFrame:
    """Affine whitening map ``z = (1/sqrt(d)) S^{-1} (x - mu)``.

    ``sqrt_cov`` is ``S``, a symmetric square root of the covariance.
    """

    mu: np.ndarray
    sqrt_cov: np.ndarray
    inv_sqrt_cov: np.ndarray

    @property
    def dim(self):
        return self.mu.size

    @classmethod
    def from_covariance(cls, mu, cov):
        """Build a frame from a covariance matrix.

        Raises
        ------
        DegenerateBody
            If the covariance has condition number above ``MAX_CONDITION``
            or its scale is below float64 resolution at ``mu``.
        """
        mu = np.asarray(mu, dtype=float)
        cov = np.asarray(cov, dtype=float)
        cov = 0.5 * (cov + cov.T)
        eigval, eigvec = np.linalg.eigh(cov)
        top = eigval[-1]
        if not (np.all(np.isfinite(eigval)) and top > 0.0):
            raise DegenerateBody("covariance is not positive")
        if eigval[0] <= top / MAX_CONDITION:
            raise DegenerateBody(
                f"covariance condition number exceeds {MAX_CONDITION:g}"
            )
        scale_floor = MIN_RELATIVE_SCALE * (1.0 + np.max(np.abs(mu)))
        if math.sqrt(eigval[0]) < scale_floor:
            raise DegenerateBody("body is below float64 resolution")
        eigval = np.maximum(eigval, COV_FLOOR * top)
        root = np.sqrt(eigval)
        sqrt_cov = (eigvec * root) @ eigvec.T
        inv_sqrt_cov = (eigvec / root) @ eigvec.T
        return cls(
            mu.copy(),
            0.5 * (sqrt_cov + sqrt_cov.T),
            0.5 * (inv_sqrt_cov + inv_sqrt_cov.T),
        )

    @classmethod
    def identity(cls, dim):
        """Frame with ``mu = 0`` and ``S = I`` (whitening is ``x/sqrt(d)``)."""
        return cls(np.zeros(dim), np.eye(dim), np.eye(dim))

    @classmethod
    def for_box(cls, body):
        """Exact frame of the uniform distribution on the base box."""
        half = 0.5 * (body.upper - body.lower)
        return cls(
            body.center.copy(), np.diag(half / math.sqrt(3.0)),
            np.diag(math.sqrt(3.0) / half),
        )

    def whiten(self, x):
        x = np.asarray(x, dtype=float)
        return (x - self.mu) @ self.inv_sqrt_cov / math.sqrt(self.dim)

    def unwhiten(self, z):
        z = np.asarray(z, dtype=float)
        return math.sqrt(self.dim) * (z @ self.sqrt_cov) + self.mu


@numba.njit(cache=True)
def _chord_kernel(lower, upper, A, b, x, u):
    t_lo = -np.inf
    t_hi = np.inf
    for i in range(x.size):
        ui = u[i]
        if ui > 0.0:
            t_hi = min(t_hi, (upper[i] - x[i]) / ui)
            t_lo = max(t_lo, (lower[i] - x[i]) / ui)
        elif ui < 0.0:
            t_hi = min(t_hi, (lower[i] - x[i]) / ui)
            t_lo = max(t_lo, (upper[i] - x[i]) / ui)
    for k in range(b.size):
        au = 0.0
        ax = 0.0
        for i in range(x.size):
            au += A[k, i] * u[i]
            ax += A[k, i] * x[i]
        if au > 0.0:
            t_hi = min(t_hi, (b[k] - ax) / au)
        elif au < 0.0:
            t_lo = max(t_lo, (b[k] - ax) / au)
    return t_lo, t_hi


@numba.njit(cache=True)
def _hit_and_run_kernel(lower, upper, A, b, x0, directions, uniforms, burn_in, out):
    # Returns -1 on success, else the index of the step whose chord failed.
    x = x0.copy()
    d = x.size
    for step in range(directions.shape[0]):
        u = directions[step]
        norm = 0.0
        for i in range(d):
            norm += u[i] * u[i]
        norm = np.sqrt(norm)
        if norm == 0.0:
            return step
        u = u / norm
        t_lo, t_hi = _chord_kernel(lower, upper, A, b, x, u)
        if not (t_lo < 0.0 < t_hi) or not np.isfinite(t_hi - t_lo):
            return step
        t = t_lo + uniforms[step] * (t_hi - t_lo)
        for i in range(d):
            x[i] += t * u[i]
        if step >= burn_in:
            out[step - burn_in] = x
    return -1


def chord(body, point, direction):
    """Parameter interval ``(t_lo, t_hi)`` of the line through ``point``.

    ``point + t * direction`` lies in the body exactly for ``t`` in the
    closed interval; ``t_lo < 0 < t_hi`` for an interior point.

    Raises
    ------
    NotInterior
        If ``point`` is not strictly inside ``body``.
    """
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if not np.linalg.norm(direction) > 0.0:
        raise ValueError("direction must be nonzero")
    if not body.strictly_contains(point):
        raise NotInterior("chord origin is not strictly inside the body")
    A, b = body.cut_matrix
    return _chord_kernel(body.lower, body.upper, A, b, point, direction)


def _run_chain(body, start, steps, burn_in, rng):
    directions = rng.standard_normal((steps + burn_in, body.dim))
    uniforms = rng.random(steps + burn_in)
    out = np.empty((steps, body.dim))
    A, b = body.cut_matrix
    failed = _hit_and_run_kernel(
        body.lower, body.upper, np.ascontiguousarray(A), b,
        np.asarray(start, dtype=float), directions, uniforms, burn_in, out,
    )
    if failed >= 0:
        raise DegenerateBody(f"hit-and-run chord collapsed at step {failed}")
    return out


def sample_interior(body, count, burn_in, rng):
    """Draw ``count`` hit-and-run iterates from the body's witness.

    The first ``burn_in`` iterates are discarded and the last returned
    iterate becomes the new witness.

    Returns
    -------
    ndarray of shape (count, dim)
    """
    if count < 1 or burn_in < 0:
        raise ValueError("count must be positive and burn_in nonnegative")
    if not body.strictly_contains(body.witness):
        raise NotInterior("witness is not strictly inside the body")
    samples = _run_chain(body, body.witness, count, burn_in, rng)
    last = samples[-1]
    if body.strictly_contains(last):
        body.witness = last.copy()
    return samples


def estimate_frame(body, rng, sample_count=None, burn_in=None):
    """Whitening frame from the empirical mean and covariance of the body."""
    d = body.dim
    if sample_count is None:
        sample_count = default_frame_samples(d)
    if burn_in is None:
        burn_in = default_burn_in(d)
    if sample_count < 10 * d * d:
        raise ValueError("sample_count must be at least 10 * dim**2")
    samples = sample_interior(body, sample_count, burn_in, rng)
    mu = samples.mean(axis=0)
    cov = np.atleast_2d(np.cov(samples, rowvar=False))
    return IsotropicFrame.from_covariance(mu, cov)


def cut_halfspace(frame, z, gradient):
    """Halfspace ``<F(x) - z, gradient> <= 0`` in original coordinates."""
    gradient = np.asarray(gradient, dtype=float)
    if not np.linalg.norm(gradient) > 0.0:
        raise ValueError("gradient estimate must be nonzero")
    normal = frame.inv_sqrt_cov @ gradient / math.sqrt(frame.dim)
    offset = normal @ frame.mu + gradient @ np.asarray(z, dtype=float)
    return Halfspace(normal, offset)


def apply_cut(body, frame, z, gradient, rng):
    """Intersect ``body`` with the halfspace through ``F^{-1}(z)``.

    The old witness is kept when it is strictly on the kept side. Otherwise
    it is moved along its chord through the cut point ``F^{-1}(z)`` (then
    along ``-normal``) to the middle of the kept part of that chord; when
    both chords miss the kept side a hit-and-run step is taken and the
    search retried, up to ``WITNESS_RETRIES`` times.

    Raises
    ------
    EmptyCut
        If no kept interior point is found.
    """
    halfspace = cut_halfspace(frame, z, gradient)
    w, offset = halfspace.normal, halfspace.offset
    x = body.witness.copy()
    if x @ w < offset:
        return body.with_cut(halfspace, x)
    anchor = frame.unwhiten(np.asarray(z, dtype=float))
    A, b = body.cut_matrix
    for _ in range(WITNESS_RETRIES):
        for u in (anchor - x, -w):
            au = u @ w
            if not au < 0.0:
                continue
            _, t_hi = _chord_kernel(body.lower, body.upper, A, b, x, u)
            t_star = (offset - x @ w) / au
            if t_star < t_hi:
                candidate = x + 0.5 * (t_star + t_hi) * u
                if body.strictly_contains(candidate) and candidate @ w < offset:
                    return body.with_cut(halfspace, candidate)
        try:
            x = _run_chain(body, x, 1, 0, rng)[0]
        except DegenerateBody as exc:
            raise EmptyCut("witness refresh failed") from exc
    raise EmptyCut("no interior point on the kept side of the cut")


def estimate_volume_fraction(body_after, body_before, sample_count, rng, burn_in=None):
    """Monte-Carlo estimate of ``vol(body_after) / vol(body_before)``."""
    if burn_in is None:
        burn_in = default_burn_in(body_before.dim)
    samples = sample_interior(body_before, sample_count, burn_in, rng)
    return float(np.mean(body_after.contains(samples)))
