"""Gradient-enhanced radial basis function surrogate (inverse multiquadric).

Gradient equations need only first-order kernel differentiability; they are
accommodated by extra kernels centered at non-sampled points, giving a
square N(1+d) system solved by truncated SVD. The shape parameter is tuned
by leave-one-out cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .lowdisc import SamplePlan, gaussian_plan

MIN_CENTER_SEPARATION = 1e-6
SVD_CUTOFF_PER_SIZE = 1e-13  # relative cutoff is system_size * this


class DegenerateSystemError(RuntimeError):
    pass


class TuningError(RuntimeError):
    pass


def imq_kernel(r, a):
    """Inverse multiquadric value and derivative with respect to r.

    value = 1 / sqrt(r^2 + a^2); derivative = -r (r^2 + a^2)^(-3/2).
    """
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0):
        raise ValueError("distances must be nonnegative")
    base = r * r + a * a
    value = base**-0.5
    return value, -r * base**-1.5


def choose_extra_centers(plan: SamplePlan, count: int) -> np.ndarray:
    """Non-sampled centers from the continued Sobol stream.

    Continues the plan's sequence (indices after the samples) through the
    Gaussian map; candidates closer than ``MIN_CENTER_SEPARATION`` to any
    sample are rejected and replaced by further stream points.
    """
    return _stream_centers(plan.points, count, plan.continuation_skip())


def _stream_centers(samples, count, skip):
    samples = np.atleast_2d(samples)
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return np.empty((0, samples.shape[1]))
    collected = []
    n_found = 0
    while n_found < count:
        batch = gaussian_plan(samples.shape[1], count - n_found, skip)
        skip = batch.continuation_skip()
        keep = cdist(batch.points, samples).min(axis=1) > MIN_CENTER_SEPARATION
        collected.append(batch.points[keep])
        n_found += int(keep.sum())
    return np.vstack(collected)[:count]


def assemble_gerbf(samples, values, gradients, centers, a):
    """Square interpolation system (A, f) for values plus gradients.

    Row block 0 holds kernel values at the samples; row block j (1..d)
    holds d phi_i / d xi_j at the samples. The right-hand side stacks the
    sampled values then the gradient components in the same block order.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    gradients = np.asarray(gradients, dtype=np.float64)
    n, d = samples.shape
    if values.shape != (n,) or gradients.shape != (n, d):
        raise ValueError("values must be (N,), gradients (N, d)")
    if centers.shape != (n * (1 + d), d):
        raise ValueError(f"expected {n * (1 + d)} centers of dimension {d}")

    diff = samples[:, None, :] - centers[None, :, :]  # (N, M, d)
    base = (diff**2).sum(axis=2) + a * a
    a_mat = np.empty((n * (1 + d), n * (1 + d)))
    a_mat[:n] = base**-0.5
    dphi = -(base**-1.5)
    for j in range(d):
        a_mat[n * (1 + j): n * (2 + j)] = diff[:, :, j] * dphi
    rhs = np.concatenate([values, gradients.T.ravel()])
    return a_mat, rhs


def solve_truncated_svd(a_mat, rhs, rel_cutoff=None):
    """Minimum-norm least-squares solution with small singular values zeroed.

    Singular values with ``s / s_max <= rel_cutoff`` are discarded; the
    default cutoff is ``max(shape) * 1e-13``. Returns (solution, retained
    rank); raises if every singular value is discarded.
    """
    a_mat = np.asarray(a_mat, dtype=np.float64)
    if rel_cutoff is None:
        rel_cutoff = max(a_mat.shape) * SVD_CUTOFF_PER_SIZE
    u, s, vt = np.linalg.svd(a_mat, full_matrices=False)
    keep = s > rel_cutoff * s[0]
    rank = int(keep.sum())
    if rank == 0:
        raise DegenerateSystemError("all singular values fall below the cutoff")
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return vt.T @ (inv * (u.T @ rhs)), rank


@dataclass(frozen=True)
class GerbfSurrogate:
    """Fitted gradient-enhanced RBF expansion sum_i w_i phi_i(|xi - c_i|)."""

    centers: np.ndarray   # (N(1+d), d); the first N rows are the samples
    weights: np.ndarray
    shape: float
    n_samples: int
    rank: int
    kernel: str = "inverse_multiquadric"

    def __post_init__(self):
        self.centers.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    def __call__(self, points):
        return eval_gerbf(self, points)

    def gradient(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        diff = pts[:, None, :] - self.centers[None, :, :]
        dphi = -(((diff**2).sum(axis=2) + self.shape**2) ** -1.5)
        return np.einsum("nm,nmd->nd", dphi * self.weights, diff)

    def to_text(self) -> str:
        """Versioned text serialization (shape, centers, weights)."""
        lines = [f"gerbf-v1 kernel={self.kernel} a={self.shape!r} "
                 f"n_samples={self.n_samples} rank={self.rank}"]
        for c, w in zip(self.centers, self.weights):
            lines.append(" ".join(repr(v) for v in c) + f" | {w!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "GerbfSurrogate":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = dict(item.split("=") for item in lines[0].split()[1:])
        centers, weights = [], []
        for ln in lines[1:]:
            left, right = ln.split("|")
            centers.append([float(v) for v in left.split()])
            weights.append(float(right))
        return cls(centers=np.asarray(centers), weights=np.asarray(weights),
                   shape=float(head["a"]), n_samples=int(head["n_samples"]),
                   rank=int(head["rank"]), kernel=head["kernel"])


def fit_gerbf(plan: SamplePlan, values, gradients, a=None, candidates=None) -> GerbfSurrogate:
    """Fit on a sample plan; tunes the shape parameter when ``a`` is None."""
    samples = plan.points
    extra = choose_extra_centers(plan, samples.shape[0] * samples.shape[1])
    if a is None:
        a = tune_shape_loo(samples, values, gradients, candidates, extra_centers=extra)
    centers = np.vstack([samples, extra])
    a_mat, rhs = assemble_gerbf(samples, values, gradients, centers, a)
    weights, rank = solve_truncated_svd(a_mat, rhs)
    return GerbfSurrogate(centers=centers, weights=weights, shape=float(a),
                          n_samples=samples.shape[0], rank=rank)


def eval_gerbf(surrogate: GerbfSurrogate, points, chunk: int = 512):
    """Weighted kernel sum at one or many points.

    Squared distances come from the inner-product expansion so the chunked
    evaluation runs through matrix products.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = np.empty(pts.shape[0])
    a2 = surrogate.shape**2
    centers_t = surrogate.centers.T.copy()
    c2 = (surrogate.centers**2).sum(axis=1)
    for start in range(0, pts.shape[0], chunk):
        block = pts[start:start + chunk]
        d2 = (block**2).sum(axis=1)[:, None] + c2[None, :] - 2.0 * (block @ centers_t)
        np.maximum(d2, 0.0, out=d2)
        d2 += a2
        np.sqrt(d2, out=d2)
        np.divide(1.0, d2, out=d2)
        out[start:start + chunk] = d2 @ surrogate.weights
    return float(out[0]) if single else out


def default_shape_grid(samples, n_candidates: int = 16) -> np.ndarray:
    """Log-spaced candidates over [0.1, 10] x median pairwise distance."""
    samples = np.atleast_2d(samples)
    d = cdist(samples, samples)
    median = np.median(d[np.triu_indices_from(d, k=1)])
    return median * np.logspace(-1.0, 1.0, n_candidates)


def tune_shape_loo(samples, values, gradients, candidates=None, extra_centers=None):
    """Shape parameter minimizing the leave-one-out squared error on values.

    Each fold removes one sample's 1+d equations together with its center
    and the d extra centers assigned to it, fits the remaining system, and
    scores the held-out value. Ties break toward the smaller candidate.

    The fold errors are obtained from the full-system inverse via the block
    cross-validation identity (equivalent to refitting each fold when no
    singular values are truncated); singular folds fall back to refits.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    gradients = np.asarray(gradients, dtype=np.float64)
    n, d = samples.shape
    if n < 3:
        raise ValueError("leave-one-out tuning needs at least 3 samples")
    if candidates is None:
        candidates = default_shape_grid(samples)
    candidates = np.sort(np.asarray(candidates, dtype=np.float64))
    if candidates.size == 0:
        raise ValueError("candidate grid is empty")
    if candidates.size == 1:
        return float(candidates[0])
    if extra_centers is None:
        # deterministic fallback for raw sample arrays without stream provenance
        extra_centers = _stream_centers(samples, n * d, skip=2**20)

    errors = np.full(candidates.size, np.inf)
    for idx, a in enumerate(candidates):
        err = _loo_error(samples, values, gradients, extra_centers, float(a))
        if err is not None:
            errors[idx] = err
    if not np.isfinite(errors).any():
        raise TuningError("every candidate produced a degenerate system")
    return float(candidates[int(np.argmin(errors))])


def _fold_indices(i, n, d):
    rows = np.concatenate([[i], n + i + n * np.arange(d)])
    cols = np.concatenate([[i], n + i * d + np.arange(d)])
    return rows, cols


def _loo_error(samples, values, gradients, extra_centers, a):
    n, d = samples.shape
    centers = np.vstack([samples, extra_centers])
    a_mat, rhs = assemble_gerbf(samples, values, gradients, centers, a)
    try:
        inv = np.linalg.inv(a_mat)
    except np.linalg.LinAlgError:
        return _loo_error_refit(samples, values, gradients, extra_centers, a)
    w_full = inv @ rhs
    total = 0.0
    for i in range(n):
        rows, cols = _fold_indices(i, n, d)
        block = inv[np.ix_(cols, rows)]
        try:
            e = np.linalg.solve(block, w_full[cols])
        except np.linalg.LinAlgError:
            return _loo_error_refit(samples, values, gradients, extra_centers, a)
        total += float(e[0]) ** 2
    return total


def _loo_error_refit(samples, values, gradients, extra_centers, a):
    """Direct per-fold refits; the reference path for near-singular systems."""
    n, d = samples.shape
    centers = np.vstack([samples, extra_centers])
    a_mat, rhs = assemble_gerbf(samples, values, gradients, centers, a)
    size = n * (1 + d)
    total = 0.0
    for i in range(n):
        rows, cols = _fold_indices(i, n, d)
        keep_r = np.setdiff1d(np.arange(size), rows)
        keep_c = np.setdiff1d(np.arange(size), cols)
        try:
            w, _ = solve_truncated_svd(a_mat[np.ix_(keep_r, keep_c)], rhs[keep_r])
        except DegenerateSystemError:
            return None
        pred = a_mat[i, keep_c] @ w
        total += float(values[i] - pred) ** 2
    return total
