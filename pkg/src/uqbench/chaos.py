"""Multivariate Hermite polynomial chaos.

Total-degree probabilists' Hermite basis (norm ||He_n||^2 = n!), sparse
Gauss-Hermite (Smolyak) projection, gradient-enhanced point collocation,
and closed-form moments from the coefficient vector.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e

from .rbf import solve_truncated_svd


@dataclass(frozen=True)
class PcBasis:
    """Graded-lexicographic total-degree multi-index set, |alpha| <= order.

    Index 0 is the constant polynomial; the term count is
    ``(order + dimension)! / (order! dimension!)``.
    """

    dimension: int
    order: int
    indices: np.ndarray  # (K, d) int

    def __post_init__(self):
        self.indices.setflags(write=False)

    @property
    def size(self) -> int:
        return self.indices.shape[0]

    def norms_sq(self) -> np.ndarray:
        """Gaussian-measure squared norms prod_j alpha_j! per basis member."""
        fact = np.array([math.factorial(n) for n in range(self.order + 1)], dtype=np.float64)
        return fact[self.indices].prod(axis=1)


def build_basis(d: int, p: int) -> PcBasis:
    """All multi-indices with total degree <= p, graded-lexicographic."""
    if d < 1 or p < 0:
        raise ValueError("need dimension >= 1 and order >= 0")
    k = math.comb(p + d, d)
    if k > 10**7:
        raise OverflowError(f"basis of {k} terms is beyond practical size")
    rows = []
    for degree in range(p + 1):
        rows.extend(_compositions(degree, d))
    indices = np.asarray(rows, dtype=np.int64)
    assert indices.shape[0] == k
    return PcBasis(dimension=d, order=p, indices=indices)


def _compositions(total, parts):
    """Weak compositions of ``total`` into ``parts``, first part descending."""
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def hermite_eval(alpha, xi):
    """One multivariate probabilists' Hermite polynomial and its gradient.

    Value is ``prod_j He_{alpha_j}(xi_j)``; partials use He'_n = n He_{n-1}.
    """
    alpha = np.asarray(alpha, dtype=np.int64)
    xi = np.asarray(xi, dtype=np.float64)
    d = alpha.size
    vals = np.array([_he(int(alpha[j]), xi[j]) for j in range(d)])
    value = vals.prod()
    grad = np.zeros(d)
    for j in range(d):
        if alpha[j] > 0:
            others = np.prod(np.delete(vals, j))
            grad[j] = alpha[j] * _he(int(alpha[j]) - 1, xi[j]) * others
    return float(value), grad


def _he(n, x):
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    return hermite_e.hermeval(x, coeffs)


def hermite_design(basis: PcBasis, points) -> np.ndarray:
    """Design matrix of basis values at points, shape (n, K)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    factors = _dim_factors(basis, points)
    out = np.ones((points.shape[0], basis.size))
    for f in factors:
        out *= f
    return out


def hermite_design_gradients(basis: PcBasis, points) -> np.ndarray:
    """Per-variable partial-derivative design blocks, shape (d, n, K)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, d = points.shape
    vander = [hermite_e.hermevander(points[:, j], basis.order) for j in range(d)]
    factors = [vander[j][:, basis.indices[:, j]] for j in range(d)]

    prefix = np.ones((d + 1, n, basis.size))
    for j in range(d):
        prefix[j + 1] = prefix[j] * factors[j]
    suffix = np.ones((d + 1, n, basis.size))
    for j in range(d - 1, -1, -1):
        suffix[j] = suffix[j + 1] * factors[j]

    out = np.empty((d, n, basis.size))
    for j in range(d):
        alpha_j = basis.indices[:, j]
        dfac = alpha_j * vander[j][:, np.maximum(alpha_j - 1, 0)]
        dfac[:, alpha_j == 0] = 0.0
        out[j] = prefix[j] * dfac * suffix[j + 1]
    return out


def _dim_factors(basis, points):
    return [hermite_e.hermevander(points[:, j], basis.order)[:, basis.indices[:, j]]
            for j in range(points.shape[1])]


@dataclass(frozen=True)
class SparseQuadrature:
    """Smolyak sparse Gauss-Hermite rule for the standard Gaussian measure.

    Weights may be negative; they sum to 1. The rule is exact for all
    polynomials of total degree <= 2 * level - 1.
    """

    dimension: int
    level: int
    nodes: np.ndarray    # (M, d)
    weights: np.ndarray  # (M,)
    merged: bool = True

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def node_count(self) -> int:
        return self.nodes.shape[0]

    def integrate(self, values) -> float:
        return float(self.weights @ np.asarray(values, dtype=np.float64))


def _gauss_hermite_1d(m):
    x, w = hermite_e.hermegauss(m)
    return x, w / w.sum()


def sparse_gauss_hermite(d: int, level: int) -> SparseQuadrature:
    """Smolyak combination of univariate Gauss-Hermite rules.

    Uses the linear growth rule (the level-l univariate member has l nodes),
    which gives 19 nodes for (d=9, level 2) and 181 for (d=9, level 3).
    Coincident nodes across member grids are merged by weight summation at
    coordinate tolerance 1e-12.
    """
    if d < 1 or level < 1:
        raise ValueError("need d >= 1 and level >= 1")
    rules = {m: _gauss_hermite_1d(m) for m in range(1, level + 1)}
    big_l = d + level - 1

    merged: dict[tuple, float] = {}
    coords: dict[tuple, np.ndarray] = {}
    lo = max(d, big_l - d + 1)
    for excess in range(lo - d, level):
        coeff = (-1) ** (big_l - d - excess) * math.comb(d - 1, big_l - d - excess)
        for bump in _sparse_level_vectors(excess, d):
            axes = [rules[1 + b] for b in bump]
            for combo in itertools.product(*[range(x[0].size) for x in axes]):
                node = np.array([axes[j][0][combo[j]] for j in range(d)])
                wgt = coeff * math.prod(axes[j][1][combo[j]] for j in range(d))
                key = tuple(np.round(node, 12))
                if key in merged:
                    merged[key] += wgt
                else:
                    merged[key] = wgt
                    coords[key] = node

    keys = sorted(merged)
    nodes = np.array([coords[k] for k in keys]).reshape(len(keys), d)
    weights = np.array([merged[k] for k in keys])
    return SparseQuadrature(dimension=d, level=level, nodes=nodes, weights=weights)


def _sparse_level_vectors(excess, d):
    """Vectors of per-dimension level increments summing to ``excess``."""
    if excess == 0:
        yield (0,) * d
        return
    for positions in itertools.combinations_with_replacement(range(d), excess):
        bump = [0] * d
        for p in positions:
            bump[p] += 1
        yield tuple(bump)


@dataclass(frozen=True)
class PcSurrogate:
    """Polynomial chaos surrogate: basis plus coefficient vector.

    The represented mean is the constant coefficient; the represented
    variance is ``sum_i>0 c_i^2 prod_j alpha_j!``.
    """

    basis: PcBasis
    coefficients: np.ndarray
    rank: int | None = None

    def __post_init__(self):
        self.coefficients.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.basis.dimension

    def __call__(self, points):
        return pc_eval(self, points)

    def gradient(self, points):
        blocks = hermite_design_gradients(self.basis, points)
        return np.stack([b @ self.coefficients for b in blocks], axis=-1)

    def analytic_moments(self):
        return pc_moments(self)


def pc_project(basis: PcBasis, quadrature: SparseQuadrature, values) -> PcSurrogate:
    """Coefficients by quadrature projection.

    ``values`` holds the model evaluated at ``quadrature.nodes``. Exact
    recovery of degree-deg(f) content needs quadrature exactness degree
    >= basis order + deg(f).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape[0] != quadrature.node_count:
        raise ValueError("values must be given at the quadrature nodes")
    psi = hermite_design(basis, quadrature.nodes)
    coeffs = psi.T @ (quadrature.weights * values) / basis.norms_sq()
    return PcSurrogate(basis=basis, coefficients=coeffs)


def gepc_sample_count(d: int, p: int) -> int:
    """Collocation points for the gradient-enhanced fit: ceil(2K / (1+d))."""
    k = math.comb(p + d, d)
    return -(-2 * k // (1 + d))


def gepc_fit(basis: PcBasis, samples, values, gradients) -> PcSurrogate:
    """Least-squares coefficients from stacked value and gradient equations.

    The system has N value rows followed by d blocks of N gradient rows and
    is solved by truncated SVD with the same relative singular-value cutoff
    policy as the RBF module. A post-truncation rank below the basis size

    leaves the minimum-norm solution and records a warning.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    values = np.asarray(values, dtype=np.float64)
    gradients = np.asarray(gradients, dtype=np.float64)
    n, d = samples.shape
    if values.shape != (n,) or gradients.shape != (n, d):
        raise ValueError("values must be (N,), gradients (N, d)")
    if n * (1 + d) < basis.size:
        raise ValueError(
            f"need N(1+d) >= K = {basis.size} equations, got {n * (1 + d)}")

    psi = np.vstack([hermite_design(basis, samples),
                     *hermite_design_gradients(basis, samples)])
    rhs = np.concatenate([values, gradients.T.ravel()])
    coeffs, rank = solve_truncated_svd(psi, rhs)
    if rank < basis.size:
        warnings.warn(f"GEPC system rank {rank} below basis size {basis.size}; "
                      "returning the minimum-norm solution", RuntimeWarning)
    return PcSurrogate(basis=basis, coefficients=coeffs, rank=rank)


def pc_moments(surrogate: PcSurrogate):
    """(mean, variance) straight from the coefficients."""
    c = surrogate.coefficients
    norms = surrogate.basis.norms_sq()
    return float(c[0]), float((c[1:] ** 2 * norms[1:]).sum())


def pc_eval(surrogate: PcSurrogate, points, chunk: int = 65536):
    """Coefficient-weighted basis sum at one or many points."""
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    out = np.empty(pts.shape[0])
    for start in range(0, pts.shape[0], chunk):
        block = pts[start:start + chunk]
        out[start:start + chunk] = hermite_design(surrogate.basis, block) @ surrogate.coefficients
    return float(out[0]) if single else out


def write_coefficients(surrogate: PcSurrogate, path) -> None:
    """CSV dump ``multi_index, coefficient, norm_sq``."""
    norms = surrogate.basis.norms_sq()
    with open(path, "w", newline="") as f:
        f.write("multi_index,coefficient,norm_sq\n")
        for alpha, c, nsq in zip(surrogate.basis.indices, surrogate.coefficients, norms):
            f.write('"' + " ".join(map(str, alpha)) + f'",{c!r},{nsq!r}\n')
