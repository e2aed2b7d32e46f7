"""Random perturbation fields on discretized surfaces.

Covariance assembly with a squared-exponential kernel, Karhunen-Loeve
truncation, bounded output transforms (sine-shaped and Beta-bounded), and
normal-direction geometry perturbation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy import special
from scipy.spatial.distance import cdist


class ValidationError(ValueError):
    pass


class DegenerateTangentError(ValueError):
    pass


@dataclass(frozen=True)
class SurfaceGeometry:
    """Ordered (x, y) surface nodes, chord-normalized in x.

    ``closed`` marks a closed loop (tangents wrap around). Consecutive
    nodes must be distinct. Chord validation is relaxed for geometries
    produced by perturbation, which may leave [0, 1] slightly.
    """

    nodes: np.ndarray  # (n, 2)
    closed: bool = True

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 2 or nodes.shape[1] != 2:
            raise ValidationError("nodes must be an (n, 2) array")
        seg = np.diff(nodes, axis=0)
        if self.closed:
            seg = np.vstack([seg, nodes[0] - nodes[-1]])
        if np.any(np.all(seg == 0.0, axis=1)):
            raise ValidationError("consecutive nodes must be distinct")
        object.__setattr__(self, "nodes", nodes)
        self.nodes.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def x(self) -> np.ndarray:
        return self.nodes[:, 0]


def load_geometry(path=None, closed: bool = True) -> SurfaceGeometry:
    """Read a geometry file: one ``x y`` pair per line, ``#`` comments.

    ``path=None`` loads the bundled 128-node airfoil-like surface. Chord
    coordinates must lie in [0, 1].
    """
    if path is None:
        text = resources.files("uqbench").joinpath("data/airfoil128.dat").read_text()
    else:
        with open(path) as f:
            text = f.read()
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        x, y = line.split()[:2]
        rows.append((float(x), float(y)))
    nodes = np.asarray(rows, dtype=np.float64)
    if nodes.size == 0:
        raise ValidationError("geometry file holds no nodes")
    if nodes[:, 0].min() < 0.0 or nodes[:, 0].max() > 1.0:
        raise ValidationError("chord coordinates must satisfy 0 <= x <= 1")
    return SurfaceGeometry(nodes=nodes, closed=closed)


@dataclass(frozen=True)
class CovarianceSpec:
    """Squared-exponential covariance: sigma(g_i) sigma(g_j) exp(-|g_i-g_j|^2 / l^2)."""

    length_scale: float
    sigma_profile: object  # callable x -> sigma >= 0

    def __post_init__(self):
        if self.length_scale <= 0:
            raise ValidationError("length_scale must be positive")


def euler_sigma_profile(x):
    """Standard-deviation profile (0.8 - x)^0.75 for x <= 0.8, else 0."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x <= 0.8, np.clip(0.8 - x, 0.0, None) ** 0.75, 0.0)
    return out if out.ndim else float(out)


def unit_sigma_profile(x):
    """Uniform unit standard deviation."""
    return np.ones_like(np.asarray(x, dtype=np.float64))


def build_covariance(geometry: SurfaceGeometry, spec: CovarianceSpec) -> np.ndarray:
    """Node-indexed covariance matrix of the latent Gaussian field."""
    if geometry.n_nodes == 0:
        raise ValidationError("geometry is empty")
    sig = np.asarray(spec.sigma_profile(geometry.x), dtype=np.float64)
    d2 = cdist(geometry.nodes, geometry.nodes, "sqeuclidean")
    return np.outer(sig, sig) * np.exp(-d2 / spec.length_scale**2)


# -- KLE truncation rules -----------------------------------------------------

@dataclass(frozen=True)
class VarianceFraction:
    fraction: float


@dataclass(frozen=True)
class EigenvalueFloor:
    floor: float


@dataclass(frozen=True)
class FixedRank:
    rank: int


@dataclass(frozen=True)
class KleModel:
    """Truncated eigen-decomposition of a field covariance.

    Eigenvalues are descending and nonnegative (numerical negatives are
    clipped before truncation); eigenvector columns are orthonormal.
    ``spectrum`` keeps the full clipped eigenvalue list for reporting.
    """

    eigenvalues: np.ndarray  # (k,)
    eigenvectors: np.ndarray  # (n, k)
    k: int
    retained_fraction: float
    spectrum: np.ndarray  # (n,) full clipped spectrum, descending

    def __post_init__(self):
        for a in (self.eigenvalues, self.eigenvectors, self.spectrum):
            a.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.eigenvectors.shape[0]

    def scaled_modes(self) -> np.ndarray:
        """Columns sqrt(lambda_i) V_i, the field Jacobian d psi / d xi."""
        return self.eigenvectors * np.sqrt(self.eigenvalues)


def kle_decompose(cov: np.ndarray, rule) -> KleModel:
    """Full symmetric eigendecomposition truncated per the given rule.

    ``rule`` is one of :class:`VarianceFraction` (smallest k whose retained
    fraction reaches the target), :class:`EigenvalueFloor` (keep all
    eigenvalues strictly above the floor), or :class:`FixedRank`.
    """
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        raise ValidationError("covariance must be square")
    scale = np.abs(cov).max()
    if scale == 0.0:
        raise ValidationError("covariance is identically zero")
    if np.abs(cov - cov.T).max() > 1e-12 * scale:
        raise ValidationError("covariance must be symmetric")

    w, v = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    v = v[:, order]
    total = w.sum()
    if total == 0.0:
        raise ValidationError("covariance has no positive eigenvalues")

    if isinstance(rule, VarianceFraction):
        if not 0.0 < rule.fraction <= 1.0:
            raise ValidationError("variance fraction must be in (0, 1]")
        k = int(np.searchsorted(np.cumsum(w) / total, rule.fraction) + 1)
        k = min(k, w.size)
    elif isinstance(rule, EigenvalueFloor):
        k = int(np.sum(w > rule.floor))
        if k == 0:
            raise ValidationError("eigenvalue floor discards every mode")
    elif isinstance(rule, FixedRank):
        if not 1 <= rule.rank <= w.size:
            raise ValidationError(f"fixed rank must be in [1, {w.size}]")
        k = rule.rank
    else:
        raise ValidationError(f"unknown truncation rule {rule!r}")

    return KleModel(
        eigenvalues=w[:k].copy(),
        eigenvectors=v[:, :k].copy(),
        k=k,
        retained_fraction=float(w[:k].sum() / total),
        spectrum=w.copy(),
    )


def write_kle_report(kle: KleModel, path) -> None:
    """CSV report ``index, eigenvalue, cumulative_fraction`` over the spectrum."""
    total = kle.spectrum.sum()
    cum = np.cumsum(kle.spectrum) / total
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "eigenvalue", "cumulative_fraction"])
        for i, (lam, cf) in enumerate(zip(kle.spectrum, cum), start=1):
            writer.writerow([i, repr(float(lam)), repr(float(cf))])


def realize_gaussian_field(kle: KleModel, xi) -> np.ndarray:
    """Field realization psi = sum_i sqrt(lambda_i) V_i xi_i; linear in xi."""
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape[-1] != kle.k:
        raise ValueError(f"xi must have length {kle.k}, got {xi.shape[-1]}")
    return (np.sqrt(kle.eigenvalues) * xi) @ kle.eigenvectors.T


# -- bounded transforms -------------------------------------------------------

def transform_sine(psi, scale):
    """Sine-shaped bounded transform R = s * (2 arccos(1 - 2 Phi(psi)) / pi - 1).

    ``scale`` may be a scalar or a per-node array; it must be nonnegative.
    The output satisfies |R| <= scale everywhere and R(0) = 0.
    """
    psi = np.asarray(psi, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    if np.any(scale < 0):
        raise ValueError("scale must be nonnegative")
    u = special.ndtr(psi)
    return scale * (2.0 * np.arccos(1.0 - 2.0 * u) / np.pi - 1.0)


def transform_sine_dpsi(psi, scale):
    """Pointwise derivative of :func:`transform_sine` with respect to psi."""
    psi = np.asarray(psi, dtype=np.float64)
    scale = np.asarray(scale, dtype=np.float64)
    pdf = np.exp(-0.5 * psi * psi) / np.sqrt(2.0 * np.pi)
    den = np.pi * np.sqrt(special.ndtr(psi) * special.ndtr(-psi))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(den > 0.0, 2.0 * scale * pdf / den, 0.0)
    return out


def beta_inverse_cdf(u, alpha: float = 4.0, beta: float = 4.0, tol: float = 1e-10):
    """Inverse CDF of Beta(alpha, beta) by bisection on the regularized
    incomplete beta function to absolute tolerance ``tol``, polished by two
    Newton steps so downstream finite differences stay smooth."""
    u = np.asarray(u, dtype=np.float64)
    lo = np.zeros_like(u)
    hi = np.ones_like(u)
    n_iter = int(np.ceil(-np.log2(tol))) + 2
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = special.betainc(alpha, beta, mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    q = 0.5 * (lo + hi)
    for _ in range(2):
        with np.errstate(divide="ignore", invalid="ignore"):
            pdf = q ** (alpha - 1.0) * (1.0 - q) ** (beta - 1.0) / special.beta(alpha, beta)
            step = (special.betainc(alpha, beta, q) - u) / pdf
        ok = np.isfinite(step) & (pdf > 0.0)
        q = np.clip(np.where(ok, q - step, q), lo, hi)
    return q


def transform_beta(psi, delta, alpha: float = 4.0, beta: float = 4.0):
    """Beta-bounded transform: Beta(alpha, beta) quantile of Phi(psi),
    rescaled from [0, 1] to [-delta, +delta].

    For the symmetric default (4, 4), R(0) = 0 and |R| <= delta.
    """
    psi = np.asarray(psi, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(delta < 0):
        raise ValueError("delta must be nonnegative")
    q = _beta_quantile_of_normal(psi, alpha, beta)
    return delta * (2.0 * q - 1.0)


def _beta_quantile_of_normal(psi, alpha, beta):
    # resolve each tail with its own accurate normal CDF to avoid saturation;
    # the upper tail uses the reflection F_{a,b}(x) = 1 - F_{b,a}(1 - x)
    tail_u = special.ndtr(-np.abs(psi))
    q_lo = beta_inverse_cdf(tail_u, alpha, beta)
    q_hi = 1.0 - beta_inverse_cdf(tail_u, beta, alpha)
    return np.where(psi >= 0, q_hi, q_lo)


def transform_beta_dpsi(psi, delta, alpha: float = 4.0, beta: float = 4.0):
    """Pointwise derivative of :func:`transform_beta` with respect to psi."""
    psi = np.asarray(psi, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    q = _beta_quantile_of_normal(psi, alpha, beta)
    norm_pdf = np.exp(-0.5 * psi * psi) / np.sqrt(2.0 * np.pi)
    bpdf = q ** (alpha - 1.0) * (1.0 - q) ** (beta - 1.0) / special.beta(alpha, beta)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bpdf > 0.0, 2.0 * delta * norm_pdf / bpdf, 0.0)
    return out


# -- geometry operations ------------------------------------------------------

def surface_normals(geometry: SurfaceGeometry) -> np.ndarray:
    """Unit normals per node, perpendicular to the central-difference tangent
    and consistently oriented outward (via the loop's signed area)."""
    nodes = geometry.nodes
    n = geometry.n_nodes
    if n < 3:
        raise ValidationError("need at least 3 nodes for normals")
    if geometry.closed:
        tang = np.roll(nodes, -1, axis=0) - np.roll(nodes, 1, axis=0)
    else:
        tang = np.empty_like(nodes)
        tang[1:-1] = nodes[2:] - nodes[:-2]
        tang[0] = nodes[1] - nodes[0]
        tang[-1] = nodes[-1] - nodes[-2]
    norms = np.hypot(tang[:, 0], tang[:, 1])
    if np.any(norms == 0.0):
        raise DegenerateTangentError("zero-length tangent (duplicate or fold-back nodes)")
    tang /= norms[:, None]

    x, y = nodes[:, 0], nodes[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    if area >= 0.0:  # counterclockwise: rotate tangent by -90 degrees
        normal = np.column_stack([tang[:, 1], -tang[:, 0]])
    else:
        normal = np.column_stack([-tang[:, 1], tang[:, 0]])
    return normal


def perturb_geometry(geometry: SurfaceGeometry, field, normals) -> SurfaceGeometry:
    """Displace each node along its normal: G~ = G + R(g) n(g)."""
    field = np.asarray(field, dtype=np.float64)
    normals = np.asarray(normals, dtype=np.float64)
    if field.shape != (geometry.n_nodes,) or normals.shape != geometry.nodes.shape:
        raise ValueError("field and normals must be indexed like the geometry nodes")
    return SurfaceGeometry(nodes=geometry.nodes + field[:, None] * normals,
                           closed=geometry.closed)


def arc_length_weights(geometry: SurfaceGeometry) -> np.ndarray:
    """Trapezoidal arc-length weight per node (half the adjacent segments)."""
    nodes = geometry.nodes
    seg = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    if geometry.closed:
        wrap = np.linalg.norm(nodes[0] - nodes[-1])
        left = np.concatenate([[wrap], seg])
        right = np.concatenate([seg, [wrap]])
    else:
        left = np.concatenate([[0.0], seg])
        right = np.concatenate([seg, [0.0]])
    return 0.5 * (left + right)


# -- transform + field bundles ------------------------------------------------

@dataclass(frozen=True)
class SineTransform:
    """Sine-bounded transform with amplitude profile x -> s(x)."""

    scale: object  # callable

    kind = "sine_bounded"

    def scale_at(self, x):
        return np.asarray(self.scale(x), dtype=np.float64)

    def apply(self, psi, scale_values):
        return transform_sine(psi, scale_values)

    def dpsi(self, psi, scale_values):
        return transform_sine_dpsi(psi, scale_values)


@dataclass(frozen=True)
class BetaTransform:
    """Beta(alpha, beta)-bounded transform with support profile x -> delta(x)."""

    scale: object  # callable
    alpha: float = 4.0
    beta: float = 4.0

    kind = "beta_bounded"

    def scale_at(self, x):
        return np.asarray(self.scale(x), dtype=np.float64)

    def apply(self, psi, scale_values):
        return transform_beta(psi, scale_values, self.alpha, self.beta)

    def dpsi(self, psi, scale_values):
        return transform_beta_dpsi(psi, scale_values, self.alpha, self.beta)


class PerturbationField:
    """Geometry + KLE + bounded transform, realized from Gaussian variables.

    ``node_indices`` restricts the field to a subset of nodes (used when a
    surface is split into independently modeled parts); the default covers
    every node.
    """

    def __init__(self, geometry: SurfaceGeometry, kle: KleModel, transform,
                 node_indices=None):
        self.geometry = geometry
        self.kle = kle
        self.transform = transform
        if node_indices is None:
            node_indices = np.arange(geometry.n_nodes)
        self.node_indices = np.asarray(node_indices, dtype=np.intp)
        if kle.n_nodes != self.node_indices.size:
            raise ValueError("KLE node count does not match the node subset")
        self.scale_values = transform.scale_at(geometry.x[self.node_indices])
        self.dimension = kle.k

    def realize(self, xi) -> np.ndarray:
        """Bounded perturbation per covered node for one or many xi."""
        psi = realize_gaussian_field(self.kle, xi)
        return self.transform.apply(psi, self.scale_values)

    def realize_with_jacobian(self, xi):
        """Field values and d R / d xi (chain rule through the transform)."""
        psi = realize_gaussian_field(self.kle, xi)
        r = self.transform.apply(psi, self.scale_values)
        dpsi = self.transform.dpsi(psi, self.scale_values)
        jac = dpsi[..., :, None] * self.kle.scaled_modes()[None, :, :] \
            if psi.ndim > 1 else dpsi[:, None] * self.kle.scaled_modes()
        return r, jac

    def perturbed_geometry(self, xi) -> SurfaceGeometry:
        field = np.zeros(self.geometry.n_nodes)
        field[self.node_indices] = self.realize(xi)
        return perturb_geometry(self.geometry, field, surface_normals(self.geometry))


class CompositeField:
    """Independent perturbation fields over disjoint node subsets.

    The Gaussian variable vector is the concatenation of the member fields'
    variables, in order.
    """

    def __init__(self, fields):
        self.fields = list(fields)
        if not self.fields:
            raise ValueError("at least one field required")
        geom = self.fields[0].geometry
        if any(f.geometry is not geom for f in self.fields):
            raise ValueError("all member fields must share one geometry")
        covered = np.concatenate([f.node_indices for f in self.fields])
        if np.unique(covered).size != covered.size:
            raise ValueError("member fields must cover disjoint node subsets")
        self.geometry = geom
        self.dimension = sum(f.dimension for f in self.fields)

    def realize(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.float64)
        out = np.zeros(xi.shape[:-1] + (self.geometry.n_nodes,))
        offset = 0
        for f in self.fields:
            out[..., f.node_indices] = f.realize(xi[..., offset:offset + f.dimension])
            offset += f.dimension
        return out


def split_airfoil_surfaces(geometry: SurfaceGeometry):
    """Index arrays of the upper (y >= median camber) and lower nodes.

    A simple split for treating the two sides of an airfoil-like closed
    surface as separate random fields.
    """
    y = geometry.nodes[:, 1]
    upper = np.nonzero(y >= 0.0)[0]
    lower = np.nonzero(y < 0.0)[0]
    if upper.size == 0 or lower.size == 0:
        raise ValidationError("geometry cannot be split into upper/lower parts")
    return upper, lower
