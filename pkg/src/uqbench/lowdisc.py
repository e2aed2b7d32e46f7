"""Sobol low-discrepancy sequences and quasi-Monte Carlo sampling.

Implements the digital-sequence construction with direction numbers from
the Joe-Kuo ``new-joe-kuo-6`` table (shipped in ``data/``), the uniform to
standard-Gaussian mapping via the inverse normal CDF, and plain equal-weight
QMC integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np
from scipy import special

MAXBIT = 32
_MAX_INDEX = 2**31  # count + skip must stay below this

_DEFAULT_TABLE = None  # cached DirectionTable


class UnsupportedDimensionError(ValueError):
    """Requested dimension exceeds the loaded direction-number table."""


@dataclass(frozen=True)
class DirectionTable:
    """Per-dimension Sobol direction integers ``V[j, k] = v_k * 2**MAXBIT``.

    Dimension 1 is the van der Corput column (all initial m_i = 1); higher
    dimensions come from a Joe-Kuo format file ``d s a m_1 ... m_s``.
    """

    max_dimension: int
    v: np.ndarray  # (max_dimension, MAXBIT + 1) uint64, column 0 unused
    source: str


def load_direction_table(path=None) -> DirectionTable:
    """Load direction numbers from a Joe-Kuo format text file.

    Each line holds ``d s a m_1 ... m_s``; a header line or ``#`` comments
    are skipped. With ``path=None`` the bundled ``new-joe-kuo-6`` table is
    used.
    """
    if path is None:
        ref = resources.files("uqbench").joinpath("data/new-joe-kuo-6.txt")
        text = ref.read_text()
        source = "new-joe-kuo-6"
    else:
        with open(path) as f:
            text = f.read()
        source = str(path)

    entries = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if not parts[0].isdigit():
            continue  # header line
        d, s, a = int(parts[0]), int(parts[1]), int(parts[2])
        m = [int(t) for t in parts[3 : 3 + s]]
        if len(m) != s:
            raise ValueError(f"malformed direction-number line for d={d}")
        entries[d] = (s, a, m)

    max_dim = max(entries) if entries else 1
    v = np.zeros((max_dim, MAXBIT + 1), dtype=np.uint64)
    # dimension 1: van der Corput, v_k = 2**-k
    for k in range(1, MAXBIT + 1):
        v[0, k] = 1 << (MAXBIT - k)
    for d in range(2, max_dim + 1):
        if d not in entries:
            raise ValueError(f"direction-number table is missing dimension {d}")
        s, a, m = entries[d]
        col = np.zeros(MAXBIT + 1, dtype=np.uint64)
        for k in range(1, min(s, MAXBIT) + 1):
            col[k] = m[k - 1] << (MAXBIT - k)
        for k in range(s + 1, MAXBIT + 1):
            acc = col[k - s] ^ (col[k - s] >> np.uint64(s))
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    acc ^= col[k - i]
            col[k] = acc
        v[d - 1] = col
    return DirectionTable(max_dimension=max_dim, v=v, source=source)


def default_table() -> DirectionTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_direction_table()
    return _DEFAULT_TABLE


class SobolSequence:
    """Gray-code ordered Sobol sequence with a sequential cursor.

    Emitted points lie in ``[0, 1)^dimension``; regeneration with the same
    direction numbers and skip is bit-identical. Index 0 is the origin.
    """

    def __init__(self, dimension: int, skip: int = 0, table: DirectionTable | None = None):
        table = table or default_table()
        if dimension < 1:
            raise ValueError("dimension must be positive")
        if dimension > table.max_dimension:
            raise UnsupportedDimensionError(
                f"dimension {dimension} exceeds table maximum {table.max_dimension}"
            )
        if skip < 0:
            raise ValueError("skip must be nonnegative")
        self.dimension = dimension
        self.table = table
        self.index = skip

    def next(self, count: int) -> np.ndarray:
        """Return the next ``count`` points and advance the cursor."""
        pts = sobol_points(self.dimension, count, self.index, self.table)
        self.index += count
        return pts


def sobol_points(dim: int, count: int, skip: int = 0, table: DirectionTable | None = None) -> np.ndarray:
    """Sobol points with indices ``skip .. skip + count - 1``.

    Parameters
    ----------
    dim : int
        Number of coordinates (limited by the direction-number table).
    count : int
        Number of points; ``count=0`` yields an empty (0, dim) array.
    skip : int
        Index of the first emitted point. Index 0 is the origin.

    Returns
    -------
    (count, dim) float64 array with entries in [0, 1).
    """
    table = table or default_table()
    if dim < 1:
        raise ValueError("dim must be positive")
    if dim > table.max_dimension:
        raise UnsupportedDimensionError(
            f"dimension {dim} exceeds table maximum {table.max_dimension}"
        )
    if count < 0 or skip < 0:
        raise ValueError("count and skip must be nonnegative")
    if count + skip >= _MAX_INDEX:
        raise ValueError(f"count + skip must be below 2**31, got {count + skip}")
    if count == 0:
        return np.empty((0, dim), dtype=np.float64)

    v = table.v[:dim]  # (dim, MAXBIT+1)

    # state at index `skip` directly from its Gray code
    state = np.zeros(dim, dtype=np.uint64)
    gray = skip ^ (skip >> 1)
    k = 1
    while gray:
        if gray & 1:
            state ^= v[:, k]
        gray >>= 1
        k += 1

    x = np.empty((count, dim), dtype=np.uint64)
    x[0] = state
    if count > 1:
        # advancing from index n flips direction number c(n) = lowest zero bit of n
        n = np.arange(skip, skip + count - 1, dtype=np.uint64)
        low = (n + np.uint64(1)) & ~n  # lowest set bit of n+1 == lowest zero bit of n
        c = np.log2(low.astype(np.float64)).astype(np.int64) + 1
        x[1:] = v[:, c].T
        np.bitwise_xor.accumulate(x, axis=0, out=x)
    return x.astype(np.float64) * 2.0**-MAXBIT


def inverse_normal_cdf(u):
    """Inverse standard normal CDF, accurate to |Phi(x) - u| < 1e-9.

    Rational initial approximation refined by one Halley step on the
    erfc-based CDF. Raises on u outside the open interval (0, 1).
    """
    u_in = np.asarray(u, dtype=np.float64)
    if np.any(u_in <= 0.0) or np.any(u_in >= 1.0):
        raise ValueError("inverse_normal_cdf requires 0 < u < 1")
    x = _rational_invnorm(u_in)

    # Halley refinement; skipped in the extreme tails where exp(x^2/2)
    # overflows and the initial guess is already far beyond any support.
    safe = x * x < 1416.0
    xs = np.where(safe, x, 0.0)
    us = np.where(safe, u_in, 0.5)
    e = 0.5 * special.erfc(-xs / math.sqrt(2.0)) - us
    g = e * math.sqrt(2.0 * math.pi) * np.exp(xs * xs / 2.0)
    x = np.where(safe, xs - g / (1.0 + xs * g / 2.0), x)
    return x if x.ndim else float(x)


# rational approximation coefficients (central region and tails)
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)


def _rational_invnorm(u):
    p_low = 0.02425
    x = np.empty_like(u)

    lo = u < p_low
    hi = u > 1.0 - p_low
    mid = ~(lo | hi)

    if np.any(mid):
        q = u[mid] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num * q / den
    for mask, tail_u, sign in ((lo, u[lo], -1.0), (hi, 1.0 - u[hi], 1.0)):
        if np.any(mask):
            q = np.sqrt(-2.0 * np.log(tail_u))
            num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
            den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
            x[mask] = -sign * num / den
    return x


@dataclass(frozen=True)
class SamplePlan:
    """Deterministic set of standard-Gaussian sample points with provenance.

    ``points`` is the image of consecutive Sobol points (indices ``skip``
    onward) under the inverse normal CDF; no coordinate is non-finite.
    """

    points: np.ndarray  # (count, dim)
    skip: int
    source: str = "sobol(new-joe-kuo-6)"

    def __post_init__(self):
        self.points.setflags(write=False)

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def continuation_skip(self) -> int:
        """Sequence index just past this plan's points."""
        return self.skip + self.count


def gaussian_plan(dim: int, count: int, skip: int = 1, table: DirectionTable | None = None) -> SamplePlan:
    """Standard-Gaussian QMC sample plan from the Sobol sequence.

    Index 0 of the sequence (the all-zero point) would map to -inf, so a
    ``skip`` of 0 is promoted to 1; the effective skip is recorded on the
    plan. All coordinates of points with index >= 1 lie strictly inside
    (0, 1) because the generating bit matrices are nonsingular.
    """
    effective_skip = max(skip, 1)
    u = sobol_points(dim, count, effective_skip, table)
    xi = inverse_normal_cdf(u) if count else np.empty((0, dim))
    xi = np.atleast_2d(xi)
    return SamplePlan(points=xi, skip=effective_skip)


def qmc_mean(values) -> float:
    """Equal-weight QMC quadrature: the arithmetic average."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("qmc_mean of an empty sample set")
    return float(values.mean(axis=0)) if values.ndim == 1 else values.mean(axis=0)
