"""Analytic response models standing in for an expensive solver.

Each model returns one or more scalar response values per input point and,
when supported, exact gradients priced by the adjoint cost convention: a
gradient-bearing evaluation charges ``1 + s`` compensated evaluations for
``s`` response quantities, a value-only evaluation charges 1.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .randfield import PerturbationField, arc_length_weights


class GradientUnavailableError(RuntimeError):
    pass


class CostLedger:
    """Linearizable counters of model evaluations and compensated cost."""

    def __init__(self, srq_count: int):
        self.srq_count = srq_count
        self.evaluations = 0
        self.compensated = 0
        self.uses_gradients = False
        self._lock = threading.Lock()

    def charge(self, n: int, with_gradients: bool) -> None:
        with self._lock:
            self.evaluations += n
            self.compensated += n * (1 + self.srq_count) if with_gradients else n
            self.uses_gradients = self.uses_gradients or with_gradients

    def snapshot(self) -> tuple[int, int]:
        with self._lock:
            return self.evaluations, self.compensated


class ModelHandle:
    """Evaluable response model with per-SRQ values, optional gradients,
    and a compensated-cost ledger.

    ``values_fn(points) -> (n, s)`` and ``gradients_fn(points) -> (n, s, d)``
    must be deterministic functions of the input points.
    """

    def __init__(self, dimension, srq_count, values_fn, gradients_fn=None,
                 closed_form_stats=None, name="model"):
        self.dimension = dimension
        self.srq_count = srq_count
        self._values_fn = values_fn
        self._gradients_fn = gradients_fn
        self.provides_gradients = gradients_fn is not None
        self.closed_form_stats = closed_form_stats  # per-SRQ (mean, variance or None)
        self.name = name
        self.ledger = CostLedger(srq_count)

    def evaluate(self, xi, want_gradients: bool = False):
        """Evaluate a single point; returns (values (s,), gradients (s, d) or None)."""
        xi = np.asarray(xi, dtype=np.float64)
        if xi.shape != (self.dimension,):
            raise ValueError(f"xi must have length {self.dimension}")
        values, grads = self.evaluate_batch(xi[None, :], want_gradients)
        return values[0], (grads[0] if grads is not None else None)

    def evaluate_batch(self, points, want_gradients: bool = False):
        """Evaluate many points; returns (values (n, s), gradients (n, s, d) or None)."""
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.dimension:
            raise ValueError(f"points must be (n, {self.dimension})")
        if want_gradients and not self.provides_gradients:
            raise GradientUnavailableError(f"model {self.name!r} has no gradients")
        values = np.asarray(self._values_fn(points), dtype=np.float64)
        values = values.reshape(points.shape[0], self.srq_count)
        grads = None
        if want_gradients:
            grads = np.asarray(self._gradients_fn(points), dtype=np.float64)
            grads = grads.reshape(points.shape[0], self.srq_count, self.dimension)
        self.ledger.charge(points.shape[0], want_gradients)
        return values, grads

    def with_fresh_ledger(self) -> "ModelHandle":
        """Same model, zeroed cost counters (one ledger per benchmark record)."""
        clone = ModelHandle(self.dimension, self.srq_count, self._values_fn,
                            self._gradients_fn, self.closed_form_stats, self.name)
        return clone


@dataclass(frozen=True)
class QuadExpSpec:
    """Coefficients of one SRQ: c0 + a.xi + xi.B.xi/2 + gamma exp(-|xi|^2/w^2)."""

    c0: float
    a: np.ndarray          # (d,)
    b: np.ndarray          # (d, d) symmetric
    gamma: float = 0.0
    width: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.a, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", 0.5 * (b + b.T))
        if self.gamma != 0.0 and self.width <= 0.0:
            raise ValueError("width must be positive")

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def closed_form_mean(self) -> float:
        d = self.dimension
        w2 = self.width**2
        bump = self.gamma * (w2 / (w2 + 2.0)) ** (d / 2.0)
        return self.c0 + 0.5 * np.trace(self.b) + bump

    def closed_form_variance(self):
        if self.gamma != 0.0:
            return None  # no closed form once the bump is on
        return float(self.a @ self.a + 0.5 * np.trace(self.b @ self.b))

    def to_dict(self) -> dict:
        return {"c0": self.c0, "a": self.a.tolist(), "b": self.b.tolist(),
                "gamma": self.gamma, "width": self.width}

    @classmethod
    def from_dict(cls, d: dict) -> "QuadExpSpec":
        return cls(c0=d["c0"], a=np.asarray(d["a"]), b=np.asarray(d["b"]),
                   gamma=d.get("gamma", 0.0), width=d.get("width", 1.0))


def quad_exp_model(specs, name="quad_exp") -> ModelHandle:
    """Smooth analytic model with closed-form mean (and variance for gamma=0).

    ``specs`` is one :class:`QuadExpSpec` or a list, one per SRQ.
    """
    if isinstance(specs, QuadExpSpec):
        specs = [specs]
    specs = list(specs)
    d = specs[0].dimension
    if any(s.dimension != d for s in specs):
        raise ValueError("all SRQ specs must share one dimension")

    def values_fn(points):
        out = np.empty((points.shape[0], len(specs)))
        for k, s in enumerate(specs):
            quad = 0.5 * np.einsum("ni,ij,nj->n", points, s.b, points)
            out[:, k] = s.c0 + points @ s.a + quad
            if s.gamma != 0.0:
                out[:, k] += s.gamma * np.exp(-(points**2).sum(axis=1) / s.width**2)
        return out

    def gradients_fn(points):
        out = np.empty((points.shape[0], len(specs), d))
        for k, s in enumerate(specs):
            out[:, k, :] = s.a + points @ s.b
            if s.gamma != 0.0:
                bump = s.gamma * np.exp(-(points**2).sum(axis=1) / s.width**2)
                out[:, k, :] += bump[:, None] * (-2.0 / s.width**2) * points
        return out

    stats = [(s.closed_form_mean(), s.closed_form_variance()) for s in specs]
    return ModelHandle(d, len(specs), values_fn, gradients_fn,
                       closed_form_stats=stats, name=name)


def random_quad_exp(dimension, srq_count=1, seed=0, gamma=0.0, width=2.0,
                    linear_scale=1.0, quad_scale=0.5) -> list[QuadExpSpec]:
    """Seeded random coefficient specs, serialized alongside study configs."""
    rng = np.random.default_rng(seed)
    specs = []
    for _ in range(srq_count):
        a = linear_scale * rng.standard_normal(dimension)
        m = rng.standard_normal((dimension, dimension))
        b = quad_scale * (m + m.T) / 2.0
        specs.append(QuadExpSpec(c0=float(rng.standard_normal()), a=a, b=b,
                                 gamma=gamma, width=width))
    return specs


def rosenbrock_model() -> ModelHandle:
    """Bivariate Rosenbrock function; gradient-free sanity case."""

    def values_fn(points):
        x, y = points[:, 0], points[:, 1]
        return ((1.0 - x) ** 2 + 100.0 * (y - x**2) ** 2)[:, None]

    return ModelHandle(2, 1, values_fn, None, name="rosenbrock")


def field_functional_model(field: PerturbationField, weights, name="field_functional") -> ModelHandle:
    """Weighted arc-length integrals of a bounded perturbation field.

    Each SRQ is ``f_k(xi) = sum_n w_k(x_n) R(g_n; xi) ds_n`` with trapezoidal
    arc-length weights; gradients follow by the chain rule through the
    transform and the KLE modes.
    """
    if callable(weights):
        weights = [weights]
    geometry = field.geometry
    ds = arc_length_weights(geometry)[field.node_indices]
    x_nodes = geometry.x[field.node_indices]
    w_rows = np.vstack([np.asarray(w(x_nodes), dtype=np.float64) * ds for w in weights])

    def values_fn(points):
        r = field.realize(points)  # (n, nodes)
        return r @ w_rows.T

    def gradients_fn(points):
        _, jac = field.realize_with_jacobian(points)  # (n, nodes, k)
        return np.einsum("sm,nmk->nsk", w_rows, jac)

    return ModelHandle(field.dimension, len(weights), values_fn, gradients_fn,
                       name=name)
