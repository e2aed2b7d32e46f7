"""Statistics estimators on sample sets and surrogates.

Moments, exceedance probabilities, histogram pdf estimation, surrogate
integration via large QMC sample sets, and the multipartition extrapolator
for the standard deviation of a QMC statistic estimate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .lowdisc import gaussian_plan


class InsufficientSamplesError(ValueError):
    pass


def moments(samples):
    """(mean, stdv, skewness, kurtosis) of a sample vector.

    The standard deviation uses the 1/(N-1) estimator; skewness and raw
    kurtosis are standardized central moments (Gaussian kurtosis is 3).
    Zero-variance input yields NaN markers for skewness and kurtosis.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    if n < 2:
        raise InsufficientSamplesError("need at least 2 samples")
    mean = samples.mean()
    centered = samples - mean
    stdv = float(np.sqrt((centered**2).sum() / (n - 1)))
    m2 = float((centered**2).mean())
    if m2 == 0.0:
        return float(mean), 0.0, float("nan"), float("nan")
    if n < 4:
        raise InsufficientSamplesError("need at least 4 samples for kurtosis")
    skew = float((centered**3).mean() / m2**1.5)
    kurt = float((centered**4).mean() / m2**2)
    return float(mean), stdv, skew, kurt


def exceedance(samples, mu, sigma, kappa, tail: str) -> float:
    """Empirical fraction beyond mu -/+ kappa sigma (inclusive comparison).

    ``tail='lower'`` counts samples <= mu - kappa sigma; ``'upper'`` counts
    samples >= mu + kappa sigma.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    samples = np.asarray(samples, dtype=np.float64)
    if tail == "lower":
        return float((samples <= mu - kappa * sigma).mean())
    if tail == "upper":
        return float((samples >= mu + kappa * sigma).mean())
    raise ValueError("tail must be 'lower' or 'upper'")


@dataclass(frozen=True)
class PdfCurve:
    """Piecewise-constant density over bin edges; integrates to 1."""

    edges: np.ndarray
    density: np.ndarray

    def __post_init__(self):
        self.edges.setflags(write=False)
        self.density.setflags(write=False)

    def integral(self) -> float:
        return float(np.diff(self.edges) @ self.density)


def pdf_estimate(samples, bins: int = 64) -> PdfCurve:
    """Normalized histogram over [min, max] with the given bin count.

    A zero-range sample set degenerates to a single narrow spike of unit
    integral around the common value.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 10:
        raise InsufficientSamplesError("need at least 10 samples for a pdf")
    if bins < 1:
        raise ValueError("bins must be positive")
    lo, hi = samples.min(), samples.max()
    if lo == hi:
        half = max(abs(lo), 1.0) * 1e-12
        edges = np.array([lo - half, lo + half])
        return PdfCurve(edges=edges, density=np.array([1.0 / (2 * half)]))
    density, edges = np.histogram(samples, bins=bins, range=(lo, hi), density=True)
    return PdfCurve(edges=edges, density=density)


@dataclass(frozen=True)
class StatisticsReport:
    """Estimated statistics with provenance metadata.

    ``exceedance`` maps (kappa, tail) to a probability. ``source`` is
    ``direct`` or ``surrogate(<name>, N_c=...)``.
    """

    mean: float
    stdv: float
    skewness: float
    kurtosis: float
    exceedance: dict
    pdf: PdfCurve
    sample_count: int
    source: str
    metadata: dict = field(default_factory=dict)

    def named_values(self) -> dict:
        out = {"mean": self.mean, "stdv": self.stdv,
               "skewness": self.skewness, "kurtosis": self.kurtosis}
        for (kappa, tail), p in sorted(self.exceedance.items()):
            out[f"p_{tail}_{kappa:g}"] = p
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["name", "value", "n", "source", "metadata"])
            meta = ";".join(f"{k}={v}" for k, v in sorted(self.metadata.items()))
            for name, value in self.named_values().items():
                writer.writerow([name, repr(float(value)), self.sample_count,
                                 self.source, meta])


def compute_report(values, kappas=(2.0, 3.0), tails=("lower", "upper"), bins: int = 64,
                   source: str = "direct", reference_moments=None,
                   moment_override=None, metadata=None) -> StatisticsReport:
    """Full report over a sample vector.

    ``reference_moments`` (mu, sigma), when given, anchors the exceedance
    thresholds (the benchmark convention); otherwise the report's own
    moments are used. ``moment_override`` replaces the sampled mean/stdv by
    closed-form values (polynomial-chaos coefficient path).
    """
    values = np.asarray(values, dtype=np.float64)
    mean, stdv, skew, kurt = moments(values)
    if moment_override is not None:
        mean, stdv = float(moment_override[0]), float(moment_override[1])
    thr_mu, thr_sigma = (mean, stdv) if reference_moments is None else reference_moments
    exc = {(float(k), t): exceedance(values, thr_mu, thr_sigma, k, t)
           for k in kappas for t in tails}
    meta = dict(metadata or {})
    meta.setdefault("kurtosis_convention", "raw")
    meta.setdefault("exceedance_thresholds",
                    "own" if reference_moments is None else "reference")
    return StatisticsReport(mean=mean, stdv=stdv, skewness=skew, kurtosis=kurt,
                            exceedance=exc, pdf=pdf_estimate(values, bins),
                            sample_count=values.size, source=source, metadata=meta)


def surrogate_statistics(evaluator, dimension=None, n: int = 10**6, skip: int = 1,
                         kappas=(2.0, 3.0), tails=("lower", "upper"), bins: int = 64,
                         reference_moments=None, name=None) -> StatisticsReport:
    """Report from a large QMC sample of a surrogate evaluator.

    The evaluator is called on (n, d) point blocks and must never touch the
    underlying model's cost ledger. Evaluators exposing
    ``analytic_moments()`` (polynomial chaos) contribute their mean and
    standard deviation in closed form; the remaining statistics come from
    the sampled values.
    """
    d = dimension if dimension is not None else evaluator.dimension
    plan = gaussian_plan(d, n, skip)
    values = np.asarray(evaluator(plan.points), dtype=np.float64).ravel()

    override = None
    if hasattr(evaluator, "analytic_moments"):
        mean, var = evaluator.analytic_moments()
        override = (mean, np.sqrt(max(var, 0.0)))
    label = name or getattr(evaluator, "name", type(evaluator).__name__)
    return compute_report(values, kappas, tails, bins,
                          source=f"surrogate({label})",
                          reference_moments=reference_moments,
                          moment_override=override,
                          metadata={"qmc_skip": skip, "qmc_n": n})


STATISTIC_FUNCTIONS = {
    "mean": lambda v: float(np.mean(v)),
    "stdv": lambda v: moments(v)[1],
    "skewness": lambda v: moments(v)[2],
    "kurtosis": lambda v: moments(v)[3],
}


def statistic_function(tag):
    """Resolve an estimator tag (or pass a callable through)."""
    if callable(tag):
        return tag
    try:
        return STATISTIC_FUNCTIONS[tag]
    except KeyError:
        raise ValueError(f"unknown statistic tag {tag!r}") from None


def exceedance_statistic(mu, sigma, kappa, tail):
    """Block estimator of an exceedance probability with fixed thresholds."""
    return lambda v: exceedance(v, mu, sigma, kappa, tail)


@dataclass(frozen=True)
class Sigma1Estimate:
    """Multipartition extrapolation of an estimator's standard deviation.

    ``varsigma_m[m]`` is the cross-partition scatter at partition count m;
    the fitted line gives ``sigma1 = exp(alpha log N + beta)``.
    """

    n: int
    m_list: tuple
    varsigma_m: dict
    alpha: float
    beta: float
    sigma1: float
    degenerate: bool = False


def multipartition_sigma1(samples, statistic, m_list=(128, 64, 32, 16)) -> Sigma1Estimate:
    """Extrapolated stdv of a sequence statistic via equal-size partitions.

    For each m the statistic is computed on the m consecutive sample blocks
    (sequence order preserved); the sample stdv of those block estimates is
    fitted against log(N/m) by weighted least squares with weights m, and
    extrapolated to the full sample count.
    """
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    stat = statistic_function(statistic)
    m_list = tuple(m_list)
    for m in m_list:
        if n % m != 0:
            raise ValueError(f"sample count {n} not divisible by partition count {m}")

    varsigma = {}
    for m in m_list:
        block = n // m
        estimates = np.array([stat(samples[i * block:(i + 1) * block]) for i in range(m)])
        varsigma[m] = float(np.std(estimates, ddof=1))

    if any(v == 0.0 for v in varsigma.values()):
        return Sigma1Estimate(n=n, m_list=m_list, varsigma_m=varsigma,
                              alpha=0.0, beta=-np.inf, sigma1=0.0, degenerate=True)

    x = np.log([n / m for m in m_list])
    y = np.log([varsigma[m] for m in m_list])
    w = np.sqrt(np.asarray(m_list, dtype=np.float64))  # polyfit squares the weights
    alpha, beta = np.polyfit(x, y, 1, w=w)
    sigma1 = float(np.exp(alpha * np.log(n) + beta))
    return Sigma1Estimate(n=n, m_list=m_list, varsigma_m=varsigma,
                          alpha=float(alpha), beta=float(beta), sigma1=sigma1)
