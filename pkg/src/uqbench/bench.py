"""Study orchestration: configure a model + field pipeline, run UQ methods
across compensated-cost budgets, compare against a high-N reference, and
emit deterministic CSV tables plus vector plots.

Also hosts the ``uqbench`` command line: ``run``, ``reference``, ``plot``.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chaos, kriging, randfield, rbf, stats
from .lowdisc import gaussian_plan
from .models import ModelHandle, QuadExpSpec, field_functional_model, \
    quad_exp_model, random_quad_exp, rosenbrock_model

METHOD_NAMES = ("qmc", "gek", "gerbf", "kriging", "gepc", "pc_sgh")
REPORTED_STATISTICS = ("mean", "stdv", "skewness", "kurtosis", "p2", "p3")


class ConfigError(ValueError):
    pass


class PartialResultError(RuntimeError):
    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


# -- configuration -------------------------------------------------------------

_WEIGHT_FUNCTIONS = {
    "unit": lambda x: np.ones_like(x),
    "cos": lambda x: np.cos(np.pi * x),
    "front": lambda x: 1.0 - x,
}

_SIGMA_PROFILES = {
    "euler": randfield.euler_sigma_profile,
    "unit": randfield.unit_sigma_profile,
}


def _scale_function(spec):
    if spec == "euler_s":
        return lambda x: randfield.euler_sigma_profile(x) * np.sqrt(2e-5)
    if isinstance(spec, str) and spec.startswith("const:"):
        value = float(spec.split(":", 1)[1])
        return lambda x: np.full_like(np.asarray(x, dtype=np.float64), value)
    raise ConfigError(f"unknown scale spec {spec!r}")


@dataclass
class StudyConfig:
    """Validated study description; see README for the JSON schema."""

    name: str
    model: dict
    methods: list
    reference_count: int = 10**6
    surrogate_n: int = 10**6
    skip: int = 1
    kappas: tuple = (2.0, 3.0)
    pdf_bins: int = 64
    srq_tails: tuple | None = None
    output_dir: str = "uqbench_out"
    workers: int = 1
    max_model_evaluations: int | None = None
    tuning: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "StudyConfig":
        known = {f for f in cls.__dataclass_fields__ if f != "raw"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = {"name", "model", "methods"} - set(data)
        if missing:
            raise ConfigError(f"config needs keys {sorted(missing)}")
        cfg = cls(**{k: data[k] for k in data}, raw=dict(data))
        cfg.kappas = tuple(float(k) for k in cfg.kappas)
        for spec in cfg.methods:
            if spec.get("name") not in METHOD_NAMES:
                raise ConfigError(f"unknown method {spec.get('name')!r}")
        return cfg

    @classmethod
    def from_file(cls, path) -> "StudyConfig":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]

    def tails_for(self, srq_count: int) -> tuple:
        if self.srq_tails is not None:
            if len(self.srq_tails) != srq_count:
                raise ConfigError("srq_tails length must match the SRQ count")
            return tuple(self.srq_tails)
        # mirror a lift-like lower tail followed by drag-like upper tails
        return tuple("lower" if i == 0 else "upper" for i in range(srq_count))


def build_model(config: StudyConfig):
    """Instantiate the configured response model.

    Returns (model, model_metadata); the metadata serializes whatever was
    generated from seeds so a study is reproducible byte-for-byte.
    """
    spec = dict(config.model)
    kind = spec.pop("kind", None)
    if kind == "quad_exp":
        if "srqs" in spec:
            srqs = [QuadExpSpec.from_dict(s) for s in spec["srqs"]]
        else:
            srqs = random_quad_exp(
                dimension=spec["dimension"],
                srq_count=spec.get("srq_count", 1),
                seed=spec.get("seed", 0),
                gamma=spec.get("gamma", 0.0),
                width=spec.get("width", 2.0),
                linear_scale=spec.get("linear_scale", 1.0),
                quad_scale=spec.get("quad_scale", 0.5),
            )
        model = quad_exp_model(srqs)
        meta = {"kind": kind, "srqs": [s.to_dict() for s in srqs]}
        return model, meta
    if kind == "rosenbrock":
        return rosenbrock_model(), {"kind": kind}
    if kind == "field_functional":
        geometry = randfield.load_geometry(spec.get("geometry"))
        sigma = _SIGMA_PROFILES[spec.get("sigma_profile", "euler")]
        cov_spec = randfield.CovarianceSpec(length_scale=spec["length_scale"],
                                            sigma_profile=sigma)
        cov = randfield.build_covariance(geometry, cov_spec)
        trunc = spec.get("truncation", {"rule": "variance_fraction", "value": 0.9998})
        rule = {"variance_fraction": randfield.VarianceFraction,
                "eigenvalue_floor": randfield.EigenvalueFloor,
                "fixed_rank": randfield.FixedRank}[trunc["rule"]](trunc["value"])
        kle = randfield.kle_decompose(cov, rule)
        tspec = spec.get("transform", {"kind": "sine", "scale": "euler_s"})
        scale_fn = _scale_function(tspec.get("scale", "euler_s"))
        if tspec["kind"] == "sine":
            transform = randfield.SineTransform(scale=scale_fn)
        elif tspec["kind"] == "beta":
            transform = randfield.BetaTransform(scale=scale_fn,
                                                alpha=tspec.get("alpha", 4.0),
                                                beta=tspec.get("beta", 4.0))
        else:
            raise ConfigError(f"unknown transform {tspec['kind']!r}")
        pfield = randfield.PerturbationField(geometry, kle, transform)
        weights = [_WEIGHT_FUNCTIONS[w] for w in spec.get("weights", ["unit"])]
        model = field_functional_model(pfield, weights)
        meta = {"kind": kind, "kle_rank": kle.k,
                "kle_retained_fraction": kle.retained_fraction,
                "length_scale": spec["length_scale"]}
        return model, meta
    raise ConfigError(f"unknown model kind {kind!r}")


# -- reference run -------------------------------------------------------------

@dataclass
class ReferenceResult:
    reports: list            # StatisticsReport per SRQ
    sigma1: list             # dict statistic -> Sigma1Estimate, per SRQ
    sample_count: int
    partition_count: int
    metadata: dict

    def sigma1_value(self, srq: int, statistic: str) -> float:
        return self.sigma1[srq][statistic].sigma1


def _evaluate_reference_values(config: StudyConfig, model: ModelHandle,
                               checkpoint_path: Path | None):
    """Chunked model evaluation with an optional budget guard + checkpoint."""
    n = config.reference_count
    plan = gaussian_plan(model.dimension, n, config.skip)
    chunk = 1 << 16
    done = 0
    values = np.empty((n, model.srq_count))
    if checkpoint_path is not None and checkpoint_path.exists():
        saved = np.load(checkpoint_path)
        if saved["digest"] == config.digest() and saved["values"].shape == values.shape:
            done = int(saved["done"])
            values[:done] = saved["values"][:done]
    while done < n:
        if (config.max_model_evaluations is not None
                and model.ledger.evaluations + chunk > config.max_model_evaluations):
            if checkpoint_path is not None:
                np.savez(checkpoint_path, values=values, done=done,
                         digest=config.digest())
            raise PartialResultError(
                f"reference budget exhausted after {done} evaluations",
                checkpoint=checkpoint_path)
        hi = min(done + chunk, n)
        values[done:hi], _ = model.evaluate_batch(plan.points[done:hi])
        done = hi
    return values


def run_reference(config: StudyConfig, model: ModelHandle | None = None,
                  output_dir: Path | None = None) -> ReferenceResult:
    """Direct QMC statistics at the reference budget plus a multipartition
    accuracy estimate for every reported statistic."""
    if model is None:
        model, _ = build_model(config)
    out = Path(output_dir) if output_dir is not None else None
    ckpt = out / "reference_checkpoint.npz" if out is not None else None
    values = _evaluate_reference_values(config, model, ckpt)
    tails = config.tails_for(model.srq_count)

    # multipartition needs divisibility by every partition count
    m_list = (128, 64, 32, 16)
    usable = (values.shape[0] // 128) * 128

    reports, sigma1 = [], []
    for s in range(model.srq_count):
        col = values[:, s]
        rep = stats.compute_report(col, kappas=config.kappas, bins=config.pdf_bins,
                                   source="direct",
                                   metadata={"n": values.shape[0],
                                             "skip": config.skip,
                                             "tail": tails[s]})
        block = col[:usable]
        per_stat = {
            "mean": stats.multipartition_sigma1(block, "mean", m_list),
            "stdv": stats.multipartition_sigma1(block, "stdv", m_list),
            "skewness": stats.multipartition_sigma1(block, "skewness", m_list),
            "kurtosis": stats.multipartition_sigma1(block, "kurtosis", m_list),
        }
        for kappa in config.kappas:
            fn = stats.exceedance_statistic(rep.mean, rep.stdv, kappa, tails[s])
            per_stat[f"p{kappa:g}"] = stats.multipartition_sigma1(block, fn, m_list)
        reports.append(rep)
        sigma1.append(per_stat)

    result = ReferenceResult(reports=reports, sigma1=sigma1,
                             sample_count=values.shape[0], partition_count=usable,
                             metadata={"digest": config.digest(),
                                       "skip": config.skip, "tails": tails})
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        _write_reference_csv(result, config, out)
    return result


def _reference_statistic_value(report, statistic, tail):
    if statistic in ("mean", "stdv", "skewness", "kurtosis"):
        return getattr(report, statistic)
    kappa = float(statistic[1:])
    return report.exceedance[(kappa, tail)]


def _write_reference_csv(result: ReferenceResult, config: StudyConfig, out: Path):
    with open(out / "reference.csv", "w", newline="") as f:
        f.write("srq,statistic,value,sigma1,n\n")
        for s, (rep, sig) in enumerate(zip(result.reports, result.sigma1)):
            tail = result.metadata["tails"][s]
            for stat_name in _statistic_names(config):
                val = _reference_statistic_value(rep, stat_name, tail)
                s1 = sig[stat_name].sigma1
                f.write(f"{s},{stat_name},{val!r},{s1!r},{result.sample_count}\n")
    with open(out / "reference_sigma1.csv", "w", newline="") as f:
        f.write("srq,statistic,m,varsigma_m,alpha,beta,sigma1\n")
        for s, sig in enumerate(result.sigma1):
            for stat_name, est in sig.items():
                for m in est.m_list:
                    f.write(f"{s},{stat_name},{m},{est.varsigma_m[m]!r},"
                            f"{est.alpha!r},{est.beta!r},{est.sigma1!r}\n")


def _statistic_names(config: StudyConfig):
    names = ["mean", "stdv", "skewness", "kurtosis"]
    names += [f"p{k:g}" for k in config.kappas]
    return names


# -- method runs ---------------------------------------------------------------

@dataclass
class ConvergenceRecord:
    """One method at one budget: estimates and errors per SRQ statistic."""

    method: str
    label: str
    n_samples: int
    n_compensated: int
    status: str                     # ok | failed
    estimates: list                 # per SRQ: dict statistic -> value
    errors: list                    # per SRQ: dict statistic -> abs error
    below_precision: list           # per SRQ: dict statistic -> bool
    pdfs: list                      # per SRQ: PdfCurve or None
    wall_time: float
    message: str = ""


def _method_plan_size(method: str, spec: dict, budget, model: ModelHandle, d: int):
    """(N, N_c, label) for one budget entry of a method."""
    s = model.srq_count
    if method == "qmc":
        return int(budget), int(budget), f"N_c={budget}"
    if method in ("gek", "gerbf"):
        if budget % (1 + s) != 0:
            raise ConfigError(
                f"{method} budget {budget} not divisible by 1+s={1 + s}")
        return budget // (1 + s), int(budget), f"N_c={budget}"
    if method == "kriging":
        return int(budget), int(budget), f"N_c={budget}"
    if method == "gepc":
        n = chaos.gepc_sample_count(d, int(budget))
        return n, n * (1 + s), f"order {budget}"
    if method == "pc_sgh":
        quad = chaos.sparse_gauss_hermite(d, int(budget))
        return quad.node_count, quad.node_count, f"level {budget}"
    raise ConfigError(f"unknown method {method!r}")


def method_budget_table(config: StudyConfig, model: ModelHandle):
    """Expanded (method, spec, budget, N, N_c, label) rows for the study."""
    rows = []
    for spec in config.methods:
        name = spec["name"]
        budgets = spec.get("budgets") or spec.get("orders") or spec.get("levels")
        if not budgets:
            raise ConfigError(f"method {name!r} lists no budgets")
        for b in budgets:
            n, n_c, label = _method_plan_size(name, spec, b, model, model.dimension)
            rows.append((name, spec, b, n, n_c, label))
    return rows


def run_method(config: StudyConfig, reference: ReferenceResult, method: str,
               budget, base_model: ModelHandle, spec=None) -> ConvergenceRecord:
    """Run one method at one budget point against the stored reference.

    Surrogate fit failures mark the record failed and the study continues.
    """
    spec = spec or {}
    model = base_model.with_fresh_ledger()
    d = model.dimension
    n, n_c, label = _method_plan_size(method, spec, budget, model, d)
    tails = config.tails_for(model.srq_count)
    t0 = time.perf_counter()

    try:
        reports = _method_reports(config, model, method, n, budget, reference)
    except (rbf.DegenerateSystemError, rbf.TuningError, kriging.IllConditionedError,
            kriging.TuningError, np.linalg.LinAlgError) as exc:
        return ConvergenceRecord(
            method=method, label=label, n_samples=n, n_compensated=n_c,
            status="failed", estimates=[], errors=[], below_precision=[],
            pdfs=[], wall_time=time.perf_counter() - t0, message=str(exc))

    ledger_nc = model.ledger.compensated
    if ledger_nc != n_c:
        raise RuntimeError(
            f"ledger N_c={ledger_nc} does not match declared budget {n_c}")

    estimates, errors, flags, pdfs = [], [], [], []
    for s, rep in enumerate(reports):
        tail = tails[s]
        est, err, flag = {}, {}, {}
        for stat_name in _statistic_names(config):
            value = _reference_statistic_value(rep, stat_name, tail)
            ref_value = _reference_statistic_value(reference.reports[s], stat_name, tail)
            est[stat_name] = value
            err[stat_name] = abs(value - ref_value)
            flag[stat_name] = bool(
                err[stat_name] < 3.0 * reference.sigma1[s][stat_name].sigma1)
        estimates.append(est)
        errors.append(err)
        flags.append(flag)
        pdfs.append(rep.pdf)
    return ConvergenceRecord(
        method=method, label=label, n_samples=n, n_compensated=n_c, status="ok",
        estimates=estimates, errors=errors, below_precision=flags, pdfs=pdfs,
        wall_time=time.perf_counter() - t0)


def _method_reports(config: StudyConfig, model: ModelHandle, method: str,
                    n: int, budget, reference: ReferenceResult):
    """Fit/evaluate one method and build per-SRQ statistics reports.

    Exceedance thresholds are anchored at the reference moments (recorded
    in the report metadata), mirroring threshold definitions relative to
    reference statistics.
    """
    d = model.dimension

    def ref_moments(s):
        return reference.reports[s].mean, reference.reports[s].stdv

    def surrogate_report(surrogate, name, s):
        return stats.surrogate_statistics(
            surrogate, n=config.surrogate_n, skip=config.skip,
            kappas=config.kappas, bins=config.pdf_bins, name=name,
            reference_moments=ref_moments(s))

    if method == "pc_sgh":
        level = int(budget)
        quad = chaos.sparse_gauss_hermite(d, level)
        values, _ = model.evaluate_batch(quad.nodes)
        basis = chaos.build_basis(d, level)
        return [surrogate_report(chaos.pc_project(basis, quad, values[:, s]),
                                 f"pc_sgh(level={level})", s)
                for s in range(model.srq_count)]

    plan = gaussian_plan(d, n, config.skip)

    if method == "qmc":
        values, _ = model.evaluate_batch(plan.points)
        return [stats.compute_report(values[:, s], kappas=config.kappas,
                                     bins=config.pdf_bins, source="direct",
                                     reference_moments=ref_moments(s))
                for s in range(model.srq_count)]

    if method == "kriging":
        values, _ = model.evaluate_batch(plan.points)
        opts = config.tuning.get("kriging", {})
        return [surrogate_report(
            kriging.fit_kriging_tuned(plan.points, values[:, s],
                                      options=opts.get("options"),
                                      n_starts=opts.get("n_starts", 8)),
            "kriging", s) for s in range(model.srq_count)]

    values, grads = model.evaluate_batch(plan.points, want_gradients=True)

    if method == "gek":
        opts = config.tuning.get("gek", {})
        return [surrogate_report(
            kriging.fit_kriging_tuned(plan.points, values[:, s], grads[:, s],
                                      options=opts.get("options"),
                                      n_starts=opts.get("n_starts", 8)),
            "gek", s) for s in range(model.srq_count)]

    if method == "gerbf":
        return [surrogate_report(rbf.fit_gerbf(plan, values[:, s], grads[:, s]),
                                 "gerbf", s)
                for s in range(model.srq_count)]

    if method == "gepc":
        order = int(budget)
        basis = chaos.build_basis(d, order)
        return [surrogate_report(
            chaos.gepc_fit(basis, plan.points, values[:, s], grads[:, s]),
            f"gepc(order={order})", s) for s in range(model.srq_count)]

    raise ConfigError(f"unknown method {method!r}")


# -- study driver ---------------------------------------------------------------

@dataclass
class StudyResult:
    config: StudyConfig
    reference: ReferenceResult
    records: list
    output_dir: Path


def run_study(config: StudyConfig, output_dir=None, make_plots: bool = True) -> StudyResult:
    """Reference run followed by the full method x budget sweep."""
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, model_meta = build_model(config)
    reference = run_reference(config, model.with_fresh_ledger(), out)

    jobs = method_budget_table(config, model)

    def job(row):
        name, spec, budget, *_ = row
        return run_method(config, reference, name, budget, model, spec)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            records = list(pool.map(job, jobs))
    else:
        records = [job(row) for row in jobs]

    write_records_csv(records, config, out / "records.csv")
    _write_timings_csv(records, out / "timings.csv")
    with open(out / "run_metadata.json", "w") as f:
        json.dump({"config_digest": config.digest(), "model": model_meta,
                   "name": config.name}, f, indent=2, sort_keys=True)
    if make_plots:
        render_plots(records, reference, config, out)
    return StudyResult(config=config, reference=reference, records=records,
                       output_dir=out)


def write_records_csv(records, config: StudyConfig, path) -> None:
    """Deterministic record table (timings live in a separate file)."""
    with open(path, "w", newline="") as f:
        f.write("method,label,N,N_c,status,srq,statistic,estimate,"
                "reference_error,below_reference_precision\n")
        for rec in records:
            if rec.status != "ok":
                f.write(f"{rec.method},{rec.label},{rec.n_samples},"
                        f"{rec.n_compensated},{rec.status},,,,,\n")
                continue
            for s, est in enumerate(rec.estimates):
                for stat_name, value in est.items():
                    f.write(f"{rec.method},{rec.label},{rec.n_samples},"
                            f"{rec.n_compensated},{rec.status},{s},{stat_name},"
                            f"{value!r},{rec.errors[s][stat_name]!r},"
                            f"{int(rec.below_precision[s][stat_name])}\n")


def _write_timings_csv(records, path) -> None:
    with open(path, "w", newline="") as f:
        f.write("method,label,N_c,wall_time_s\n")
        for rec in records:
            f.write(f"{rec.method},{rec.label},{rec.n_compensated},"
                    f"{rec.wall_time:.3f}\n")


def render_plots(records, reference: ReferenceResult, config: StudyConfig,
                 out: Path) -> list:
    """Error-vs-cost plot per statistic (3 sigma1 floor dashed) and a pdf
    overlay at the smallest budget shared by every method."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written = []
    ok = [r for r in records if r.status == "ok"]
    srq_count = len(reference.reports)
    for s in range(srq_count):
        for stat_name in _statistic_names(config):
            fig, ax = plt.subplots(figsize=(5, 4))
            for method in sorted({r.method for r in ok}):
                pts = sorted((r.n_compensated, r.errors[s][stat_name])
                             for r in ok if r.method == method)
                ax.loglog([p[0] for p in pts], [max(p[1], 1e-300) for p in pts],
                          marker="o", label=method)
            floor = 3.0 * reference.sigma1[s][stat_name].sigma1
            if floor > 0:
                ax.axhline(floor, linestyle="--", color="k", linewidth=2,
                           label="3 sigma1 reference precision")
            ax.set_xlabel("compensated evaluations N_c")
            ax.set_ylabel(f"absolute error: {stat_name} (SRQ {s})")
            ax.legend(fontsize=7)
            fig.tight_layout()
            p = out / f"error_srq{s}_{stat_name}.svg"
            fig.savefig(p, metadata={"Date": None})
            plt.close(fig)
            written.append(p)

    # pdf overlay at the smallest common compensated budget
    methods = {r.method for r in ok}
    if methods:
        per_method_min = {m: min(r.n_compensated for r in ok if r.method == m)
                          for m in methods}
        common = max(per_method_min.values())
        for s in range(srq_count):
            fig, ax = plt.subplots(figsize=(5, 4))
            ref_pdf = reference.reports[s].pdf
            ax.stairs(ref_pdf.density, ref_pdf.edges, color="k",
                      label=f"reference (N={reference.sample_count})")
            for method in sorted(methods):
                cands = [r for r in ok if r.method == method]
                rec = min(cands, key=lambda r: abs(r.n_compensated - common))
                if rec.pdfs[s] is not None:
                    ax.stairs(rec.pdfs[s].density, rec.pdfs[s].edges,
                              linestyle="--",
                              label=f"{method} (N_c={rec.n_compensated})")
            ax.set_xlabel(f"SRQ {s}")
            ax.set_ylabel("estimated pdf")
            ax.legend(fontsize=7)
            fig.tight_layout()
            p = out / f"pdf_overlay_srq{s}.svg"
            fig.savefig(p, metadata={"Date": None})
            plt.close(fig)
            written.append(p)
    return written


def plot_from_csv(records_csv, output_dir=None):
    """Re-render the error plots from a records.csv written by run_study."""
    import csv as _csv

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(records_csv)
    out = Path(output_dir) if output_dir else path.parent
    rows = []
    with open(path) as f:
        for row in _csv.DictReader(f):
            if row["status"] == "ok":
                rows.append(row)
    if not rows:
        raise ValueError("records file holds no successful records")
    written = []
    srqs = sorted({r["srq"] for r in rows})
    stat_names = sorted({r["statistic"] for r in rows})
    for s in srqs:
        for stat_name in stat_names:
            sel = [r for r in rows if r["srq"] == s and r["statistic"] == stat_name]
            fig, ax = plt.subplots(figsize=(5, 4))
            for method in sorted({r["method"] for r in sel}):
                pts = sorted((int(r["N_c"]), float(r["reference_error"]))
                             for r in sel if r["method"] == method)
                ax.loglog([p[0] for p in pts], [max(p[1], 1e-300) for p in pts],
                          marker="o", label=method)
            ax.set_xlabel("compensated evaluations N_c")
            ax.set_ylabel(f"absolute error: {stat_name} (SRQ {s})")
            ax.legend(fontsize=7)
            fig.tight_layout()
            p = out / f"error_srq{s}_{stat_name}.svg"
            fig.savefig(p, metadata={"Date": None})
            plt.close(fig)
            written.append(p)
    return written


# -- CLI -------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="uqbench",
                                     description="UQ method comparison benchmark")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run the full study from a JSON config")
    p_run.add_argument("config")
    p_run.add_argument("--output-dir", default=None)
    p_run.add_argument("--no-plots", action="store_true")
    p_ref = sub.add_parser("reference", help="run only the reference statistics")
    p_ref.add_argument("config")
    p_ref.add_argument("--output-dir", default=None)
    p_plot = sub.add_parser("plot", help="re-render plots from a records.csv")
    p_plot.add_argument("records")
    p_plot.add_argument("--output-dir", default=None)
    args = parser.parse_args(argv)

    if args.command == "plot":
        for p in plot_from_csv(args.records, args.output_dir):
            print(p)
        return 0

    config = StudyConfig.from_file(args.config)
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.command == "reference":
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        run_reference(config, output_dir=out)
        print(out / "reference.csv")
        return 0

    result = run_study(config, make_plots=not args.no_plots)
    skippable = {m["name"] for m in config.methods if m.get("skippable")}
    bad = [r for r in result.records
           if r.status != "ok" and r.method not in skippable]
    for rec in result.records:
        print(f"{rec.method:8s} {rec.label:12s} N={rec.n_samples:<5d} "
              f"N_c={rec.n_compensated:<5d} {rec.status}"
              + (f"  ({rec.message})" if rec.message else ""))
    print(result.output_dir / "records.csv")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
