"""Experiment harness: repeated-holdout comparisons, gamma sweeps,
win-proportion matrices and the accuracy/agreement study.

Every repetition draws a fresh stratified holdout split (seed = master
seed XOR repetition index), standardizes on the training side, fits each
requested method and scores the test side.  All derived seeds are
recorded in the report so any row can be reproduced in isolation.
"""
from __future__ import annotations

import dataclasses
import json
import os
import tempfile
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__ as _version
from .data import Dataset, SimConfig, generate, holdout_split, load_csv, standardize
from .ensemble import (
    EnsembleConfig,
    base_votes,
    default_kernels,
    fit_bagged_svm,
    fit_random_machines,
    predict_bagged_batch,
    predict_rm_batch,
)
from .errors import InputError, TrainingError
from .kernels import KernelKind, KernelSpec
from .metrics import accuracy, confusion, mcc, mean_pairwise_agreement, umcc
from .seeding import mix_seed
from .svm import SolverSettings, predict_batch, train_svm

DEFAULT_SEED = 20190407
DEFAULT_GAMMA_GRID = tuple(2.0**k for k in range(-3, 4))
METRIC_NAMES = ("acc", "mcc", "umcc")

_REPORT_FORMAT = "random-machines/report"
_REPORT_VERSION = 1
_MASK64 = (1 << 64) - 1

RM = "rm"
BAGGED = "bsvm"
SINGLE = "svm"

_KIND_ALIASES = {
    "linear": KernelKind.LINEAR,
    "poly": KernelKind.POLYNOMIAL,
    "polynomial": KernelKind.POLYNOMIAL,
    "gaussian": KernelKind.GAUSSIAN,
    "rbf": KernelKind.GAUSSIAN,
    "laplacian": KernelKind.LAPLACIAN,
}


@dataclass(frozen=True)
class MethodSpec:
    """One competitor: random machines, a bagged SVM, or a single SVM."""

    family: str
    kernel: Optional[KernelSpec] = None

    @property
    def token(self) -> str:
        if self.family == RM:
            return RM
        return f"{self.family}:{self.kernel.kind.value}"

    @property
    def is_ensemble(self) -> bool:
        return self.family in (RM, BAGGED)


def parse_methods(text, gamma: float = 1.0, degree: int = 2) -> tuple:
    """Parse a comma-separated method list like ``rm,bsvm:gaussian,svm:linear``."""
    if isinstance(text, str):
        items = [t.strip() for t in text.split(",") if t.strip()]
    else:
        items = [str(t).strip() for t in text]
    if not items:
        raise InputError("at least one method is required")
    methods = []
    for item in items:
        family, _, kind_name = item.partition(":")
        family = family.lower()
        if family == RM:
            if kind_name:
                raise InputError(f"method {item!r}: rm takes no kernel suffix")
            methods.append(MethodSpec(RM))
            continue
        if family not in (BAGGED, SINGLE):
            raise InputError(f"unknown method family {family!r} in {item!r}")
        if not kind_name:
            raise InputError(f"method {item!r} needs a kernel, e.g. {family}:gaussian")
        kind = _KIND_ALIASES.get(kind_name.lower())
        if kind is None:
            raise InputError(f"unknown kernel {kind_name!r} in method {item!r}")
        methods.append(MethodSpec(family, KernelSpec(kind, gamma, degree)))
    if len(set(m.token for m in methods)) != len(methods):
        raise InputError("duplicate methods requested")
    return tuple(methods)


def all_methods(gamma: float = 1.0, degree: int = 2) -> tuple:
    """RM plus every bagged and single-kernel competitor."""
    tokens = [RM]
    for family in (BAGGED, SINGLE):
        for kind in ("linear", "poly", "gaussian", "laplacian"):
            tokens.append(f"{family}:{kind}")
    return parse_methods(tokens, gamma, degree)


@dataclass(frozen=True)
class CsvSource:
    path: str
    label_column: Union[str, int]
    positive_label: str
    sidecar: Optional[str] = None

    def label(self) -> str:
        return os.path.basename(str(self.path))


@dataclass(frozen=True)
class ExperimentPlan:
    source: Union[SimConfig, CsvSource]
    methods: tuple
    repetitions: int = 30
    train_fraction: float = 0.7
    bootstraps: int = 100
    cost: float = 1.0
    probe_split: float = 0.3
    gamma: float = 1.0
    degree: int = 2
    solver: SolverSettings = field(default_factory=SolverSettings)
    metrics: tuple = METRIC_NAMES
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.repetitions < 1:
            raise InputError(f"repetitions must be >= 1, got {self.repetitions}")
        if not self.methods:
            raise InputError("at least one method is required")
        if not 0.0 < self.train_fraction < 1.0:
            raise InputError(f"train fraction must lie in (0, 1), got {self.train_fraction}")
        bad = [m for m in self.metrics if m not in METRIC_NAMES]
        if bad or not self.metrics:
            raise InputError(f"unknown metrics {bad}; choose from {METRIC_NAMES}")

    def dataset_label(self) -> str:
        return self.source.label()


@dataclass(frozen=True)
class ReportRow:
    method: str
    repetition: int
    split_seed: int
    acc: float
    mcc: float
    umcc: float
    fit_seconds: float
    predict_seconds: float
    agreement: Optional[float] = None

    def metric(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True)
class EvalReport:
    rows: tuple
    aggregates: dict
    provenance: dict

    @property
    def methods(self) -> tuple:
        return tuple(sorted(set(r.method for r in self.rows)))

    @property
    def repetitions(self) -> int:
        return 1 + max(r.repetition for r in self.rows)

    def has_agreement(self) -> bool:
        return any(r.agreement is not None for r in self.rows)


def _load_data(source) -> Dataset:
    if isinstance(source, SimConfig):
        return generate(source)
    return load_csv(source.path, source.label_column, source.positive_label, source.sidecar)


def _source_sim(plan: ExperimentPlan, seed: int) -> SimConfig:
    # the benchmark dataset itself is drawn once, from a stream distinct
    # from every split/fit stream
    return replace(plan.source, seed=seed)


def _fit_method(method: MethodSpec, train: Dataset, plan: ExperimentPlan, seed: int):
    if method.family == RM:
        config = EnsembleConfig(
            kernels=default_kernels(plan.gamma, plan.degree),
            bootstraps=plan.bootstraps,
            cost=plan.cost,
            probe_split=plan.probe_split,
            solver=plan.solver,
            seed=seed,
        )
        return fit_random_machines(train, config)
    if method.family == BAGGED:
        return fit_bagged_svm(train, method.kernel, plan.bootstraps, plan.cost, plan.solver, seed)
    settings = replace(plan.solver, cost=plan.cost, seed=seed)
    return train_svm(train.features, train.labels, method.kernel, settings)


def _predict_method(method: MethodSpec, fitted, X) -> np.ndarray:
    if method.family == RM:
        return predict_rm_batch(fitted, X)
    if method.family == BAGGED:
        return predict_bagged_batch(fitted, X)
    return predict_batch(fitted, X)


def _provenance(plan: ExperimentPlan, extra: Optional[dict] = None) -> dict:
    if isinstance(plan.source, SimConfig):
        source = {
            "type": "sim",
            "kind": plan.source.kind.value,
            "n": plan.source.n,
            "p": plan.source.p,
            "ratio": plan.source.ratio,
        }
    else:
        source = {
            "type": "csv",
            "path": str(plan.source.path),
            "label_column": plan.source.label_column,
            "positive_label": plan.source.positive_label,
        }
    prov = {
        "artifact_version": _version,
        "dataset": plan.dataset_label(),
        "source": source,
        "methods": [m.token for m in plan.methods],
        "metrics": list(plan.metrics),
        "repetitions": plan.repetitions,
        "train_fraction": plan.train_fraction,
        "bootstraps": plan.bootstraps,
        "cost": plan.cost,
        "probe_split": plan.probe_split,
        "gamma": plan.gamma,
        "degree": plan.degree,
        "seed": plan.seed,
        "kkt_tolerance": plan.solver.kkt_tolerance,
        "standardized": isinstance(plan.source, CsvSource),
        "win_tie_rule": "strict inequality; ties favor neither method",
    }
    if extra:
        prov.update(extra)
    return prov


def _prepare_split(plan, data, rep_seed):
    """Holdout split, standardized on train for file-backed (real) data.

    Synthetic generators emit features on deliberately calibrated scales
    (unit cube, fixed-variance normals), so rescaling them would only
    distort the kernel geometry the benchmarks are defined on; CSV data
    gets the usual train-fitted zero-mean/unit-variance transform.
    """
    train, test = holdout_split(data, plan.train_fraction, rep_seed)
    if isinstance(plan.source, CsvSource):
        train, (test,) = standardize(train, [test])
    return train, test


def run_experiment(plan: ExperimentPlan) -> EvalReport:
    """Repeated-holdout evaluation of every method in the plan."""
    data = _get_plan_data(plan)
    rows = []
    for rep in range(plan.repetitions):
        rep_seed = (plan.seed ^ rep) & _MASK64
        train_s, test_s = _prepare_split(plan, data, rep_seed)
        for method in plan.methods:
            row, _ = _score_method(method, plan, rep, rep_seed, train_s, test_s)
            rows.append(row)
    return _assemble(plan, rows)


def _get_plan_data(plan: ExperimentPlan) -> Dataset:
    if isinstance(plan.source, SimConfig):
        return generate(_source_sim(plan, mix_seed(plan.seed, "dataset")))
    return _load_data(plan.source)


def _score_method(method, plan, rep, rep_seed, train_s, test_s):
    fit_seed = mix_seed(rep_seed, method.token)
    try:
        start = time.perf_counter()
        fitted = _fit_method(method, train_s, plan, fit_seed)
        mid = time.perf_counter()
        preds = _predict_method(method, fitted, test_s.features)
        end = time.perf_counter()
    except (InputError, TrainingError) as exc:
        raise type(exc)(f"method {method.token!r}, repetition {rep}: {exc}") from exc
    counts = confusion(preds, test_s.labels)
    m = mcc(counts)
    row = ReportRow(
        method=method.token,
        repetition=rep,
        split_seed=rep_seed,
        acc=accuracy(counts),
        mcc=m,
        umcc=umcc(m),
        fit_seconds=mid - start,
        predict_seconds=end - mid,
    )
    return row, fitted


def _assemble(plan, rows, extra_provenance=None, warnings=None) -> EvalReport:
    rows = tuple(sorted(rows, key=lambda r: (r.method, r.repetition)))
    with_agreement = any(r.agreement is not None for r in rows)
    aggregates = {}
    for method in sorted(set(r.method for r in rows)):
        values = [r for r in rows if r.method == method]
        entry = {}
        for name in plan.metrics:
            samples = np.array([r.metric(name) for r in values])
            entry[name] = {"mean": float(samples.mean()), "sd": _sd(samples)}
        if with_agreement:
            samples = np.array([r.agreement for r in values if r.agreement is not None])
            if samples.size:
                entry["agreement"] = {"mean": float(samples.mean()), "sd": _sd(samples)}
        aggregates[method] = entry
    provenance = _provenance(plan, extra_provenance)
    if warnings:
        provenance["warnings"] = list(warnings)
    return EvalReport(rows=rows, aggregates=aggregates, provenance=provenance)


def _sd(samples: np.ndarray) -> float:
    return float(samples.std(ddof=1)) if samples.size > 1 else 0.0


def gamma_sweep(plan: ExperimentPlan, gammas: Optional[Sequence[float]] = None) -> list:
    """Re-run the plan once per gamma, applied to every kernel in play."""
    grid = tuple(float(g) for g in (gammas if gammas is not None else DEFAULT_GAMMA_GRID))
    if not grid or any(g <= 0 for g in grid):
        raise InputError("gamma grid must be non-empty and positive")
    reports = []
    for g in grid:
        methods = tuple(
            m if m.kernel is None else MethodSpec(m.family, replace(m.kernel, gamma=g))
            for m in plan.methods
        )
        swept = dataclasses.replace(plan, gamma=g, methods=methods)
        reports.append(run_experiment(swept))
    return reports


def agreement_study(plan: ExperimentPlan, k_per_dim: int = 1000) -> EvalReport:
    """Test accuracy plus mean pairwise base-model agreement per repetition.

    Agreement is measured on k = k_per_dim * p Monte Carlo points drawn
    fresh from the data generator (standardized with the train transform),
    so it reflects decision-boundary overlap rather than test-set luck.
    """
    if not isinstance(plan.source, SimConfig):
        raise InputError("agreement_study needs a generator-backed dataset; supply a sim source")
    if not all(m.is_ensemble for m in plan.methods):
        raise InputError("agreement_study is defined for ensemble methods only (rm, bsvm:*)")
    if k_per_dim < 1:
        raise InputError(f"k_per_dim must be >= 1, got {k_per_dim}")
    data = _get_plan_data(plan)
    k_points = k_per_dim * data.p
    warnings = set()
    rows = []
    for rep in range(plan.repetitions):
        rep_seed = (plan.seed ^ rep) & _MASK64
        train_s, test_s = _prepare_split(plan, data, rep_seed)
        mc = generate(replace(plan.source, n=k_points, seed=mix_seed(rep_seed, "mc-points")))
        mc_X = train_s.scaling.apply(mc.features) if train_s.scaling is not None else mc.features
        for method in plan.methods:
            row, fitted = _score_method(method, plan, rep, rep_seed, train_s, test_s)
            svms = [m.svm for m in fitted.base_models] if method.family == RM else list(fitted.base_models)
            if len(svms) < 2:
                agr = 1.0
                warnings.add(f"{method.token}: agreement degenerate for B=1, reported as 1")
            else:
                agr = mean_pairwise_agreement(base_votes(svms, mc_X))
            rows.append(dataclasses.replace(row, agreement=agr))
    return _assemble(plan, rows, {"k_per_dim": k_per_dim, "mc_points": k_points}, warnings)


def win_proportions(reports: Sequence[EvalReport], metric: str = "acc"):
    """Pairwise win matrix: entry (i, j) is the fraction of (dataset,
    repetition) cells where method i strictly beats method j on the metric.
    Ties count toward neither method but stay in the denominator.
    """
    if metric not in METRIC_NAMES:
        raise InputError(f"unknown metric {metric!r}; choose from {METRIC_NAMES}")
    if not reports:
        raise InputError("need at least one report")
    methods = reports[0].methods
    if len(methods) < 2:
        raise InputError("win proportions need at least two methods")
    blocks = []
    for report in reports:
        if report.methods != methods:
            raise InputError(f"reports are misaligned: {report.methods} vs {methods}")
        reps = report.repetitions
        block = np.empty((len(methods), reps))
        for mi, method in enumerate(methods):
            rows = sorted((r for r in report.rows if r.method == method), key=lambda r: r.repetition)
            if len(rows) != reps or [r.repetition for r in rows] != list(range(reps)):
                raise InputError(f"report for {method!r} is missing repetitions")
            block[mi] = [r.metric(metric) for r in rows]
        blocks.append(block)
    values = np.hstack(blocks)  # methods x (datasets * reps)
    wins = (values[:, None, :] > values[None, :, :]).mean(axis=2)
    np.fill_diagonal(wins, 0.0)
    return methods, wins


# ---------------------------------------------------------------------------
# report serialization

def report_to_csv(report: EvalReport, timing: bool = False) -> str:
    """Flat delimited form: one row per method and repetition."""
    metrics = [m for m in report.provenance.get("metrics", METRIC_NAMES)]
    header = ["dataset", "method", "repetition", "split_seed"] + metrics
    if report.has_agreement():
        header.append("agreement")
    if timing:
        header += ["fit_seconds", "predict_seconds"]
    dataset = report.provenance.get("dataset", "")
    lines = [",".join(header)]
    for row in report.rows:
        cells = [dataset, row.method, str(row.repetition), str(row.split_seed)]
        cells += [repr(row.metric(m)) for m in metrics]
        if report.has_agreement():
            cells.append("" if row.agreement is None else repr(row.agreement))
        if timing:
            cells += [f"{row.fit_seconds:.6f}", f"{row.predict_seconds:.6f}"]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def report_to_json(report: EvalReport, timing: bool = False) -> str:
    rows = []
    for row in report.rows:
        item = {
            "method": row.method,
            "repetition": row.repetition,
            "split_seed": row.split_seed,
            "acc": row.acc,
            "mcc": row.mcc,
            "umcc": row.umcc,
        }
        if row.agreement is not None:
            item["agreement"] = row.agreement
        if timing:
            item["fit_seconds"] = row.fit_seconds
            item["predict_seconds"] = row.predict_seconds
        rows.append(item)
    payload = {
        "format": _REPORT_FORMAT,
        "version": _REPORT_VERSION,
        "provenance": report.provenance,
        "aggregates": report.aggregates,
        "rows": rows,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_from_json(text: str) -> EvalReport:
    payload = json.loads(text)
    if payload.get("format") != _REPORT_FORMAT:
        raise InputError(f"not a report document: format={payload.get('format')!r}")
    if payload.get("version") != _REPORT_VERSION:
        raise InputError(f"unsupported report version {payload.get('version')!r}")
    rows = tuple(
        ReportRow(
            method=item["method"],
            repetition=int(item["repetition"]),
            split_seed=int(item["split_seed"]),
            acc=float(item["acc"]),
            mcc=float(item["mcc"]),
            umcc=float(item["umcc"]),
            fit_seconds=float(item.get("fit_seconds", 0.0)),
            predict_seconds=float(item.get("predict_seconds", 0.0)),
            agreement=(None if item.get("agreement") is None else float(item["agreement"])),
        )
        for item in payload["rows"]
    )
    return EvalReport(rows=rows, aggregates=payload.get("aggregates", {}), provenance=payload.get("provenance", {}))


def load_report(path) -> EvalReport:
    try:
        with open(path, encoding="utf-8") as fh:
            return report_from_json(fh.read())
    except OSError as exc:
        raise InputError(f"cannot open report {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"report {path} is not valid JSON: {exc}") from exc


def write_text_atomic(text: str, path) -> None:
    """Write via a sibling temp file and rename, so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".rmbench-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_report(report: EvalReport, path, fmt: str = "csv", timing: bool = False) -> None:
    if fmt == "csv":
        text = report_to_csv(report, timing=timing)
    elif fmt == "json":
        text = report_to_json(report, timing=timing)
    else:
        raise InputError(f"unknown report format {fmt!r}; choose csv or json")
    write_text_atomic(text, path)
