"""Command-line benchmark harness.

Subcommands: ``run`` (repeated-holdout comparison), ``sweep-gamma``,
``agreement`` and ``wins``.  Reports are written atomically as CSV or
JSON; when an output path is given, matplotlib figures are rendered next
to it unless ``--no-plot`` is passed.

Exit codes: 0 success, 1 input error, 2 training failure.
"""
from __future__ import annotations

import functools
import os
import sys

import click

from .bench import (
    DEFAULT_SEED,
    CsvSource,
    ExperimentPlan,
    agreement_study,
    all_methods,
    gamma_sweep,
    load_report,
    parse_methods,
    report_to_csv,
    report_to_json,
    run_experiment,
    win_proportions,
    write_report,
    write_text_atomic,
)
from .data import SimConfig, SimKind
from .errors import InputError, TrainingError
from .svm import SolverSettings


def _guarded(fn):
    """Map package errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except InputError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except TrainingError as exc:
            click.echo(f"training error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _shared_options(fn):
    for option in reversed(
        [
            click.option(
                "--dataset",
                type=click.Choice(["sim1", "sim2", "sim3", "csv"]),
                default="sim3",
                show_default=True,
                help="Data source: a synthetic generator or a CSV file.",
            ),
            click.option("--csv", "csv_path", type=click.Path(), default=None, help="CSV path (dataset=csv)."),
            click.option("--label", default=None, help="Label column name or index (dataset=csv)."),
            click.option("--positive", default=None, help="Label value mapped to +1 (dataset=csv)."),
            click.option("--n", default=100, show_default=True, help="Rows to generate (sim datasets)."),
            click.option("--p", default=2, show_default=True, help="Feature dimensionality (sim datasets)."),
            click.option("--ratio", default=0.5, show_default=True, help="Class-A fraction (sim datasets)."),
            click.option("--methods", default="rm", show_default=True,
                         help="Comma list, e.g. rm,bsvm:gaussian,svm:linear; 'all' for every method."),
            click.option("--b", "bootstraps", default=100, show_default=True, help="Bootstrap models per ensemble."),
            click.option("--cost", default=1.0, show_default=True, help="Soft-margin cost C."),
            click.option("--gamma", default=1.0, show_default=True, help="Kernel scale applied to every kernel."),
            click.option("--degree", default=2, show_default=True, help="Polynomial kernel degree."),
            click.option("--probe-split", default=0.3, show_default=True,
                         help="Internal fraction held out to rate kernels."),
            click.option("--reps", default=30, show_default=True, help="Holdout repetitions."),
            click.option("--train-frac", default=0.7, show_default=True, help="Training fraction per repetition."),
            click.option("--seed", default=DEFAULT_SEED, show_default=True, help="Master seed."),
            click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True),
            click.option("--out", type=click.Path(), default=None, help="Output path (stdout when omitted)."),
            click.option("--timing", is_flag=True, help="Include wall-time columns (breaks byte-level determinism)."),
            click.option("--plot/--no-plot", default=True, show_default=True, help="Render figures next to --out."),
        ]
    ):
        fn = option(fn)
    return fn


def _build_plan(dataset, csv_path, label, positive, n, p, ratio, methods, bootstraps, cost, gamma, degree,
                probe_split, reps, train_frac, seed, ensembles_only=False) -> ExperimentPlan:
    if dataset == "csv":
        if not csv_path:
            raise InputError("--csv PATH is required when --dataset csv")
        source = CsvSource(csv_path, label, positive)
    else:
        source = SimConfig(SimKind(dataset), n=n, p=p, ratio=ratio, seed=0)
    if methods.strip().lower() == "all":
        parsed = all_methods(gamma, degree)
    else:
        parsed = parse_methods(methods, gamma, degree)
    if ensembles_only and not all(m.is_ensemble for m in parsed):
        raise InputError("this command accepts ensemble methods only (rm, bsvm:*)")
    return ExperimentPlan(
        source=source,
        methods=parsed,
        repetitions=reps,
        train_fraction=train_frac,
        bootstraps=bootstraps,
        cost=cost,
        probe_split=probe_split,
        gamma=gamma,
        degree=degree,
        solver=SolverSettings(cost=cost),
        seed=seed,
    )


def _emit(report, fmt, out, timing, plot, figure_fn=None):
    if out is None:
        text = report_to_csv(report, timing=timing) if fmt == "csv" else report_to_json(report, timing=timing)
        click.echo(text, nl=False)
        return
    write_report(report, out, fmt=fmt, timing=timing)
    click.echo(f"wrote {out}", err=True)
    if plot and figure_fn is not None:
        for path in figure_fn():
            click.echo(f"wrote {path}", err=True)


def _stem(out) -> str:
    base, _ = os.path.splitext(str(out))
    return base


@click.group()
def cli():
    """Benchmark harness for weighted random-kernel SVM ensembles."""


@cli.command()
@_shared_options
@_guarded
def run(dataset, csv_path, label, positive, n, p, ratio, methods, bootstraps, cost, gamma, degree,
        probe_split, reps, train_frac, seed, fmt, out, timing, plot):
    """Repeated-holdout comparison of the requested methods."""
    plan = _build_plan(dataset, csv_path, label, positive, n, p, ratio, methods, bootstraps, cost,
                       gamma, degree, probe_split, reps, train_frac, seed)
    report = run_experiment(plan)

    def figures():
        from . import plots

        written = []
        for metric in plan.metrics:
            path = f"{_stem(out)}_{metric}.png"
            plots.metric_boxplot(report, metric, path)
            written.append(path)
        return written

    _emit(report, fmt, out, timing, plot, figures)


@cli.command("sweep-gamma")
@_shared_options
@click.option("--gammas", default=None, help="Comma list of gamma values; default 2^-3..2^3.")
@_guarded
def sweep_gamma_cmd(dataset, csv_path, label, positive, n, p, ratio, methods, bootstraps, cost, gamma, degree,
                    probe_split, reps, train_frac, seed, fmt, out, timing, plot, gammas):
    """Re-run the comparison across a grid of kernel scales."""
    plan = _build_plan(dataset, csv_path, label, positive, n, p, ratio, methods, bootstraps, cost,
                       gamma, degree, probe_split, reps, train_frac, seed)
    grid = None
    if gammas:
        try:
            grid = [float(g) for g in gammas.split(",") if g.strip()]
        except ValueError:
            raise InputError(f"cannot parse gamma grid {gammas!r}") from None
    reports = gamma_sweep(plan, grid)

    if out is None:
        for report in reports:
            text = report_to_csv(report, timing=timing) if fmt == "csv" else report_to_json(report, timing=timing)
            click.echo(text, nl=False)
        return
    stem = _stem(out)
    ext = "csv" if fmt == "csv" else "json"
    for report in reports:
        g = report.provenance["gamma"]
        path = f"{stem}_gamma{g:g}.{ext}"
        write_report(report, path, fmt=fmt, timing=timing)
        click.echo(f"wrote {path}", err=True)
    if plot:
        from . import plots

        for metric in plan.metrics:
            path = f"{stem}_sweep_{metric}.png"
            plots.sweep_lines(reports, metric, path)
            click.echo(f"wrote {path}", err=True)


@cli.command()
@_shared_options
@click.option("--k-per-dim", default=1000, show_default=True,
              help="Monte Carlo agreement points per feature dimension.")
@_guarded
def agreement(dataset, csv_path, label, positive, n, p, ratio, methods, bootstraps, cost, gamma, degree,
              probe_split, reps, train_frac, seed, fmt, out, timing, plot, k_per_dim):
    """Accuracy and base-model agreement for ensemble methods."""
    plan = _build_plan(dataset, csv_path, label, positive, n, p, ratio, methods, bootstraps, cost,
                       gamma, degree, probe_split, reps, train_frac, seed, ensembles_only=True)
    report = agreement_study(plan, k_per_dim=k_per_dim)

    def figures():
        from . import plots

        path = f"{_stem(out)}_acc_agreement.png"
        plots.accuracy_agreement_scatter(report, path)
        return [path]

    _emit(report, fmt, out, timing, plot, figures)


@cli.command()
@click.argument("reports", nargs=-1, required=True, type=click.Path())
@click.option("--metric", type=click.Choice(["acc", "mcc", "umcc"]), default="acc", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", type=click.Path(), default=None)
@click.option("--plot/--no-plot", default=True, show_default=True)
@_guarded
def wins(reports, metric, fmt, out, plot):
    """Pairwise win-proportion matrix aggregated over saved JSON reports."""
    loaded = [load_report(path) for path in reports]
    methods, matrix = win_proportions(loaded, metric)
    if fmt == "csv":
        lines = ["method," + ",".join(methods)]
        for name, row in zip(methods, matrix):
            lines.append(name + "," + ",".join(repr(float(v)) for v in row))
        text = "\n".join(lines) + "\n"
    else:
        import json as _json

        text = _json.dumps(
            {"metric": metric, "methods": list(methods), "wins": [[float(v) for v in row] for row in matrix]},
            indent=2,
            sort_keys=True,
        ) + "\n"
    if out is None:
        click.echo(text, nl=False)
        return
    write_text_atomic(text, out)
    click.echo(f"wrote {out}", err=True)
    if plot:
        from . import plots

        path = f"{_stem(out)}_wins_{metric}.png"
        plots.win_matrix_heatmap(methods, matrix, metric, path)
        click.echo(f"wrote {path}", err=True)


def main():
    try:
        cli.main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)


if __name__ == "__main__":
    main()
