import itertools

import numpy as np
import pytest

from random_machines import (
    CsvSource,
    ExperimentPlan,
    InputError,
    SimConfig,
    SimKind,
    agreement_study,
    all_methods,
    gamma_sweep,
    parse_methods,
    report_from_json,
    report_to_csv,
    report_to_json,
    run_experiment,
    win_proportions,
)
from random_machines.bench import DEFAULT_GAMMA_GRID, ReportRow, _assemble, load_report, write_report


def tiny_plan(**overrides):
    defaults = dict(
        source=SimConfig(SimKind.SPHERE, n=40, p=2, ratio=0.5, seed=0),
        methods=parse_methods("svm:gaussian"),
        repetitions=1,
        bootstraps=4,
        seed=99,
    )
    defaults.update(overrides)
    return ExperimentPlan(**defaults)


def synthetic_report(values, methods=("a", "b"), dataset="d0"):
    """Build an EvalReport from a {method: [metric per rep]} mapping."""
    rows = []
    for method in methods:
        for rep, acc in enumerate(values[method]):
            rows.append(
                ReportRow(method=method, repetition=rep, split_seed=rep, acc=acc,
                          mcc=2 * acc - 1, umcc=acc, fit_seconds=0.001, predict_seconds=0.001)
            )
    plan = tiny_plan()
    report = _assemble(plan, rows)
    report.provenance["dataset"] = dataset
    return report


class TestParseMethods:
    def test_tokens(self):
        methods = parse_methods("rm,bsvm:gaussian,svm:linear")
        assert [m.token for m in methods] == ["rm", "bsvm:gaussian", "svm:linear"]
        assert methods[1].kernel.kind.value == "gaussian"

    def test_kernel_params_flow_from_flags(self):
        (method,) = parse_methods("svm:poly", gamma=0.5, degree=3)
        assert method.kernel.gamma == 0.5 and method.kernel.degree == 3

    def test_all_methods_is_nine(self):
        assert len(all_methods()) == 9

    def test_rejects_bad_tokens(self):
        for bad in ("", "rm:gaussian", "bsvm", "boost:linear", "svm:sigmoid", "rm,rm"):
            with pytest.raises(InputError):
                parse_methods(bad)


class TestRunExperiment:
    def test_single_rep_single_method_has_one_row(self):
        report = run_experiment(tiny_plan())
        assert len(report.rows) == 1
        row = report.rows[0]
        assert row.method == "svm:gaussian" and row.repetition == 0
        assert 0.0 <= row.acc <= 1.0
        assert row.fit_seconds > 0.0 and row.predict_seconds > 0.0

    def test_row_count_is_methods_times_reps(self):
        report = run_experiment(tiny_plan(methods=parse_methods("svm:linear,svm:gaussian"), repetitions=3))
        assert len(report.rows) == 6
        assert report.methods == ("svm:gaussian", "svm:linear")
        assert report.repetitions == 3

    def test_rows_sorted_by_method_then_repetition(self):
        report = run_experiment(tiny_plan(methods=parse_methods("svm:linear,bsvm:gaussian"), repetitions=2))
        keys = [(r.method, r.repetition) for r in report.rows]
        assert keys == sorted(keys)

    def test_deterministic_reports(self):
        plan = tiny_plan(methods=parse_methods("rm"), repetitions=2, bootstraps=6)
        a, b = run_experiment(plan), run_experiment(plan)
        assert report_to_csv(a) == report_to_csv(b)
        assert report_to_json(a) == report_to_json(b)

    def test_split_seed_recorded_as_master_xor_rep(self):
        report = run_experiment(tiny_plan(repetitions=2, seed=1000))
        assert [r.split_seed for r in report.rows] == [1000 ^ 0, 1000 ^ 1]

    def test_error_carries_method_and_repetition_context(self):
        plan = tiny_plan(source=SimConfig(SimKind.GAUSS_FAR, n=12, p=2, ratio=0.1, seed=0),
                         methods=parse_methods("rm"), bootstraps=2, repetitions=1)
        with pytest.raises((InputError, Exception), match="rm"):
            run_experiment(plan)

    def test_provenance_echoes_plan(self):
        report = run_experiment(tiny_plan(seed=321))
        prov = report.provenance
        assert prov["seed"] == 321
        assert prov["methods"] == ["svm:gaussian"]
        assert prov["dataset"].startswith("sim3")
        assert prov["standardized"] is False


class TestWinProportions:
    def test_strict_dominance(self):
        report = synthetic_report({"a": [0.9, 0.8], "b": [0.5, 0.4]})
        methods, wins = win_proportions([report], "acc")
        ia, ib = methods.index("a"), methods.index("b")
        assert wins[ia, ib] == 1.0 and wins[ib, ia] == 0.0

    def test_identical_methods_tie_to_zero(self):
        report = synthetic_report({"a": [0.7, 0.7], "b": [0.7, 0.7]})
        _, wins = win_proportions([report], "acc")
        assert np.all(wins == 0.0)

    def test_hand_counted_three_methods(self):
        r1 = synthetic_report({"a": [0.9, 0.1], "b": [0.5, 0.5], "c": [0.2, 0.6]},
                              methods=("a", "b", "c"), dataset="d1")
        r2 = synthetic_report({"a": [0.3, 0.8], "b": [0.3, 0.2], "c": [0.4, 0.9]},
                              methods=("a", "b", "c"), dataset="d2")
        methods, wins = win_proportions([r1, r2], "acc")
        values = {"a": [0.9, 0.1, 0.3, 0.8], "b": [0.5, 0.5, 0.3, 0.2], "c": [0.2, 0.6, 0.4, 0.9]}
        for i, j in itertools.permutations(range(3), 2):
            vi, vj = values[methods[i]], values[methods[j]]
            expected = np.mean([a > b for a, b in zip(vi, vj)])
            assert wins[i, j] == pytest.approx(expected)

    def test_entries_bounded_and_complementary(self):
        rng = np.random.default_rng(0)
        report = synthetic_report({"a": list(rng.random(8)), "b": list(rng.random(8))})
        _, wins = win_proportions([report], "umcc")
        assert np.all(wins >= 0.0) and np.all(wins <= 1.0)
        assert wins[0, 1] + wins[1, 0] <= 1.0

    def test_misaligned_reports_rejected(self):
        r1 = synthetic_report({"a": [0.9], "b": [0.5]})
        r2 = synthetic_report({"a": [0.9], "c": [0.5]}, methods=("a", "c"))
        with pytest.raises(InputError):
            win_proportions([r1, r2], "acc")

    def test_needs_two_methods(self):
        report = synthetic_report({"a": [0.9]}, methods=("a",))
        with pytest.raises(InputError):
            win_proportions([report], "acc")


class TestGammaSweep:
    def test_default_grid_has_seven_reports(self):
        reports = gamma_sweep(tiny_plan())
        assert len(reports) == len(DEFAULT_GAMMA_GRID) == 7
        assert [r.provenance["gamma"] for r in reports] == sorted(DEFAULT_GAMMA_GRID)

    def test_unit_gamma_reproduces_base_run(self):
        plan = tiny_plan()
        (swept,) = gamma_sweep(plan, [1.0])
        base = run_experiment(plan)
        strip = lambda rows: [(r.method, r.repetition, r.acc, r.mcc, r.umcc) for r in rows]
        assert strip(swept.rows) == strip(base.rows)

    def test_gamma_applied_to_method_kernels(self):
        reports = gamma_sweep(tiny_plan(), [0.25, 4.0])
        assert reports[0].provenance["gamma"] == 0.25
        assert reports[1].provenance["gamma"] == 4.0

    def test_rejects_bad_grid(self):
        with pytest.raises(InputError):
            gamma_sweep(tiny_plan(), [])
        with pytest.raises(InputError):
            gamma_sweep(tiny_plan(), [1.0, -2.0])


class TestAgreementStudy:
    def test_reports_accuracy_and_agreement(self):
        plan = tiny_plan(methods=parse_methods("rm,bsvm:gaussian"), bootstraps=5, repetitions=1)
        report = agreement_study(plan, k_per_dim=50)
        assert report.has_agreement()
        for row in report.rows:
            assert 0.0 <= row.agreement <= 1.0
        assert report.provenance["mc_points"] == 100

    def test_single_bootstrap_flags_degenerate_agreement(self):
        plan = tiny_plan(methods=parse_methods("bsvm:gaussian"), bootstraps=1, repetitions=1)
        report = agreement_study(plan, k_per_dim=10)
        assert report.rows[0].agreement == 1.0
        assert any("B=1" in w for w in report.provenance["warnings"])

    def test_identical_base_models_agree_fully(self):
        from random_machines.ensemble import base_votes
        from random_machines import mean_pairwise_agreement
        from random_machines.svm import SolverSettings, train_svm
        from random_machines import KernelSpec, generate

        data = generate(SimConfig(SimKind.SPHERE, n=30, p=2, ratio=0.5, seed=1))
        model = train_svm(data.features, data.labels, KernelSpec("gaussian", 1.0), SolverSettings(seed=0))
        votes = base_votes([model, model, model], np.random.default_rng(0).uniform(-1, 1, (100, 2)))
        assert mean_pairwise_agreement(votes) == 1.0

    def test_rejects_non_ensemble_methods(self):
        with pytest.raises(InputError):
            agreement_study(tiny_plan(methods=parse_methods("svm:linear,rm")))

    def test_rejects_csv_sources(self):
        plan = tiny_plan(source=CsvSource("some.csv", "y", "1"), methods=parse_methods("rm"))
        with pytest.raises(InputError, match="generator"):
            agreement_study(plan)


class TestReportSerialization:
    def test_csv_shape(self):
        report = run_experiment(tiny_plan(methods=parse_methods("svm:linear,svm:gaussian"), repetitions=2))
        lines = report_to_csv(report).strip().split("\n")
        assert lines[0] == "dataset,method,repetition,split_seed,acc,mcc,umcc"
        assert len(lines) == 1 + 4

    def test_csv_timing_columns_are_optional(self):
        report = run_experiment(tiny_plan())
        assert "fit_seconds" not in report_to_csv(report)
        assert "fit_seconds" in report_to_csv(report, timing=True)

    def test_json_round_trip(self):
        report = run_experiment(tiny_plan(repetitions=2))
        clone = report_from_json(report_to_json(report))
        assert clone.methods == report.methods
        assert [(r.method, r.repetition, r.acc) for r in clone.rows] == [
            (r.method, r.repetition, r.acc) for r in report.rows
        ]
        assert clone.provenance["seed"] == report.provenance["seed"]

    def test_json_rejects_foreign_documents(self):
        with pytest.raises(InputError):
            report_from_json('{"format": "nope", "version": 1}')

    def test_write_report_atomic(self, tmp_path):
        report = run_experiment(tiny_plan())
        out = tmp_path / "report.csv"
        write_report(report, out, fmt="csv")
        assert out.read_text().startswith("dataset,")
        assert not list(tmp_path.glob(".rmbench-*"))  # no temp litter

    def test_load_report(self, tmp_path):
        report = run_experiment(tiny_plan())
        out = tmp_path / "report.json"
        write_report(report, out, fmt="json")
        loaded = load_report(out)
        assert loaded.methods == report.methods

    def test_aggregates_mean_matches_rows(self):
        report = run_experiment(tiny_plan(repetitions=3))
        accs = [r.acc for r in report.rows]
        assert report.aggregates["svm:gaussian"]["acc"]["mean"] == pytest.approx(np.mean(accs))


class TestPlanValidation:
    def test_rejects_zero_reps(self):
        with pytest.raises(InputError):
            tiny_plan(repetitions=0)

    def test_rejects_empty_methods(self):
        with pytest.raises(InputError):
            tiny_plan(methods=())

    def test_rejects_unknown_metrics(self):
        with pytest.raises(InputError):
            tiny_plan(metrics=("acc", "f1"))

    def test_rejects_bad_train_fraction(self):
        with pytest.raises(InputError):
            tiny_plan(train_fraction=1.0)
