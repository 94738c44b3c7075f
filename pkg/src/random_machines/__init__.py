"""Weighted random-kernel SVM ensembles and a reproducible benchmark harness."""

__version__ = "0.1.0"

from .errors import DataLoadError, InputError, TrainingError
from .kernels import KernelKind, KernelSpec, cross_matrix, evaluate, gram_matrix
from .metrics import (
    ConfusionCounts,
    accuracy,
    agreement,
    confusion,
    mcc,
    mean_pairwise_agreement,
    umcc,
)
from .data import (
    CONTINUOUS,
    DISCRETE,
    Dataset,
    Scaling,
    SimConfig,
    SimKind,
    circle_radius,
    gen_circle,
    gen_gaussian_pair,
    generate,
    holdout_split,
    load_csv,
    standardize,
)
from .svm import (
    SolverSettings,
    TrainedSvm,
    decision_value,
    decision_values,
    predict,
    predict_batch,
    svm_from_json,
    svm_to_json,
    train_svm,
)
from .ensemble import (
    BaggedSvmModel,
    BaseModel,
    EnsembleConfig,
    KernelProbabilities,
    KernelProbe,
    RandomMachinesModel,
    bootstrap_sample,
    default_kernels,
    estimate_kernel_probabilities,
    fit_bagged_svm,
    fit_random_machines,
    oob_weight,
    predict_bagged,
    predict_bagged_batch,
    predict_rm,
    predict_rm_batch,
    rm_from_json,
    rm_to_json,
    selection_probabilities,
)
from .bench import (
    CsvSource,
    EvalReport,
    ExperimentPlan,
    MethodSpec,
    ReportRow,
    agreement_study,
    all_methods,
    gamma_sweep,
    load_report,
    parse_methods,
    report_from_json,
    report_to_csv,
    report_to_json,
    run_experiment,
    win_proportions,
    write_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
