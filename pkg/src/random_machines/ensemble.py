"""Random Machines and the single-kernel bagged-SVM baseline.

Random Machines trains one probe SVM per candidate kernel on an internal
stratified split, turns the probe accuracies into sampling probabilities
via normalized log-odds, then fits B bootstrap SVMs whose kernels are
drawn from those probabilities.  Each bootstrap model votes with weight
1 / (1 - oob_accuracy)^2, so models that generalize well on their
out-of-bag rows dominate the final sign vote.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, holdout_split
from .errors import InputError, TrainingError
from .kernels import KernelKind, KernelSpec, cross_matrix, gram_matrix
from .metrics import accuracy, confusion
from .seeding import seed_from
from .svm import (
    _DENSE_GRAM_LIMIT,
    SolverSettings,
    TrainedSvm,
    decision_values,
    predict_batch,
    svm_from_dict,
    svm_to_dict,
    train_svm,
)

_ACC_CLAMP_DELTA = 1e-3  # probe accuracies are clamped into [0.5 + delta, 1 - delta]
_OOB_CLAMP = 1.0 - 1e-3  # caps a vote weight at 1e6
_BOOTSTRAP_RETRIES = 50

_RM_FORMAT = "random-machines/random-machines"
_RM_VERSION = 1


@dataclass(frozen=True)
class KernelProbe:
    """One candidate kernel with its probe accuracy and sampling probability."""

    kernel: KernelSpec
    accuracy: float
    probability: float


@dataclass(frozen=True)
class KernelProbabilities:
    entries: tuple

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([e.probability for e in self.entries])

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([e.accuracy for e in self.entries])


@dataclass(frozen=True)
class BaseModel:
    """A bootstrap SVM with its vote weight and out-of-bag accuracy."""

    svm: TrainedSvm
    weight: float
    oob_accuracy: float
    kernel_index: int


@dataclass(frozen=True)
class RandomMachinesModel:
    base_models: tuple
    probabilities: KernelProbabilities
    seed: int

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.base_models])

    @property
    def n_features(self) -> int:
        return self.base_models[0].svm.n_features


@dataclass(frozen=True)
class BaggedSvmModel:
    base_models: tuple
    kernel: KernelSpec
    seed: int

    @property
    def n_features(self) -> int:
        return self.base_models[0].n_features


def default_kernels(gamma: float = 1.0, degree: int = 2) -> tuple:
    """The stock four-kernel candidate set."""
    return (
        KernelSpec(KernelKind.LINEAR, gamma),
        KernelSpec(KernelKind.POLYNOMIAL, gamma, degree),
        KernelSpec(KernelKind.GAUSSIAN, gamma),
        KernelSpec(KernelKind.LAPLACIAN, gamma),
    )


@dataclass(frozen=True)
class EnsembleConfig:
    kernels: tuple = field(default_factory=default_kernels)
    bootstraps: int = 100
    cost: float = 1.0
    probe_split: float = 0.3
    solver: SolverSettings = field(default_factory=SolverSettings)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kernels", tuple(self.kernels))
        if len(self.kernels) < 1:
            raise InputError("at least one candidate kernel is required")
        if self.bootstraps < 1:
            raise InputError(f"bootstraps must be >= 1, got {self.bootstraps}")
        if not 0.0 < self.probe_split < 1.0:
            raise InputError(f"probe_split must lie in (0, 1), got {self.probe_split}")
        if not self.cost > 0:
            raise InputError(f"cost must be positive, got {self.cost}")


def selection_probabilities(accuracies) -> np.ndarray:
    """Normalized log-odds of probe accuracies, clamped away from 0.5 and 1.

    Accuracies at or below chance collapse to the lower clamp and get a
    probability next to zero; if every kernel sits at the lower clamp the
    distribution degenerates to uniform.
    """
    accs = np.asarray(accuracies, dtype=np.float64)
    if accs.ndim != 1 or accs.size < 1:
        raise InputError("need a non-empty accuracy vector")
    if np.any(accs < 0.0) or np.any(accs > 1.0):
        raise InputError("accuracies must lie in [0, 1]")
    low = 0.5 + _ACC_CLAMP_DELTA
    high = 1.0 - _ACC_CLAMP_DELTA
    clamped = np.clip(accs, low, high)
    if np.all(clamped == low):
        return np.full(accs.size, 1.0 / accs.size)
    logits = np.log(clamped / (1.0 - clamped))
    return logits / logits.sum()


def estimate_kernel_probabilities(
    train: Dataset, probe: Dataset, kernels, cost: float, solver: SolverSettings
) -> KernelProbabilities:
    """Train one SVM per kernel and convert probe accuracies to probabilities."""
    kernels = tuple(kernels)
    if len(kernels) < 1:
        raise InputError("need at least one candidate kernel")
    if probe.n < 1:
        raise InputError("probe split is empty")
    settings = replace(solver, cost=cost)
    accs = []
    for spec in kernels:
        model = train_svm(train.features, train.labels, spec, settings)
        preds = predict_batch(model, probe.features)
        accs.append(accuracy(confusion(preds, probe.labels)))
    probs = selection_probabilities(accs)
    entries = tuple(KernelProbe(k, float(a), float(p)) for k, a, p in zip(kernels, accs, probs))
    return KernelProbabilities(entries)


def oob_weight(omega: float) -> float:
    """Vote weight 1 / (1 - omega)^2 with omega capped so the weight tops out at 1e6."""
    if not 0.0 <= omega <= 1.0:
        raise InputError(f"out-of-bag accuracy must lie in [0, 1], got {omega}")
    clamped = min(omega, _OOB_CLAMP)
    return 1.0 / (1.0 - clamped) ** 2


def bootstrap_sample(n: int, rng: np.random.Generator) -> tuple:
    """Uniform with-replacement draw of size n plus the out-of-bag index set."""
    if n < 2:
        raise InputError(f"bootstrap needs n >= 2, got {n}")
    indices = rng.integers(0, n, size=n)
    oob = np.setdiff1d(np.arange(n), indices, assume_unique=False)
    return indices, oob


def _two_class_bootstrap(labels: np.ndarray, rng: np.random.Generator) -> tuple:
    """Bootstrap draw retried until both classes appear (bounded retries)."""
    for _ in range(_BOOTSTRAP_RETRIES):
        indices, oob = bootstrap_sample(labels.size, rng)
        drawn = labels[indices]
        if drawn.min() != drawn.max():
            return indices, oob
    raise TrainingError(f"no two-class bootstrap found in {_BOOTSTRAP_RETRIES} draws")


class _SharedGrams:
    """Full-training-set Gram per kernel, built lazily and sliced per bootstrap."""

    def __init__(self, features: np.ndarray, kernels):
        self.features = features
        self.kernels = tuple(kernels)
        self.dense = features.shape[0] <= _DENSE_GRAM_LIMIT
        self._grams = {}

    def for_bootstrap(self, kernel_index: int, indices: np.ndarray):
        if not self.dense:
            return None
        gram = self._grams.get(kernel_index)
        if gram is None:
            gram = self._grams[kernel_index] = gram_matrix(self.kernels[kernel_index], self.features)
        return gram[np.ix_(indices, indices)]


def fit_random_machines(train: Dataset, config: EnsembleConfig) -> RandomMachinesModel:
    """Fit the full ensemble; deterministic per config seed.

    Per-bootstrap RNG streams are spawned from the master seed up front,
    so a parallel fit would agree bit-for-bit with this sequential one.
    """
    _check_trainable(train)
    root = np.random.SeedSequence(config.seed)
    streams = root.spawn(config.bootstraps + 1)

    fit_part, probe_part = holdout_split(train, 1.0 - config.probe_split, seed_from(streams[0]))
    probabilities = estimate_kernel_probabilities(
        fit_part, probe_part, config.kernels, config.cost, config.solver
    )
    lam = probabilities.probabilities
    cum = np.cumsum(lam)
    probe_accs = probabilities.accuracies

    shared = _SharedGrams(train.features, config.kernels)
    base = []
    for b in range(config.bootstraps):
        rng = np.random.default_rng(streams[b + 1])
        indices, oob = _two_class_bootstrap(train.labels, rng)
        r = min(int(np.searchsorted(cum, rng.random(), side="right")), lam.size - 1)
        settings = replace(config.solver, cost=config.cost, seed=int(rng.integers(2**63)))
        model = train_svm(
            train.features[indices],
            train.labels[indices],
            config.kernels[r],
            settings,
            gram=shared.for_bootstrap(r, indices),
        )
        if oob.size:
            preds = predict_batch(model, train.features[oob])
            omega = accuracy(confusion(preds, train.labels[oob]))
        else:
            omega = probe_accs[r]  # best available estimate when nothing is out of bag
        base.append(BaseModel(model, oob_weight(omega), float(omega), r))
    return RandomMachinesModel(tuple(base), probabilities, config.seed)


def fit_bagged_svm(
    train: Dataset, spec: KernelSpec, bootstraps: int, cost: float, solver: SolverSettings, seed: int
) -> BaggedSvmModel:
    """Plain bagging with one fixed kernel and unweighted votes."""
    _check_trainable(train)
    if bootstraps < 1:
        raise InputError(f"bootstraps must be >= 1, got {bootstraps}")
    streams = np.random.SeedSequence(seed).spawn(bootstraps)
    shared = _SharedGrams(train.features, (spec,))
    models = []
    for stream in streams:
        rng = np.random.default_rng(stream)
        indices, _ = _two_class_bootstrap(train.labels, rng)
        settings = replace(solver, cost=cost, seed=int(rng.integers(2**63)))
        models.append(
            train_svm(
                train.features[indices],
                train.labels[indices],
                spec,
                settings,
                gram=shared.for_bootstrap(0, indices),
            )
        )
    return BaggedSvmModel(tuple(models), spec, seed)


def _check_trainable(train: Dataset):
    if train.n < 10:
        raise InputError(f"ensembles need at least 10 training rows, got {train.n}")
    if len(train.class_counts()) != 2:
        raise InputError("training data must contain both classes")


def base_votes(svms, X) -> np.ndarray:
    """(B, k) matrix of hard labels, one row per base model.

    Bootstrap models of one ensemble share their support vectors with the
    common training set, so models are grouped by kernel and evaluated
    against the union of their (deduplicated) support vectors: one kernel
    cross-matrix and one matmul per group instead of per model.
    """
    svms = list(svms)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(svms) < 2 or X.shape[0] < 32:
        return np.vstack([np.where(decision_values(m, X) >= 0.0, 1, -1) for m in svms]).astype(np.int64)

    scores = np.empty((len(svms), X.shape[0]))
    groups = {}
    for mi, model in enumerate(svms):
        groups.setdefault(model.kernel, []).append(mi)
    for kernel, members in groups.items():
        row_index = {}
        rows = []
        weight_rows = []
        biases = []
        for mi in members:
            model = svms[mi]
            cols = np.empty(model.support_vectors.shape[0], dtype=np.intp)
            for k in range(model.support_vectors.shape[0]):
                key = model.support_vectors[k].tobytes()
                at = row_index.get(key)
                if at is None:
                    at = row_index[key] = len(rows)
                    rows.append(model.support_vectors[k])
                cols[k] = at
            weight_rows.append((cols, model.coefficients))
            biases.append(model.bias)
        if not rows:
            scores[members] = np.asarray(biases)[:, None]
            continue
        unique = np.vstack(rows)
        weights = np.zeros((len(members), unique.shape[0]))
        for gi, (cols, coef) in enumerate(weight_rows):
            np.add.at(weights[gi], cols, coef)
        bias_col = np.asarray(biases)[:, None]
        chunk = max(1, (1 << 22) // max(unique.shape[0], 1))  # ~32 MB cross blocks
        for start in range(0, X.shape[0], chunk):
            block = cross_matrix(kernel, X[start : start + chunk], unique)
            scores[members, start : start + block.shape[0]] = weights @ block.T + bias_col
    return np.where(scores >= 0.0, 1, -1).astype(np.int64)


def predict_rm_batch(model: RandomMachinesModel, X) -> np.ndarray:
    """Weighted sign vote over the base models' hard labels; zero sum maps to +1."""
    votes = base_votes([m.svm for m in model.base_models], X)
    score = model.weights @ votes
    return np.where(score >= 0.0, 1, -1).astype(np.int64)


def predict_rm(model: RandomMachinesModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError("predict_rm expects a single feature vector")
    return int(predict_rm_batch(model, x[None, :])[0])


def predict_bagged_batch(model: BaggedSvmModel, X) -> np.ndarray:
    """Unweighted sign vote; zero sum maps to +1."""
    votes = base_votes(model.base_models, X)
    return np.where(votes.sum(axis=0) >= 0.0, 1, -1).astype(np.int64)


def predict_bagged(model: BaggedSvmModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError("predict_bagged expects a single feature vector")
    return int(predict_bagged_batch(model, x[None, :])[0])


def rm_to_dict(model: RandomMachinesModel) -> dict:
    return {
        "format": _RM_FORMAT,
        "version": _RM_VERSION,
        "seed": model.seed,
        "probabilities": [
            {"kernel": e.kernel.token(), "accuracy": e.accuracy, "probability": e.probability}
            for e in model.probabilities.entries
        ],
        "models": [
            {
                "weight": m.weight,
                "oob_accuracy": m.oob_accuracy,
                "kernel_index": m.kernel_index,
                "svm": svm_to_dict(m.svm),
            }
            for m in model.base_models
        ],
    }


def rm_from_dict(payload: dict) -> RandomMachinesModel:
    if payload.get("format") != _RM_FORMAT:
        raise InputError(f"not a random-machines document: format={payload.get('format')!r}")
    if payload.get("version") != _RM_VERSION:
        raise InputError(f"unsupported random-machines version {payload.get('version')!r}")
    probes = tuple(
        KernelProbe(KernelSpec.parse(e["kernel"]), float(e["accuracy"]), float(e["probability"]))
        for e in payload["probabilities"]
    )
    base = tuple(
        BaseModel(
            svm=svm_from_dict(m["svm"]),
            weight=float(m["weight"]),
            oob_accuracy=float(m["oob_accuracy"]),
            kernel_index=int(m["kernel_index"]),
        )
        for m in payload["models"]
    )
    return RandomMachinesModel(base, KernelProbabilities(probes), int(payload["seed"]))


def rm_to_json(model: RandomMachinesModel) -> str:
    return json.dumps(rm_to_dict(model), sort_keys=True)


def rm_from_json(text: str) -> RandomMachinesModel:
    return rm_from_dict(json.loads(text))
