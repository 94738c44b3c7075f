"""Soft-margin kernel SVM trained by SMO on the dual problem.

The solver maximizes

    W(a) = sum_i a_i - 1/2 sum_ij a_i a_j y_i y_j K(x_i, x_j)

subject to 0 <= a_i <= C and sum_i a_i y_i = 0, using two-variable
coordinate ascent: a seeded shuffle sweeps candidate first indices, and
for each KKT violator the partner is chosen by the exact second-order
gain (including box clipping).  Pairwise updates preserve the equality
constraint by construction.

The dense-Gram sweep is JIT-compiled with numba; training sets beyond
the dense limit fall back to an equivalent numpy sweep over an LRU row
cache.
"""
from __future__ import annotations

import json
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

from .errors import InputError, TrainingError
from .kernels import KernelKind, KernelSpec, cross_matrix, gram_matrix

_DENSE_GRAM_LIMIT = 4000
_ZERO_ALPHA = 1e-12
_STEP_FLOOR = 1e-12
_ETA_FLOOR = 1e-12
_PROGRESS_TOL = 1e-5

_MODEL_FORMAT = "random-machines/trained-svm"
_MODEL_VERSION = 1


@dataclass(frozen=True)
class SolverSettings:
    """Optimizer knobs; only ``cost`` carries modeling meaning.

    ``max_passes`` bounds consecutive sweeps whose largest coefficient
    move stays below 1e-5; ``max_iterations`` caps accepted pair updates.
    ``seed`` drives the sweep-order shuffle.
    """

    cost: float = 1.0
    kkt_tolerance: float = 1e-3
    max_passes: int = 10
    max_iterations: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if not self.cost > 0:
            raise InputError(f"cost must be positive, got {self.cost}")
        if not self.kkt_tolerance > 0:
            raise InputError(f"kkt_tolerance must be positive, got {self.kkt_tolerance}")
        if self.max_iterations < 1 or self.max_passes < 1:
            raise InputError("max_iterations and max_passes must be >= 1")


@dataclass(frozen=True)
class TrainedSvm:
    """Dual solution: retained support vectors, coefficients and bias.

    ``alphas`` holds the positive dual coefficients (zero-coefficient
    points are dropped); the decision function is
    f(x) = sum_s alphas[s] * support_labels[s] * K(sv[s], x) + bias.
    """

    kernel: KernelSpec
    support_vectors: np.ndarray
    support_labels: np.ndarray
    alphas: np.ndarray
    bias: float
    cost: float
    dual_objective: float
    converged: bool = True

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    @property
    def coefficients(self) -> np.ndarray:
        """Signed dual coefficients alpha_i * y_i."""
        return self.alphas * self.support_labels


def _sweep_dense(K, diag, y, alpha, E, order, C, tol, b, obj, iterations, max_iterations):
    """One shuffled sweep over candidate first indices on a dense Gram.

    Mutates alpha and E in place; returns bookkeeping for the outer
    convergence logic, including the worst per-update objective change
    (which must never be meaningfully negative).
    """
    n = alpha.shape[0]
    updated = 0
    max_step = 0.0
    worst_gain = 0.0
    for oi in range(n):
        i = order[oi]
        ai = alpha[i]
        yi = y[i]
        Ei = E[i]
        r = Ei * yi
        if not ((r < -tol and ai < C) or (r > tol and ai > 0.0)):
            continue
        row_i = K[i]
        dii = diag[i]
        best_gain = 0.0
        best_j = -1
        best_dj = 0.0
        for j in range(n):
            if j == i:
                continue
            aj = alpha[j]
            yj = y[j]
            if yj == yi:
                lo = ai + aj - C
                if lo < 0.0:
                    lo = 0.0
                hi = ai + aj
                if hi > C:
                    hi = C
            else:
                lo = aj - ai
                if lo < 0.0:
                    lo = 0.0
                hi = C + aj - ai
                if hi > C:
                    hi = C
            if lo >= hi:
                continue
            eta = dii + diag[j] - 2.0 * row_i[j]
            if eta < _ETA_FLOOR:
                eta = _ETA_FLOOR
            dE = Ei - E[j]
            target = aj + yj * dE / eta
            if target < lo:
                target = lo
            elif target > hi:
                target = hi
            dj = target - aj
            gain = dj * yj * dE - 0.5 * eta * dj * dj
            if gain > best_gain:
                best_gain = gain
                best_j = j
                best_dj = dj
        if best_j < 0 or best_gain <= _STEP_FLOOR * (1.0 + abs(obj)):
            continue
        j = best_j
        dj = best_dj
        if -_STEP_FLOOR < dj < _STEP_FLOOR:
            continue
        yj = y[j]
        aj_new = alpha[j] + dj
        ai_new = ai - yi * yj * dj
        if ai_new < 0.0:
            ai_new = 0.0
        elif ai_new > C:
            ai_new = C
        di = ai_new - ai
        eta_ij = dii + diag[j] - 2.0 * row_i[j]
        if eta_ij < 0.0:
            eta_ij = 0.0
        gained = dj * yj * (Ei - E[j]) - 0.5 * eta_ij * dj * dj
        if gained < worst_gain:
            worst_gain = gained
        obj += gained
        row_j = K[j]
        b1 = b - Ei - yi * di * dii - yj * dj * row_i[j]
        b2 = b - E[j] - yi * di * row_i[j] - yj * dj * diag[j]
        if 0.0 < ai_new < C:
            b_new = b1
        elif 0.0 < aj_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        shift = b_new - b
        for k in range(n):
            E[k] += yi * di * row_i[k] + yj * dj * row_j[k] + shift
        alpha[i] = ai_new
        alpha[j] = aj_new
        ai = ai_new
        Ei = E[i]
        b = b_new
        updated += 1
        iterations += 1
        step = abs(di)
        if abs(dj) > step:
            step = abs(dj)
        if step > max_step:
            max_step = step
        if iterations >= max_iterations:
            break
    return updated, max_step, b, obj, iterations, worst_gain


if njit is not None:
    _sweep_dense = njit(cache=True)(_sweep_dense)


def _sweep_cached(rows, diag, y, alpha, E, order, C, tol, b, obj, iterations, max_iterations):
    """Numpy twin of the dense sweep for LRU-cached kernel rows (n > dense limit)."""
    n = alpha.shape[0]
    updated = 0
    max_step = 0.0
    worst_gain = 0.0
    for i in order:
        ai = alpha[i]
        yi = y[i]
        r = E[i] * yi
        if not ((r < -tol and ai < C) or (r > tol and ai > 0.0)):
            continue
        Ki = rows(i)
        eta = np.maximum(diag[i] + diag - 2.0 * Ki, _ETA_FLOOR)
        dE = E[i] - E
        same = y == yi
        pair_sum = ai + alpha
        lo = np.where(same, np.maximum(0.0, pair_sum - C), np.maximum(0.0, alpha - ai))
        hi = np.where(same, np.minimum(C, pair_sum), np.minimum(C, C + alpha - ai))
        delta = np.clip(alpha + y * dE / eta, lo, hi) - alpha
        gain = delta * (y * dE) - 0.5 * eta * delta * delta
        gain[i] = -np.inf
        gain[lo >= hi] = -np.inf
        j = int(np.argmax(gain))
        if not gain[j] > _STEP_FLOOR * (1.0 + abs(obj)):
            continue
        dj = float(delta[j])
        if abs(dj) < _STEP_FLOOR:
            continue
        yj = y[j]
        aj_new = alpha[j] + dj
        ai_new = min(max(ai - yi * yj * dj, 0.0), C)
        di = ai_new - ai
        gained = dj * yj * (E[i] - E[j]) - 0.5 * max(diag[i] + diag[j] - 2.0 * Ki[j], 0.0) * dj * dj
        worst_gain = min(worst_gain, gained)
        obj += gained
        Kj = rows(j)
        b1 = b - E[i] - yi * di * diag[i] - yj * dj * Ki[j]
        b2 = b - E[j] - yi * di * Ki[j] - yj * dj * diag[j]
        if 0.0 < ai_new < C:
            b_new = b1
        elif 0.0 < aj_new < C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        E += yi * di * Ki + yj * dj * Kj + (b_new - b)
        alpha[i] = ai_new
        alpha[j] = aj_new
        b = b_new
        updated += 1
        iterations += 1
        max_step = max(max_step, abs(di), abs(dj))
        if iterations >= max_iterations:
            break
    return updated, max_step, b, obj, iterations, worst_gain


class _RowCache:
    """LRU cache of kernel rows for training sets too large for a dense Gram."""

    def __init__(self, spec, X, budget_bytes=64 << 20):
        self.spec = spec
        self.X = X
        self.rows = OrderedDict()
        self.capacity = max(2, budget_bytes // (8 * X.shape[0]))

    def __call__(self, i):
        cached = self.rows.get(i)
        if cached is not None:
            self.rows.move_to_end(i)
            return cached
        value = cross_matrix(self.spec, self.X[i : i + 1], self.X)[0]
        self.rows[i] = value
        if len(self.rows) > self.capacity:
            self.rows.popitem(last=False)
        return value


def _kernel_diagonal(spec, X):
    if spec.kind in (KernelKind.GAUSSIAN, KernelKind.LAPLACIAN):
        return np.ones(X.shape[0])
    sq = spec.gamma * np.einsum("ij,ij->i", X, X)
    if spec.kind is KernelKind.POLYNOMIAL:
        return sq**spec.degree
    return sq


def train_svm(X, y, spec: KernelSpec, settings: SolverSettings, gram: np.ndarray | None = None) -> TrainedSvm:
    """Fit the dual SVM for a fixed kernel and cost.

    Deterministic for fixed inputs and seed.  ``gram`` may supply a
    precomputed kernel matrix for the training rows (it is trusted to
    match ``spec``); ensembles use this to share one Gram per kernel
    across bootstrap fits.  Raises TrainingError on single-class labels
    and InputError on malformed features.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    y_arr = np.asarray(y)
    n = X.shape[0]
    if n < 2:
        raise InputError(f"need at least 2 training rows, got {n}")
    if not np.all(np.isfinite(X)):
        raise InputError("features contain non-finite values")
    if y_arr.shape != (n,) or not np.all(np.isin(y_arr, (-1, 1))):
        raise InputError("labels must be a vector of -1/+1 matching the rows")
    if np.all(y_arr == y_arr[0]):
        raise TrainingError("degenerate labels: both classes are required to train")

    yf = y_arr.astype(np.float64)
    C = float(settings.cost)
    # run the violation filter at half the contract tolerance so the final
    # bias re-centering cannot push residuals past kkt_tolerance
    tol = 0.5 * settings.kkt_tolerance
    rng = np.random.default_rng(settings.seed)

    dense = gram is not None or n <= _DENSE_GRAM_LIMIT
    if dense:
        K = np.ascontiguousarray(gram if gram is not None else gram_matrix(spec, X))
        if K.shape != (n, n):
            raise InputError(f"precomputed gram has shape {K.shape}, expected {(n, n)}")
        diag = np.ascontiguousarray(np.diagonal(K))
        sweep = lambda *args: _sweep_dense(K, *args)
    else:
        K = None
        rows = _RowCache(spec, X)
        diag = _kernel_diagonal(spec, X)
        sweep = lambda *args: _sweep_cached(rows, *args)

    alpha = np.zeros(n)
    b = 0.0
    E = -yf.copy()  # f == 0 everywhere at the start
    obj = 0.0
    iterations = 0
    no_progress = 0
    converged = False

    while iterations < settings.max_iterations and not converged:
        order = rng.permutation(n)
        updated, max_step, b, obj, iterations, worst_gain = sweep(
            diag, yf, alpha, E, order, C, tol, b, obj, iterations, settings.max_iterations
        )
        if __debug__:
            assert worst_gain >= -1e-8 * (1.0 + abs(obj)), "a pair update decreased the dual objective"
        if updated == 0:
            converged = True
        elif max_step <= _PROGRESS_TOL:
            no_progress += 1
            if no_progress >= settings.max_passes:
                converged = True
        else:
            no_progress = 0
        if K is not None and not converged:
            # shed accumulated rounding drift in the error cache
            E = K @ (alpha * yf) + b - yf

    bias = _final_bias(alpha, yf, E, b, C)
    keep = np.flatnonzero(alpha > _ZERO_ALPHA)
    sv = np.ascontiguousarray(X[keep])
    sv_alpha = alpha[keep].copy()
    sv_labels = y_arr.astype(np.int64)[keep]
    if K is not None:
        K_sv = K[np.ix_(keep, keep)]
    elif keep.size:
        K_sv = cross_matrix(spec, sv, sv)
    else:
        K_sv = np.zeros((0, 0))
    coef = sv_alpha * sv_labels
    dual_objective = float(sv_alpha.sum() - 0.5 * coef @ K_sv @ coef)
    for arr in (sv, sv_alpha, sv_labels):
        arr.flags.writeable = False
    return TrainedSvm(
        kernel=spec,
        support_vectors=sv,
        support_labels=sv_labels,
        alphas=sv_alpha,
        bias=float(bias),
        cost=C,
        dual_objective=dual_objective,
        converged=converged,
    )


def _final_bias(alpha, yf, E, b_running, C):
    """Average y - (f - b) over non-bound support vectors; else KKT midpoint."""
    margins = E + yf - b_running  # bias-free decision values
    targets = yf - margins  # the b that puts each point exactly on its margin
    eps = 1e-9 * C
    non_bound = (alpha > eps) & (alpha < C - eps)
    if np.any(non_bound):
        return float(np.mean(targets[non_bound]))
    at_zero = alpha <= eps
    at_cost = alpha >= C - eps
    lower = targets[(at_zero & (yf > 0)) | (at_cost & (yf < 0))]
    upper = targets[(at_zero & (yf < 0)) | (at_cost & (yf > 0))]
    if lower.size and upper.size:
        return 0.5 * (float(np.max(lower)) + float(np.min(upper)))
    if lower.size:
        return float(np.max(lower))
    if upper.size:
        return float(np.min(upper))
    return float(b_running)


def decision_values(model: TrainedSvm, X) -> np.ndarray:
    """Margins f(x) for a batch of points (rows of X)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.n_features:
        raise InputError(f"expected {model.n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise InputError("features contain non-finite values")
    if model.support_vectors.shape[0] == 0:
        return np.full(X.shape[0], model.bias)
    return cross_matrix(model.kernel, X, model.support_vectors) @ model.coefficients + model.bias


def decision_value(model: TrainedSvm, x) -> float:
    """Margin f(x) for a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise InputError("decision_value expects a single feature vector")
    return float(decision_values(model, x[None, :])[0])


def predict_batch(model: TrainedSvm, X) -> np.ndarray:
    """Hard labels for rows of X; a margin of exactly 0 maps to +1."""
    return np.where(decision_values(model, X) >= 0.0, 1, -1).astype(np.int64)


def predict(model: TrainedSvm, x) -> int:
    """Hard label for a single point (0 margin maps to +1)."""
    return 1 if decision_value(model, x) >= 0.0 else -1


def svm_to_dict(model: TrainedSvm) -> dict:
    """Versioned JSON-ready form; floats survive the round trip exactly."""
    return {
        "format": _MODEL_FORMAT,
        "version": _MODEL_VERSION,
        "kernel": model.kernel.token(),
        "cost": model.cost,
        "bias": model.bias,
        "dual_objective": model.dual_objective,
        "converged": model.converged,
        "support": [[float(c), [float(v) for v in sv]] for c, sv in zip(model.coefficients, model.support_vectors)],
    }


def svm_from_dict(payload: dict) -> TrainedSvm:
    if payload.get("format") != _MODEL_FORMAT:
        raise InputError(f"not a trained-svm document: format={payload.get('format')!r}")
    if payload.get("version") != _MODEL_VERSION:
        raise InputError(f"unsupported trained-svm version {payload.get('version')!r}")
    support = payload["support"]
    coef = np.array([item[0] for item in support], dtype=np.float64)
    sv = np.array([item[1] for item in support], dtype=np.float64).reshape(len(support), -1)
    labels = np.where(coef >= 0.0, 1, -1).astype(np.int64)
    alphas = np.abs(coef)
    for arr in (sv, labels, alphas):
        arr.flags.writeable = False
    return TrainedSvm(
        kernel=KernelSpec.parse(payload["kernel"]),
        support_vectors=sv,
        support_labels=labels,
        alphas=alphas,
        bias=float(payload["bias"]),
        cost=float(payload["cost"]),
        dual_objective=float(payload["dual_objective"]),
        converged=bool(payload.get("converged", True)),
    )


def svm_to_json(model: TrainedSvm) -> str:
    return json.dumps(svm_to_dict(model), sort_keys=True)


def svm_from_json(text: str) -> TrainedSvm:
    return svm_from_dict(json.loads(text))
