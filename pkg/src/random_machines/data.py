"""Datasets: synthetic generators, CSV ingestion, scaling, holdout splits.

Two synthetic families are provided:

* a pair of multivariate-normal point clouds with different spreads
  (``sim1``: class means 0 and 4 per coordinate; ``sim2``: 0 and 2), and
* a sphere-in-cube problem (``sim3``): points uniform on [-1, 1]^p, the
  inner class being the region within a radius chosen so that its volume
  fraction of the cube equals the requested class ratio.

All generators draw from a seeded numpy Generator (ziggurat normals,
counted uniform stream), so outputs are reproducible bit-for-bit.
"""
from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import DataLoadError, InputError

CONTINUOUS = "continuous"
DISCRETE = "discrete"


@dataclass(frozen=True)
class Scaling:
    """Per-column affine transform (x - mean) / scale fitted on training data."""

    mean: np.ndarray
    scale: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean) / self.scale


@dataclass(frozen=True)
class Dataset:
    """Labeled observation matrix with labels in {-1, +1}.

    ``feature_kinds`` flags each column as continuous or discrete;
    discrete columns pass through standardization untouched.
    """

    features: np.ndarray
    labels: np.ndarray
    feature_kinds: tuple = ()
    scaling: Optional[Scaling] = None

    def __post_init__(self):
        feats = np.ascontiguousarray(np.asarray(self.features, dtype=np.float64))
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise InputError(f"features must be a non-empty n x p matrix, got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise InputError("features contain non-finite values")
        labels = np.asarray(self.labels)
        if labels.shape != (feats.shape[0],):
            raise InputError(f"labels length {labels.shape} does not match {feats.shape[0]} rows")
        if not np.all(np.isin(labels, (-1, 1))):
            raise InputError("labels must be -1 or +1")
        labels = np.ascontiguousarray(labels.astype(np.int64))
        kinds = tuple(self.feature_kinds) or (CONTINUOUS,) * feats.shape[1]
        if len(kinds) != feats.shape[1] or any(k not in (CONTINUOUS, DISCRETE) for k in kinds):
            raise InputError("feature_kinds must name continuous/discrete per column")
        feats.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_kinds", kinds)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.intp)
        return Dataset(self.features[idx], self.labels[idx], self.feature_kinds, self.scaling)

    def class_counts(self) -> dict:
        values, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


class SimKind(str, Enum):
    GAUSS_FAR = "sim1"
    GAUSS_NEAR = "sim2"
    SPHERE = "sim3"


@dataclass(frozen=True)
class SimConfig:
    kind: SimKind
    n: int = 100
    p: int = 2
    ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SimKind(self.kind))
        if self.n < 4:
            raise InputError(f"simulated datasets need n >= 4, got {self.n}")
        if self.p < 1:
            raise InputError(f"dimensionality must be >= 1, got {self.p}")
        if not 0.0 < self.ratio < 1.0:
            raise InputError(f"class ratio must lie in (0, 1), got {self.ratio}")

    def label(self) -> str:
        return f"{self.kind.value}(n={self.n},p={self.p},ratio={self.ratio})"


def generate(config: SimConfig) -> Dataset:
    """Dispatch to the generator matching the config kind."""
    if config.kind is SimKind.SPHERE:
        return gen_circle(config)
    return gen_gaussian_pair(config)


def gen_gaussian_pair(config: SimConfig) -> Dataset:
    """Two spherical normal clouds; class A (label -1) is the wider one.

    Class A: mean 0, per-coordinate variance 4.  Class B (label +1): mean
    4 per coordinate for ``sim1``, mean 2 for ``sim2``; unit variance.
    """
    if config.kind is SimKind.SPHERE:
        raise InputError("gen_gaussian_pair cannot generate the sphere dataset")
    n_a = int(round(config.ratio * config.n))
    n_b = config.n - n_a
    if n_a == 0 or n_b == 0:
        raise InputError(f"ratio {config.ratio} leaves a class with zero rows at n={config.n}")
    mean_b = 4.0 if config.kind is SimKind.GAUSS_FAR else 2.0
    rng = np.random.default_rng(config.seed)
    feats_a = rng.normal(0.0, 2.0, size=(n_a, config.p))
    feats_b = rng.normal(mean_b, 1.0, size=(n_b, config.p))
    feats = np.vstack([feats_a, feats_b])
    labels = np.concatenate([np.full(n_a, -1, dtype=np.int64), np.full(n_b, 1, dtype=np.int64)])
    order = rng.permutation(config.n)
    return Dataset(feats[order], labels[order])


def gen_circle(config: SimConfig) -> Dataset:
    """Uniform points on [-1, 1]^p; the inner class is the ball of volume-fraction ``ratio``."""
    if config.kind is not SimKind.SPHERE:
        raise InputError("gen_circle generates only the sphere dataset")
    r = circle_radius(config.p, config.ratio)
    rng = np.random.default_rng(config.seed)
    feats = rng.uniform(-1.0, 1.0, size=(config.n, config.p))
    norms = np.sqrt(np.einsum("ij,ij->i", feats, feats))
    labels = np.where(norms <= r, -1, 1).astype(np.int64)
    return Dataset(feats, labels)


def circle_radius(p: int, ratio: float) -> float:
    """Radius whose centered ball covers ``ratio`` of the cube [-1, 1]^p.

    Uses the closed-form ball volume when the ball fits inside the cube
    (radius <= 1).  For larger fractions or higher dimensions the ball is
    clipped by the cube, so the radius is instead the exact ``ratio``
    quantile of ||X|| for X uniform on the cube, computed by convolving
    the per-coordinate squared-value distribution.
    """
    if p < 1 or not 0.0 < ratio < 1.0:
        raise InputError(f"need p >= 1 and ratio in (0, 1), got p={p}, ratio={ratio}")
    log_r = (math.log(ratio) + p * math.log(2.0) + math.lgamma(p / 2.0 + 1.0)) / p - 0.5 * math.log(math.pi)
    closed = math.exp(log_r)
    if closed <= 1.0:
        return closed
    return _clipped_ball_radius(p, ratio)


def _clipped_ball_radius(p: int, ratio: float) -> float:
    # CDF of sum of p iid squares of U(-1,1) via lattice FFT convolution.
    bins = 8192
    h = 1.0 / bins
    edges = np.linspace(0.0, 1.0, bins + 1)
    pmf = np.diff(np.sqrt(edges))  # P(X^2 in bin) with CDF(u) = sqrt(u)
    size = 1 << int(math.ceil(math.log2(p * bins + 1)))
    spectrum = np.fft.rfft(pmf, size) ** p
    total = np.fft.irfft(spectrum, size)[: p * bins + 1]
    cdf = np.cumsum(np.maximum(total, 0.0))
    cdf /= cdf[-1]
    k = int(np.searchsorted(cdf, ratio))
    if k <= 0 or k >= cdf.size:
        raise InputError(f"no ball radius realizes ratio {ratio} at p={p}")
    lo, hi = cdf[k - 1], cdf[k]
    frac = 0.0 if hi == lo else (ratio - lo) / (hi - lo)
    # bin k's mass sits near lattice point k*h, offset by p half-bins
    t = (k + frac + p / 2.0) * h
    return math.sqrt(t)


def load_csv(path, label_column=None, positive_label=None, sidecar=None) -> Dataset:
    """Load a binary-classification CSV (header required, comma separated).

    ``label_column`` is a header name or 0-based index; ``positive_label``
    is the raw label value mapped to +1.  A JSON sidecar (``<path>.json``
    by default) may declare ``label_column``, ``positive_label`` and a
    ``discrete`` column list; explicit arguments win.  Missing values and
    unparseable numeric cells are hard errors naming the row and column.
    """
    side = _load_sidecar(path, sidecar)
    if label_column is None:
        label_column = side.get("label_column")
    if positive_label is None:
        positive_label = side.get("positive_label")
    if label_column is None:
        raise InputError("label_column is required (argument or sidecar)")
    if positive_label is None:
        raise InputError("positive_label is required (argument or sidecar)")
    discrete = set(side.get("discrete", ()))

    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataLoadError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataLoadError(f"{path}: empty file (header row required)") from None
        header = [h.strip() for h in header]
        label_idx = _resolve_column(header, label_column, path)
        feature_idx = [i for i in range(len(header)) if i != label_idx]
        if not feature_idx:
            raise DataLoadError(f"{path}: no feature columns besides the label")
        unknown = discrete.difference(header)
        if unknown:
            raise DataLoadError(f"{path}: sidecar names unknown discrete columns {sorted(unknown)}")

        rows, raw_labels = [], []
        for line_no, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise DataLoadError(f"{path}: row at line {line_no} has {len(record)} cells, expected {len(header)}")
            values = np.empty(len(feature_idx))
            for out_i, col in enumerate(feature_idx):
                cell = record[col].strip()
                if cell == "":
                    raise DataLoadError(f"{path}: missing value at line {line_no}, column {header[col]!r}")
                try:
                    values[out_i] = float(cell)
                except ValueError:
                    raise DataLoadError(
                        f"{path}: cannot parse {cell!r} at line {line_no}, column {header[col]!r}"
                    ) from None
            label = record[label_idx].strip()
            if label == "":
                raise DataLoadError(f"{path}: missing label at line {line_no}")
            rows.append(values)
            raw_labels.append(label)

    if not rows:
        raise DataLoadError(f"{path}: no data rows")
    distinct = sorted(set(raw_labels))
    if len(distinct) != 2:
        raise DataLoadError(f"{path}: expected exactly 2 label values, found {distinct}")
    if str(positive_label) not in distinct:
        raise DataLoadError(f"{path}: positive label {positive_label!r} not among {distinct}")
    labels = np.array([1 if v == str(positive_label) else -1 for v in raw_labels], dtype=np.int64)
    kinds = tuple(DISCRETE if header[c] in discrete else CONTINUOUS for c in feature_idx)
    return Dataset(np.vstack(rows), labels, kinds)


def _load_sidecar(path, sidecar) -> dict:
    if isinstance(sidecar, dict):
        return sidecar
    candidate = sidecar if sidecar is not None else f"{path}.json"
    if sidecar is None and not os.path.exists(candidate):
        return {}
    try:
        with open(candidate, encoding="utf-8") as fh:
            loaded = json.load(fh)
    except OSError as exc:
        raise DataLoadError(f"cannot open sidecar {candidate}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataLoadError(f"sidecar {candidate} is not valid JSON: {exc}") from exc
    if not isinstance(loaded, dict):
        raise DataLoadError(f"sidecar {candidate} must hold a JSON object")
    return loaded


def _resolve_column(header: Sequence[str], label_column, path) -> int:
    if isinstance(label_column, str) and label_column in header:
        return header.index(label_column)
    try:
        idx = int(label_column)
    except (TypeError, ValueError):
        raise DataLoadError(f"{path}: label column {label_column!r} not in header {header}") from None
    if not 0 <= idx < len(header):
        raise DataLoadError(f"{path}: label column index {idx} out of range for {len(header)} columns")
    return idx


def standardize(train: Dataset, others: Sequence[Dataset] = ()) -> tuple:
    """Scale continuous columns to zero mean / unit variance on the train split.

    The train-fitted transform (population standard deviation) is applied
    unchanged to every other split.  Zero-variance columns are centered
    only; discrete columns pass through.
    """
    mean = np.zeros(train.p)
    scale = np.ones(train.p)
    for col, kind in enumerate(train.feature_kinds):
        if kind != CONTINUOUS:
            continue
        column = train.features[:, col]
        mean[col] = column.mean()
        sd = column.std()  # population (ddof=0)
        scale[col] = sd if sd > 0.0 else 1.0
    scaling = Scaling(mean=mean, scale=scale)
    scaled_train = Dataset(scaling.apply(train.features), train.labels, train.feature_kinds, scaling)
    scaled_others = []
    for other in others:
        if other.p != train.p:
            raise InputError(f"cannot apply a {train.p}-column transform to {other.p}-column data")
        scaled_others.append(Dataset(scaling.apply(other.features), other.labels, other.feature_kinds, scaling))
    return scaled_train, scaled_others


def holdout_split(data: Dataset, train_fraction: float, seed: int) -> tuple:
    """Stratified train/test split preserving class proportions within one row.

    Per-class train counts follow largest-remainder apportionment of
    round(train_fraction * n) total rows, so each class count deviates
    from its exact quota by less than 1.
    """
    if not 0.0 < train_fraction < 1.0:
        raise InputError(f"train fraction must lie in (0, 1), got {train_fraction}")
    counts = data.class_counts()
    if len(counts) != 2:
        raise InputError("holdout_split needs both classes present")
    total_train = int(round(train_fraction * data.n))
    if total_train == 0 or total_train == data.n:
        raise InputError(f"train fraction {train_fraction} yields an empty split side for n={data.n}")

    classes = sorted(counts)
    quotas = {c: train_fraction * counts[c] for c in classes}
    take = {c: int(math.floor(quotas[c])) for c in classes}
    remainder = total_train - sum(take.values())
    for c in sorted(classes, key=lambda c: (-(quotas[c] - take[c]), c)):
        if remainder <= 0:
            break
        if take[c] < counts[c]:
            take[c] += 1
            remainder -= 1

    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in classes:
        members = np.flatnonzero(data.labels == c)
        perm = rng.permutation(members)
        train_idx.append(perm[: take[c]])
        test_idx.append(perm[take[c] :])
    train_rows = np.sort(np.concatenate(train_idx))
    test_rows = np.sort(np.concatenate(test_idx))
    if train_rows.size == 0 or test_rows.size == 0:
        raise InputError("holdout_split produced an empty side")
    return data.subset(train_rows), data.subset(test_rows)
