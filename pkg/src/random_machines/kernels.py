"""Kernel functions and Gram matrix construction.

Four kernels are supported.  With gamma > 0 and x.y the dot product:

    linear      gamma * (x.y)
    poly        (gamma * (x.y)) ** degree        (homogeneous: no additive constant)
    gaussian    exp(-gamma * ||x - y||^2)        (squared Euclidean)
    laplacian   exp(-gamma * ||x - y||)          (unsquared Euclidean)

Note the polynomial kernel is homogeneous.  Its decision surfaces are
centrally symmetric level sets of a degree-d form, which matters for data
whose classes are mirror images of each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InputError


class KernelKind(str, Enum):
    LINEAR = "linear"
    POLYNOMIAL = "poly"
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"


@dataclass(frozen=True)
class KernelSpec:
    """A kernel function together with its hyperparameters.

    ``degree`` only participates for the polynomial kind; it is accepted
    (and ignored) for every other kind.
    """

    kind: KernelKind
    gamma: float = 1.0
    degree: int = 2

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "degree", int(self.degree))
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise InputError(f"kernel gamma must be a positive real, got {self.gamma}")
        if self.degree < 1:
            raise InputError(f"kernel degree must be >= 1, got {self.degree}")

    def token(self) -> str:
        """Compact text form used by CLI flags and report files."""
        g = _fmt_num(self.gamma)
        if self.kind is KernelKind.POLYNOMIAL:
            return f"poly:g={g},d={self.degree}"
        return f"{self.kind.value}:g={g}"

    @classmethod
    def parse(cls, token: str) -> "KernelSpec":
        """Inverse of :meth:`token`; raises InputError on malformed input."""
        head, _, tail = token.strip().partition(":")
        try:
            kind = KernelKind(head)
        except ValueError:
            raise InputError(f"unknown kernel kind {head!r} in token {token!r}") from None
        gamma, degree = 1.0, 2
        if tail:
            for item in tail.split(","):
                key, _, value = item.partition("=")
                key = key.strip()
                try:
                    if key == "g":
                        gamma = float(value)
                    elif key == "d":
                        degree = int(value)
                    else:
                        raise InputError(f"unknown kernel parameter {key!r} in {token!r}")
                except ValueError:
                    raise InputError(f"bad value for {key!r} in kernel token {token!r}") from None
        return cls(kind, gamma, degree)


def _fmt_num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def evaluate(spec: KernelSpec, x, y) -> float:
    """Evaluate K(x, y) for a single pair of vectors."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.shape != y.shape or x.size < 1:
        raise InputError(f"kernel arguments must be equal-length vectors, got shapes {x.shape} and {y.shape}")
    if spec.kind is KernelKind.LINEAR:
        return float(spec.gamma * np.dot(x, y))
    if spec.kind is KernelKind.POLYNOMIAL:
        return float((spec.gamma * np.dot(x, y)) ** spec.degree)
    diff = x - y
    if spec.kind is KernelKind.GAUSSIAN:
        return float(np.exp(-spec.gamma * np.dot(diff, diff)))
    return float(np.exp(-spec.gamma * np.sqrt(np.dot(diff, diff))))


def cross_matrix(spec: KernelSpec, A, B) -> np.ndarray:
    """Kernel matrix K[i, j] = K(A[i], B[j]) for two point sets."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise InputError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]} features")
    prod = A @ B.T
    if spec.kind is KernelKind.LINEAR:
        return spec.gamma * prod
    if spec.kind is KernelKind.POLYNOMIAL:
        return (spec.gamma * prod) ** spec.degree
    sq = _sq_dists(A, B, prod)
    if spec.kind is KernelKind.GAUSSIAN:
        return np.exp(-spec.gamma * sq)
    return np.exp(-spec.gamma * np.sqrt(sq))


def gram_matrix(spec: KernelSpec, X) -> np.ndarray:
    """n x n kernel matrix of a point set, exactly symmetric by construction.

    The upper triangle is computed and mirrored, so G == G.T holds
    bit-for-bit; gaussian/laplacian diagonals are exactly 1.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] < 1:
        raise InputError("gram_matrix needs at least one row")
    prod = X @ X.T
    if spec.kind is KernelKind.LINEAR:
        G = spec.gamma * prod
    elif spec.kind is KernelKind.POLYNOMIAL:
        G = (spec.gamma * prod) ** spec.degree
    else:
        sq = _sq_dists(X, X, prod)
        np.fill_diagonal(sq, 0.0)
        if spec.kind is KernelKind.GAUSSIAN:
            G = np.exp(-spec.gamma * sq)
        else:
            G = np.exp(-spec.gamma * np.sqrt(sq))
    upper = np.triu(G)
    return upper + np.triu(G, 1).T


def _sq_dists(A, B, prod):
    # ||a-b||^2 = ||a||^2 + ||b||^2 - 2 a.b, clipped against fp cancellation
    a2 = np.einsum("ij,ij->i", A, A)[:, None]
    b2 = np.einsum("ij,ij->i", B, B)[None, :]
    sq = a2 + b2 - 2.0 * prod
    np.maximum(sq, 0.0, out=sq)
    return sq
