"""Core types and primitive operations for sparse recovery problems.

Conventions used throughout the package:

* signals live in R^N, measurements in R^n with n <= N
* index sets (supports, kept transform rows) are 1-based at the API
  boundary; 0-based numpy indexing stays internal
* weight vectors assign a value omega in [0, 1] on an estimated support
  and 1.0 elsewhere
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "CswlpError",
    "ConfigError",
    "ConditionViolatedError",
    "OracleInfeasibleError",
    "RankDeficientError",
    "SolverDivergenceError",
    "SignalVector",
    "DenseMatrix",
    "RestrictedTransform",
    "Measurements",
    "SupportEstimate",
    "WeightVector",
    "SparseProblem",
    "apply",
    "best_k_term",
    "snr_db",
    "weighted_lp_norm",
]


class CswlpError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(CswlpError):
    """A config file or parameter set is malformed."""


class RankDeficientError(CswlpError):
    """A sensing matrix does not have full row rank."""


class SolverDivergenceError(CswlpError):
    """The iteration produced a non-finite objective value."""


class OracleInfeasibleError(CswlpError):
    """No support of the allowed size fits the measurements."""


class ConditionViolatedError(CswlpError):
    """Recovery-condition denominator is not positive for these parameters."""


def _as_vector(values, name: str = "values") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    return arr


def _as_matrix(values, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SignalVector:
    """A finite real vector in R^N, N >= 1."""

    entries: np.ndarray

    def __post_init__(self):
        arr = _as_vector(self.entries, "entries")
        if not np.all(np.isfinite(arr)):
            raise ValueError("signal entries must be finite")
        object.__setattr__(self, "entries", arr)

    def __len__(self) -> int:
        return int(self.entries.shape[0])

    @property
    def n(self) -> int:
        return len(self)


@dataclass(frozen=True)
class DenseMatrix:
    """Sensing operator given by an explicit n x N matrix, n <= N."""

    matrix: np.ndarray

    def __post_init__(self):
        arr = _as_matrix(self.matrix)
        n, N = arr.shape
        if n > N:
            raise ValueError(f"matrix must have n <= N, got {n} x {N}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "matrix", arr)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def as_dense(self) -> np.ndarray:
        return self.matrix

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


@dataclass(frozen=True)
class RestrictedTransform:
    """Sensing operator that keeps selected rows of an inverse transform.

    ``inverse`` is the N x N matrix mapping coefficients to samples; the
    operator is its restriction to ``rows`` (1-based, distinct).  Pass
    ``tag="identity"`` with ``size`` instead of a matrix for plain
    subsampling of the coefficients themselves.
    """

    rows: tuple[int, ...]
    inverse: np.ndarray | None = None
    tag: str | None = None
    size: int | None = None

    def __post_init__(self):
        rows = tuple(int(i) for i in self.rows)
        if self.inverse is not None:
            inv = _as_matrix(self.inverse, "inverse")
            if inv.shape[0] != inv.shape[1]:
                raise ValueError("inverse transform must be square")
            object.__setattr__(self, "inverse", inv)
            N = inv.shape[0]
        elif self.tag == "identity":
            if self.size is None:
                raise ValueError("identity tag requires size")
            N = int(self.size)
        else:
            raise ValueError("need an inverse matrix or tag='identity'")
        object.__setattr__(self, "size", N)
        if len(rows) == 0 or len(set(rows)) != len(rows):
            raise ValueError("rows must be non-empty and distinct")
        if min(rows) < 1 or max(rows) > N:
            raise ValueError(f"rows must lie in 1..{N}")
        object.__setattr__(self, "rows", rows)

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.rows), int(self.size))

    def as_dense(self) -> np.ndarray:
        idx = np.asarray(self.rows, dtype=np.intp) - 1
        if self.inverse is not None:
            return self.inverse[idx, :]
        eye = np.zeros(self.shape, dtype=np.float64)
        eye[np.arange(len(idx)), idx] = 1.0
        return eye

    def apply(self, x: np.ndarray) -> np.ndarray:
        idx = np.asarray(self.rows, dtype=np.intp) - 1
        if self.inverse is not None:
            return (self.inverse @ x)[idx]
        return np.asarray(x, dtype=np.float64)[idx]


# Either operator kind works anywhere a sensing operator is expected.
SensingOperator = DenseMatrix | RestrictedTransform


@dataclass(frozen=True)
class Measurements:
    """Measurement vector y plus a noise bound epsilon >= 0."""

    y: np.ndarray
    epsilon: float = 0.0

    def __post_init__(self):
        arr = _as_vector(self.y, "y")
        if not np.all(np.isfinite(arr)):
            raise ValueError("measurements must be finite")
        object.__setattr__(self, "y", arr)
        eps = float(self.epsilon)
        if not (eps >= 0.0 and np.isfinite(eps)):
            raise ValueError("epsilon must be finite and >= 0")
        object.__setattr__(self, "epsilon", eps)


@dataclass(frozen=True)
class SupportEstimate:
    """A set of 1-based indices believed to carry most of the signal."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("support indices must be distinct")
        if any(i < 1 for i in idx):
            raise ValueError("support indices are 1-based and must be >= 1")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    @classmethod
    def empty(cls) -> "SupportEstimate":
        return cls(indices=())

    def __len__(self) -> int:
        return len(self.indices)

    def validate_within(self, N: int) -> None:
        if self.indices and self.indices[-1] > N:
            raise ValueError(f"support index {self.indices[-1]} exceeds N={N}")


@dataclass(frozen=True)
class WeightVector:
    """Per-entry weights: omega on the estimated support, 1 elsewhere."""

    omega: float
    estimate: SupportEstimate
    size: int

    def __post_init__(self):
        om = float(self.omega)
        if not (0.0 <= om <= 1.0):
            raise ValueError(f"omega must lie in [0, 1], got {om}")
        object.__setattr__(self, "omega", om)
        N = int(self.size)
        if N < 1:
            raise ValueError("size must be >= 1")
        object.__setattr__(self, "size", N)
        self.estimate.validate_within(N)

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.ones(self.size, dtype=np.float64)
        if self.estimate.indices:
            w[np.asarray(self.estimate.indices, dtype=np.intp) - 1] = self.omega
        return w


@dataclass(frozen=True)
class SparseProblem:
    """One recovery instance: operator, measurements, weights, optional truth."""

    operator: SensingOperator
    measurements: Measurements
    weights: WeightVector
    ground_truth: SignalVector | None = None

    def __post_init__(self):
        n, N = self.operator.shape
        if self.measurements.y.shape[0] != n:
            raise ValueError(
                f"measurement length {self.measurements.y.shape[0]} does not match operator rows {n}"
            )
        if self.weights.size != N:
            raise ValueError(f"weight size {self.weights.size} does not match signal length {N}")
        if self.ground_truth is not None and len(self.ground_truth) != N:
            raise ValueError("ground truth length does not match signal length")


def _weights_array(w, N: int) -> np.ndarray:
    if isinstance(w, WeightVector):
        if w.size != N:
            raise ValueError(f"weight size {w.size} does not match signal length {N}")
        return w.weights
    arr = _as_vector(w, "weights")
    if arr.shape[0] != N:
        raise ValueError(f"weight length {arr.shape[0]} does not match signal length {N}")
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("weights must lie in [0, 1]")
    return arr


def _signal_array(x) -> np.ndarray:
    if isinstance(x, SignalVector):
        return x.entries
    return _as_vector(x, "x")


def weighted_lp_norm(x, w, p: float) -> float:
    """Weighted lp quasi-norm (sum_i w_i^p |x_i|^p)^(1/p) for p in (0, 1].

    Parameters
    ----------
    x : SignalVector or array_like
    w : WeightVector or array_like with entries in [0, 1]
    p : float in (0, 1]
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    xa = _signal_array(x)
    wa = _weights_array(w, xa.shape[0])
    total = float(np.sum(wa**p * np.abs(xa) ** p))
    return total ** (1.0 / p)


def best_k_term(x, k: int) -> tuple[SignalVector, tuple[int, ...]]:
    """Keep the k largest-magnitude entries of x, zero the rest.

    Ties break toward the lower index.  Returns the truncated signal and
    the sorted 1-based index set of the kept positions.
    """
    xa = _signal_array(x)
    N = xa.shape[0]
    if not (0 <= k <= N):
        raise ValueError(f"k must lie in 0..{N}, got {k}")
    # stable sort on -|x| keeps the earliest index among equal magnitudes
    order = np.argsort(-np.abs(xa), kind="stable")
    kept = np.sort(order[:k])
    out = np.zeros_like(xa)
    out[kept] = xa[kept]
    support = tuple(int(i) + 1 for i in kept)
    return SignalVector(out), support


def apply(op: SensingOperator, x) -> np.ndarray:
    """Apply a sensing operator to a signal, returning the n-vector A x."""
    xa = _signal_array(x)
    n, N = op.shape
    if xa.shape[0] != N:
        raise ValueError(f"signal length {xa.shape[0]} does not match operator columns {N}")
    return op.apply(xa)


def snr_db(x, x_hat, cap_db: float = 300.0) -> float:
    """Reconstruction SNR in dB: 10 log10(||x||^2 / ||x - x_hat||^2).

    Exact reconstruction returns ``cap_db``.  A zero reference signal has
    no meaningful ratio and raises ValueError.
    """
    xa = _signal_array(x)
    ha = _signal_array(x_hat)
    if xa.shape[0] != ha.shape[0]:
        raise ValueError("signal lengths differ")
    ref = float(np.dot(xa, xa))
    if ref == 0.0:
        raise ValueError("reference signal has zero norm")
    err = xa - ha
    err_sq = float(np.dot(err, err))
    if err_sq == 0.0:
        return float(cap_db)
    return 10.0 * np.log10(ref / err_sq)
