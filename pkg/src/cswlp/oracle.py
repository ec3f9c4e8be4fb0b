"""Exhaustive-search reference decoders for tiny problems.

Both oracles enumerate candidate supports in ascending size and, within
a size, in lexicographic order, fitting each by least squares.  They are
exponential in N and exist to check the iterative solver on instances
small enough to enumerate, so N is capped at 20 and support size at 4.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import (
    Measurements,
    OracleInfeasibleError,
    SensingOperator,
    SignalVector,
    _signal_array,
    _weights_array,
)

__all__ = ["OracleResult", "oracle_l0", "oracle_weighted_lp"]

_MAX_N = 20
_MAX_SUPPORT = 4


@dataclass(frozen=True)
class OracleResult:
    """Minimizer found by enumeration.

    ``objective_value`` is the support size for the l0 oracle and the
    weighted lp objective sum_i w_i^p |z_i|^p for the weighted oracle.
    """

    minimizer: SignalVector
    support: tuple[int, ...]
    objective_value: float


def _prepare(A, b, k_max: int) -> tuple[np.ndarray, np.ndarray, float]:
    A_dense = A.as_dense() if isinstance(A, SensingOperator) else np.asarray(A, dtype=np.float64)
    y = b.y if isinstance(b, Measurements) else _signal_array(b)
    n, N = A_dense.shape
    if y.shape[0] != n:
        raise ValueError(f"measurement length {y.shape[0]} does not match operator rows {n}")
    if N > _MAX_N:
        raise ValueError(f"enumeration is capped at N <= {_MAX_N}, got N = {N}")
    if not (0 <= k_max <= _MAX_SUPPORT):
        raise ValueError(f"k_max must lie in 0..{_MAX_SUPPORT}, got {k_max}")
    return A_dense, y, float(np.linalg.norm(y))


def _exact_fits(A_dense: np.ndarray, y: np.ndarray, k_max: int, residual_tol: float):
    """Yield (support, coefficients) for every support whose least-squares
    fit reproduces y to within residual_tol, sizes ascending."""
    n, N = A_dense.shape
    y_norm = float(np.linalg.norm(y))
    tol = residual_tol * max(1.0, y_norm)
    for size in range(0, k_max + 1):
        if size == 0:
            if y_norm <= tol:
                yield (), np.zeros(0)
            continue
        for support in combinations(range(N), size):
            cols = A_dense[:, support]
            z, *_ = np.linalg.lstsq(cols, y, rcond=None)
            if float(np.linalg.norm(cols @ z - y)) <= tol:
                yield support, z


def _embed(N: int, support, z) -> SignalVector:
    full = np.zeros(N, dtype=np.float64)
    if len(support):
        full[list(support)] = z
    return SignalVector(full)


def oracle_l0(A, b, k_max: int, *, residual_tol: float = 1e-8) -> OracleResult:
    """Sparsest exact fit: the first support (smallest size, then
    lexicographic) whose least-squares solution reproduces b.

    Raises OracleInfeasibleError when no support of size <= k_max fits.
    """
    A_dense, y, _ = _prepare(A, b, k_max)
    N = A_dense.shape[1]
    for support, z in _exact_fits(A_dense, y, k_max, residual_tol):
        return OracleResult(
            minimizer=_embed(N, support, z),
            support=tuple(i + 1 for i in support),
            objective_value=float(len(support)),
        )
    raise OracleInfeasibleError(f"no support of size <= {k_max} fits the measurements")


def oracle_weighted_lp(A, b, w, p: float, k_max: int, *, residual_tol: float = 1e-8) -> OracleResult:
    """Exact fit minimizing sum_i w_i^p |z_i|^p over supports of size <= k_max.

    Ties (within 1e-12) keep the earlier support in enumeration order.
    Raises OracleInfeasibleError when no support fits.
    """
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    A_dense, y, _ = _prepare(A, b, k_max)
    N = A_dense.shape[1]
    w_arr = _weights_array(w, N)
    best: tuple[float, tuple, np.ndarray] | None = None
    for support, z in _exact_fits(A_dense, y, k_max, residual_tol):
        wp = w_arr[list(support)] ** p if len(support) else np.zeros(0)
        value = float(np.sum(wp * np.abs(z) ** p))
        if best is None or value < best[0] - 1e-12:
            best = (value, support, z)
    if best is None:
        raise OracleInfeasibleError(f"no support of size <= {k_max} fits the measurements")
    value, support, z = best
    return OracleResult(
        minimizer=_embed(N, support, z),
        support=tuple(i + 1 for i in support),
        objective_value=value,
    )
