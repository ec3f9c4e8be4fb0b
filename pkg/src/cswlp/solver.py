"""Projected-gradient solver for smoothed weighted lp minimization.

Minimizes sum_i w_i^p (x_i^2 + sigma^2)^(p/2) over the affine set
{x : A x = b} while the smoothing level sigma decays toward zero.  Each
iteration projects the negative gradient onto the null space of A with
Q = pinv(A) A, backtracks from a unit step until the objective drops,
then lowers sigma: among entries whose scaled magnitude
sqrt(1-p) |x_i| / (1 - sqrt(p)) sits below w_i sigma, the largest such
value becomes the new sigma unless plain geometric decay is smaller.
At p = 1 that scaling degenerates and sigma simply decays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import (
    Measurements,
    RankDeficientError,
    SensingOperator,
    SignalVector,
    SolverDivergenceError,
    WeightVector,
    _signal_array,
    _weights_array,
)

__all__ = [
    "SolverConfig",
    "SolverTrace",
    "build_projector",
    "smoothed_objective",
    "smoothed_gradient",
    "solve",
]

# Singular values below this fraction of the largest count as zero rank.
_RANK_TOL = 1e-10

# Relative iterate change below this on an accepted step ends the run.
_REL_CHANGE_TOL = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    """Knobs for the smoothed projected-gradient iteration."""

    p: float
    sigma_init: float = 10.0
    sigma_decay: float = 0.98
    max_iters: int = 500
    sigma_floor: float = 1e-9
    step_shrink: float = 0.5
    max_backtracks: int = 30
    feasibility_tol: float = 1e-8
    snr_cap_db: float = 300.0

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not (self.sigma_init > 0):
            raise ValueError("sigma_init must be positive")
        if not (0.0 < self.sigma_decay < 1.0):
            raise ValueError("sigma_decay must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not (0.0 < self.sigma_floor < self.sigma_init):
            raise ValueError("sigma_floor must lie in (0, sigma_init)")
        if not (0.0 < self.step_shrink < 1.0):
            raise ValueError("step_shrink must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")
        if not (self.feasibility_tol > 0):
            raise ValueError("feasibility_tol must be positive")


@dataclass
class SolverTrace:
    """Per-iteration record of the run.

    ``step == 0`` marks an iteration where every backtracked step was
    rejected and the iterate stayed put (sigma still decayed).
    ``iterates`` holds x_0 followed by each iteration's x when the solve
    was asked to keep them.
    """

    t: np.ndarray
    sigma: np.ndarray
    objective: np.ndarray
    step: np.ndarray
    residual: np.ndarray
    iterates: list[np.ndarray] | None = None

    COLUMNS = ("t", "sigma", "objective", "step", "residual")

    def __len__(self) -> int:
        return int(self.t.shape[0])

    def rows(self):
        for i in range(len(self)):
            yield (
                int(self.t[i]),
                float(self.sigma[i]),
                float(self.objective[i]),
                float(self.step[i]),
                float(self.residual[i]),
            )


def smoothed_objective(x, w, p: float, sigma: float) -> float:
    """Value of sum_i w_i^p (x_i^2 + sigma^2)^(p/2)."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if not (sigma > 0):
        raise ValueError("sigma must be positive")
    xa = _signal_array(x)
    wa = _weights_array(w, xa.shape[0])
    return float(_kernels.smoothed_objective_raw(xa, wa**p, float(p), float(sigma)))


def smoothed_gradient(x, w, p: float, sigma: float) -> np.ndarray:
    """Gradient p w_i^p (x_i^2 + sigma^2)^(p/2 - 1) x_i of the smoothed objective."""
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if not (sigma > 0):
        raise ValueError("sigma must be positive")
    xa = _signal_array(x)
    wa = _weights_array(w, xa.shape[0])
    return _kernels.smoothed_gradient_raw(xa, wa**p, float(p), float(sigma))


def _projector_parts(A_dense: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Null-space projector ingredients: Q = pinv(A) A and pinv(A)."""
    U, s, Vt = np.linalg.svd(A_dense, full_matrices=False)
    if s[0] == 0.0 or s[-1] <= _RANK_TOL * s[0]:
        ratio = 0.0 if s[0] == 0.0 else float(s[-1] / s[0])
        raise RankDeficientError(
            f"sensing matrix is rank deficient: smallest/largest singular value ratio {ratio:.3e}"
        )
    pinv = (Vt.T / s) @ U.T
    Q = Vt.T @ Vt
    return Q, pinv


def build_projector(A: SensingOperator, b) -> tuple[np.ndarray, np.ndarray]:
    """Row-space projector Q = pinv(A) A and the feasible point pinv(A) b.

    Raises RankDeficientError when the smallest singular value falls
    below 1e-10 times the largest.
    """
    A_dense = A.as_dense()
    y = b.y if isinstance(b, Measurements) else _signal_array(b)
    if y.shape[0] != A_dense.shape[0]:
        raise ValueError(f"measurement length {y.shape[0]} does not match operator rows {A_dense.shape[0]}")
    Q, pinv = _projector_parts(A_dense)
    return Q, pinv @ y


def solve(
    A: SensingOperator,
    b,
    w,
    cfg: SolverConfig,
    *,
    keep_iterates: bool = False,
    projector: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[SignalVector, SolverTrace]:
    """Run the smoothed projected-gradient iteration.

    Parameters
    ----------
    A : sensing operator (dense matrix or restricted transform)
    b : Measurements or array_like measurement vector
    w : WeightVector or array_like weights in [0, 1]
    cfg : SolverConfig
    keep_iterates : also record x_0 and every iterate in the trace
    projector : optional precomputed (Q, pinv(A)) pair, for callers
        solving many right-hand sides against one operator

    Returns
    -------
    (SignalVector, SolverTrace)

    Every iterate satisfies A x = b up to cfg.feasibility_tol relative
    to max(1, ||b||).  A non-finite objective raises
    SolverDivergenceError; a rank-deficient A raises RankDeficientError.
    """
    A_dense = A.as_dense()
    n, N = A_dense.shape
    y = b.y if isinstance(b, Measurements) else _signal_array(b)
    if y.shape[0] != n:
        raise ValueError(f"measurement length {y.shape[0]} does not match operator rows {n}")
    w_arr = _weights_array(w, N)
    p = float(cfg.p)
    wp = w_arr**p

    if projector is None:
        Q, pinv = _projector_parts(A_dense)
    else:
        Q, pinv = projector
    x = pinv @ y

    b_norm = float(np.linalg.norm(y))
    feas_limit = cfg.feasibility_tol * max(1.0, b_norm)
    # sqrt(1-p) |x| / (1 - sqrt(p)); undefined at p = 1 where only decay runs
    coef = math.sqrt(1.0 - p) / (1.0 - math.sqrt(p)) if p < 1.0 else None

    sigma = float(cfg.sigma_init)
    col_t: list[int] = []
    col_sigma: list[float] = []
    col_obj: list[float] = []
    col_step: list[float] = []
    col_res: list[float] = []
    iterates: list[np.ndarray] | None = [x.copy()] if keep_iterates else None

    for t in range(1, cfg.max_iters + 1):
        f0 = _kernels.smoothed_objective_raw(x, wp, p, sigma)
        if not math.isfinite(f0):
            raise SolverDivergenceError(f"objective became non-finite at iteration {t}")
        g = _kernels.smoothed_gradient_raw(x, wp, p, sigma)

        if not g.any():
            # stationary at every smoothing level: only zero entries carry
            # nonzero weight, so the iterate never moves again
            res = float(np.linalg.norm(A_dense @ x - y))
            col_t.append(t)
            col_sigma.append(sigma)
            col_obj.append(f0)
            col_step.append(0.0)
            col_res.append(res)
            if iterates is not None:
                iterates.append(x.copy())
            break

        d = -g
        pd = d - Q @ d
        step, f_new = _kernels.backtrack_raw(
            x, pd, wp, p, sigma, f0, cfg.step_shrink, cfg.max_backtracks
        )
        x_new = x + step * pd if step > 0.0 else x

        res = float(np.linalg.norm(A_dense @ x_new - y))
        if res > 0.5 * feas_limit:
            # numerical drift off the affine set; pull back before it matters
            x_new = x_new - pinv @ (A_dense @ x_new - y)
            res = float(np.linalg.norm(A_dense @ x_new - y))

        if coef is None:
            sigma_next = cfg.sigma_decay * sigma
        else:
            m = _kernels.indicator_max_raw(x_new, w_arr, sigma, coef)
            sigma_next = cfg.sigma_decay * sigma if m <= 0.0 else min(cfg.sigma_decay * sigma, m)

        col_t.append(t)
        col_sigma.append(sigma)
        col_obj.append(f_new if step > 0.0 else f0)
        col_step.append(step)
        col_res.append(res)
        if iterates is not None:
            iterates.append(x_new.copy())

        rel = float(np.linalg.norm(x_new - x)) / max(float(np.linalg.norm(x)), 1e-30)
        x = x_new
        if step > 0.0 and rel <= _REL_CHANGE_TOL:
            break
        if sigma_next <= cfg.sigma_floor:
            break
        sigma = sigma_next

    res = float(np.linalg.norm(A_dense @ x - y))
    if res > feas_limit:
        x = x - pinv @ (A_dense @ x - y)

    trace = SolverTrace(
        t=np.asarray(col_t, dtype=np.int64),
        sigma=np.asarray(col_sigma, dtype=np.float64),
        objective=np.asarray(col_obj, dtype=np.float64),
        step=np.asarray(col_step, dtype=np.float64),
        residual=np.asarray(col_res, dtype=np.float64),
        iterates=iterates,
    )
    return SignalVector(x), trace
