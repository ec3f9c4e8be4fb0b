"""Closed-form recovery conditions and error constants.

Bounds are expressed through the restricted-isometry constants of the
sensing matrix: delta_ak for columns drawn ak at a time and
delta_(a+1)k for (a+1)k at a time.  The weighted decoders depend on the
weight omega applied on an estimated support of size rho*k whose
overlap with the true support is alpha.  Everything here is scalar
arithmetic; grids are handled by the callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ConditionViolatedError

__all__ = [
    "TheoryParams",
    "delta_hat_lp",
    "delta_hat_wl1",
    "delta_hat_wlp",
    "error_constants",
    "proposition2_check",
    "sufficient_condition_holds",
]


@dataclass(frozen=True)
class TheoryParams:
    """Parameter bundle for the recovery conditions.

    a is the RIP oversampling factor (a > 1, with a*k an integer in the
    underlying argument), rho = size of the support estimate relative to
    k, alpha = fraction of the estimate that is correct.
    """

    p: float
    omega: float
    alpha: float
    rho: float
    a: float
    delta_ak: float | None = None
    delta_a1k: float | None = None

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must lie in (0, 1], got {self.p}")
        if not (0.0 <= self.omega <= 1.0):
            raise ValueError(f"omega must lie in [0, 1], got {self.omega}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.rho < 0.0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if not (self.a > 1.0):
            raise ValueError(f"a must exceed 1, got {self.a}")
        for name in ("delta_ak", "delta_a1k"):
            val = getattr(self, name)
            if val is not None and not (0.0 <= val < 1.0):
                raise ValueError(f"{name} must lie in [0, 1), got {val}")


def _gamma(p: float, omega: float, alpha: float, rho: float) -> float:
    """omega^p + (1 - omega^p) (1 + rho - 2 alpha rho)^(1 - p/2)."""
    r = 1.0 + rho - 2.0 * alpha * rho
    if r < 0.0:
        raise ValueError(f"1 + rho - 2 alpha rho must be >= 0, got {r}")
    wp = omega**p
    return wp + (1.0 - wp) * r ** (1.0 - 0.5 * p)


def delta_hat_lp(a: float, p: float) -> float:
    """Largest delta_(a+1)k for which plain lp recovery is guaranteed,
    assuming delta_ak matches it: (a^(2/p-1) - 1) / (a^(2/p-1) + 1)."""
    if not (a > 1.0):
        raise ValueError(f"a must exceed 1, got {a}")
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    t = a ** (2.0 / p - 1.0)
    return (t - 1.0) / (t + 1.0)


def delta_hat_wl1(a: float, omega: float, alpha: float, rho: float) -> float:
    """Weighted l1 threshold (a - gamma^2) / (a + gamma^2) with
    gamma = omega + (1 - omega) sqrt(1 + rho - 2 alpha rho)."""
    if not (a > 1.0):
        raise ValueError(f"a must exceed 1, got {a}")
    r = 1.0 + rho - 2.0 * alpha * rho
    if r < 0.0:
        raise ValueError(f"1 + rho - 2 alpha rho must be >= 0, got {r}")
    g = omega + (1.0 - omega) * math.sqrt(r)
    return (a - g * g) / (a + g * g)


def delta_hat_wlp(a: float, p: float, omega: float, alpha: float, rho: float) -> float:
    """Weighted lp threshold (a^(2/p-1) - gamma^(2/p)) / (a^(2/p-1) + gamma^(2/p))
    with gamma = omega^p + (1 - omega^p) (1 + rho - 2 alpha rho)^(1 - p/2)."""
    if not (a > 1.0):
        raise ValueError(f"a must exceed 1, got {a}")
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must lie in (0, 1], got {p}")
    t = a ** (2.0 / p - 1.0)
    g = _gamma(p, omega, alpha, rho) ** (2.0 / p)
    return (t - g) / (t + g)


def sufficient_condition_holds(params: TheoryParams) -> bool:
    """Whether delta_ak + ratio * delta_(a+1)k < ratio - 1 with
    ratio = a^(2/p-1) / gamma^(2/p); requires both delta fields.

    Evaluated in the equivalent product form
        gamma^(2/p) (1 + delta_ak) < a^(2/p-1) (1 - delta_(a+1)k)
    which stays defined when gamma = 0 (a zero-weight estimate that
    covers the whole support)."""
    if params.delta_ak is None or params.delta_a1k is None:
        raise ValueError("sufficient condition needs delta_ak and delta_a1k")
    g = _gamma(params.p, params.omega, params.alpha, params.rho) ** (2.0 / params.p)
    t = params.a ** (2.0 / params.p - 1.0)
    return g * (1.0 + params.delta_ak) < t * (1.0 - params.delta_a1k)


def _constants_from_parts(p: float, a: float, gamma: float, d1: float, d2: float) -> tuple[float, float]:
    """Error constants for given gamma; d1 = delta_ak, d2 = delta_(a+1)k.

    The noise coefficient is
        C1 = 2^p (1 + gamma a^(p/2-1) / (2/p-1)^(p/2)) / D
    and the tail coefficient is
        C2 = 2 a^(p/2-1) ((1+d1)^(p/2) + (1-d2)^(p/2) (2/p-1)^(-p/2)) / D
    with D = (1-d2)^(p/2) - (1+d1)^(p/2) a^(p/2-1) gamma.  D > 0 is
    exactly the sufficient condition; otherwise the bound is vacuous and
    ConditionViolatedError is raised.
    """
    half = 0.5 * p
    a_pow = a ** (half - 1.0)
    tail_pow = (2.0 / p - 1.0) ** half
    D = (1.0 - d2) ** half - (1.0 + d1) ** half * a_pow * gamma
    if D <= 0.0:
        raise ConditionViolatedError(
            f"condition denominator must be positive, got {D:.6g}"
        )
    c1 = 2.0**p * (1.0 + gamma * a_pow / tail_pow) / D
    c2 = 2.0 * a_pow * ((1.0 + d1) ** half + (1.0 - d2) ** half / tail_pow) / D
    return c1, c2


def error_constants(params: TheoryParams) -> tuple[float, float]:
    """Constants (C1, C2) in the recovery bound
    ||x_hat - x||^p <= C1 epsilon^p + C2 k^(p/2-1) ||x - x_k||_{p,w}^p.

    Requires delta_ak and delta_a1k; raises ConditionViolatedError when
    the sufficient condition fails (non-positive denominator).
    """
    if params.delta_ak is None or params.delta_a1k is None:
        raise ValueError("error constants need delta_ak and delta_a1k")
    gamma = _gamma(params.p, params.omega, params.alpha, params.rho)
    return _constants_from_parts(
        params.p, params.a, gamma, params.delta_ak, params.delta_a1k
    )


def _wl1_constants(a: float, omega: float, alpha: float, rho: float, d1: float, d2: float) -> tuple[float, float]:
    """Independent p = 1 closed form used to anchor the general formula."""
    g = omega + (1.0 - omega) * math.sqrt(1.0 + rho - 2.0 * alpha * rho)
    D = math.sqrt(1.0 - d2) - g * math.sqrt((1.0 + d1) / a)
    if D <= 0.0:
        raise ConditionViolatedError(f"condition denominator must be positive, got {D:.6g}")
    c1 = 2.0 * (1.0 + g / math.sqrt(a)) / D
    c2 = (2.0 / math.sqrt(a)) * (math.sqrt(1.0 + d1) + math.sqrt(1.0 - d2)) / D
    return c1, c2


def _lp_constants(p: float, a: float, d1: float, d2: float) -> tuple[float, float]:
    """Independent unweighted closed form (gamma = 1)."""
    return _constants_from_parts(p, a, 1.0, d1, d2)


def proposition2_check(
    p: float,
    omega: float,
    alpha: float,
    rho: float,
    a: float,
    delta_grid,
    *,
    tol: float = 1e-12,
) -> bool:
    """Compare weighted against unweighted constants over a delta grid.

    For omega < 1 the weighted constants are smaller than the
    unweighted ones exactly when alpha > 1/2, equal at alpha = 1/2, and
    larger when alpha < 1/2.  Returns True when every grid point where
    both bounds apply matches that pattern (requires at least one such
    point).
    """
    if not (0.0 <= omega < 1.0):
        raise ValueError(f"omega must lie in [0, 1) for this comparison, got {omega}")
    compared = 0
    for entry in delta_grid:
        d1, d2 = (entry, entry) if np.isscalar(entry) else (entry[0], entry[1])
        try:
            cw = error_constants(
                TheoryParams(p=p, omega=omega, alpha=alpha, rho=rho, a=a, delta_ak=d1, delta_a1k=d2)
            )
            cu = _lp_constants(p, a, d1, d2)
        except ConditionViolatedError:
            continue
        compared += 1
        for weighted, unweighted in zip(cw, cu):
            scale = max(abs(weighted), abs(unweighted), 1.0)
            gain = unweighted - weighted
            if alpha > 0.5:
                ok = gain > tol * scale
            elif alpha == 0.5:
                ok = abs(gain) <= tol * scale
            else:
                ok = gain < -tol * scale
            if not ok:
                return False
    return compared > 0
