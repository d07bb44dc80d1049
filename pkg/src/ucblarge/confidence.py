"""Confidence-coefficient schedules and upper confidence bounds.

An upper confidence bound for ``t`` observations with sample mean ``xbar`` and
confidence coefficient ``b`` is the smallest ``u >= xbar`` with
``t * I_u(xbar) >= b``, where ``I`` is the family's rate kernel. Closed forms
exist for the normal families; Bernoulli bounds are solved iteratively, and
:func:`generic_ucb` solves any monotone kernel by bisection as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Callable

import numba

from .reward_models import rate_bernoulli

RESIDUAL_TOL = 1e-9
STEP_TOL = 1e-12
MAX_ITER = 200


class ScheduleKind(IntEnum):
    CHI_LOG = 0
    LOG_MINUS_SQRT_LOG = 1
    LOG_PLUS_ALPHA_LOGLOG = 2


@dataclass(frozen=True)
class Schedule:
    """Confidence coefficient ``m -> b_m``.

    ``param`` is ``chi`` for :attr:`ScheduleKind.CHI_LOG`, ``alpha`` for
    :attr:`ScheduleKind.LOG_PLUS_ALPHA_LOGLOG` and unused otherwise.
    """

    kind: ScheduleKind
    param: float = 1.0

    def __post_init__(self):
        if self.kind == ScheduleKind.CHI_LOG and not 0.0 < self.param <= 1.0:
            raise ValueError(f"chi must lie in (0, 1], got {self.param}")
        if self.kind == ScheduleKind.LOG_PLUS_ALPHA_LOGLOG and not self.param > 1.0:
            raise ValueError(f"alpha must exceed 1, got {self.param}")

    @classmethod
    def chi_log(cls, chi: float = 1.0) -> "Schedule":
        return cls(ScheduleKind.CHI_LOG, float(chi))

    @classmethod
    def log_minus_sqrt_log(cls) -> "Schedule":
        return cls(ScheduleKind.LOG_MINUS_SQRT_LOG, 0.0)

    @classmethod
    def log_plus_alpha_loglog(cls, alpha: float = 2.0) -> "Schedule":
        return cls(ScheduleKind.LOG_PLUS_ALPHA_LOGLOG, float(alpha))

    def __call__(self, m: float) -> float:
        return schedule_value(self, m)


@numba.njit(cache=True)
def schedule_at(kind, param, m):
    if m < 1.0:
        raise ValueError("schedule argument m must be at least 1")
    if kind == 0:
        return param * math.log(m)
    if kind == 1:
        lg = math.log(math.e - 1.0 + m)
        return max(lg - math.sqrt(lg), 0.0)
    return math.log(m) + param * math.log1p(math.log(m))


def schedule_value(s: Schedule, m: float) -> float:
    return schedule_at(int(s.kind), s.param, float(m))


@numba.njit(cache=True)
def ucb_normal_known(xbar, t, b):
    if t < 1 or b < 0.0:
        raise ValueError("ucb_normal_known requires t >= 1 and b >= 0")
    return xbar + math.sqrt(2.0 * b / t)


@numba.njit(cache=True)
def ucb_normal_unknown(xbar, sigma_hat, t, b):
    """Unknown-variance bound with effective sample size ``t - 1``."""
    if t < 2:
        raise ValueError("ucb_normal_unknown requires t >= 2")
    if sigma_hat < 0.0 or b < 0.0:
        raise ValueError("ucb_normal_unknown requires sigma_hat >= 0 and b >= 0")
    return xbar + sigma_hat * math.sqrt(math.expm1(2.0 * b / (t - 1)))


@numba.njit(cache=True)
def ucb_bk_unknown(xbar, sigma_hat, t, b):
    if t < 1 or sigma_hat < 0.0 or b < 0.0:
        raise ValueError("ucb_bk_unknown requires t >= 1, sigma_hat >= 0, b >= 0")
    return xbar + sigma_hat * math.sqrt(math.expm1(2.0 * b / t))


@numba.njit(cache=True)
def _bernoulli_excess(u, x, y):
    return rate_bernoulli(u, x) - y


@numba.njit(cache=True)
def _bernoulli_bisect(x, y):
    # smallest float u in [x, 1] with I_u(x) >= y; I is increasing on [x, 1]
    lo = x
    hi = 1.0
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if rate_bernoulli(mid, x) >= y:
            hi = mid
        else:
            lo = mid
    return hi


@numba.njit(cache=True)
def ucb_bernoulli(xbar, t, b):
    """Larger root in ``u`` of ``I_u(xbar) = b / t``, capped at 1.

    Starts the fixed-point map ``v -> 1 - (d / v**x) ** (1 / (1 - x))`` at
    ``v = 1``; every iterate stays above the root, and a Newton step on the
    convex increasing residual is applied after each map to speed up the
    otherwise linear convergence. Falls back to bisection if the residual
    tolerance is not met.
    """
    x = xbar
    if not 0.0 <= x <= 1.0:
        raise ValueError("ucb_bernoulli requires xbar in [0, 1]")
    if t < 1 or b < 0.0:
        raise ValueError("ucb_bernoulli requires t >= 1 and b >= 0")
    if b == 0.0:
        return x
    if x == 1.0:
        return 1.0
    y = b / t
    if x == 0.0:
        return min(1.0, -math.expm1(-y))

    one_minus_x = 1.0 - x
    log_d = x * math.log(x) + one_minus_x * math.log(one_minus_x) - y
    v = 1.0
    for _ in range(MAX_ITER):
        # log-space form of 1 - (d / v**x) ** (1 / (1 - x))
        w = -math.expm1((log_d - x * math.log(v)) / one_minus_x)
        if w < 1.0:
            slope = (w - x) / (w * (1.0 - w))
            if slope > 0.0:
                newton = w - _bernoulli_excess(w, x, y) / slope
                if x < newton < w:
                    w = newton
        step = abs(v - w)
        v = w
        if step <= STEP_TOL:
            break
    if v >= 1.0:
        return 1.0
    if abs(t * rate_bernoulli(v, x) - b) <= RESIDUAL_TOL * max(1.0, b):
        return v
    return _bernoulli_bisect(x, y)


def generic_ucb(
    kernel: Callable[[float, float], float],
    xbar: float,
    t: int,
    b: float,
    domain_upper: float | None = None,
) -> float:
    """Solve ``inf{u >= xbar : t * kernel(u, xbar) >= b}`` by bisection.

    ``kernel(u, xbar)`` must be nondecreasing in ``u`` on ``[xbar, domain_upper]``.
    Returns ``domain_upper`` when the constraint cannot be met below it. The
    default cap ``xbar + 10 * sqrt(2b/t) + 1`` suits normal-type kernels.
    """
    if t < 1 or b < 0:
        raise ValueError("generic_ucb requires t >= 1 and b >= 0")
    if b == 0:
        return float(xbar)
    if domain_upper is None:
        domain_upper = xbar + 10.0 * math.sqrt(2.0 * b / t) + 1.0
    if domain_upper < xbar:
        raise ValueError("domain_upper must be at least xbar")

    def satisfied(u):
        value = kernel(u, xbar)
        return math.isinf(value) or t * value >= b

    lo, hi = float(xbar), float(domain_upper)
    if not satisfied(hi):
        return hi
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return hi
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
