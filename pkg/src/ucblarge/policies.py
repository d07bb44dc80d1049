"""Sequential arm-selection policies.

Arms are indexed from 0. Every policy starts with a forced allocation of
``init_per_arm`` rewards to each arm in index order; afterwards UCB policies
pull the arm with the largest confidence bound and Thompson sampling pulls the
arm with the largest posterior draw. Ties go to the smallest arm index.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum

import numba
import numpy as np

from .confidence import (
    Schedule,
    schedule_at,
    ucb_bernoulli,
    ucb_bk_unknown,
    ucb_normal_known,
    ucb_normal_unknown,
)
from .reward_models import Family, std_normal


class PolicyKind(IntEnum):
    UCB_LARGE = 0
    UCB_AGRAWAL = 1
    UCB_BK = 2
    THOMPSON = 3


POLICY_NAMES = {
    PolicyKind.UCB_LARGE: "ucb-large",
    PolicyKind.UCB_AGRAWAL: "ucb-agrawal",
    PolicyKind.UCB_BK: "ucb-bk",
    PolicyKind.THOMPSON: "thompson",
}

SCHEDULE_NAMES = {0: "chi-log", 1: "log-sqrt", 2: "log-alpha"}


@dataclass(frozen=True)
class PolicySpec:
    """A policy, the reward family it assumes, and its tuning.

    ``schedule`` is required for UCB-Large and UCB-Agrawal; UCB-BK always uses
    ``b = log n``. ``q`` perturbs the UCB-Large argument to ``n / K**(1 - q)``.
    """

    kind: PolicyKind
    family: Family
    schedule: Schedule | None = None
    q: float = 0.0
    init_per_arm: int = field(init=False)

    def __post_init__(self):
        two = self.family == Family.NORMAL_UNKNOWN
        object.__setattr__(self, "init_per_arm", 2 if two else 1)
        if self.kind in (PolicyKind.UCB_LARGE, PolicyKind.UCB_AGRAWAL):
            if self.schedule is None:
                raise ValueError(f"{POLICY_NAMES[self.kind]} needs a schedule")
        elif self.schedule is not None:
            raise ValueError(f"{POLICY_NAMES[self.kind]} takes no schedule")
        if self.kind == PolicyKind.UCB_BK and self.family != Family.NORMAL_UNKNOWN:
            raise ValueError("ucb-bk is defined for normal rewards with unknown variance")
        if not 0.0 <= self.q < 1.0:
            raise ValueError(f"q must lie in [0, 1), got {self.q}")
        if self.q and self.kind != PolicyKind.UCB_LARGE:
            raise ValueError("q applies to ucb-large only")

    @property
    def name(self) -> str:
        return POLICY_NAMES[self.kind]

    @property
    def params(self) -> str:
        """Parameter string in the CLI policy grammar, e.g. ``chi=0.5``."""
        if self.schedule is None:
            return ""
        s = self.schedule
        if s.kind == 0:
            parts = [f"chi={s.param:g}"]
        elif s.kind == 1:
            parts = ["schedule=log-sqrt"]
        else:
            parts = ["schedule=log-alpha", f"alpha={s.param:g}"]
        if self.q:
            parts.append(f"q={self.q:g}")
        return ":".join(parts)

    @property
    def label(self) -> str:
        return f"{self.name}:{self.params}" if self.params else self.name

    # flat tuple consumed by the compiled routines
    def codes(self) -> tuple[int, int, int, float, float]:
        s = self.schedule
        return (
            int(self.kind),
            int(self.family),
            -1 if s is None else int(s.kind),
            0.0 if s is None else float(s.param),
            float(self.q),
        )


@dataclass(frozen=True)
class ArmStats:
    count: int = 0
    sum: float = 0.0
    sum_sq: float = 0.0

    @property
    def mean(self) -> float:
        return self.sum / self.count

    @property
    def sigma2_hat(self) -> float:
        """Biased (divisor ``count``) sample variance, floored at 0."""
        return sigma2_hat(self.count, self.sum, self.sum_sq)


@dataclass
class PolicyState:
    counts: np.ndarray
    sums: np.ndarray
    sum_sqs: np.ndarray
    forced: deque

    @property
    def K(self) -> int:
        return len(self.counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def arm_stats(self, k: int) -> ArmStats:
        return ArmStats(int(self.counts[k]), float(self.sums[k]), float(self.sum_sqs[k]))


def init_state(spec: PolicySpec, K: int) -> PolicyState:
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    forced = deque(k for k in range(K) for _ in range(spec.init_per_arm))
    return PolicyState(
        counts=np.zeros(K, dtype=np.int64),
        sums=np.zeros(K),
        sum_sqs=np.zeros(K),
        forced=forced,
    )


def record_reward(state: PolicyState, k: int, x: float) -> None:
    if not 0 <= k < state.K:
        raise IndexError(f"arm {k} out of range for K={state.K}")
    state.counts[k] += 1
    state.sums[k] += x
    state.sum_sqs[k] += x * x


@numba.njit(cache=True)
def sigma2_hat(count, s, ss):
    mean = s / count
    return max(ss / count - mean * mean, 0.0)


@numba.njit(cache=True)
def confidence_coefficient(kind, sched_kind, sched_param, q, n, K):
    if kind == 0:
        m = n / K ** (1.0 - q)
        return schedule_at(sched_kind, sched_param, max(m, 1.0))
    if kind == 1:
        return schedule_at(sched_kind, sched_param, float(n))
    return math.log(n)


@numba.njit(cache=True)
def arm_index(kind, family, b, count, s, ss):
    xbar = s / count
    if family == 2:
        return ucb_bernoulli(xbar, count, b)
    if family == 0:
        return ucb_normal_known(xbar, count, b)
    sigma_hat = math.sqrt(sigma2_hat(count, s, ss))
    if kind == 2:
        return ucb_bk_unknown(xbar, sigma_hat, count, b)
    return ucb_normal_unknown(xbar, sigma_hat, count, b)


@numba.njit(cache=True)
def ucb_indices(kind, family, sched_kind, sched_param, q, counts, sums, sum_sqs, n):
    K = counts.shape[0]
    b = confidence_coefficient(kind, sched_kind, sched_param, q, n, K)
    out = np.empty(K)
    for k in range(K):
        out[k] = arm_index(kind, family, b, counts[k], sums[k], sum_sqs[k])
    return out


@numba.njit(cache=True)
def posterior_sample(family, count, s, ss, rng):
    if family == 0:
        # N(0, 1) prior on the mean
        return s / (count + 1.0) + std_normal(rng) / math.sqrt(count + 1.0)
    if family == 2:
        # uniform prior on p
        return rng.beta(1.0 + s, 1.0 + count - s)
    # normal-gamma prior; gamma second parameter is a rate
    xbar = s / count
    shape = 1.0 + 0.5 * count
    rate = 1.0 + 0.5 * count * sigma2_hat(count, s, ss) + count * xbar * xbar / (1.0 + count)
    precision = rng.gamma(shape, 1.0 / rate)
    mean = count * xbar / (1.0 + count)
    return mean + std_normal(rng) / math.sqrt(precision * (1.0 + count))


@numba.njit(cache=True)
def argmax_first(values):
    best = 0
    for k in range(1, values.shape[0]):
        if values[k] > values[best]:
            best = k
    return best


def posterior_draw(spec: PolicySpec, stats: ArmStats, rng: np.random.Generator) -> float:
    minimum = 2 if spec.family == Family.NORMAL_UNKNOWN else 1
    if stats.count < minimum:
        raise ValueError(f"posterior draw needs at least {minimum} observations")
    return posterior_sample(int(spec.family), stats.count, stats.sum, stats.sum_sq, rng)


def index_values(spec: PolicySpec, state: PolicyState) -> np.ndarray:
    """Confidence bounds of every arm at the current total count."""
    kind, family, sk, sp, q = spec.codes()
    if kind == PolicyKind.THOMPSON:
        raise ValueError("thompson sampling has no confidence index")
    return ucb_indices(kind, family, sk, sp, q, state.counts, state.sums, state.sum_sqs, state.n)


def choose_arm(spec: PolicySpec, state: PolicyState, rng: np.random.Generator | None = None) -> int:
    """Next arm to pull; ``n`` and ``K`` are taken from ``state``.

    Thompson sampling draws one posterior sample per arm, in index order, from
    ``rng``.
    """
    if state.forced:
        return state.forced.popleft()
    if np.any(state.counts < spec.init_per_arm):
        raise ValueError("every arm needs init_per_arm rewards before free choices")
    if spec.kind == PolicyKind.THOMPSON:
        if rng is None:
            raise ValueError("thompson sampling needs a random generator")
        family = int(spec.family)
        draws = np.array([
            posterior_sample(family, state.counts[k], state.sums[k], state.sum_sqs[k], rng)
            for k in range(state.K)
        ])
        return int(argmax_first(draws))
    return int(argmax_first(index_values(spec, state)))
