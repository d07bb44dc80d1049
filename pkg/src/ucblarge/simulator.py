"""Monte-Carlo regret experiments.

Each replication ``j`` draws a fresh environment from the prior and runs every
configured policy on it, so policies are compared on paired environments.
Random streams come from :class:`numpy.random.SeedSequence` with
``entropy=base_seed`` and ``spawn_key=(j, role[, policy_index])``:

* ``(j, 0)`` environment (shared by all policies of replication ``j``),
* ``(j, 1, i)`` rewards for policy ``i``,
* ``(j, 2, i)`` posterior draws for policy ``i``.

Rewards are drawn lazily at pull time from the single reward stream of the
(run, policy) pair, so realizations differ across policies.
"""

from __future__ import annotations

import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import policies as pol
from ._engine import run_kernel
from .reward_models import (
    Bernoulli,
    Family,
    NormalKnownVar,
    NormalUnknownVar,
    dist_mean,
    draw_reward,
    env_arrays,
    m_function,
    rate_bernoulli,
    std_normal,
)

ROLE_ENVIRONMENT = 0
ROLE_REWARDS = 1
ROLE_POLICY = 2


class PriorSpec(Enum):
    NORMAL_MEANS_UNIT_VAR = "normal-known"
    NORMAL_MEANS_EXP_VAR = "normal-unknown"
    UNIFORM_BERNOULLI = "bernoulli"

    @property
    def family(self) -> Family:
        return {
            PriorSpec.NORMAL_MEANS_UNIT_VAR: Family.NORMAL_KNOWN,
            PriorSpec.NORMAL_MEANS_EXP_VAR: Family.NORMAL_UNKNOWN,
            PriorSpec.UNIFORM_BERNOULLI: Family.BERNOULLI,
        }[self]


@dataclass(frozen=True)
class RunConfig:
    prior: PriorSpec
    K: int
    N: int
    J: int
    base_seed: int
    policies: tuple[pol.PolicySpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "policies", tuple(self.policies))
        if self.K < 1:
            raise ValueError(f"K must be at least 1, got {self.K}")
        if self.J < 1:
            raise ValueError(f"the number of runs must be at least 1, got {self.J}")
        if self.base_seed < 0:
            raise ValueError("base_seed must be nonnegative")
        for spec in self.policies:
            if spec.family != self.prior.family:
                raise ValueError(f"{spec.label} assumes {spec.family.name}, prior gives {self.prior.family.name}")
        init = max((s.init_per_arm for s in self.policies), default=1)
        if self.N < self.K * init:
            raise ValueError("N must be at least K times the initial allocation")


@dataclass
class RunOutcome:
    pulls: np.ndarray
    regret: float
    tilde_regret: float
    seed: int
    choices: np.ndarray | None = field(default=None, repr=False)


@dataclass(frozen=True)
class RunSummary:
    example: str
    policy: str
    params: str
    mean_regret: float
    se_regret: float
    mean_tilde_regret: float
    lower_bound_r: float
    J: int
    K: int
    N: int
    base_seed: int
    wall_seconds: float


def stream(base_seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(base_seed, spawn_key=key)))


def draw_environment(prior: PriorSpec, K: int, rng: np.random.Generator) -> list:
    """Draw K arms from the prior; means first, then variances, in arm order."""
    if K < 1:
        raise ValueError(f"K must be at least 1, got {K}")
    if prior is PriorSpec.UNIFORM_BERNOULLI:
        return [Bernoulli(rng.random()) for _ in range(K)]
    mus = [std_normal(rng) for _ in range(K)]
    if prior is PriorSpec.NORMAL_MEANS_UNIT_VAR:
        return [NormalKnownVar(mu) for mu in mus]
    # Exp(1) by inversion
    sigma2 = [-math.log1p(-rng.random()) for _ in range(K)]
    # u == 0 (probability 2**-53) would give a zero variance
    return [NormalUnknownVar(mu, s if s > 0.0 else np.finfo(float).tiny) for mu, s in zip(mus, sigma2)]


def regrets(env, pulls: np.ndarray, init_per_arm: int) -> tuple[float, float]:
    means = np.array([dist_mean(d) for d in env])
    gaps = means.max() - means
    regret = float(np.dot(gaps, pulls))
    tilde = float(np.dot(gaps, np.maximum(pulls - init_per_arm, 0)))
    return regret, tilde


def run_single(
    env,
    spec: pol.PolicySpec,
    N: int,
    rng: np.random.Generator,
    policy_rng: np.random.Generator | None = None,
    *,
    engine: str = "compiled",
    seed: int = -1,
    keep_choices: bool = False,
) -> RunOutcome:
    """Run one policy for N rewards on a fixed environment.

    Rewards are drawn from ``rng``; Thompson posterior draws from
    ``policy_rng`` (``rng`` itself when omitted). ``engine="python"`` drives the
    public policy API step by step and is kept as a reference for the compiled
    loop.
    """
    family, loc, scale = env_arrays(env)
    K = len(env)
    if family != spec.family:
        raise ValueError("environment family does not match the policy family")
    if N < K * spec.init_per_arm:
        raise ValueError("N must be at least K times the initial allocation")
    if policy_rng is None:
        policy_rng = rng
    choices = np.empty(N, dtype=np.int64)
    if engine == "compiled":
        kind, fam, sk, sp, q = spec.codes()
        pulls = run_kernel(kind, fam, sk, sp, q, spec.init_per_arm, loc, scale, N, rng, policy_rng, choices)
    elif engine == "python":
        state = pol.init_state(spec, K)
        for n in range(N):
            k = pol.choose_arm(spec, state, policy_rng)
            pol.record_reward(state, k, draw_reward(env[k], rng))
            choices[n] = k
        pulls = state.counts.copy()
    else:
        raise ValueError(f"unknown engine {engine!r}")
    regret, tilde = regrets(env, pulls, spec.init_per_arm)
    return RunOutcome(pulls, regret, tilde, seed, choices if keep_choices else None)


def lower_bound_constant(env) -> float:
    """Lower-bound constant sum over inferior arms of gap / KL(arm, best arm).

    Uses ``2 / gap`` per arm for unit-variance normals, ``gap / M(gap / sigma)``
    for unknown variances and the Bernoulli rate for Bernoulli arms. Returns 0
    when every arm is optimal.
    """
    means = [dist_mean(d) for d in env]
    best = max(means)
    r = 0.0
    for d, mu in zip(env, means):
        gap = best - mu
        if gap <= 0.0:
            continue
        if isinstance(d, NormalKnownVar):
            r += 2.0 / gap
        elif isinstance(d, NormalUnknownVar):
            r += gap / m_function(gap / math.sqrt(d.sigma2))
        else:
            r += gap / rate_bernoulli(best, mu)
    return r


def _replicate(config: RunConfig, j: int, observer):
    env = draw_environment(config.prior, config.K, stream(config.base_seed, j, ROLE_ENVIRONMENT))
    rows = []
    for i, spec in enumerate(config.policies):
        start = time.perf_counter()
        outcome = run_single(
            env,
            spec,
            config.N,
            stream(config.base_seed, j, ROLE_REWARDS, i),
            stream(config.base_seed, j, ROLE_POLICY, i),
            seed=j,
        )
        elapsed = time.perf_counter() - start
        if observer is not None:
            observer(j, i, env, outcome)
        rows.append((outcome.regret, outcome.tilde_regret, elapsed))
    return rows, lower_bound_constant(env)


def resolve_threads(threads: int) -> int:
    if threads <= 0:
        return os.cpu_count() or 1
    return threads


def run_batch(
    config: RunConfig,
    threads: int = 1,
    observer: Callable | None = None,
    progress: Callable[[int], None] | None = None,
) -> list[RunSummary]:
    """Run ``config.J`` paired replications and summarize each policy.

    Replications are numbered ``1..J``; results are gathered by replication
    index, so the summaries do not depend on ``threads``. ``observer`` is
    called as ``observer(j, policy_index, env, outcome)`` after every run.
    ``lower_bound_r`` is the median over replications of the lower-bound
    constant, since its mean is dominated by near-tied environments.
    """
    indices = range(1, config.J + 1)
    workers = resolve_threads(threads)
    if workers == 1:
        results = []
        for j in indices:
            results.append(_replicate(config, j, observer))
            if progress is not None:
                progress(j)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _replicate(config, j, observer), indices))

    r_values = [r for _, r in results]
    lower_r = statistics.median(r_values)
    summaries = []
    for i, spec in enumerate(config.policies):
        regret = np.array([rows[i][0] for rows, _ in results])
        tilde = np.array([rows[i][1] for rows, _ in results])
        wall = sum(rows[i][2] for rows, _ in results)
        se = float(regret.std(ddof=1) / math.sqrt(config.J)) if config.J > 1 else 0.0
        summaries.append(
            RunSummary(
                example=config.prior.value,
                policy=spec.name,
                params=spec.params,
                mean_regret=float(regret.mean()),
                se_regret=se,
                mean_tilde_regret=float(tilde.mean()),
                lower_bound_r=float(lower_r),
                J=config.J,
                K=config.K,
                N=config.N,
                base_seed=config.base_seed,
                wall_seconds=wall,
            )
        )
    return summaries


def per_run_regrets(config: RunConfig, threads: int = 1) -> np.ndarray:
    """Per-replication regrets, shape ``(J, len(policies))``, in replication order."""
    out = np.empty((config.J, len(config.policies)))

    def record(j, i, env, outcome):
        out[j - 1, i] = outcome.regret

    run_batch(config, threads=threads, observer=record)
    return out


def default_policies(prior: PriorSpec) -> list[pol.PolicySpec]:
    """The policy line-up of the simulation tables for a prior."""
    from .confidence import Schedule

    family = prior.family
    large = [
        pol.PolicySpec(pol.PolicyKind.UCB_LARGE, family, Schedule.chi_log(chi))
        for chi in (1.0, 0.75, 0.5)
    ]
    large.append(pol.PolicySpec(pol.PolicyKind.UCB_LARGE, family, Schedule.log_minus_sqrt_log()))
    if family == Family.NORMAL_UNKNOWN:
        baseline = pol.PolicySpec(pol.PolicyKind.UCB_BK, family)
    else:
        baseline = pol.PolicySpec(pol.PolicyKind.UCB_AGRAWAL, family, Schedule.chi_log(1.0))
    return large + [baseline, pol.PolicySpec(pol.PolicyKind.THOMPSON, family)]


def summaries_by_label(summaries: Sequence[RunSummary]) -> dict[str, RunSummary]:
    return {f"{s.policy}:{s.params}" if s.params else s.policy: s for s in summaries}
