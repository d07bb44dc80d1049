"""Compiled single-run loop.

Mirrors ``init_state`` / ``choose_arm`` / ``record_reward`` / ``draw_reward``
step for step, calling the same compiled index and posterior routines, so a
run here reproduces the pure-Python driver bit for bit.
"""

import numba
import numpy as np

from .confidence import ucb_bernoulli
from .policies import arm_index, confidence_coefficient, posterior_sample
from .reward_models import draw_from, rate_bernoulli

# Bernoulli bounds need an iterative solve, so each arm's bound is cached at an
# inflated coefficient b_hi >= b. The bound is nondecreasing in b, so the
# cached value caps the arm's index until the arm is pulled again or b passes
# b_hi. An arm's index exceeds a level w iff t * I_w(xbar) < b, which needs no
# solve; exact indices are computed only for arms within the margin of the best.
_CACHE_REL = 0.02
_CACHE_ABS = 0.005
_MARGIN = 1e-9


@numba.njit(cache=True)
def _above(w, t, x, b):
    """True when the index of (t, x) at coefficient b is clearly above w."""
    return w < 1.0 and (x > w or t * rate_bernoulli(w, x) < b - 1e-12 * max(1.0, b))


@numba.njit(cache=True)
def _below(w, t, x, b):
    """True when the index of (t, x) at coefficient b is clearly below w."""
    return x < w < 1.0 and t * rate_bernoulli(w, x) > b + 4.0 * _MARGIN * max(1.0, b)


@numba.njit(cache=True)
def choose_bernoulli_cached(b, counts, sums, upper, b_hi, last):
    K = counts.shape[0]
    if K == 1:
        return 0
    if b_hi[last] < 0.0:
        # the arm just pulled has no cap; it often still wins outright
        ceiling = -1.0
        for k in range(K):
            if k != last:
                if b_hi[k] < b:
                    b_hi[k] = b + max(_CACHE_REL * b, _CACHE_ABS)
                    upper[k] = ucb_bernoulli(sums[k] / counts[k], counts[k], b_hi[k])
                if upper[k] > ceiling:
                    ceiling = upper[k]
        if _above(ceiling + _MARGIN, counts[last], sums[last] / counts[last], b):
            return last
    lead = 0
    for k in range(K):
        if b_hi[k] < b:
            b_hi[k] = b + max(_CACHE_REL * b, _CACHE_ABS)
            upper[k] = ucb_bernoulli(sums[k] / counts[k], counts[k], b_hi[k])
        if upper[k] > upper[lead]:
            lead = k
    ceiling = -1.0
    for k in range(K):
        if k != lead and upper[k] > ceiling:
            ceiling = upper[k]
    if _above(ceiling + _MARGIN, counts[lead], sums[lead] / counts[lead], b):
        return lead
    best = lead
    v = ucb_bernoulli(sums[lead] / counts[lead], counts[lead], b)
    for k in range(K):
        if k == lead or upper[k] + _MARGIN < v:
            continue
        x = sums[k] / counts[k]
        if _below(v, counts[k], x, b):
            continue
        u = ucb_bernoulli(x, counts[k], b)
        if u > v or (u == v and k < best):
            v = u
            best = k
    return best


@numba.njit(cache=True, nogil=True)
def run_kernel(kind, family, sched_kind, sched_param, q, init, loc, scale, N,
               reward_rng, policy_rng, choices):
    K = loc.shape[0]
    counts = np.zeros(K, np.int64)
    sums = np.zeros(K)
    sum_sqs = np.zeros(K)
    values = np.empty(K)
    upper = np.zeros(K)
    b_hi = np.full(K, -1.0)
    forced = K * init
    for n in range(N):
        if n < forced:
            k = n // init
        elif kind == 3:
            k = 0
            for a in range(K):
                values[a] = posterior_sample(family, counts[a], sums[a], sum_sqs[a], policy_rng)
                if values[a] > values[k]:
                    k = a
        else:
            b = confidence_coefficient(kind, sched_kind, sched_param, q, n, K)
            if family == 2:
                k = choose_bernoulli_cached(b, counts, sums, upper, b_hi, k)
            else:
                k = 0
                for a in range(K):
                    values[a] = arm_index(kind, family, b, counts[a], sums[a], sum_sqs[a])
                    if values[a] > values[k]:
                        k = a
        x = draw_from(family, loc[k], scale[k], reward_rng)
        counts[k] += 1
        sums[k] += x
        sum_sqs[k] += x * x
        b_hi[k] = -1.0
        choices[n] = k
    return counts
