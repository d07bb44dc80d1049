import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ucblarge.confidence import Schedule, ucb_bernoulli, ucb_normal_known, ucb_normal_unknown
from ucblarge.policies import (
    ArmStats,
    PolicyKind,
    PolicySpec,
    argmax_first,
    choose_arm,
    index_values,
    init_state,
    posterior_draw,
    record_reward,
)
from ucblarge.reward_models import Family

CHI1 = Schedule.chi_log(1.0)


def large(family=Family.NORMAL_KNOWN, schedule=CHI1, q=0.0):
    return PolicySpec(PolicyKind.UCB_LARGE, family, schedule, q)


def agrawal(family=Family.NORMAL_KNOWN, schedule=CHI1):
    return PolicySpec(PolicyKind.UCB_AGRAWAL, family, schedule)


def thompson(family):
    return PolicySpec(PolicyKind.THOMPSON, family)


def state_with(spec, stats):
    state = init_state(spec, len(stats))
    state.forced.clear()
    for k, rewards in enumerate(stats):
        for x in rewards:
            record_reward(state, k, x)
    return state


def replay(spec, K, N, seed):
    """Drive a policy on a seeded normal reward stream; arm k has mean k / K."""
    rewards = np.random.default_rng(seed)
    policy_rng = np.random.default_rng(seed + 1)
    state = init_state(spec, K)
    out = []
    for _ in range(N):
        k = choose_arm(spec, state, policy_rng)
        record_reward(state, k, k / K + rewards.normal())
        out.append(k)
    return out


class TestSpec:
    def test_init_per_arm(self):
        assert large(Family.NORMAL_UNKNOWN).init_per_arm == 2
        assert thompson(Family.NORMAL_UNKNOWN).init_per_arm == 2
        assert large().init_per_arm == 1
        assert thompson(Family.BERNOULLI).init_per_arm == 1

    @pytest.mark.parametrize("q", [-0.1, 1.0])
    def test_q_range(self, q):
        with pytest.raises(ValueError):
            large(q=q)

    def test_q_only_for_large(self):
        with pytest.raises(ValueError):
            PolicySpec(PolicyKind.UCB_AGRAWAL, Family.NORMAL_KNOWN, CHI1, 0.2)

    def test_schedule_requirements(self):
        with pytest.raises(ValueError):
            PolicySpec(PolicyKind.UCB_LARGE, Family.NORMAL_KNOWN)
        with pytest.raises(ValueError):
            PolicySpec(PolicyKind.THOMPSON, Family.NORMAL_KNOWN, CHI1)

    def test_bk_needs_unknown_variance(self):
        with pytest.raises(ValueError):
            PolicySpec(PolicyKind.UCB_BK, Family.BERNOULLI)
        assert PolicySpec(PolicyKind.UCB_BK, Family.NORMAL_UNKNOWN).label == "ucb-bk"

    def test_labels(self):
        assert large(schedule=Schedule.chi_log(0.5)).label == "ucb-large:chi=0.5"
        assert large(schedule=Schedule.log_minus_sqrt_log()).params == "schedule=log-sqrt"
        assert large(schedule=Schedule.log_plus_alpha_loglog(2.0), q=0.25).params == "schedule=log-alpha:alpha=2:q=0.25"


class TestInitState:
    def test_forced_queues(self):
        assert list(init_state(large(), 3).forced) == [0, 1, 2]
        assert list(init_state(large(Family.NORMAL_UNKNOWN), 2).forced) == [0, 0, 1, 1]
        assert list(init_state(thompson(Family.BERNOULLI), 1).forced) == [0]

    def test_empty_stats(self):
        state = init_state(large(), 4)
        assert state.K == 4 and state.n == 0
        assert state.arm_stats(2) == ArmStats(0, 0.0, 0.0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            init_state(large(), 0)


class TestRecordReward:
    def test_examples(self):
        state = init_state(large(), 2)
        record_reward(state, 0, 0.5)
        record_reward(state, 0, 1.5)
        stats = state.arm_stats(0)
        assert (stats.count, stats.sum, stats.sum_sq) == (2, 2.0, 2.5)
        assert stats.sigma2_hat == 0.25
        assert state.arm_stats(1) == ArmStats(0, 0.0, 0.0)

    def test_other_arms_unchanged(self):
        state = init_state(large(), 2)
        record_reward(state, 0, 3.0)
        record_reward(state, 1, -1.0)
        assert state.arm_stats(0) == ArmStats(1, 3.0, 9.0)

    @pytest.mark.parametrize("k", [-1, 2])
    def test_out_of_range(self, k):
        with pytest.raises(IndexError):
            record_reward(init_state(large(), 2), k, 1.0)

    def test_sigma2_floored_at_zero(self):
        assert ArmStats(3, 0.3, 0.029).sigma2_hat == 0.0


class TestChooseArm:
    def test_zero_coefficient_is_greedy(self):
        state = state_with(large(), [[0.9], [0.1]])
        assert choose_arm(large(), state) == 0
        state = state_with(large(), [[0.1], [0.9]])
        assert choose_arm(large(), state) == 1

    def test_tie_goes_to_smallest_index(self):
        assert choose_arm(large(), state_with(large(), [[0.4], [0.4]])) == 0
        assert int(argmax_first(np.array([1.0, 3.0, 3.0, 2.0]))) == 1

    def test_forced_queue_first(self):
        spec = large(Family.NORMAL_UNKNOWN)
        state = init_state(spec, 2)
        picks = []
        for _ in range(4):
            k = choose_arm(spec, state)
            record_reward(state, k, 100.0 * k)
            picks.append(k)
        assert picks == [0, 0, 1, 1]

    def test_precondition(self):
        state = init_state(large(), 2)
        state.forced.clear()
        with pytest.raises(ValueError):
            choose_arm(large(), state)

    def test_thompson_needs_rng(self):
        state = state_with(thompson(Family.BERNOULLI), [[1.0], [0.0]])
        with pytest.raises(ValueError):
            choose_arm(thompson(Family.BERNOULLI), state)

    def test_uses_exploration_at_larger_n(self):
        # arm 1 has a lower mean but far fewer pulls
        state = state_with(large(), [[0.5] * 200, [0.4]])
        assert choose_arm(large(), state) == 1

    def test_thompson_consumes_one_draw_per_arm_in_order(self):
        spec = thompson(Family.NORMAL_KNOWN)
        state = state_with(spec, [[0.0], [0.0], [0.0]])
        a = np.random.default_rng(3)
        choose_arm(spec, state, a)
        b = np.random.default_rng(3)
        b.random(2 * 3)
        assert a.random() == b.random()


class TestIndexConsistency:
    def test_large_known_variance_index(self):
        rng = np.random.default_rng(1)
        stats = [list(rng.normal(size=int(rng.integers(1, 30)))) for _ in range(7)]
        state = state_with(large(), stats)
        b = math.log(state.n / state.K)
        expected = [ucb_normal_known(np.mean(s), len(s), b) for s in stats]
        assert list(index_values(large(), state)) == [
            ucb_normal_known(state.sums[k] / state.counts[k], state.counts[k], b) for k in range(7)
        ]
        assert index_values(large(), state) == pytest.approx(expected, abs=1e-12)

    def test_large_bernoulli_index(self):
        spec = large(Family.BERNOULLI)
        state = state_with(spec, [[1, 0, 1], [0], [1, 1, 1, 1, 0]])
        b = math.log(state.n / state.K)
        expected = [ucb_bernoulli(state.sums[k] / state.counts[k], state.counts[k], b) for k in range(3)]
        assert list(index_values(spec, state)) == expected

    def test_large_unknown_variance_index(self):
        spec = large(Family.NORMAL_UNKNOWN)
        state = state_with(spec, [[0.5, 1.5], [2.0, 2.0, 4.0]])
        b = math.log(state.n / state.K)
        expected = [ucb_normal_unknown(1.0, 0.5, 2, b), ucb_normal_unknown(8 / 3, math.sqrt(8 / 9), 3, b)]
        assert index_values(spec, state) == pytest.approx(expected, abs=1e-12)

    def test_q_perturbation(self):
        spec = large(q=0.5)
        state = state_with(spec, [[0.2], [0.3], [0.9], [0.1]])
        # n / K**0.5 = 2
        b = math.log(2.0)
        assert index_values(spec, state)[2] == ucb_normal_known(0.9, 1, b)

    def test_thompson_has_no_index(self):
        with pytest.raises(ValueError):
            index_values(thompson(Family.BERNOULLI), state_with(thompson(Family.BERNOULLI), [[1.0]]))


class TestPosterior:
    def draws(self, spec, stats, n=100_000, seed=0):
        rng = np.random.default_rng(seed)
        return np.array([posterior_draw(spec, stats, rng) for _ in range(n)])

    def test_normal_known(self):
        d = self.draws(thompson(Family.NORMAL_KNOWN), ArmStats(1, 0.0, 0.0))
        assert abs(d.mean()) < 0.01
        assert d.var() == pytest.approx(0.5, rel=0.02)

    def test_beta_4_1(self):
        d = self.draws(thompson(Family.BERNOULLI), ArmStats(3, 3.0, 3.0))
        assert np.all((d > 0) & (d < 1))
        assert abs(d.mean() - 0.8) < 0.005

    def test_beta_1_2(self):
        d = self.draws(thompson(Family.BERNOULLI), ArmStats(1, 0.0, 0.0))
        assert abs(d.mean() - 1 / 3) < 0.005

    def test_normal_gamma(self):
        # count 4, mean 1, sigma2_hat 0.5: precision ~ Gamma(3, rate 2.8), mu ~ N(0.8, sigma2 / 5)
        spec = thompson(Family.NORMAL_UNKNOWN)
        d = self.draws(spec, ArmStats(4, 4.0, 6.0))
        assert abs(d.mean() - 0.8) < 0.01
        # var = E[sigma2] / 5 with E[1 / precision] = rate / (shape - 1)
        assert d.var() == pytest.approx(2.8 / 2 / 5, rel=0.05)

    @pytest.mark.parametrize(
        "family,count",
        [(Family.NORMAL_KNOWN, 0), (Family.BERNOULLI, 0), (Family.NORMAL_UNKNOWN, 1)],
    )
    def test_rejects_too_few_observations(self, family, count):
        with pytest.raises(ValueError):
            posterior_draw(thompson(family), ArmStats(count, 0.0, 0.0), np.random.default_rng(0))

    def test_deterministic_given_stream(self):
        spec = thompson(Family.NORMAL_UNKNOWN)
        stats = ArmStats(5, 2.0, 3.0)
        assert posterior_draw(spec, stats, np.random.default_rng(4)) == posterior_draw(
            spec, stats, np.random.default_rng(4)
        )


@pytest.mark.parametrize(
    "spec",
    [
        large(),
        large(schedule=Schedule.log_minus_sqrt_log()),
        agrawal(),
        thompson(Family.NORMAL_KNOWN),
        large(Family.NORMAL_UNKNOWN),
        PolicySpec(PolicyKind.UCB_BK, Family.NORMAL_UNKNOWN),
    ],
    ids=lambda s: s.label,
)
def test_replay_determinism(spec):
    assert replay(spec, 5, 300, 12) == replay(spec, 5, 300, 12)


@pytest.mark.parametrize("seed", range(5))
def test_large_and_agrawal_agree_at_one_arm(seed):
    # b at n / 1 equals b at n, so the indices match exactly
    spec_l, spec_a = large(), agrawal()
    state_l, state_a = init_state(spec_l, 1), init_state(spec_a, 1)
    rng = np.random.default_rng(seed)
    for _ in range(200):
        k = choose_arm(spec_l, state_l)
        assert k == choose_arm(spec_a, state_a)
        x = rng.normal()
        record_reward(state_l, k, x)
        record_reward(state_a, k, x)
        if not state_l.forced:
            assert index_values(spec_l, state_l)[0] == index_values(spec_a, state_a)[0]


@pytest.mark.parametrize("family", list(Family))
def test_forced_initialization_covers_every_arm(family):
    spec = large(family)
    K = 6
    state = init_state(spec, K)
    rng = np.random.default_rng(0)
    for _ in range(K * spec.init_per_arm + 5):
        k = choose_arm(spec, state, rng)
        record_reward(state, k, float(rng.random() < 0.5))
    assert np.all(state.counts >= spec.init_per_arm)


@given(
    st.lists(st.integers(-20, 20), min_size=1, max_size=12),
    st.integers(-1000, 1000),
)
def test_argmax_shift_invariance(values, shift):
    # integer-valued arrays keep the shifted values exact
    v = np.array(values, dtype=float)
    assert argmax_first(v + shift) == argmax_first(v)
    assert argmax_first(v) == values.index(max(values))
