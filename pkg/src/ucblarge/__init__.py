"""UCB-Large and baseline bandit policies with a seeded regret simulator."""

from .confidence import (
    Schedule,
    ScheduleKind,
    generic_ucb,
    schedule_value,
    ucb_bernoulli,
    ucb_bk_unknown,
    ucb_normal_known,
    ucb_normal_unknown,
)
from .policies import (
    ArmStats,
    PolicyKind,
    PolicySpec,
    PolicyState,
    choose_arm,
    init_state,
    posterior_draw,
    record_reward,
)
from .reward_models import (
    Bernoulli,
    Family,
    NormalKnownVar,
    NormalUnknownVar,
    dist_mean,
    draw_reward,
    m_function,
    rate_bernoulli,
    rate_normal_known,
)
from .simulator import (
    PriorSpec,
    RunConfig,
    RunOutcome,
    RunSummary,
    draw_environment,
    lower_bound_constant,
    run_batch,
    run_single,
)

__version__ = "0.1.0"
