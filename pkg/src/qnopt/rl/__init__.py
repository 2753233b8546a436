from .gridworld import ACTIONS, DEFAULT_MAP, Gridworld, default_gridworld, optimal_actions, value_iteration
from .qlearn import (
    BellmanOracle,
    EvalScore,
    Experience,
    ExperienceMemory,
    QFunction,
    QLearnConfig,
    QLearnResult,
    bellman_risk_grad,
    epsilon_schedule,
    eps_greedy,
    evaluate,
    greedy_policy,
    td_targets,
    train_qlearning,
    value_gap,
)
