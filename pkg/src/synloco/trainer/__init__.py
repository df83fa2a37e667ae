"""Off-policy maximum-entropy training at desk scale."""

from .loop import (
    BENCHMARK_CHANNELS,
    CURRICULUM_SPEEDS,
    TrainConfig,
    TrainResult,
    build_env,
    curriculum_velocity,
    desk_profile,
    evaluate_policy,
    extract_strides,
    paper_condition_grid,
    paper_profile,
    run_rollout,
    train,
)
from .replay import ReplayBuffer
from .sac import SacAgent

__all__ = [
    "BENCHMARK_CHANNELS",
    "CURRICULUM_SPEEDS",
    "ReplayBuffer",
    "SacAgent",
    "TrainConfig",
    "TrainResult",
    "build_env",
    "curriculum_velocity",
    "desk_profile",
    "evaluate_policy",
    "extract_strides",
    "paper_condition_grid",
    "paper_profile",
    "run_rollout",
    "train",
]
