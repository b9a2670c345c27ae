"""Trainers for Gaussian-Chebyshev policies: REINFORCE, ARS, and PPO."""

from .ars import ArsConfig, RunningStat, ars_update_direction, train_ars
from .common import (
    MountainCarSpec,
    PendulumSpec,
    TrainRun,
    copy_policy,
    make_env,
    mean_eval_return,
    rng_stream,
)
from .optim import Adam, AdamW, RmsProp, Sgd, make_optimizer
from .ppo import PpoConfig, gae, ppo_minibatch_grads, train_ppo
from .protocol import (
    TRAINERS,
    ProtocolResult,
    default_config,
    default_policy_factory,
    default_sigma_degree,
    train_protocol,
)
from .reinforce import (
    ReinforceConfig,
    discounted_returns_to_go,
    episode_gradient,
    train_reinforce,
)

__all__ = [
    "Adam",
    "AdamW",
    "ArsConfig",
    "MountainCarSpec",
    "PendulumSpec",
    "PpoConfig",
    "ProtocolResult",
    "ReinforceConfig",
    "RmsProp",
    "RunningStat",
    "Sgd",
    "TRAINERS",
    "TrainRun",
    "ars_update_direction",
    "copy_policy",
    "default_config",
    "default_policy_factory",
    "default_sigma_degree",
    "discounted_returns_to_go",
    "episode_gradient",
    "gae",
    "make_env",
    "make_optimizer",
    "mean_eval_return",
    "ppo_minibatch_grads",
    "rng_stream",
    "train_ars",
    "train_ppo",
    "train_protocol",
    "train_reinforce",
]
