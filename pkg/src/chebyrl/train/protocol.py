"""Best-of-N seeded training protocol with deterministic evaluation.

Each run trains with seed = base_seed + index, then (unless diverged) the
final policy is scored as the mean deterministic return over a fixed start
grid.  The best run is the highest mean; ties resolve to the lowest seed
index, so selection is invariant to run ordering and scheduling.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..errors import ConfigError
from ..policy import GaussianChebyPolicy, PolicyInit, init_policy
from .ars import ArsConfig, train_ars
from .common import MC_BOUNDS, PENDULUM_BOUNDS, TrainRun, mean_eval_return
from .ppo import PpoConfig, train_ppo
from .reinforce import ReinforceConfig, train_reinforce

TRAINERS: dict[str, Callable] = {
    "reinforce": train_reinforce,
    "ars": train_ars,
    "ppo": train_ppo,
}


def default_sigma_degree(algo: str, d: int) -> int:
    """Exploration-head degree shipped per algorithm.

    ARS perturbs parameters, not actions, so its policies carry no noise head.
    For the score-based trainers a low-degree head explores best: degree 2 for
    REINFORCE and 3 for PPO measured strongest on Mountain Car, capped by the
    mean degree so tiny policies stay tiny.
    """
    if algo == "ars":
        return 0
    cap = 2 if algo == "reinforce" else 3
    return min(cap, d)


def default_config(algo: str, env_name: str = "mountain_car", seed: int = 0):
    """Measured per-environment training configuration.

    Mountain Car uses each dataclass's defaults.  The pendulum overrides ARS:
    its episodes are 5x shorter (so the step budget buys few iterations), and
    its observation triple is already normalized to [-1,1]^3, which makes
    running-stat whitening distort the basis instead of helping it.
    """
    if algo == "reinforce":
        return ReinforceConfig(seed=seed)
    if algo == "ars":
        if env_name == "pendulum":
            return ArsConfig(total_steps=1_600_000, nu=0.15, obs_norm=False, seed=seed)
        return ArsConfig(seed=seed)
    if algo == "ppo":
        return PpoConfig(seed=seed)
    raise ConfigError(f"unknown algorithm '{algo}' (choose from {sorted(TRAINERS)})")


@dataclass(frozen=True)
class _PolicyFactory:
    """Per-seed initial-policy builder; a plain dataclass so protocol tasks
    pickle cleanly into worker processes."""

    env_name: str
    algo: str
    d: int
    d_sigma: int

    def __call__(self, seed: int) -> GaussianChebyPolicy:
        pendulum = self.env_name == "pendulum"
        with_critic = self.algo == "ppo"
        return init_policy(
            n=3 if pendulum else 2,
            d_mu=self.d,
            d_sigma=self.d_sigma,
            bounds=PENDULUM_BOUNDS if pendulum else MC_BOUNDS,
            init=PolicyInit(seed=seed),
            with_critic=with_critic,
            d_critic=self.d if with_critic else None,
            output_gain=2.0 if pendulum else 1.0,
            env_name=self.env_name,
            algo=self.algo,
        )


def default_policy_factory(
    env_name: str,
    algo: str,
    d: int,
    d_sigma: Optional[int] = None,
) -> Callable[[int], GaussianChebyPolicy]:
    """Factory building the per-seed initial policy the protocol expects."""
    if d_sigma is None:
        d_sigma = default_sigma_degree(algo, d)
    return _PolicyFactory(env_name, algo, d, d_sigma)


@dataclass
class ProtocolResult:
    runs: list[TrainRun]
    eval_means: np.ndarray  # NaN for diverged runs
    best_index: int  # -1 when every run diverged
    eval_episodes: int
    n_diverged: int = field(init=False)

    def __post_init__(self):
        self.eval_means = np.asarray(self.eval_means, dtype=float)
        self.n_diverged = sum(r.diverged for r in self.runs)

    @property
    def failed(self) -> bool:
        return self.best_index < 0

    @property
    def best(self) -> Optional[TrainRun]:
        return None if self.failed else self.runs[self.best_index]

    @property
    def best_mean(self) -> float:
        return float("nan") if self.failed else float(self.eval_means[self.best_index])

    def to_dict(self) -> dict:
        return {
            "n_runs": len(self.runs),
            "eval_episodes": self.eval_episodes,
            "eval_means": self.eval_means.tolist(),
            "best_index": self.best_index,
            "best_mean": self.best_mean,
            "n_diverged": self.n_diverged,
            "failed": self.failed,
            "runs": [r.to_artifact() for r in self.runs],
        }


def _one_run(args) -> TrainRun:
    trainer, env, make_policy, config = args
    return trainer(env, make_policy(config.seed), config)


def train_protocol(
    algo: str,
    env,
    make_policy: Callable[[int], GaussianChebyPolicy],
    config,
    n_runs: int = 20,
    eval_episodes: int = 50,
    jobs: int = 1,
) -> ProtocolResult:
    trainer = TRAINERS.get(algo)
    if trainer is None:
        raise ConfigError(f"unknown algorithm '{algo}' (choose from {sorted(TRAINERS)})")
    if n_runs < 1:
        raise ConfigError("need at least one run")

    base_seed = config.seed
    tasks = [
        (trainer, env, make_policy, dataclasses.replace(config, seed=base_seed + i))
        for i in range(n_runs)
    ]
    if jobs > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, n_runs)) as pool:
            runs = list(pool.map(_one_run, tasks))
    else:
        runs = [_one_run(t) for t in tasks]

    means = np.full(n_runs, np.nan)
    for i, run in enumerate(runs):
        if not run.diverged and run.policy is not None:
            means[i] = mean_eval_return(env, run.policy, eval_episodes)
    best = -1 if np.all(np.isnan(means)) else int(np.nanargmax(means))
    return ProtocolResult(runs=runs, eval_means=means, best_index=best, eval_episodes=eval_episodes)
