"""Shared training plumbing: run records, RNG streams, environment adapters.

Each trainer consumes an EnvSpec (fast kernel-backed rollouts plus start
sampling) and an initial GaussianChebyPolicy, and returns a TrainRun.  All
randomness derives from (seed, stream-tag) pairs so runs are bit-reproducible
and independent of scheduling.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import kernels
from ..cheby import ChebyModel
from ..env import MC_DEFAULT, PENDULUM_DEFAULT, McParams, PendulumParams
from ..errors import ConfigError
from ..policy import SIGMA_FLOOR, GaussianChebyPolicy

# RNG stream tags (SeedSequence entropy is (seed, tag)); init_policy uses the
# bare seed, so trainer streams never collide with initialization draws.
STREAM_STARTS = 1
STREAM_NOISE = 2
STREAM_DIRECTIONS = 3
STREAM_SHUFFLE = 4

# Default Chebyshev input boxes per environment.
MC_BOUNDS = ((MC_DEFAULT.x_min, MC_DEFAULT.x_max), (-MC_DEFAULT.v_max, MC_DEFAULT.v_max))
PENDULUM_BOUNDS = ((-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0))


def rng_stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, tag))))


def copy_policy(policy: GaussianChebyPolicy) -> GaussianChebyPolicy:
    return dataclasses.replace(
        policy,
        mu=policy.mu.copy(),
        sigma=policy.sigma.copy(),
        critic=None if policy.critic is None else policy.critic.copy(),
    )


@dataclass
class TrainRun:
    """One seeded training run: its config, learning curve, and outcome."""

    algo: str
    config: object
    seed: int
    returns: np.ndarray  # per episode (REINFORCE) or per update (ARS, PPO)
    diverged: bool
    wall_clock: float
    steps: int  # environment interactions consumed
    policy: Optional[GaussianChebyPolicy]  # None iff diverged

    def __post_init__(self):
        self.returns = np.asarray(self.returns, dtype=float)
        if self.diverged and self.policy is not None:
            raise ConfigError("a diverged run must not carry a final policy")

    def to_artifact(self) -> dict:
        return {
            "algo": self.algo,
            "config": dataclasses.asdict(self.config),
            "seed": self.seed,
            "returns": self.returns.tolist(),
            "diverged": self.diverged,
            "wall_clock_s": self.wall_clock,
            "env_steps": self.steps,
        }


# ---------------------------------------------------------------------------
# Environment adapters
# ---------------------------------------------------------------------------


def _shared_bounds(policy: GaussianChebyPolicy) -> np.ndarray:
    if not np.array_equal(policy.mu.bounds, policy.sigma.bounds):
        raise ConfigError("mu and sigma heads must share input bounds for kernel rollouts")
    return policy.mu.bounds


class MountainCarSpec:
    """Mountain-car adapter: states are raw (x, v) pairs."""

    name = "mountain_car"
    obs_dim = 2

    def __init__(self, params: McParams = MC_DEFAULT):
        self.params = params
        self.t_max = params.t_max
        self.bounds = np.array(
            ((params.x_min, params.x_max), (-params.v_max, params.v_max))
        )

    def sample_start(self, rng: np.random.Generator) -> tuple[float, float]:
        return float(rng.uniform(self.params.start_lo, self.params.start_hi)), 0.0

    def eval_starts(self, n: int) -> list[tuple[float, float]]:
        return [(float(x), 0.0) for x in np.linspace(self.params.start_lo, self.params.start_hi, n)]

    def rollout_stoch(self, policy: GaussianChebyPolicy, start, normals):
        """Returns (states, raw, rewards, status); states has len(raw) + 1 rows:
        the model input at which each raw[t] was sampled, plus the final state
        (for value bootstrapping)."""
        p = self.params
        b = _shared_bounds(policy)
        xs, vs, raw, acts, rewards, status, _ = kernels.mc_cheby_rollout_stoch(
            policy.mu.coeffs,
            policy.mu.d,
            policy.sigma.coeffs,
            policy.sigma.d,
            b[0, 0],
            b[0, 1],
            b[1, 0],
            b[1, 1],
            SIGMA_FLOOR,
            policy.output_gain,
            start[0],
            start[1],
            normals,
            p.a_max,
            p.gravity,
            p.x_min,
            p.x_max,
            p.v_max,
            p.x_goal,
            p.v_goal,
            min(len(normals), self.t_max),
        )
        states = np.column_stack((xs, vs))
        return states, raw, rewards, int(status)

    def rollout_det(self, policy: GaussianChebyPolicy, start):
        """Returns (return, steps, t_star, v_star); t_star = t_max + 1 when the
        goal is not reached (v_star NaN then)."""
        p = self.params
        b = policy.mu.bounds
        xs, vs, acts, status, loss = kernels.mc_cheby_rollout_det(
            policy.mu.coeffs,
            policy.mu.d,
            b[0, 0],
            b[0, 1],
            b[1, 0],
            b[1, 1],
            policy.output_gain,
            start[0],
            start[1],
            p.a_max,
            p.gravity,
            p.x_min,
            p.x_max,
            p.v_max,
            p.x_goal,
            p.v_goal,
            self.t_max,
        )
        goal = status == kernels.STATUS_GOAL
        ret = -0.1 * float(loss) + (100.0 if goal else 0.0)
        if status == kernels.STATUS_DIVERGED:
            ret = math.nan
        t_star = len(acts) if goal else self.t_max + 1
        v_star = float(vs[-1]) if goal else math.nan
        return ret, len(acts), t_star, v_star


class PendulumSpec:
    """Pendulum adapter: states are the observation triple (cos, sin, scaled speed)."""

    name = "pendulum"
    obs_dim = 3

    def __init__(self, params: PendulumParams = PENDULUM_DEFAULT):
        self.params = params
        self.t_max = params.t_max
        self.bounds = np.array(PENDULUM_BOUNDS)

    def sample_start(self, rng: np.random.Generator) -> tuple[float, float]:
        return float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(-1.0, 1.0))

    def eval_starts(self, n: int) -> list[tuple[float, float]]:
        return [(float(t), 0.0) for t in np.linspace(-math.pi, math.pi, n)]

    def rollout_stoch(self, policy: GaussianChebyPolicy, start, normals):
        p = self.params
        b = _shared_bounds(policy)
        obs, raw, _, rewards, status = kernels.pend_cheby_rollout_stoch(
            policy.mu.coeffs,
            policy.mu.d,
            policy.sigma.coeffs,
            policy.sigma.d,
            np.ascontiguousarray(b[:, 0]),
            np.ascontiguousarray(b[:, 1]),
            SIGMA_FLOOR,
            policy.output_gain,
            start[0],
            start[1],
            normals,
            p.gravity,
            p.mass,
            p.length,
            p.dt,
            p.max_speed,
            p.max_torque,
            min(len(normals), self.t_max),
        )
        return obs, raw, rewards, int(status)

    def rollout_det(self, policy: GaussianChebyPolicy, start):
        p = self.params
        b = policy.mu.bounds
        ths, thdots, acts, status, ret = kernels.pend_cheby_rollout_det(
            policy.mu.coeffs,
            policy.mu.d,
            np.ascontiguousarray(b[:, 0]),
            np.ascontiguousarray(b[:, 1]),
            policy.output_gain,
            start[0],
            start[1],
            p.gravity,
            p.mass,
            p.length,
            p.dt,
            p.max_speed,
            p.max_torque,
            self.t_max,
        )
        if status == kernels.STATUS_DIVERGED:
            ret = math.nan
        return float(ret), len(acts), self.t_max + 1, math.nan


def make_env(name: str, params=None):
    if name in ("mountain_car", "mountaincar"):
        return MountainCarSpec(params or MC_DEFAULT)
    if name == "pendulum":
        return PendulumSpec(params or PENDULUM_DEFAULT)
    raise ConfigError(f"unknown environment '{name}'")


def mean_eval_return(env, policy: GaussianChebyPolicy, n_episodes: int) -> float:
    """Deterministic evaluation over a fixed start grid (sigma = 0 mode)."""
    rets = [env.rollout_det(policy, s)[0] for s in env.eval_starts(n_episodes)]
    return float(np.mean(rets))
