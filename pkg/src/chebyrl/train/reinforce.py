"""Monte-Carlo policy gradient (REINFORCE) over Gaussian-Chebyshev policies.

Per episode: roll the stochastic policy, form discounted returns-to-go G_t,
compute every step's weighted score w_t * d log p_t / d theta at the sampling
parameters (one vectorized pass), then apply one optimizer step per timestep
in episode order.  Per-timestep stepping is the classical update loop; with
Adam-family optimizers it is what makes a 100-episode budget sufficient here,
since each optimizer step moves coefficients by at most ~lr and a single
aggregated step per episode caps total movement two orders of magnitude below
what a goal-reaching policy needs.  Divergence (non-finite parameters or
returns) halts the run and is recorded, not raised.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..errors import ConfigError
from ..policy import GaussianChebyPolicy, batch_heads, batch_score
from .common import STREAM_NOISE, STREAM_STARTS, TrainRun, copy_policy, rng_stream
from .optim import make_optimizer


@dataclass(frozen=True)
class ReinforceConfig:
    episodes: int = 100
    gamma: float = 0.9
    optimizer: str = "adamw"
    lr: float = 3e-4
    weight_decay: float = 0.01
    # Weight step t by gamma^t in addition to G_t (the strict episodic
    # estimator).  With horizon 999 and gamma 0.9 that factor silences all but
    # the first ~100 steps, so the undiscounted-weight variant is the default.
    time_discount_weighting: bool = False
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError("discount must satisfy 0 < gamma <= 1")
        if self.lr <= 0.0:
            raise ConfigError("step size must be positive")
        if self.episodes < 1:
            raise ConfigError("need at least one episode")


def discounted_returns_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    g = np.empty(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        g[t] = acc
    return g


def _step_weights(rewards: np.ndarray, gamma: float, time_discount_weighting: bool) -> np.ndarray:
    g_to_go = discounted_returns_to_go(rewards, gamma)
    if time_discount_weighting:
        return g_to_go * gamma ** np.arange(len(rewards))
    return g_to_go


def episode_gradient(
    policy: GaussianChebyPolicy,
    states: np.ndarray,
    raw: np.ndarray,
    rewards: np.ndarray,
    gamma: float,
    time_discount_weighting: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Summed score-function gradient of the episode objective w.r.t. (mu, sigma)
    coeffs — the single-estimate form used by the unbiasedness checks."""
    weights = _step_weights(rewards, gamma, time_discount_weighting)
    mu, s, b_mu, b_sig, floored = batch_heads(policy, states[: len(raw)])
    return batch_score(mu, s, b_mu, b_sig, floored, raw, weights)


def episode_step_gradients(
    policy: GaussianChebyPolicy,
    states: np.ndarray,
    raw: np.ndarray,
    rewards: np.ndarray,
    gamma: float,
    time_discount_weighting: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-timestep weighted scores at the sampling parameters: row t of each
    return is w_t * d log p_t / d theta_head; rows sum to episode_gradient."""
    weights = _step_weights(rewards, gamma, time_discount_weighting)
    mu, s, b_mu, b_sig, floored = batch_heads(policy, states[: len(raw)])
    diff = raw - mu
    rows_mu = b_mu * (weights * diff / (s * s))[:, None]
    coef = weights * (diff * diff / (s**3) - 1.0 / s)
    coef = np.where(floored, 0.0, coef)
    rows_sig = b_sig * coef[:, None]
    return rows_mu, rows_sig


def train_reinforce(env, policy: GaussianChebyPolicy, config: ReinforceConfig) -> TrainRun:
    t0 = time.perf_counter()
    policy = copy_policy(policy)
    opt = make_optimizer(config.optimizer, config.lr, config.weight_decay)
    starts = rng_stream(config.seed, STREAM_STARTS)
    noise = rng_stream(config.seed, STREAM_NOISE)

    params = np.concatenate((policy.mu.coeffs, policy.sigma.coeffs))
    n_mu = policy.mu.coeffs.size
    # Training mutates these views in place; the models see every update.
    policy.mu.coeffs = params[:n_mu]
    policy.sigma.coeffs = params[n_mu:]

    returns: list[float] = []
    steps = 0
    diverged = False
    for _ in range(config.episodes):
        start = env.sample_start(starts)
        normals = noise.standard_normal(env.t_max)
        states, raw, rewards, status = env.rollout_stoch(policy, start, normals)
        steps += len(raw)
        ep_return = float(np.sum(rewards))
        if status == kernels.STATUS_DIVERGED or not np.isfinite(ep_return):
            diverged = True
            break
        returns.append(ep_return)
        rows_mu, rows_sig = episode_step_gradients(
            policy, states, raw, rewards, config.gamma, config.time_discount_weighting
        )
        grads = np.concatenate((rows_mu, rows_sig), axis=1)
        for t in range(grads.shape[0]):
            opt.step(params, -grads[t])
        if not np.all(np.isfinite(params)):
            diverged = True
            break

    return TrainRun(
        algo="reinforce",
        config=config,
        seed=config.seed,
        returns=np.asarray(returns),
        diverged=diverged,
        wall_clock=time.perf_counter() - t0,
        steps=steps,
        policy=None if diverged else policy,
    )
