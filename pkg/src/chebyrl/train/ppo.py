"""Proximal policy optimization with a Chebyshev critic.

Rollouts of fixed length are collected across episode boundaries (episode
tails spill into the next rollout, so the step budget is consumed exactly).
Advantages come from generalized advantage estimation per episode segment,
bootstrapping the critic at mid-episode cuts and at horizon truncation, and
are normalized per minibatch.  Policy heads and critic are linear in their
Chebyshev coefficients, so all gradients are closed-form.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..cheby import batch_basis
from ..errors import ConfigError
from ..policy import SIGMA_FLOOR, GaussianChebyPolicy, batch_log_prob
from .common import (
    STREAM_NOISE,
    STREAM_SHUFFLE,
    STREAM_STARTS,
    TrainRun,
    copy_policy,
    rng_stream,
)
from .optim import make_optimizer


@dataclass(frozen=True)
class PpoConfig:
    total_steps: int = 70_000
    rollout_steps: int = 2048
    epochs: int = 10
    minibatch_size: int = 64
    clip_eps: float = 0.2
    gae_lambda: float = 0.95
    gamma: float = 0.99
    value_coef: float = 0.5
    entropy_coef: float = 0.0
    lr: float = 3e-4
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.clip_eps < 1.0):
            raise ConfigError("clip range must satisfy 0 < eps < 1")
        if not (0.0 < self.gae_lambda <= 1.0):
            raise ConfigError("GAE lambda must satisfy 0 < lambda <= 1")
        if not (0.0 < self.gamma <= 1.0):
            raise ConfigError("discount must satisfy 0 < gamma <= 1")
        if self.lr <= 0.0:
            raise ConfigError("step size must be positive")
        if min(self.total_steps, self.rollout_steps, self.epochs, self.minibatch_size) < 1:
            raise ConfigError("steps, rollout, epochs and minibatch must be positive")


def gae(rewards: np.ndarray, values: np.ndarray, bootstrap: float, gamma: float, lam: float):
    """Per-segment generalized advantage estimates and value targets."""
    k = len(rewards)
    adv = np.empty(k)
    next_v = bootstrap
    acc = 0.0
    for t in range(k - 1, -1, -1):
        delta = rewards[t] + gamma * next_v - values[t]
        acc = delta + gamma * lam * acc
        adv[t] = acc
        next_v = values[t]
    return adv, adv + values


def ppo_minibatch_grads(
    theta_mu: np.ndarray,
    theta_sig: np.ndarray,
    theta_c: np.ndarray,
    b_mu: np.ndarray,
    b_sig: np.ndarray,
    b_c: np.ndarray,
    raw: np.ndarray,
    logp_old: np.ndarray,
    adv: np.ndarray,
    v_target: np.ndarray,
    clip_eps: float,
    value_coef: float,
    entropy_coef: float = 0.0,
):
    """Loss gradients for one minibatch (advantages passed in as-is).

    Loss = -mean(min(rho*A, clip(rho, 1 +- eps)*A))
           + value_coef * 0.5 * mean((V - target)^2) - entropy_coef * mean(log sigma).
    """
    m = len(raw)
    mu = b_mu @ theta_mu
    s_raw = b_sig @ theta_sig
    floored = s_raw <= SIGMA_FLOOR
    s = np.maximum(s_raw, SIGMA_FLOOR)
    logp = batch_log_prob(mu, s, raw)
    rho = np.exp(logp - logp_old)
    unclipped = rho * adv
    clipped = np.clip(rho, 1.0 - clip_eps, 1.0 + clip_eps) * adv
    active = unclipped <= clipped  # the surrogate min follows the rho branch here
    w = np.where(active, rho * adv, 0.0) / m
    diff = raw - mu
    g_mu = -b_mu.T @ (w * diff / (s * s))
    sig_score = np.where(floored, 0.0, diff * diff / s**3 - 1.0 / s)
    g_sig = -b_sig.T @ (w * sig_score)
    if entropy_coef:
        ent_grad = np.where(floored, 0.0, 1.0 / s) / m
        g_sig -= entropy_coef * (b_sig.T @ ent_grad)
    v = b_c @ theta_c
    g_c = value_coef * (b_c.T @ (v - v_target)) / m
    return g_mu, g_sig, g_c


class _Rollout:
    """Fixed-size transition buffer assembled from whole-episode kernel rolls."""

    def __init__(self, env, policy, starts, noise):
        self.env = env
        self.policy = policy
        self.starts = starts
        self.noise = noise
        self.pending = None  # unconsumed tail: (states, raw, rewards, status)
        self.diverged = False

    def collect(self, n_steps: int):
        """Gather exactly n_steps transitions (unless divergence interrupts).

        Returns (states, raw, rewards, segments, episode_returns) where each
        segment is (length, bootstrap_state or None) and episode_returns lists
        the full returns of episodes rolled while filling.
        """
        S, A, R, segments, ep_returns = [], [], [], [], []
        filled = 0
        while filled < n_steps:
            if self.pending is None:
                start = self.env.sample_start(self.starts)
                normals = self.noise.standard_normal(self.env.t_max)
                states, raw, rewards, status = self.env.rollout_stoch(
                    self.policy, start, normals
                )
                if status == kernels.STATUS_DIVERGED or not np.all(np.isfinite(rewards)):
                    self.diverged = True
                    break
                ep_returns.append(float(np.sum(rewards)))
                self.pending = (states, raw, rewards, status)
            states, raw, rewards, status = self.pending
            k = len(raw)
            take = min(k, n_steps - filled)
            S.append(states[:take])
            A.append(raw[:take])
            R.append(rewards[:take])
            if take == k:
                # Episode fully consumed.  Goal termination has zero tail
                # value; horizon truncation bootstraps the critic.
                terminal = status == kernels.STATUS_GOAL
                segments.append((take, None if terminal else states[k]))
                self.pending = None
            else:
                segments.append((take, states[take]))
                self.pending = (states[take:], raw[take:], rewards[take:], status)
            filled += take
        if not S:
            return None
        return np.concatenate(S), np.concatenate(A), np.concatenate(R), segments, ep_returns


def train_ppo(env, policy: GaussianChebyPolicy, config: PpoConfig) -> TrainRun:
    if policy.critic is None:
        raise ConfigError("PPO requires a policy with a critic head")
    t0 = time.perf_counter()
    policy = copy_policy(policy)
    opt = make_optimizer(config.optimizer, config.lr)
    starts = rng_stream(config.seed, STREAM_STARTS)
    noise = rng_stream(config.seed, STREAM_NOISE)
    shuffle = rng_stream(config.seed, STREAM_SHUFFLE)

    n_mu = policy.mu.coeffs.size
    n_sig = policy.sigma.coeffs.size
    params = np.concatenate((policy.mu.coeffs, policy.sigma.coeffs, policy.critic.coeffs))
    policy.mu.coeffs = params[:n_mu]
    policy.sigma.coeffs = params[n_mu : n_mu + n_sig]
    policy.critic.coeffs = params[n_mu + n_sig :]

    source = _Rollout(env, policy, starts, noise)
    returns: list[float] = []
    last_mean = 0.0
    steps = 0
    diverged = False
    while steps < config.total_steps:
        chunk = min(config.rollout_steps, config.total_steps - steps)
        batch = source.collect(chunk)
        if source.diverged or batch is None:
            diverged = True
            break
        states, raw, rewards, segments, ep_returns = batch
        steps += len(raw)
        if ep_returns:
            last_mean = float(np.mean(ep_returns))
        returns.append(last_mean)

        # Old-policy quantities; basis rows are reused across epochs.
        b_mu = batch_basis(policy.mu, states)
        b_sig = batch_basis(policy.sigma, states)
        b_c = batch_basis(policy.critic, states)
        mu = b_mu @ policy.mu.coeffs
        s = np.maximum(b_sig @ policy.sigma.coeffs, SIGMA_FLOOR)
        logp_old = batch_log_prob(mu, s, raw)
        values = b_c @ policy.critic.coeffs
        adv = np.empty(len(raw))
        v_target = np.empty(len(raw))
        pos = 0
        for length, boot_state in segments:
            if boot_state is None:
                boot = 0.0
            else:
                boot = float(batch_basis(policy.critic, boot_state[None, :])[0] @ policy.critic.coeffs)
            a, vt = gae(
                rewards[pos : pos + length],
                values[pos : pos + length],
                boot,
                config.gamma,
                config.gae_lambda,
            )
            adv[pos : pos + length] = a
            v_target[pos : pos + length] = vt
            pos += length

        m = len(raw)
        for _ in range(config.epochs):
            order = shuffle.permutation(m)
            for lo in range(0, m, config.minibatch_size):
                idx = order[lo : lo + config.minibatch_size]
                a_mb = adv[idx]
                a_mb = (a_mb - a_mb.mean()) / (a_mb.std() + 1e-8)
                g_mu, g_sig, g_c = ppo_minibatch_grads(
                    params[:n_mu],
                    params[n_mu : n_mu + n_sig],
                    params[n_mu + n_sig :],
                    b_mu[idx],
                    b_sig[idx],
                    b_c[idx],
                    raw[idx],
                    logp_old[idx],
                    a_mb,
                    v_target[idx],
                    config.clip_eps,
                    config.value_coef,
                    config.entropy_coef,
                )
                opt.step(params, np.concatenate((g_mu, g_sig, g_c)))
            if not np.all(np.isfinite(params)):
                diverged = True
                break
        if diverged:
            break

    return TrainRun(
        algo="ppo",
        config=config,
        seed=config.seed,
        returns=np.asarray(returns),
        diverged=diverged,
        wall_clock=time.perf_counter() - t0,
        steps=steps,
        policy=None if diverged else policy,
    )
