"""Gaussian policies with Chebyshev-model mean and spread heads.

The action is sampled as a = mu(s) + sigma_eff(s) * z with z standard normal
and sigma_eff = max(sigma(s), SIGMA_FLOOR).  Log-probabilities always refer to
the unclamped sample; the environment clamps the applied action (after the
fixed output gain).  Score gradients are closed-form in the basis values:

    d logp / d theta_mu    = (a - mu) / sigma_eff^2 * B(s)
    d logp / d theta_sigma = ((a - mu)^2 / sigma_eff^3 - 1 / sigma_eff) * B_sigma(s)

with the sigma gradient zeroed wherever the floor is active.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .cheby import ChebyModel, basis_values, batch_basis, evaluate
from .errors import ConfigError, DivergenceError

SIGMA_FLOOR = 1e-4
MAX_SIGMA_DEGREE = 3
LOG_2PI = math.log(2.0 * math.pi)


@dataclass
class PolicyInit:
    seed: int
    amplitude: float = 1e-3
    sigma0: float = 1.0


@dataclass
class GaussianChebyPolicy:
    mu: ChebyModel
    sigma: ChebyModel
    critic: ChebyModel | None = None
    output_gain: float = 1.0
    env_name: str = "mountain_car"
    algo: str = ""
    seed: int = 0

    def __post_init__(self):
        if self.sigma.d > MAX_SIGMA_DEGREE:
            raise ConfigError(f"sigma head degree must be <= {MAX_SIGMA_DEGREE}")
        if self.sigma.n != self.mu.n:
            raise ConfigError("mu and sigma heads must share the input dimension")
        if self.critic is not None and self.critic.n != self.mu.n:
            raise ConfigError("critic must share the input dimension")
        if not (self.output_gain > 0.0 and math.isfinite(self.output_gain)):
            raise ConfigError("output_gain must be positive and finite")

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "env": self.env_name,
            "algo": self.algo,
            "seed": self.seed,
            "output_gain": self.output_gain,
            "mu": self.mu.to_dict(),
            "sigma": self.sigma.to_dict(),
            "critic": None if self.critic is None else self.critic.to_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GaussianChebyPolicy":
        keys = {"env", "algo", "seed", "output_gain", "mu", "sigma", "critic"}
        extra = set(obj) - keys
        if extra:
            raise ConfigError(f"unknown policy keys: {sorted(extra)}")
        missing = keys - set(obj)
        if missing:
            raise ConfigError(f"missing policy keys: {sorted(missing)}")
        return cls(
            mu=ChebyModel.from_dict(obj["mu"]),
            sigma=ChebyModel.from_dict(obj["sigma"]),
            critic=None if obj["critic"] is None else ChebyModel.from_dict(obj["critic"]),
            output_gain=float(obj["output_gain"]),
            env_name=str(obj["env"]),
            algo=str(obj["algo"]),
            seed=int(obj["seed"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "GaussianChebyPolicy":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_policy(
    n: int,
    d_mu: int,
    d_sigma: int,
    bounds,
    init: PolicyInit,
    with_critic: bool = False,
    d_critic: int | None = None,
    output_gain: float = 1.0,
    env_name: str = "mountain_car",
    algo: str = "",
) -> GaussianChebyPolicy:
    """Fresh policy: mu (and critic) coefficients U(-amplitude, amplitude), sigma
    constant term sigma0 with the remaining coefficients drawn like mu."""
    if d_sigma > MAX_SIGMA_DEGREE:
        raise ConfigError(f"sigma head degree must be <= {MAX_SIGMA_DEGREE}")
    bounds = np.asarray(bounds, dtype=float).reshape(n, 2)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(init.seed)))
    amp = init.amplitude
    mu_c = rng.uniform(-amp, amp, size=(d_mu + 1) ** n)
    sig_c = rng.uniform(-amp, amp, size=(d_sigma + 1) ** n)
    sig_c[0] = init.sigma0
    critic = None
    if with_critic:
        dc = d_mu if d_critic is None else d_critic
        critic = ChebyModel(n, dc, rng.uniform(-amp, amp, size=(dc + 1) ** n), bounds.copy())
    return GaussianChebyPolicy(
        mu=ChebyModel(n, d_mu, mu_c, bounds.copy()),
        sigma=ChebyModel(n, d_sigma, sig_c, bounds.copy()),
        critic=critic,
        output_gain=output_gain,
        env_name=env_name,
        algo=algo,
        seed=init.seed,
    )


def sigma_eff(policy: GaussianChebyPolicy, obs) -> float:
    return max(float(evaluate(policy.sigma, obs)), SIGMA_FLOOR)


def act_deterministic(policy: GaussianChebyPolicy, obs) -> float:
    a = policy.output_gain * float(evaluate(policy.mu, obs))
    if not math.isfinite(a):
        raise DivergenceError("non-finite deterministic action")
    return a


def act_stochastic(
    policy: GaussianChebyPolicy, obs, rng: np.random.Generator
) -> tuple[float, float]:
    """Sample an unclamped raw action and its log-probability."""
    m = float(evaluate(policy.mu, obs))
    s = sigma_eff(policy, obs)
    if not (math.isfinite(m) and math.isfinite(s)):
        raise DivergenceError("non-finite policy head output")
    a = m + s * float(rng.standard_normal())
    return a, log_prob(policy, obs, a)


def log_prob(policy: GaussianChebyPolicy, obs, raw_action: float) -> float:
    m = float(evaluate(policy.mu, obs))
    s = sigma_eff(policy, obs)
    z = (raw_action - m) / s
    return -0.5 * z * z - math.log(s) - 0.5 * LOG_2PI


def logprob_grad(
    policy: GaussianChebyPolicy, obs, raw_action: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """(logp, d logp/d theta_mu, d logp/d theta_sigma) at one state/action pair."""
    b_mu = basis_values(policy.mu, obs)
    b_sig = basis_values(policy.sigma, obs)
    m = float(b_mu @ policy.mu.coeffs)
    s_raw = float(b_sig @ policy.sigma.coeffs)
    s = max(s_raw, SIGMA_FLOOR)
    diff = raw_action - m
    logp = -0.5 * (diff / s) ** 2 - math.log(s) - 0.5 * LOG_2PI
    g_mu = (diff / (s * s)) * b_mu
    if s_raw > SIGMA_FLOOR:
        g_sig = (diff * diff / (s * s * s) - 1.0 / s) * b_sig
    else:
        g_sig = np.zeros_like(b_sig)
    return logp, g_mu, g_sig


def batch_heads(policy: GaussianChebyPolicy, states: np.ndarray):
    """Vectorized (mu, sigma_eff, B_mu, B_sigma, floor_mask) over a state batch."""
    b_mu = batch_basis(policy.mu, states)
    b_sig = batch_basis(policy.sigma, states)
    mu = b_mu @ policy.mu.coeffs
    s_raw = b_sig @ policy.sigma.coeffs
    floored = s_raw <= SIGMA_FLOOR
    s = np.maximum(s_raw, SIGMA_FLOOR)
    return mu, s, b_mu, b_sig, floored


def batch_log_prob(mu: np.ndarray, s: np.ndarray, raw: np.ndarray) -> np.ndarray:
    z = (raw - mu) / s
    return -0.5 * z * z - np.log(s) - 0.5 * LOG_2PI


def batch_score(
    mu: np.ndarray,
    s: np.ndarray,
    b_mu: np.ndarray,
    b_sig: np.ndarray,
    floored: np.ndarray,
    raw: np.ndarray,
    weights: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Accumulated weighted score gradients: sum_t w_t * d logp_t / d theta."""
    diff = raw - mu
    g_mu = b_mu.T @ (weights * diff / (s * s))
    coef = weights * (diff * diff / (s**3) - 1.0 / s)
    coef = np.where(floored, 0.0, coef)
    g_sig = b_sig.T @ coef
    return g_mu, g_sig
