"""Trainer tests: optimizers, gradient estimators, ARS/PPO update math, and
the best-of-N protocol.

Oracles:
 - hand-rolled optimizer reference loops (published update rules)
 - a fixed two-step MDP whose exact policy gradient is closed-form
 - finite differences of the PPO surrogate loss
 - a 1-D quadratic bandit with a known optimum for ARS
"""

import dataclasses
import math

import numpy as np
import pytest

from chebyrl import kernels
from chebyrl.errors import ConfigError
from chebyrl.policy import (
    SIGMA_FLOOR,
    PolicyInit,
    batch_heads,
    batch_log_prob,
    init_policy,
)
from chebyrl.train import (
    Adam,
    AdamW,
    ArsConfig,
    PpoConfig,
    ReinforceConfig,
    RmsProp,
    RunningStat,
    Sgd,
    TrainRun,
    ars_update_direction,
    default_config,
    default_policy_factory,
    default_sigma_degree,
    discounted_returns_to_go,
    episode_gradient,
    gae,
    make_env,
    make_optimizer,
    mean_eval_return,
    ppo_minibatch_grads,
    rng_stream,
    train_ars,
    train_ppo,
    train_protocol,
    train_reinforce,
)
from chebyrl.train.common import MC_BOUNDS
from chebyrl.train.reinforce import episode_step_gradients

MC = make_env("mountain_car")


def _mc_policy(seed=0, d_mu=3, d_sigma=2, **kw):
    return init_policy(2, d_mu, d_sigma, MC_BOUNDS, PolicyInit(seed=seed), **kw)


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------


class TestOptimizers:
    def test_sgd_step(self):
        p = np.array([1.0, 2.0])
        Sgd(lr=0.1).step(p, np.array([0.5, -1.0]))
        assert np.allclose(p, [0.95, 2.1], atol=1e-15)

    def test_sgd_weight_decay_is_l2(self):
        p = np.array([2.0])
        Sgd(lr=0.1, weight_decay=0.5).step(p, np.array([0.0]))
        assert p[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0, abs=1e-15)

    def test_adam_first_step_is_signed_lr(self):
        p = np.zeros(3)
        Adam(lr=0.01).step(p, np.array([3.0, -0.5, 1e-3]))
        assert np.allclose(p, [-0.01, 0.01, -0.01], atol=1e-6)

    def test_adam_matches_reference_loop(self):
        rng = np.random.Generator(np.random.Philox(3))
        p = rng.normal(size=4)
        ref = p.copy()
        opt = Adam(lr=0.05)
        m = np.zeros(4)
        v = np.zeros(4)
        for t in range(1, 6):
            g = rng.normal(size=4)
            opt.step(p, g)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            ref -= 0.05 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
            assert np.allclose(p, ref, atol=1e-14)

    def test_adamw_decay_is_decoupled(self):
        # Zero gradient: AdamW still shrinks parameters, Adam does not.
        p_w = np.array([1.0, -2.0])
        p_a = np.array([1.0, -2.0])
        AdamW(lr=0.1, weight_decay=0.5).step(p_w, np.zeros(2))
        Adam(lr=0.1).step(p_a, np.zeros(2))
        assert np.allclose(p_w, 0.95 * np.array([1.0, -2.0]), atol=1e-15)
        assert np.allclose(p_a, [1.0, -2.0], atol=1e-15)

    def test_rmsprop_matches_reference_loop(self):
        rng = np.random.Generator(np.random.Philox(5))
        p = rng.normal(size=3)
        ref = p.copy()
        opt = RmsProp(lr=0.02)
        sq = np.zeros(3)
        for _ in range(4):
            g = rng.normal(size=3)
            opt.step(p, g)
            sq = 0.99 * sq + 0.01 * g * g
            ref -= 0.02 * g / (np.sqrt(sq) + 1e-8)
            assert np.allclose(p, ref, atol=1e-14)

    def test_make_optimizer_names(self):
        assert isinstance(make_optimizer("AdamW", 0.1), AdamW)
        assert isinstance(make_optimizer("sgd", 0.1), Sgd)
        assert isinstance(make_optimizer("rmsprop", 0.1), RmsProp)

    def test_make_optimizer_rejects_unknown_and_bad_lr(self):
        with pytest.raises(ConfigError):
            make_optimizer("lbfgs", 0.1)
        with pytest.raises(ConfigError):
            make_optimizer("adam", 0.0)


# ---------------------------------------------------------------------------
# REINFORCE
# ---------------------------------------------------------------------------


class TestReturnsToGo:
    def test_hand_check(self):
        g = discounted_returns_to_go(np.array([1.0, 2.0, 3.0]), 0.5)
        assert np.allclose(g, [2.75, 3.5, 3.0], atol=1e-15)

    def test_gamma_one_is_suffix_sum(self):
        r = np.array([1.0, -2.0, 0.5, 4.0])
        g = discounted_returns_to_go(r, 1.0)
        assert np.allclose(g, np.cumsum(r[::-1])[::-1], atol=1e-12)


class TestEpisodeGradient:
    def _episode(self, policy, n_steps, seed=0):
        rng = np.random.Generator(np.random.Philox(seed))
        states = np.column_stack(
            (rng.uniform(-1.0, 0.4, n_steps), rng.uniform(-0.06, 0.06, n_steps))
        )
        mu, s, _, _, _ = batch_heads(policy, states)
        raw = mu + s * rng.standard_normal(n_steps)
        rewards = rng.normal(size=n_steps)
        return states, raw, rewards

    def test_gamma_zero_single_step_is_r0_score(self):
        p = _mc_policy(seed=1)
        states, raw, rewards = self._episode(p, 1, seed=11)
        g_mu, g_sig = episode_gradient(p, states, raw, rewards, 0.0, True)
        mu, s, b_mu, b_sig, floored = batch_heads(p, states)
        diff = raw[0] - mu[0]
        assert np.allclose(g_mu, rewards[0] * b_mu[0] * diff / s[0] ** 2, atol=1e-14)
        score_sig = (diff * diff / s[0] ** 3 - 1.0 / s[0]) * b_sig[0]
        assert np.allclose(g_sig, rewards[0] * score_sig, atol=1e-14)

    def test_step_rows_sum_to_episode_gradient(self):
        p = _mc_policy(seed=2)
        states, raw, rewards = self._episode(p, 40, seed=13)
        for tdw in (False, True):
            g_mu, g_sig = episode_gradient(p, states, raw, rewards, 0.9, tdw)
            rows_mu, rows_sig = episode_step_gradients(p, states, raw, rewards, 0.9, tdw)
            assert np.allclose(rows_mu.sum(axis=0), g_mu, atol=1e-12)
            assert np.allclose(rows_sig.sum(axis=0), g_sig, atol=1e-12)

    def test_matches_frozen_weight_finite_differences(self):
        # With weights w_t frozen, the estimator is the exact gradient of
        # f(theta) = sum_t w_t logp(a_t | s_t; theta) along the fixed episode.
        p = _mc_policy(seed=3)
        states, raw, rewards = self._episode(p, 15, seed=17)
        gamma, tdw = 0.9, True
        g_mu, g_sig = episode_gradient(p, states, raw, rewards, gamma, tdw)
        w = discounted_returns_to_go(rewards, gamma) * gamma ** np.arange(len(rewards))

        def f():
            mu, s, _, _, _ = batch_heads(p, states)
            return float(np.sum(w * batch_log_prob(mu, s, raw)))

        h = 1e-6
        for head, grad in ((p.mu, g_mu), (p.sigma, g_sig)):
            for i in range(0, head.coeffs.size, 5):
                orig = head.coeffs[i]
                head.coeffs[i] = orig + h
                up = f()
                head.coeffs[i] = orig - h
                dn = f()
                head.coeffs[i] = orig
                fd = (up - dn) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)

    def test_unbiased_on_two_step_mdp(self):
        # Fixed state sequence, reward r_t = a_t, so J = mu(s0) + gamma*mu(s1):
        # the exact gradient is b(s0) + gamma*b(s1) for the mean head and zero
        # for the sigma head.  Empirical mean over sampled episodes must match
        # within 3 standard errors.
        p = _mc_policy(seed=4, d_mu=2, d_sigma=1)
        gamma = 0.7
        states = np.array([[-0.5, 0.01], [0.2, -0.03]])
        mu, s, b_mu, _, _ = batch_heads(p, states)
        exact_mu = b_mu[0] + gamma * b_mu[1]
        rng = np.random.Generator(np.random.Philox(19))
        n = 30_000
        sum_mu = np.zeros(p.mu.coeffs.size)
        sumsq_mu = np.zeros(p.mu.coeffs.size)
        sum_sig = np.zeros(p.sigma.coeffs.size)
        sumsq_sig = np.zeros(p.sigma.coeffs.size)
        for _ in range(n):
            raw = mu + s * rng.standard_normal(2)
            g_mu, g_sig = episode_gradient(p, states, raw, raw.copy(), gamma, True)
            sum_mu += g_mu
            sumsq_mu += g_mu * g_mu
            sum_sig += g_sig
            sumsq_sig += g_sig * g_sig
        for total, total_sq, exact in (
            (sum_mu, sumsq_mu, exact_mu),
            (sum_sig, sumsq_sig, np.zeros_like(sum_sig)),
        ):
            mean = total / n
            se = np.sqrt((total_sq / n - mean**2) / n) + 1e-12
            assert np.all(np.abs(mean - exact) <= 3.0 * se + 1e-9)


class TestTrainReinforce:
    def test_run_shape_and_reproducibility(self):
        cfg = ReinforceConfig(episodes=4, seed=123)
        runs = [train_reinforce(MC, _mc_policy(seed=123), cfg) for _ in range(2)]
        for run in runs:
            assert run.algo == "reinforce"
            assert len(run.returns) == 4
            assert run.steps > 0
            assert not run.diverged and run.policy is not None
        assert np.array_equal(runs[0].returns, runs[1].returns)
        assert np.array_equal(runs[0].policy.mu.coeffs, runs[1].policy.mu.coeffs)
        assert np.array_equal(runs[0].policy.sigma.coeffs, runs[1].policy.sigma.coeffs)

    def test_input_policy_not_mutated(self):
        p = _mc_policy(seed=7)
        before = p.mu.coeffs.copy()
        train_reinforce(MC, p, ReinforceConfig(episodes=2, seed=7))
        assert np.array_equal(p.mu.coeffs, before)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            ReinforceConfig(gamma=0.0)
        with pytest.raises(ConfigError):
            ReinforceConfig(gamma=1.5)
        with pytest.raises(ConfigError):
            ReinforceConfig(lr=-1e-3)
        with pytest.raises(ConfigError):
            ReinforceConfig(episodes=0)


# ---------------------------------------------------------------------------
# ARS
# ---------------------------------------------------------------------------


class TestArsUpdateDirection:
    def test_single_direction_sign(self):
        delta = np.array([[1.0, -2.0]])
        step = ars_update_direction(delta, np.array([2.0]), np.array([0.0]), 1)
        # (R+ - R-) / (b * std([2, 0])) = 2 / 1 = 2 times delta.
        assert np.allclose(step, 2.0 * delta[0], atol=1e-12)

    def test_constant_shift_invariance(self):
        rng = np.random.Generator(np.random.Philox(23))
        deltas = rng.normal(size=(6, 8))
        r_plus = rng.normal(size=6)
        r_minus = rng.normal(size=6)
        base = ars_update_direction(deltas, r_plus, r_minus, 3)
        shifted = ars_update_direction(deltas, r_plus + 123.456, r_minus + 123.456, 3)
        assert np.allclose(base, shifted, atol=1e-9)

    def test_flat_landscape_returns_none(self):
        deltas = np.ones((3, 2))
        r = np.full(3, 5.0)
        assert ars_update_direction(deltas, r, r.copy(), 2) is None

    def test_top_b_uses_best_directions_only(self):
        deltas = np.eye(3)
        r_plus = np.array([1.0, 10.0, 2.0])
        r_minus = np.array([0.0, 4.0, 1.0])
        step = ars_update_direction(deltas, r_plus, r_minus, 1)
        expected = (10.0 - 4.0) * deltas[1] / (1 * np.std([10.0, 4.0]))
        assert np.allclose(step, expected, atol=1e-12)

    def test_quadratic_bandit_converges(self):
        # return(theta) = -(theta - 3)^2; the ARS loop must find theta = 3.
        # The reward-normalized step wanders at the lr scale near the optimum,
        # so the step sizes here set the stationary error, not the speed.
        rng = np.random.Generator(np.random.Philox(29))
        theta = np.zeros(1)
        for _ in range(500):
            deltas = rng.standard_normal((4, 1))
            r_plus = -((theta + 0.05 * deltas).ravel() - 3.0) ** 2
            r_minus = -((theta - 0.05 * deltas).ravel() - 3.0) ** 2
            step = ars_update_direction(deltas, r_plus, r_minus, 4)
            if step is not None:
                theta += 0.03 * step
        assert abs(theta[0] - 3.0) < 0.05


class TestRunningStat:
    def test_matches_numpy_batched(self):
        rng = np.random.Generator(np.random.Philox(31))
        data = rng.normal(loc=[1.0, -2.0], scale=[0.5, 3.0], size=(1000, 2))
        stat = RunningStat(2)
        for chunk in np.array_split(data, 7):
            stat.update(chunk)
        assert np.allclose(stat.mean, data.mean(axis=0), atol=1e-10)
        assert np.allclose(stat.std, data.std(axis=0), atol=1e-10)
        b = stat.bounds()
        assert np.allclose(b[:, 0], stat.mean - stat.std, atol=1e-12)
        assert np.allclose(b[:, 1], stat.mean + stat.std, atol=1e-12)

    def test_degenerate_count_uses_unit_std(self):
        stat = RunningStat(2)
        stat.update(np.array([[1.0, 2.0]]))
        assert np.allclose(stat.std, [1.0, 1.0], atol=0)


class _BanditEnv:
    """One-step environment whose return is -(c0 - 3)^2 for the lead mean
    coefficient; exercises train_ars end to end with a known optimum."""

    name = "bandit"
    obs_dim = 2
    t_max = 1

    def sample_start(self, rng):
        return (0.0, 0.0)

    def eval_starts(self, n):
        return [(0.0, 0.0)] * n

    def rollout_stoch(self, policy, start, normals):
        c0 = policy.mu.coeffs[0]
        states = np.zeros((2, 2))
        raw = np.array([c0])
        rewards = np.array([-((c0 - 3.0) ** 2)])
        return states, raw, rewards, kernels.STATUS_TRUNCATED

    def rollout_det(self, policy, start):
        c0 = policy.mu.coeffs[0]
        return -((c0 - 3.0) ** 2), 1, self.t_max + 1, math.nan


class TestTrainArs:
    def test_bandit_converges_through_trainer(self):
        cfg = ArsConfig(
            total_steps=1000, n_directions=4, top_directions=4, nu=0.05, lr=0.05,
            obs_norm=False, seed=0,
        )
        run = train_ars(_BanditEnv(), _mc_policy(seed=0, d_sigma=0), cfg)
        assert not run.diverged
        assert abs(run.policy.mu.coeffs[0] - 3.0) < 0.05
        assert run.steps >= 1000

    def test_reproducible_and_input_unchanged(self):
        p = _mc_policy(seed=11, d_sigma=0)
        before = p.mu.coeffs.copy()
        cfg = ArsConfig(total_steps=4000, seed=11)
        r1 = train_ars(MC, p, cfg)
        r2 = train_ars(MC, p, cfg)
        assert np.array_equal(p.mu.coeffs, before)
        assert np.array_equal(r1.returns, r2.returns)
        assert np.array_equal(r1.policy.mu.coeffs, r2.policy.mu.coeffs)
        assert np.array_equal(r1.policy.mu.bounds, r2.policy.mu.bounds)

    def test_obs_norm_folds_into_bounds(self):
        base = np.asarray(MC_BOUNDS, dtype=float)
        cfg_on = ArsConfig(total_steps=4000, obs_norm=True, seed=3)
        run_on = train_ars(MC, _mc_policy(seed=3, d_sigma=0), cfg_on)
        assert not np.allclose(run_on.policy.mu.bounds, base)
        assert np.array_equal(run_on.policy.mu.bounds, run_on.policy.sigma.bounds)
        cfg_off = ArsConfig(total_steps=4000, obs_norm=False, seed=3)
        run_off = train_ars(MC, _mc_policy(seed=3, d_sigma=0), cfg_off)
        assert np.allclose(run_off.policy.mu.bounds, base)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            ArsConfig(n_directions=4, top_directions=5)
        with pytest.raises(ConfigError):
            ArsConfig(top_directions=0)
        with pytest.raises(ConfigError):
            ArsConfig(nu=0.0)
        with pytest.raises(ConfigError):
            ArsConfig(lr=-0.1)
        with pytest.raises(ConfigError):
            ArsConfig(total_steps=0)


# ---------------------------------------------------------------------------
# PPO
# ---------------------------------------------------------------------------


class TestGae:
    def test_hand_check(self):
        adv, target = gae(np.array([1.0, 2.0]), np.array([0.5, 1.0]), 2.0, 0.5, 0.5)
        assert np.allclose(adv, [1.5, 2.0], atol=1e-15)
        assert np.allclose(target, [2.0, 3.0], atol=1e-15)

    def test_lambda_one_is_discounted_return_minus_value(self):
        rng = np.random.Generator(np.random.Philox(37))
        r = rng.normal(size=6)
        v = rng.normal(size=6)
        boot = 1.7
        gamma = 0.9
        adv, _ = gae(r, v, boot, gamma, 1.0)
        ref = np.empty(6)
        acc = boot
        for t in range(5, -1, -1):
            acc = r[t] + gamma * acc
            ref[t] = acc
        assert np.allclose(adv, ref - v, atol=1e-12)


def _ppo_batch(policy, m=32, seed=41):
    rng = np.random.Generator(np.random.Philox(seed))
    states = np.column_stack(
        (rng.uniform(-1.0, 0.4, m), rng.uniform(-0.06, 0.06, m))
    )
    mu, s, b_mu, b_sig, _ = batch_heads(policy, states)
    from chebyrl.cheby import batch_basis

    b_c = batch_basis(policy.critic, states)
    raw = mu + s * rng.standard_normal(m)
    logp = batch_log_prob(mu, s, raw)
    adv = rng.normal(size=m)
    v_target = rng.normal(size=m)
    return b_mu, b_sig, b_c, raw, logp, adv, v_target


class TestPpoGrads:
    def _loss(self, policy, batch, logp_old, clip_eps, vc, ec):
        b_mu, b_sig, b_c, raw, _, adv, v_target = batch
        mu = b_mu @ policy.mu.coeffs
        s = np.maximum(b_sig @ policy.sigma.coeffs, SIGMA_FLOOR)
        rho = np.exp(batch_log_prob(mu, s, raw) - logp_old)
        surr = np.minimum(rho * adv, np.clip(rho, 1 - clip_eps, 1 + clip_eps) * adv)
        v = b_c @ policy.critic.coeffs
        loss = -surr.mean() + vc * 0.5 * np.mean((v - v_target) ** 2)
        return loss - ec * np.mean(np.log(s))

    def test_matches_loss_finite_differences(self):
        p = _mc_policy(seed=13, d_sigma=3, with_critic=True, d_critic=3)
        batch = _ppo_batch(p)
        b_mu, b_sig, b_c, raw, logp, adv, v_target = batch
        # Shift old log-probs so ratios sit strictly inside the clip band
        # (the loss is smooth there) without being exactly 1.
        logp_old = logp - 0.05
        clip_eps, vc, ec = 0.2, 0.5, 0.01
        g_mu, g_sig, g_c = ppo_minibatch_grads(
            p.mu.coeffs, p.sigma.coeffs, p.critic.coeffs,
            b_mu, b_sig, b_c, raw, logp_old, adv, v_target, clip_eps, vc, ec,
        )
        h = 1e-7
        for head, grad in ((p.mu, g_mu), (p.sigma, g_sig), (p.critic, g_c)):
            for i in range(0, head.coeffs.size, 3):
                orig = head.coeffs[i]
                head.coeffs[i] = orig + h
                up = self._loss(p, batch, logp_old, clip_eps, vc, ec)
                head.coeffs[i] = orig - h
                dn = self._loss(p, batch, logp_old, clip_eps, vc, ec)
                head.coeffs[i] = orig
                fd = (up - dn) / (2 * h)
                assert grad[i] == pytest.approx(fd, rel=2e-5, abs=1e-8)

    def test_rho_one_equals_advantage_weighted_score(self):
        p = _mc_policy(seed=14, d_sigma=3, with_critic=True, d_critic=3)
        b_mu, b_sig, b_c, raw, logp, adv, v_target = _ppo_batch(p, seed=43)
        g_mu, g_sig, _ = ppo_minibatch_grads(
            p.mu.coeffs, p.sigma.coeffs, p.critic.coeffs,
            b_mu, b_sig, b_c, raw, logp, adv, v_target, 0.2, 0.0, 0.0,
        )
        mu = b_mu @ p.mu.coeffs
        s = np.maximum(b_sig @ p.sigma.coeffs, SIGMA_FLOOR)
        diff = raw - mu
        m = len(raw)
        ref_mu = -b_mu.T @ (adv * diff / s**2) / m
        ref_sig = -b_sig.T @ (adv * (diff**2 / s**3 - 1 / s)) / m
        assert np.allclose(g_mu, ref_mu, atol=1e-12)
        assert np.allclose(g_sig, ref_sig, atol=1e-12)

    def test_full_clip_zero_policy_update(self):
        p = _mc_policy(seed=15, d_sigma=3, with_critic=True, d_critic=3)
        b_mu, b_sig, b_c, raw, logp, _, v_target = _ppo_batch(p, seed=47)
        for shift, sign in ((-1.0, 1.0), (1.0, -1.0)):
            # rho = e^|shift| with positive advantages (or e^-|shift| with
            # negative ones): every sample lands on the flat clipped branch.
            logp_old = logp + shift
            adv = np.full(len(raw), sign)
            g_mu, g_sig, _ = ppo_minibatch_grads(
                p.mu.coeffs, p.sigma.coeffs, p.critic.coeffs,
                b_mu, b_sig, b_c, raw, logp_old, adv, v_target, 0.2, 0.0, 0.0,
            )
            assert np.all(g_mu == 0.0)
            assert np.all(g_sig == 0.0)

    def test_value_gradient_independent_of_policy_terms(self):
        p = _mc_policy(seed=16, d_sigma=3, with_critic=True, d_critic=3)
        b_mu, b_sig, b_c, raw, logp, adv, v_target = _ppo_batch(p, seed=53)
        _, _, g_c = ppo_minibatch_grads(
            p.mu.coeffs, p.sigma.coeffs, p.critic.coeffs,
            b_mu, b_sig, b_c, raw, logp, adv, v_target, 0.2, 0.5, 0.0,
        )
        v = b_c @ p.critic.coeffs
        ref = 0.5 * (b_c.T @ (v - v_target)) / len(raw)
        assert np.allclose(g_c, ref, atol=1e-12)


class TestTrainPpo:
    def test_requires_critic(self):
        with pytest.raises(ConfigError):
            train_ppo(MC, _mc_policy(seed=1), PpoConfig(total_steps=100))

    def test_reproducible_short_run(self):
        cfg = PpoConfig(total_steps=3000, rollout_steps=512, seed=77)
        mk = lambda: _mc_policy(seed=77, d_sigma=3, with_critic=True, d_critic=3)
        r1 = train_ppo(MC, mk(), cfg)
        r2 = train_ppo(MC, mk(), cfg)
        assert not r1.diverged
        assert np.array_equal(r1.returns, r2.returns)
        assert np.array_equal(r1.policy.mu.coeffs, r2.policy.mu.coeffs)
        assert np.array_equal(r1.policy.critic.coeffs, r2.policy.critic.coeffs)
        assert r1.steps == r2.steps == 3000

    def test_config_validation(self):
        for bad in (
            dict(clip_eps=0.0),
            dict(clip_eps=1.0),
            dict(gae_lambda=0.0),
            dict(gamma=1.0001),
            dict(lr=0.0),
            dict(minibatch_size=0),
            dict(rollout_steps=0),
        ):
            with pytest.raises(ConfigError):
                PpoConfig(**bad)


# ---------------------------------------------------------------------------
# Best-of-N protocol
# ---------------------------------------------------------------------------


class TestTrainRun:
    def test_diverged_run_cannot_carry_policy(self):
        with pytest.raises(ConfigError):
            TrainRun(
                algo="ars", config=ArsConfig(), seed=0, returns=[], diverged=True,
                wall_clock=0.0, steps=0, policy=_mc_policy(),
            )

    def test_artifact_round_trips_config(self):
        run = TrainRun(
            algo="ars", config=ArsConfig(seed=5), seed=5, returns=[1.0, 2.0],
            diverged=False, wall_clock=0.1, steps=10, policy=None,
        )
        art = run.to_artifact()
        assert art["config"]["nu"] == ArsConfig().nu
        assert art["seed"] == 5 and art["returns"] == [1.0, 2.0]


class TestProtocol:
    def test_rejects_unknown_algo_and_bad_runs(self):
        mk = default_policy_factory("mountain_car", "ars", 3)
        with pytest.raises(ConfigError):
            train_protocol("sac", MC, mk, ArsConfig(), n_runs=2)
        with pytest.raises(ConfigError):
            train_protocol("ars", MC, mk, ArsConfig(), n_runs=0)

    def test_single_run_and_seed_offsets(self):
        cfg = ArsConfig(total_steps=2000, seed=900)
        mk = default_policy_factory("mountain_car", "ars", 3)
        res = train_protocol("ars", MC, mk, cfg, n_runs=1, eval_episodes=5)
        assert len(res.runs) == 1 and res.best_index == 0
        assert res.runs[0].seed == 900
        res3 = train_protocol("ars", MC, mk, cfg, n_runs=3, eval_episodes=5)
        assert [r.seed for r in res3.runs] == [900, 901, 902]
        # Run 0 is bit-identical whether alone or inside a larger protocol.
        assert np.array_equal(res3.runs[0].returns, res.runs[0].returns)

    def test_selection_is_argmax_with_low_index_ties(self):
        res = train_protocol(
            "ars", MC, default_policy_factory("mountain_car", "ars", 3),
            ArsConfig(total_steps=2000, seed=900), n_runs=3, eval_episodes=5,
        )
        best = res.best_index
        assert res.eval_means[best] == np.nanmax(res.eval_means)
        assert res.best_mean == res.eval_means[best]
        assert res.best is res.runs[best]

    def test_parallel_jobs_match_serial(self):
        cfg = ArsConfig(total_steps=2000, seed=900)
        mk = default_policy_factory("mountain_car", "ars", 3)
        serial = train_protocol("ars", MC, mk, cfg, n_runs=2, eval_episodes=5, jobs=1)
        parallel = train_protocol("ars", MC, mk, cfg, n_runs=2, eval_episodes=5, jobs=2)
        assert np.array_equal(serial.eval_means, parallel.eval_means)
        assert np.array_equal(
            serial.runs[1].policy.mu.coeffs, parallel.runs[1].policy.mu.coeffs
        )

    def test_reinforce_with_sgd_fails_or_diverges(self):
        res = train_protocol(
            "reinforce", MC, default_policy_factory("mountain_car", "reinforce", 3),
            ReinforceConfig(optimizer="sgd", seed=0), n_runs=6, eval_episodes=10,
        )
        bad = sum(
            1 for i, r in enumerate(res.runs)
            if r.diverged or res.eval_means[i] < 50.0
        )
        assert bad > len(res.runs) // 2


class TestDefaults:
    def test_sigma_degrees(self):
        assert default_sigma_degree("ars", 6) == 0
        assert default_sigma_degree("reinforce", 3) == 2
        assert default_sigma_degree("reinforce", 1) == 1
        assert default_sigma_degree("ppo", 5) == 3
        assert default_sigma_degree("ppo", 2) == 2

    def test_default_configs(self):
        assert default_config("reinforce").episodes == 100
        assert default_config("ars").total_steps == 80_000
        assert default_config("ppo").total_steps == 70_000
        pend = default_config("ars", "pendulum", seed=9)
        assert pend.total_steps == 1_600_000 and not pend.obs_norm
        assert pend.seed == 9
        with pytest.raises(ConfigError):
            default_config("sac")

    def test_policy_factory_shapes(self):
        p = default_policy_factory("pendulum", "ars", 6)(4)
        assert p.mu.n == 3 and p.mu.d == 6 and p.sigma.d == 0
        assert p.output_gain == 2.0 and p.critic is None
        q = default_policy_factory("mountain_car", "ppo", 3)(4)
        assert q.critic is not None and q.critic.d == 3
        assert q.sigma.d == 3 and q.output_gain == 1.0
        r = default_policy_factory("mountain_car", "reinforce", 3, d_sigma=1)(4)
        assert r.sigma.d == 1

    def test_factory_seeds_differ(self):
        mk = default_policy_factory("mountain_car", "reinforce", 3)
        assert not np.array_equal(mk(0).mu.coeffs, mk(1).mu.coeffs)


class TestEvalReturn:
    def test_mean_eval_uses_grid(self):
        p = _mc_policy(seed=21, d_sigma=0)
        m = mean_eval_return(MC, p, 5)
        rets = [MC.rollout_det(p, s)[0] for s in MC.eval_starts(5)]
        assert m == pytest.approx(np.mean(rets), abs=1e-12)
        starts = MC.eval_starts(5)
        assert starts[0][0] == pytest.approx(-0.6) and starts[-1][0] == pytest.approx(-0.4)


class TestRngStreams:
    def test_streams_are_independent(self):
        a = rng_stream(7, 1).standard_normal(4)
        b = rng_stream(7, 2).standard_normal(4)
        c = rng_stream(7, 1).standard_normal(4)
        assert np.array_equal(a, c)
        assert not np.array_equal(a, b)
