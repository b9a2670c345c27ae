"""Evaluation-harness tests.

Oracles:
 - the fixed feedback policy's frozen grid statistics (its own tests derive
   them independently from the analytic construction)
 - closed-form action grids (zero policy, constant coefficient offsets)
 - hand-built reports for the aggregate/exclusion rules
"""

import csv
import json
import math

import numpy as np
import pytest

from chebyrl.analytic import make_pi_ana
from chebyrl.errors import ConfigError
from chebyrl.evalharness import (
    HEATMAP_DOMAIN,
    EvalReport,
    HeatmapGrid,
    eval_mc,
    eval_pendulum,
    heatmap_export,
    policy_actions,
    policy_l2_distance,
    return_density,
    write_density_csv,
    write_per_start_csv,
)
from chebyrl.policy import PolicyInit, act_deterministic, init_policy
from chebyrl.train.common import MC_BOUNDS, PENDULUM_BOUNDS

PI_ANA = make_pi_ana()


def _zero_policy():
    return init_policy(2, 3, 0, MC_BOUNDS, PolicyInit(seed=0, amplitude=0.0))


def _small_policy(seed=3):
    return init_policy(2, 3, 0, MC_BOUNDS, PolicyInit(seed=seed, amplitude=1e-3))


class TestEvalMc:
    def test_pi_ana_grid_statistics(self):
        rep = eval_mc(PI_ANA)
        assert rep.n_starts == 100
        assert rep.mean_return == pytest.approx(99.39, abs=0.05)
        assert rep.return_stats["min"] >= 99.10
        assert rep.return_stats["max"] <= 99.57
        assert rep.goal_failures == 0
        assert rep.t_star_stats["mean"] == pytest.approx(769, abs=5)
        assert rep.regret == 0.0
        assert rep.l2_distance == 0.0

    def test_start_grid_is_inclusive_linspace(self):
        rep = eval_mc(PI_ANA, n_points=7)
        assert np.allclose(rep.starts, np.linspace(-0.6, -0.4, 7), atol=1e-15)

    def test_zero_policy_never_reaches_goal(self):
        rep = eval_mc(_zero_policy(), n_points=20)
        assert np.all(rep.returns == 0.0)
        assert rep.goal_failures == 20
        assert np.all(rep.t_star == 1000.0)
        assert np.all(np.isnan(rep.v_star))
        assert math.isnan(rep.t_star_stats["mean"])
        assert rep.regret == pytest.approx(99.39, abs=0.05)

    def test_without_reference_skips_regret_and_distance(self):
        rep = eval_mc(_zero_policy(), n_points=5, with_reference=False)
        assert math.isnan(rep.regret) and math.isnan(rep.l2_distance)

    def test_repeated_eval_is_bit_identical(self):
        a = eval_mc(PI_ANA, n_points=25)
        b = eval_mc(PI_ANA, n_points=25)
        assert np.array_equal(a.returns, b.returns)
        assert np.array_equal(a.t_star, b.t_star)
        assert a.regret == b.regret and a.l2_distance == b.l2_distance

    def test_gaussian_record_matches_env_rollout(self):
        p = _small_policy()
        rep = eval_mc(p, n_points=5, with_reference=False)
        from chebyrl.train.common import MountainCarSpec

        env = MountainCarSpec()
        for i, x0 in enumerate(rep.starts):
            ret, _, t_star, v_star = env.rollout_det(p, (float(x0), 0.0))
            assert rep.returns[i] == ret
            assert rep.t_star[i] == t_star
            assert np.isnan(rep.v_star[i]) == np.isnan(v_star)

    def test_rejects_degenerate_grid(self):
        with pytest.raises(ConfigError):
            eval_mc(PI_ANA, n_points=1)


class TestPolicyDistance:
    def test_identical_policies_are_zero(self):
        assert policy_l2_distance(PI_ANA, PI_ANA) == 0.0
        p = _small_policy()
        assert policy_l2_distance(p, p) == 0.0

    def test_constant_offset_gives_offset_magnitude(self):
        a = _small_policy(seed=5)
        b = init_policy(2, 3, 0, MC_BOUNDS, PolicyInit(seed=5, amplitude=1e-3))
        b.mu.coeffs[0] += 0.25  # lead basis function is constant 1
        assert policy_l2_distance(a, b) == pytest.approx(0.25, abs=1e-12)

    def test_symmetry(self):
        z = _zero_policy()
        assert policy_l2_distance(z, PI_ANA) == policy_l2_distance(PI_ANA, z)

    def test_distance_to_zero_is_action_rms(self):
        d = policy_l2_distance(_zero_policy(), PI_ANA, grid=(40, 41))
        xs = np.linspace(-1.2, 0.45, 40)
        vs = np.linspace(-0.07, 0.07, 41)
        acts = np.array([PI_ANA(x, v) for x in xs for v in vs])
        assert d == pytest.approx(float(np.sqrt(np.mean(acts**2))), abs=1e-12)

    def test_actions_match_single_point_evaluation(self):
        p = _small_policy(seed=9)
        states = np.array([[-0.5, 0.02], [0.1, -0.06], [-1.1, 0.0]])
        batch = policy_actions(p, states)
        for row, a in zip(states, batch):
            assert a == pytest.approx(
                np.clip(act_deterministic(p, row), -1.0, 1.0), abs=1e-14
            )

    def test_rejects_unsupported_policy(self):
        with pytest.raises(ConfigError):
            policy_actions(42, np.zeros((1, 2)))


class TestEvalReport:
    def _report(self):
        return EvalReport(
            env_name="mountain_car",
            starts=np.array([-0.6, -0.5, -0.4]),
            returns=np.array([99.0, 98.0, -1.0]),
            t_star=np.array([700.0, 800.0, 1000.0]),
            v_star=np.array([0.01, 0.02, math.nan]),
        )

    def test_aggregates_exclude_non_terminating(self):
        rep = self._report()
        assert rep.goal_failures == 1
        assert rep.t_star_stats["mean"] == pytest.approx(750.0)
        assert rep.t_star_stats["max"] == 800.0
        assert rep.v_star_stats["mean"] == pytest.approx(0.015)
        assert rep.return_stats["mean"] == pytest.approx(196.0 / 3.0)
        assert rep.return_stats["min"] == -1.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            EvalReport(
                env_name="mountain_car",
                starts=np.array([-0.5]),
                returns=np.array([1.0, 2.0]),
                t_star=np.array([5.0, 6.0]),
                v_star=np.array([0.0, 0.0]),
            )

    def test_json_round_trip(self, tmp_path):
        rep = self._report()
        path = tmp_path / "report.json"
        rep.to_json(path)
        data = json.loads(path.read_text())
        assert data["env"] == "mountain_car"
        assert data["n_starts"] == 3
        assert data["returns"] == rep.returns.tolist()
        assert data["goal_failures"] == 1
        assert math.isnan(data["v_star"][2])
        assert data["t_star_stats"]["mean"] == pytest.approx(750.0)


class TestHeatmap:
    def test_zero_policy_grid_is_all_zero(self):
        hm = heatmap_export(_zero_policy(), grid=(10, 8))
        assert hm.actions.shape == (10, 8)
        assert np.all(hm.actions == 0.0)
        assert hm.overlay_xs is None and hm.overlay_vs is None

    def test_grid_covers_domain_inclusively(self):
        hm = heatmap_export(PI_ANA, grid=(13, 9))
        (x_lo, x_hi), (v_lo, v_hi) = HEATMAP_DOMAIN
        assert hm.xs[0] == x_lo and hm.xs[-1] == x_hi
        assert hm.vs[0] == v_lo and hm.vs[-1] == v_hi

    def test_pi_ana_sign_structure(self):
        # Action sign equals velocity sign; the only exception is the boot
        # kick at v = 0 near the equilibrium position.
        hm = heatmap_export(PI_ANA, grid=(81, 41))
        x_hat = -math.pi / 6.0
        for i, x in enumerate(hm.xs):
            for j, v in enumerate(hm.vs):
                a = hm.actions[i, j]
                if v != 0.0:
                    assert np.sign(a) == np.sign(v)
                elif abs(x - x_hat) <= 0.01:
                    assert a == pytest.approx(0.1)
                else:
                    assert a == 0.0

    def test_overlay_reaches_goal(self):
        hm = heatmap_export(PI_ANA, grid=(10, 10), overlay_x0=-0.55)
        assert hm.overlay_xs is not None
        assert hm.overlay_xs[0] == pytest.approx(-0.55)
        assert hm.overlay_xs[-1] >= 0.45

    def test_shape_validation(self):
        with pytest.raises(ConfigError):
            HeatmapGrid(xs=np.zeros(3), vs=np.zeros(4), actions=np.zeros((4, 3)))
        with pytest.raises(ConfigError):
            heatmap_export(PI_ANA, grid=(1, 5))

    def test_csv_export(self, tmp_path):
        hm = heatmap_export(PI_ANA, grid=(4, 3))
        path = tmp_path / "heat.csv"
        hm.to_csv(path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 12
        assert list(rows[0]) == ["x", "v", "action"]
        # Grid order: x outer, v inner; values round-trip at full precision.
        assert float(rows[0]["x"]) == hm.xs[0] and float(rows[1]["x"]) == hm.xs[0]
        assert float(rows[3]["x"]) == hm.xs[1]
        k = 7
        assert float(rows[k]["action"]) == hm.actions[k // 3, k % 3]


class TestEvalPendulum:
    def _policy(self, amplitude=1e-3, seed=0):
        return init_policy(
            3, 2, 0, PENDULUM_BOUNDS, PolicyInit(seed=seed, amplitude=amplitude),
            output_gain=2.0, env_name="pendulum",
        )

    def test_zero_torque_upright_start_is_fixed_point(self):
        rep = eval_pendulum(self._policy(amplitude=0.0), grid=(5, 5))
        starts = rep.starts
        idx = np.where((starts[:, 0] == 0.0) & (starts[:, 1] == 0.0))[0]
        assert len(idx) == 1
        assert rep.returns[idx[0]] == 0.0

    def test_grid_layout_and_no_termination(self):
        rep = eval_pendulum(self._policy(), grid=(6, 4))
        assert rep.n_starts == 24
        assert rep.starts.shape == (24, 2)
        assert rep.starts[0, 0] == pytest.approx(-math.pi)
        assert rep.starts[-1, 0] == pytest.approx(math.pi)
        assert rep.starts[0, 1] == -1.0 and rep.starts[3, 1] == 1.0
        assert np.all(rep.t_star == 201.0)
        assert rep.goal_failures == 24
        assert math.isnan(rep.t_star_stats["mean"])
        assert np.all(rep.returns <= 0.0)

    def test_rejects_degenerate_grid(self):
        with pytest.raises(ConfigError):
            eval_pendulum(self._policy(), grid=(1, 5))


class TestDensity:
    def test_counts_and_edges(self):
        rng = np.random.Generator(np.random.Philox(61))
        rets = rng.normal(size=500)
        lo, hi, counts = return_density(rets, bins=16)
        assert counts.sum() == 500
        assert len(lo) == len(hi) == len(counts) == 16
        assert np.all(hi > lo)
        assert np.allclose(lo[1:], hi[:-1], atol=1e-12)

    def test_rejects_empty_binning(self):
        with pytest.raises(ConfigError):
            return_density(np.zeros(3), bins=0)

    def test_csv_export(self, tmp_path):
        rets = np.array([-100.0, -50.0, -50.0, -10.0])
        path = tmp_path / "density.csv"
        write_density_csv(rets, path, bins=3)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["bin_lo", "bin_hi", "count"]
        assert sum(int(r["count"]) for r in rows) == 4
        assert float(rows[0]["bin_lo"]) == -100.0


class TestPerStartCsv:
    def test_round_trip(self, tmp_path):
        rep = eval_mc(PI_ANA, n_points=5)
        path = tmp_path / "starts.csv"
        write_per_start_csv(rep, path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == ["x0", "R", "t_star", "v_star"]
        assert len(rows) == 5
        for i, row in enumerate(rows):
            assert float(row["x0"]) == rep.starts[i]
            assert float(row["R"]) == rep.returns[i]
            assert int(row["t_star"]) == rep.t_star[i]

    def test_pendulum_report_rejected(self, tmp_path):
        rep = eval_pendulum(
            init_policy(
                3, 1, 0, PENDULUM_BOUNDS, PolicyInit(seed=0, amplitude=0.0),
                output_gain=2.0, env_name="pendulum",
            ),
            grid=(3, 3),
        )
        with pytest.raises(ConfigError):
            write_per_start_csv(rep, tmp_path / "bad.csv")
