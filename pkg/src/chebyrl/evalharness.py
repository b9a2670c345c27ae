"""Deterministic policy evaluation: start-grid statistics, regret against the
fixed feedback policy, policy-distance metrics, and exportable action grids.

Two policy kinds are evaluated: the analytic `PhasePolicy` feedback laws and
trained `GaussianChebyPolicy` models (run in sigma = 0 mode).  All grids are
inclusive linspaces, so repeated evaluation of the same policy is bit-identical
and aggregation order follows the grid index.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .analytic import PhasePolicy, make_pi_ana, rollout_phase
from .cheby import batch_basis
from .env import MC_DEFAULT, PENDULUM_DEFAULT, McParams, PendulumParams
from .errors import ConfigError
from .policy import GaussianChebyPolicy
from .train.common import MountainCarSpec, PendulumSpec

Policy = Union[PhasePolicy, GaussianChebyPolicy, Callable[[float, float], float]]

# Comparison domain for action grids and policy distances: positions up to the
# goal line, the full velocity box.
HEATMAP_DOMAIN = ((-1.2, 0.45), (-0.07, 0.07))
L2_GRID = (200, 200)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalReport:
    """Per-start deterministic evaluation results plus aggregates.

    `t_star` records the goal-reaching step count, or t_max + 1 for starts
    that never reach a goal; those starts carry NaN `v_star` and are excluded
    from the t*/v* aggregates.  `regret`/`l2_distance` compare against the
    reference policy (NaN when evaluated without one).
    """

    env_name: str
    starts: np.ndarray  # (n,) x0 values, or (n, 2) angle/velocity pairs
    returns: np.ndarray
    t_star: np.ndarray
    v_star: np.ndarray
    regret: float = math.nan
    l2_distance: float = math.nan

    def __post_init__(self):
        n = len(self.returns)
        if not (len(self.starts) == len(self.t_star) == len(self.v_star) == n):
            raise ConfigError("per-start arrays must share one length")

    @property
    def n_starts(self) -> int:
        return len(self.returns)

    @property
    def goal_failures(self) -> int:
        return int(np.sum(~np.isfinite(self.v_star)))

    def _stats(self, values: np.ndarray) -> dict[str, float]:
        if len(values) == 0:
            nan = float("nan")
            return {"mean": nan, "std": nan, "min": nan, "max": nan}
        return {
            "mean": float(np.mean(values)),
            "std": float(np.std(values)),
            "min": float(np.min(values)),
            "max": float(np.max(values)),
        }

    @property
    def return_stats(self) -> dict[str, float]:
        return self._stats(self.returns)

    @property
    def t_star_stats(self) -> dict[str, float]:
        return self._stats(self.t_star[np.isfinite(self.v_star)])

    @property
    def v_star_stats(self) -> dict[str, float]:
        return self._stats(self.v_star[np.isfinite(self.v_star)])

    @property
    def mean_return(self) -> float:
        return float(np.mean(self.returns))

    def to_dict(self) -> dict:
        return {
            "env": self.env_name,
            "n_starts": self.n_starts,
            "starts": self.starts.tolist(),
            "returns": self.returns.tolist(),
            "t_star": self.t_star.tolist(),
            "v_star": self.v_star.tolist(),
            "return_stats": self.return_stats,
            "t_star_stats": self.t_star_stats,
            "v_star_stats": self.v_star_stats,
            "goal_failures": self.goal_failures,
            "regret": self.regret,
            "l2_distance": self.l2_distance,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, allow_nan=True)
            fh.write("\n")


@dataclass(frozen=True)
class HeatmapGrid:
    """Deterministic actions on an inclusive (x, v) grid, with an optional
    overlay trajectory rolled from a chosen start."""

    xs: np.ndarray  # (nx,)
    vs: np.ndarray  # (nv,)
    actions: np.ndarray  # (nx, nv)
    overlay_xs: Optional[np.ndarray] = None
    overlay_vs: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.actions.shape != (len(self.xs), len(self.vs)):
            raise ConfigError("action grid shape must match the axes")

    def to_csv(self, path) -> None:
        """Rows in grid order (x outer, v inner), header x,v,action."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "v", "action"])
            for i, x in enumerate(self.xs):
                for j, v in enumerate(self.vs):
                    w.writerow(["%.17g" % x, "%.17g" % v, "%.17g" % self.actions[i, j]])


# ---------------------------------------------------------------------------
# Action evaluation on grids
# ---------------------------------------------------------------------------


def _grid_axes(grid, domain) -> tuple[np.ndarray, np.ndarray]:
    nx, nv = grid
    if nx < 2 or nv < 2:
        raise ConfigError("need at least a 2x2 grid")
    (x_lo, x_hi), (v_lo, v_hi) = domain
    return np.linspace(x_lo, x_hi, nx), np.linspace(v_lo, v_hi, nv)


def policy_actions(policy: Policy, states: np.ndarray, clip: float = 1.0) -> np.ndarray:
    """Deterministic actions over an (m, dim) state batch, clipped to the
    unit action box (pass `clip` for environments with a wider one)."""
    if isinstance(policy, GaussianChebyPolicy):
        acts = policy.output_gain * (batch_basis(policy.mu, states) @ policy.mu.coeffs)
    elif callable(policy):
        acts = np.array([float(policy(*s)) for s in states])
    else:
        raise ConfigError(f"cannot evaluate actions of {type(policy).__name__}")
    return np.clip(acts, -clip, clip)


def policy_l2_distance(
    pi_a: Policy,
    pi_b: Policy,
    grid: tuple[int, int] = L2_GRID,
    domain=HEATMAP_DOMAIN,
    clip: float = 1.0,
) -> float:
    """Root-mean-square action difference over an inclusive state grid."""
    xs, vs = _grid_axes(grid, domain)
    mesh = np.column_stack((np.repeat(xs, len(vs)), np.tile(vs, len(xs))))
    diff = policy_actions(pi_a, mesh, clip) - policy_actions(pi_b, mesh, clip)
    return float(np.sqrt(np.mean(diff * diff)))


def heatmap_export(
    policy: Policy,
    grid: tuple[int, int] = L2_GRID,
    overlay_x0: Optional[float] = None,
    domain=HEATMAP_DOMAIN,
    params: McParams = MC_DEFAULT,
) -> HeatmapGrid:
    """Deterministic action grid, optionally with a rollout overlay."""
    xs, vs = _grid_axes(grid, domain)
    mesh = np.column_stack((np.repeat(xs, len(vs)), np.tile(vs, len(xs))))
    actions = policy_actions(policy, mesh).reshape(len(xs), len(vs))
    overlay_xs = overlay_vs = None
    if overlay_x0 is not None:
        traj_xs, traj_vs = _mc_trajectory(policy, float(overlay_x0), params)
        overlay_xs, overlay_vs = traj_xs, traj_vs
    return HeatmapGrid(xs=xs, vs=vs, actions=actions, overlay_xs=overlay_xs, overlay_vs=overlay_vs)


# ---------------------------------------------------------------------------
# Rollout records
# ---------------------------------------------------------------------------


def _mc_record(policy: Policy, x0: float, params: McParams) -> tuple[float, int, float]:
    """(return, t_star, v_star) from one deterministic Mountain Car start."""
    if isinstance(policy, GaussianChebyPolicy):
        ret, _, t_star, v_star = MountainCarSpec(params).rollout_det(policy, (x0, 0.0))
        return ret, int(t_star), float(v_star)
    if isinstance(policy, PhasePolicy):
        traj, _ = rollout_phase(policy, x0, 0.0, params)
        if traj.terminated:
            return traj.ret, traj.n_steps, float(traj.vs[-1])
        return traj.ret, params.t_max + 1, math.nan
    raise ConfigError(f"cannot roll out {type(policy).__name__}")


def _mc_trajectory(policy: Policy, x0: float, params: McParams) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(policy, GaussianChebyPolicy):
        env = MountainCarSpec(params)
        states, _, _, _ = env.rollout_stoch(policy, (x0, 0.0), np.zeros(env.t_max))
        return states[:, 0], states[:, 1]
    if isinstance(policy, PhasePolicy):
        traj, _ = rollout_phase(policy, x0, 0.0, params)
        return traj.xs, traj.vs
    raise ConfigError(f"cannot roll out {type(policy).__name__}")


def eval_mc(
    policy: Policy,
    n_points: int = 100,
    reference: Optional[Policy] = None,
    params: McParams = MC_DEFAULT,
    with_reference: bool = True,
) -> EvalReport:
    """Deterministic evaluation over evenly spaced starts in the start box.

    The report's regret and L2 distance compare against `reference` (the
    fixed feedback policy by default); pass `with_reference=False` to skip
    both (they come back NaN).
    """
    if n_points < 2:
        raise ConfigError("need at least two evaluation starts")
    starts = np.linspace(params.start_lo, params.start_hi, n_points)
    rets = np.empty(n_points)
    t_star = np.empty(n_points)
    v_star = np.empty(n_points)
    for i, x0 in enumerate(starts):
        rets[i], t_star[i], v_star[i] = _mc_record(policy, float(x0), params)
    regret = l2 = math.nan
    if with_reference:
        if reference is None:
            reference = make_pi_ana(params=params)
        ref_rets = np.array([_mc_record(reference, float(x0), params)[0] for x0 in starts])
        regret = float(np.mean(ref_rets) - np.mean(rets))
        l2 = policy_l2_distance(policy, reference)
    return EvalReport(
        env_name="mountain_car",
        starts=starts,
        returns=rets,
        t_star=t_star,
        v_star=v_star,
        regret=regret,
        l2_distance=l2,
    )


def eval_pendulum(
    policy: GaussianChebyPolicy,
    grid: tuple[int, int] = (50, 50),
    params: PendulumParams = PENDULUM_DEFAULT,
) -> EvalReport:
    """Deterministic evaluation over an inclusive angle x angular-velocity
    grid (raw units); episodes run to the horizon, so no start reaches a
    terminal state and the t*/v* aggregates are empty."""
    n_theta, n_vel = grid
    if n_theta < 2 or n_vel < 2:
        raise ConfigError("need at least a 2x2 start grid")
    thetas = np.linspace(-math.pi, math.pi, n_theta)
    vels = np.linspace(-1.0, 1.0, n_vel)
    env = PendulumSpec(params)
    starts = np.column_stack((np.repeat(thetas, n_vel), np.tile(vels, n_theta)))
    rets = np.empty(len(starts))
    for i, (th, vel) in enumerate(starts):
        rets[i] = env.rollout_det(policy, (float(th), float(vel)))[0]
    return EvalReport(
        env_name="pendulum",
        starts=starts,
        returns=rets,
        t_star=np.full(len(starts), params.t_max + 1, dtype=float),
        v_star=np.full(len(starts), math.nan),
    )


# ---------------------------------------------------------------------------
# CSV exports
# ---------------------------------------------------------------------------


def write_per_start_csv(report: EvalReport, path) -> None:
    """Columns x0,R,t_star,v_star (one row per start; Mountain Car reports)."""
    if report.starts.ndim != 1:
        raise ConfigError("per-start CSV is defined for single-coordinate starts")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x0", "R", "t_star", "v_star"])
        for i in range(report.n_starts):
            w.writerow(
                [
                    "%.17g" % report.starts[i],
                    "%.17g" % report.returns[i],
                    int(report.t_star[i]),
                    "%.17g" % report.v_star[i],
                ]
            )


def return_density(returns: np.ndarray, bins: int = 40) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Histogram of returns as (bin_lo, bin_hi, count) arrays."""
    if bins < 1:
        raise ConfigError("need at least one bin")
    counts, edges = np.histogram(np.asarray(returns, dtype=float), bins=bins)
    return edges[:-1], edges[1:], counts


def write_density_csv(returns: np.ndarray, path, bins: int = 40) -> None:
    """Columns bin_lo,bin_hi,count."""
    lo, hi, counts = return_density(returns, bins)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_lo", "bin_hi", "count"])
        for row in zip(lo, hi, counts):
            w.writerow(["%.17g" % row[0], "%.17g" % row[1], int(row[2])])
