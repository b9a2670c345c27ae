"""Discrete benchmark dynamics: continuous-action mountain car and a torque-limited pendulum.

The mountain-car transition is

    v' = clip(v + a_max * alpha - g * cos(3x), -v_max, v_max)
    x' = clip(x + v', x_min, x_max)
    if x' clamps at x_min while moving left: v' := 0      (inelastic wall)
    terminated iff x' >= x_goal and v' >= v_goal
    reward = -0.1 * alpha**2 + 100 * terminated

with actions clamped to [-1, 1] before use.  Episodes truncate after t_max steps.
Start positions are drawn uniformly from [start_lo, start_hi] at rest using a
counter-based Philox generator, so a seed fully determines every draw.
"""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import ConfigError, DomainError

ACTION_LIMIT = 1.0


@dataclass(frozen=True)
class McParams:
    a_max: float = 0.0015
    gravity: float = 0.0025
    x_min: float = -1.2
    x_max: float = 0.6
    v_max: float = 0.07
    x_goal: float = 0.45
    v_goal: float = 0.0
    t_max: int = 999
    start_lo: float = -0.6
    start_hi: float = -0.4

    def __post_init__(self):
        if not (self.a_max > 0.0 and self.gravity > 0.0 and self.v_max > 0.0):
            raise ConfigError("a_max, gravity and v_max must be positive")
        if not self.x_min < self.x_goal <= self.x_max:
            raise ConfigError("require x_min < x_goal <= x_max")
        if not (self.x_min <= self.start_lo < self.start_hi <= self.x_max):
            raise ConfigError("start range must be a non-degenerate interval inside the track")
        if self.t_max < 1:
            raise ConfigError("t_max must be at least 1")

    def replace(self, **overrides) -> "McParams":
        return dataclasses.replace(self, **overrides)


MC_DEFAULT = McParams()


@dataclass(frozen=True)
class McState:
    x: float
    v: float
    t: int = 0


@dataclass(frozen=True)
class StepResult:
    state: McState
    reward: float
    terminated: bool
    wall_hit: bool
    action: float  # the clamped action actually applied


def mc_reset(seed: int, x0: float | None = None, params: McParams = MC_DEFAULT) -> McState:
    """Initial state at rest; x0 is drawn from the start range unless overridden."""
    if x0 is None:
        rng = np.random.Generator(np.random.Philox(seed))
        x0 = float(rng.uniform(params.start_lo, params.start_hi))
    elif not params.x_min <= x0 <= params.x_max:
        raise DomainError(f"x0={x0} outside the track [{params.x_min}, {params.x_max}]")
    return McState(x=float(x0), v=0.0, t=0)


def mc_step(state: McState, action: float, params: McParams = MC_DEFAULT) -> StepResult:
    a = float(action)
    if a > ACTION_LIMIT:
        a = ACTION_LIMIT
    elif a < -ACTION_LIMIT:
        a = -ACTION_LIMIT
    x2, v2, _v_pre, wall, term = kernels._mc_step_core(
        state.x,
        state.v,
        a,
        params.a_max,
        params.gravity,
        params.x_min,
        params.x_max,
        params.v_max,
        params.x_goal,
        params.v_goal,
    )
    reward = -0.1 * a * a + (100.0 if term else 0.0)
    return StepResult(
        state=McState(x=float(x2), v=float(v2), t=state.t + 1),
        reward=float(reward),
        terminated=bool(term),
        wall_hit=bool(wall),
        action=a,
    )


@dataclass
class Trajectory:
    """A recorded rollout.  xs/vs have one more entry than actions/rewards."""

    xs: np.ndarray
    vs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminated: bool

    def __post_init__(self):
        if len(self.xs) != len(self.actions) + 1 or len(self.vs) != len(self.xs):
            raise ConfigError("trajectory arrays are inconsistent")

    @property
    def n_steps(self) -> int:
        return len(self.actions)

    @property
    def t_star(self) -> int | None:
        return self.n_steps if self.terminated else None

    @property
    def v_star(self) -> float | None:
        return float(self.vs[-1]) if self.terminated else None

    @property
    def loss(self) -> float:
        return float(np.sum(self.actions * self.actions))

    @property
    def ret(self) -> float:
        return float(np.sum(self.rewards))

    def to_csv(self, path) -> None:
        """Columns t,x,v,action,reward; the final row carries the last state only."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "v", "action", "reward"])
            for t in range(self.n_steps):
                w.writerow(
                    [
                        t,
                        "%.17g" % self.xs[t],
                        "%.17g" % self.vs[t],
                        "%.17g" % self.actions[t],
                        "%.17g" % self.rewards[t],
                    ]
                )
            w.writerow([self.n_steps, "%.17g" % self.xs[-1], "%.17g" % self.vs[-1], "", ""])

    @classmethod
    def from_csv(cls, path, terminated: bool | None = None) -> "Trajectory":
        xs, vs, acts, rews = [], [], [], []
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        for row in rows:
            xs.append(float(row["x"]))
            vs.append(float(row["v"]))
            if row["action"] != "":
                acts.append(float(row["action"]))
                rews.append(float(row["reward"]))
        if terminated is None:
            terminated = bool(rews) and rews[-1] > 50.0
        return cls(
            xs=np.asarray(xs),
            vs=np.asarray(vs),
            actions=np.asarray(acts),
            rewards=np.asarray(rews),
            terminated=terminated,
        )


def rewards_from_actions(actions: np.ndarray, terminated: bool) -> np.ndarray:
    """Mountain-car rewards implied by the applied actions."""
    r = -0.1 * np.asarray(actions, dtype=float) ** 2
    if terminated and len(r):
        r[-1] += 100.0
    return r


def mc_rollout(
    policy: Callable[[float, float], float],
    x0: float | McState,
    params: McParams = MC_DEFAULT,
    max_steps: int | None = None,
) -> Trajectory:
    """Generic (pure-Python) rollout of a state-feedback policy pi(x, v) -> action."""
    state = x0 if isinstance(x0, McState) else McState(x=float(x0), v=0.0, t=0)
    if max_steps is None:
        max_steps = params.t_max
    xs = [state.x]
    vs = [state.v]
    acts: list[float] = []
    rews: list[float] = []
    terminated = False
    for _ in range(max_steps):
        res = mc_step(state, policy(state.x, state.v), params)
        state = res.state
        xs.append(state.x)
        vs.append(state.v)
        acts.append(res.action)
        rews.append(res.reward)
        if res.terminated:
            terminated = True
            break
    return Trajectory(
        xs=np.asarray(xs),
        vs=np.asarray(vs),
        actions=np.asarray(acts),
        rewards=np.asarray(rews),
        terminated=terminated,
    )


# ---------------------------------------------------------------------------
# Pendulum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PendulumParams:
    max_torque: float = 2.0
    dt: float = 0.05
    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    max_speed: float = 8.0
    t_max: int = 200

    def __post_init__(self):
        if min(self.max_torque, self.dt, self.gravity, self.mass, self.length, self.max_speed) <= 0:
            raise ConfigError("pendulum parameters must be positive")


PENDULUM_DEFAULT = PendulumParams()


@dataclass(frozen=True)
class PendulumState:
    theta: float  # wrapped to (-pi, pi]
    theta_dot: float
    t: int = 0


def pendulum_reset(seed: int, params: PendulumParams = PENDULUM_DEFAULT) -> PendulumState:
    rng = np.random.Generator(np.random.Philox(seed))
    th = float(rng.uniform(-math.pi, math.pi))
    thdot = float(rng.uniform(-1.0, 1.0))
    return PendulumState(theta=th, theta_dot=thdot, t=0)


def pendulum_obs(state: PendulumState, params: PendulumParams = PENDULUM_DEFAULT) -> np.ndarray:
    return np.array(
        [math.cos(state.theta), math.sin(state.theta), state.theta_dot / params.max_speed]
    )


def pendulum_step(
    state: PendulumState, torque: float, params: PendulumParams = PENDULUM_DEFAULT
) -> StepResult:
    u = float(torque)
    if u > params.max_torque:
        u = params.max_torque
    elif u < -params.max_torque:
        u = -params.max_torque
    th2, thdot2, reward = kernels._pend_step_core(
        state.theta,
        state.theta_dot,
        u,
        params.gravity,
        params.mass,
        params.length,
        params.dt,
        params.max_speed,
    )
    return StepResult(
        state=PendulumState(theta=float(th2), theta_dot=float(thdot2), t=state.t + 1),
        reward=float(reward),
        terminated=False,
        wall_hit=False,
        action=u,
    )


def pendulum_rollout(
    policy: Callable[[np.ndarray], float],
    state: PendulumState,
    params: PendulumParams = PENDULUM_DEFAULT,
) -> Trajectory:
    """Generic rollout; the policy maps the (cos, sin, scaled speed) observation to a torque."""
    ths = [state.theta]
    thds = [state.theta_dot]
    acts: list[float] = []
    rews: list[float] = []
    for _ in range(params.t_max):
        res = pendulum_step(state, policy(pendulum_obs(state, params)), params)
        state = res.state
        ths.append(state.theta)
        thds.append(state.theta_dot)
        acts.append(res.action)
        rews.append(res.reward)
    return Trajectory(
        xs=np.asarray(ths),
        vs=np.asarray(thds),
        actions=np.asarray(acts),
        rewards=np.asarray(rews),
        terminated=False,
    )
