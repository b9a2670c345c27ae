"""Closed-loop optimal-control analysis for the discrete mountain-car benchmark.

The environment conserves an exact mechanical-energy bookkeeping: along the
unrolled arc-length coordinate xi (cumulative |dx|), the gravitational
potential U_g(x) = (g/3)(sin 3x - sin 3x0) and an accumulated action potential
U_a(xi) balance the kinetic energy, so trajectories can be analysed as motion
in a combined potential with total energy zero.

A velocity-proportional controller alpha = clamp(C * v, +-1) pumps energy on
every stroke (alpha * v >= 0).  Two trajectory families reach the goal:

* single-phase: pump up the oscillation until a rightward stroke crests the
  goal hill, never touching the left wall;
* two-phase: pump leftwards until the wall at x_min is reached (ideally at
  zero impact speed, since the inelastic wall discards kinetic energy), then
  launch from (x_min, 0) and climb to the goal in one stroke.

This module provides the potential/stroke machinery, bisection searches for
the smallest workable gain C per stroke count, the golden-section trade-off
over the wall-impact speed when the zero-impact schedule exceeds the step
budget, the fixed worst-case feedback policy and its per-start optimal
variant, the elliptic-integral small-oscillation period, and a feasibility
probe for alternative wall placements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import kernels
from .env import MC_DEFAULT, McParams, Trajectory, rewards_from_actions
from .errors import ConfigError, DomainError, SearchError

__all__ = [
    "X_HAT",
    "C_PHASE1_WORST",
    "C_PHASE2_WORST",
    "BOOT_RADIUS",
    "BOOT_ACTION",
    "K_MAX",
    "C_TOL",
    "V_WALL_TOL",
    "WorstCasePolicyParams",
    "PotentialModel",
    "StrokeDecomposition",
    "AnalyticSolution",
    "PhasePolicy",
    "RolloutInfo",
    "u_gravity",
    "unrolled_coordinate",
    "proportional_policy",
    "rollout_phase",
    "stroke_decompose",
    "goal_energy_residual",
    "loss_pair",
    "loss_spatial",
    "solve_phase2",
    "solve_single_phase",
    "solve_two_phase",
    "make_pi_ana",
    "pi_opt_x0",
    "oscillation_period",
    "continuous_free_oscillation",
    "continuous_prop_rollout",
    "wall_feasibility",
    "feasibility_scan",
    "benchmark_variants",
]

# Equilibrium of the gravitational potential (bottom of the valley).
X_HAT = -math.pi / 6.0

# Fixed gains of the worst-case-start feedback policy.
C_PHASE1_WORST = 4.3346
C_PHASE2_WORST = 4.8358

# Kick applied near the equilibrium so the policy leaves it from rest.
BOOT_RADIUS = 0.01
BOOT_ACTION = 0.1

# Search limits.
K_MAX = 60
C_TOL = 1e-8
V_WALL_TOL = 1e-6
C_LO = 1e-3
C_HI = 16.0
C_CAP = 1024.0
_COARSE_POINTS = 160

_EMPTY = np.empty(0, dtype=np.float64)
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# Potentials and the unrolled coordinate
# ---------------------------------------------------------------------------


def u_gravity(x, x0: float, g: float = MC_DEFAULT.gravity):
    """Gravitational potential (g/3)(sin 3x - sin 3x0), zero at the start."""
    return (g / 3.0) * (np.sin(3.0 * np.asarray(x, dtype=float)) - math.sin(3.0 * x0))


def unrolled_coordinate(xs: np.ndarray) -> np.ndarray:
    """Cumulative arc length xi_t = sum of |x_{s+1} - x_s| (non-decreasing)."""
    xs = np.asarray(xs, dtype=float)
    if xs.size == 0:
        raise DomainError("cannot unroll an empty position array")
    return np.concatenate(([0.0], np.cumsum(np.abs(np.diff(xs)))))


@dataclass(frozen=True)
class PotentialModel:
    """Energy bookkeeping for a trajectory relative to its start.

    The total energy E = v^2/2 + U_g(x) + U_a(xi) is zero by construction:
    U_a is defined as the balance term, and its monotone decrease (whenever
    the action is aligned with the motion) is the substantive invariant.
    """

    x0: float
    params: McParams = MC_DEFAULT

    def u_g(self, x):
        return u_gravity(x, self.x0, self.params.gravity)

    def action_potential(self, traj: Trajectory) -> tuple[np.ndarray, np.ndarray]:
        """Return (xi, U_a(xi)) sampled at every recorded state."""
        xi = unrolled_coordinate(traj.xs)
        u_a = -(0.5 * traj.vs**2 + self.u_g(traj.xs))
        return xi, u_a

    def total_energy(self, traj: Trajectory) -> np.ndarray:
        xi, u_a = self.action_potential(traj)
        return 0.5 * traj.vs**2 + self.u_g(traj.xs) + u_a


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


def proportional_policy(c: float) -> Callable[[float, float], float]:
    """The feedback law alpha = clamp(C * v, -1, 1); a pure function of v."""
    if c < 0.0:
        raise ConfigError(f"proportional gain must be non-negative, got {c}")

    def policy(x: float, v: float) -> float:
        return float(min(1.0, max(-1.0, c * v)))

    return policy


@dataclass
class PhasePolicy:
    """Velocity-proportional feedback with a phase boundary and a boot kick.

    Action = sign(v) * max(C|v|, boot), where C = c_in when (x, v) lies on or
    above the boundary polyline (rightward motion only, ties inside), c_out
    otherwise, and boot = boot_action inside |x - boot centre| <= radius
    (encoded as [boot_lo, boot_hi]).  At v == 0 inside the boot band the kick
    is +boot_action so the car leaves the equilibrium.  Output in [-1, 1].
    """

    c_out: float
    c_in: float = 0.0
    boundary_x: np.ndarray = field(default_factory=lambda: _EMPTY)
    boundary_v: np.ndarray = field(default_factory=lambda: _EMPTY)
    boot_lo: float = 0.0
    boot_hi: float = 0.0
    boot_action: float = 0.0

    def __post_init__(self):
        self.boundary_x = np.ascontiguousarray(self.boundary_x, dtype=np.float64)
        self.boundary_v = np.ascontiguousarray(self.boundary_v, dtype=np.float64)
        if self.c_out < 0.0 or self.c_in < 0.0 or self.boot_action < 0.0:
            raise ConfigError("policy gains and boot action must be non-negative")
        if self.boundary_x.shape != self.boundary_v.shape or self.boundary_x.ndim != 1:
            raise ConfigError("boundary arrays must be 1-D and of equal length")
        if self.boundary_x.size >= 2 and not np.all(np.diff(self.boundary_x) > 0):
            raise ConfigError("boundary x-samples must be strictly increasing")
        if self.boot_lo > self.boot_hi:
            raise ConfigError("empty boot band: boot_lo > boot_hi")

    @classmethod
    def pure(cls, c: float) -> "PhasePolicy":
        return cls(c_out=c, c_in=c)

    def __call__(self, x: float, v: float) -> float:
        a = kernels._phase_prop_action(
            float(x),
            float(v),
            self.c_out,
            self.c_in,
            self.boundary_x,
            self.boundary_v,
            self.boot_lo,
            self.boot_hi,
            self.boot_action,
        )
        return float(min(1.0, max(-1.0, a)))


@dataclass(frozen=True)
class RolloutInfo:
    """Side-channel facts from a kernel rollout."""

    status: int
    loss: float
    v_wall: float  # signed velocity at first wall contact, before the reset
    wall_t: int  # step index of first wall contact (-1 if none)
    strokes: int


def _traj_from_kernel(xs, vs, acts, status) -> Trajectory:
    terminated = status == kernels.STATUS_GOAL
    return Trajectory(
        xs=np.asarray(xs),
        vs=np.asarray(vs),
        actions=np.asarray(acts),
        rewards=rewards_from_actions(acts, terminated),
        terminated=terminated,
    )


def rollout_phase(
    policy: PhasePolicy,
    x0: float,
    v0: float = 0.0,
    params: McParams = MC_DEFAULT,
    max_steps: Optional[int] = None,
    stop_on_wall: bool = False,
) -> tuple[Trajectory, RolloutInfo]:
    """Fast kernel rollout of a PhasePolicy from (x0, v0)."""
    if max_steps is None:
        max_steps = params.t_max
    xs, vs, acts, status, loss, v_wall, wall_t, strokes = kernels.mc_prop_rollout(
        float(x0),
        float(v0),
        policy.c_out,
        policy.c_in,
        policy.boundary_x,
        policy.boundary_v,
        policy.boot_lo,
        policy.boot_hi,
        policy.boot_action,
        params.a_max,
        params.gravity,
        params.x_min,
        params.x_max,
        params.v_max,
        params.x_goal,
        params.v_goal,
        int(max_steps),
        1 if stop_on_wall else 0,
    )
    info = RolloutInfo(
        status=int(status),
        loss=float(loss),
        v_wall=float(v_wall),
        wall_t=int(wall_t),
        strokes=int(strokes),
    )
    return _traj_from_kernel(xs, vs, acts, status), info


def _prop_raw(
    c: float,
    x0: float,
    v0: float,
    params: McParams,
    max_steps: int,
    stop_on_wall: bool,
):
    """Raw kernel rollout of the pure proportional law (no boundary, no boot)."""
    return kernels.mc_prop_rollout(
        float(x0),
        float(v0),
        float(c),
        float(c),
        _EMPTY,
        _EMPTY,
        0.0,
        0.0,
        0.0,
        params.a_max,
        params.gravity,
        params.x_min,
        params.x_max,
        params.v_max,
        params.x_goal,
        params.v_goal,
        int(max_steps),
        1 if stop_on_wall else 0,
    )


def _search_rollout(
    c: float,
    x0: float,
    params: McParams,
    max_steps: int,
    stop_on_wall: bool,
    wc: "WorstCasePolicyParams",
    bnd: Optional[tuple[np.ndarray, np.ndarray]] = None,
    c_in: Optional[float] = None,
):
    """Raw kernel rollout of the deployed feedback form used by the gain
    searches: gain c outside, the launch gain inside the boundary region (when
    a boundary is given), and the boot kick near the equilibrium.

    The kick matters: it carries the car through the low-speed band around the
    equilibrium in far fewer strokes than the bare proportional law, and the
    searched gains are only meaningful for the policy as deployed.
    """
    bx, bv = bnd if bnd is not None else (_EMPTY, _EMPTY)
    return kernels.mc_prop_rollout(
        float(x0),
        0.0,
        float(c),
        float(c if c_in is None else c_in),
        bx,
        bv,
        wc.x_hat - wc.boot_radius,
        wc.x_hat + wc.boot_radius,
        wc.boot_action,
        params.a_max,
        params.gravity,
        params.x_min,
        params.x_max,
        params.v_max,
        params.x_goal,
        params.v_goal,
        int(max_steps),
        1 if stop_on_wall else 0,
    )


# ---------------------------------------------------------------------------
# Stroke decomposition and energy accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrokeDecomposition:
    """Strokes of a trajectory: maximal runs of one direction of motion.

    times[i] are state indices bounding the strokes (times[0] = 0,
    times[-1] = last state); positions/xi sample x and the unrolled
    coordinate there; signs[i] is the direction of stroke i (+1 right,
    -1 left).  A wall arrival (reset to (x_min, 0)) ends a stroke at the
    wall state.
    """

    times: np.ndarray
    positions: np.ndarray
    xi: np.ndarray
    signs: np.ndarray

    @property
    def k(self) -> int:
        return len(self.signs)


def stroke_decompose(traj: Trajectory, params: McParams = MC_DEFAULT) -> StrokeDecomposition:
    n = traj.n_steps
    if n == 0:
        raise DomainError("cannot decompose an empty trajectory")
    xs, vs = traj.xs, traj.vs
    # Direction of each step; a wall-reset step counts as leftward motion.
    dirs = np.sign(vs[1:]).astype(int)
    wall_steps = (vs[1:] == 0.0) & (xs[1:] == params.x_min) & (xs[:-1] > params.x_min)
    dirs[wall_steps] = -1

    bounds = [0]
    signs = []
    cur = 0
    for t in range(n):
        d = dirs[t]
        if d == 0:
            continue
        if cur == 0:
            cur = d
            signs.append(d)
        elif d != cur:
            bounds.append(t)  # the state where the previous stroke turned
            signs.append(d)
            cur = d
    bounds.append(n)
    times = np.asarray(bounds, dtype=int)
    xi = unrolled_coordinate(xs)
    return StrokeDecomposition(
        times=times,
        positions=xs[times],
        xi=xi[times],
        signs=np.asarray(signs, dtype=int),
    )


def goal_energy_residual(traj: Trajectory, params: McParams = MC_DEFAULT) -> float:
    """Action work along xi minus the energy needed to crest at the goal.

    work = a_max * sum_t |alpha_t * v_{t+1}|; requirement = U_g(x_*) + v_*^2/2
    with the potential referenced to the trajectory's own start.  Non-negative
    (up to discretization) for any goal-reaching trajectory; near zero for the
    loss-optimal gain.
    """
    if not traj.terminated:
        raise DomainError("energy residual is defined for goal-reaching trajectories")
    work = params.a_max * float(np.sum(np.abs(traj.actions * traj.vs[1:])))
    need = float(u_gravity(traj.xs[-1], traj.xs[0], params.gravity)) + 0.5 * float(
        traj.vs[-1] ** 2
    )
    return work - need


def loss_pair(
    xs: np.ndarray, vs: np.ndarray, acts: np.ndarray, dt: float = 1.0
) -> tuple[float, float]:
    """(time-domain, spatial) action loss for a sampled trajectory.

    Time domain: sum alpha_t^2 * dt.  Spatial: sum alpha_t^2 / |v_{t+1}| *
    |dx_t|, i.e. the same integral after substituting dt = dxi / |v|; steps
    with |v| < 1e-9 fall back to the time-domain increment.
    """
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    acts = np.asarray(acts, dtype=float)
    l_time = float(np.sum(acts * acts) * dt)
    v_next = vs[1:]
    dx = np.abs(np.diff(xs))
    slow = np.abs(v_next) < 1e-9
    terms = np.where(slow, acts * acts * dt, acts * acts * dx / np.where(slow, 1.0, np.abs(v_next)))
    return l_time, float(np.sum(terms))


def loss_spatial(traj: Trajectory) -> float:
    """Spatial form of the action loss (see loss_pair); dt = 1 per step."""
    return loss_pair(traj.xs, traj.vs, traj.actions)[1]


# ---------------------------------------------------------------------------
# Bisection searches
# ---------------------------------------------------------------------------


def _bisect(pred: Callable[[float], bool], lo: float, hi: float, tol: float) -> float:
    """Smallest x in (lo, hi] with pred(x) true, assuming one crossing.

    Requires pred(lo) false and pred(hi) true; returns the true endpoint of
    the final bracket.
    """
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _coarse_gains() -> np.ndarray:
    return np.geomspace(C_LO, C_HI, _COARSE_POINTS)


def _bracket_from_scan(
    pred: Callable[[float], bool], cs: np.ndarray, flags: np.ndarray
) -> Optional[tuple[float, float]]:
    """Bracket [last-false, first-true] from a precomputed scan, extending
    the gain upward by doubling if the scan never succeeds."""
    idx = np.flatnonzero(flags)
    if idx.size:
        i = int(idx[0])
        if i == 0:
            raise SearchError(
                f"monotone bracket violated: predicate already true at C={cs[0]:g}"
            )
        return float(cs[i - 1]), float(cs[i])
    prev = float(cs[-1])
    hi = 2.0 * prev
    while hi <= C_CAP:
        if pred(hi):
            return prev, hi
        prev = hi
        hi *= 2.0
    return None


@dataclass(frozen=True)
class Phase2Result:
    """Smallest gain launching from (x_min, 0) to the goal in one stroke."""

    c: float
    trajectory: Trajectory
    loss: float
    t_star: int
    v_star: float

    @property
    def boundary(self) -> tuple[np.ndarray, np.ndarray]:
        return self.trajectory.xs, self.trajectory.vs


def solve_phase2(
    params: McParams = MC_DEFAULT,
    max_steps: Optional[int] = None,
    required: bool = True,
) -> Optional[Phase2Result]:
    """Bisection (tolerance C_TOL) for the smallest one-stroke launch gain."""
    budget = params.t_max if max_steps is None else int(max_steps)
    if budget < 1:
        if required:
            raise SearchError("launch budget must be at least one step")
        return None

    def pred(c: float) -> bool:
        _, _, _, status, _, _, _, strokes = _prop_raw(
            c, params.x_min, 0.0, params, budget, True
        )
        return status == kernels.STATUS_GOAL and strokes == 1

    cs = _coarse_gains()
    # Cheap pre-scan on a handful of points, then refine with doubling.
    probe = cs[:: _COARSE_POINTS // 16]
    flags = np.array([pred(c) for c in probe])
    bracket = _bracket_from_scan(pred, probe, flags)
    if bracket is None:
        if required:
            raise SearchError("no launch gain reaches the goal in one stroke")
        return None
    c2 = _bisect(pred, bracket[0], bracket[1], C_TOL)
    xs, vs, acts, status, loss, _, _, strokes = _prop_raw(
        c2, params.x_min, 0.0, params, budget, True
    )
    if not (status == kernels.STATUS_GOAL and strokes == 1):
        raise SearchError("launch bisection failed verification")
    return Phase2Result(
        c=c2,
        trajectory=_traj_from_kernel(xs, vs, acts, status),
        loss=float(loss),
        t_star=len(acts),
        v_star=float(vs[-1]),
    )


@lru_cache(maxsize=64)
def _solve_phase2_cached(params: McParams) -> Phase2Result:
    return solve_phase2(params)


# ---------------------------------------------------------------------------
# Solutions
# ---------------------------------------------------------------------------


@dataclass
class AnalyticSolution:
    """A goal-reaching proportional-control schedule and its metrics.

    kind "single-phase": gain c1 applied throughout, k strokes, no wall
    contact.  kind "two-phase": gain c1 until the wall (k - 1 strokes,
    impact speed v_wall), then gain c2 from (x_min, 0) to the goal in one
    stroke; boundary_x/boundary_v sample that launch trajectory.
    """

    kind: str
    x0: float
    k: int
    c1: float
    c2: Optional[float]
    v_wall: Optional[float]
    loss: float
    ret: float
    t_star: int
    v_star: float
    trajectory: Trajectory
    boundary_x: Optional[np.ndarray] = None
    boundary_v: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("single-phase", "two-phase"):
            raise ConfigError(f"unknown solution kind {self.kind!r}")
        if self.loss < 0.0:
            raise ConfigError("negative loss")
        if abs(self.ret - (100.0 - 0.1 * self.loss)) > 1e-9:
            raise ConfigError("return/loss mismatch for a goal-reaching solution")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "x0": float(self.x0),
            "k": int(self.k),
            "c1": float(self.c1),
            "c2": None if self.c2 is None else float(self.c2),
            "v_wall": None if self.v_wall is None else float(self.v_wall),
            "loss": float(self.loss),
            "return": float(self.ret),
            "t_star": int(self.t_star),
            "v_star": float(self.v_star),
        }


def _check_start(x0: float, params: McParams) -> None:
    if not (params.start_lo <= x0 <= params.start_hi):
        raise DomainError(
            f"start {x0} outside the benchmark start range "
            f"[{params.start_lo}, {params.start_hi}]"
        )
    if x0 == X_HAT:
        raise DomainError("a proportional gain cannot leave the equilibrium from rest")


def _wall_thresholds(roll, w_max: int) -> dict[int, tuple]:
    """Smallest gain that reaches the wall in at most w strokes, per w.

    Returns {w: (gain, rollout)} for every wall stroke count whose threshold
    could be anchored by a coarse scan, bisected to C_TOL, and verified to
    wall in exactly w strokes.  Thresholds ascend as w descends: a higher
    gain pumps harder and reaches the wall in fewer strokes.  The first-step
    direction from rest does not depend on the gain, so all walling rollouts
    share one stroke parity; it is read off the coarse table rather than
    assumed from the geometry.
    """
    cs = _coarse_gains()
    scan = []
    for c in cs:
        _, _, _, status, _, _, _, strokes = roll(c)
        scan.append((int(status), int(strokes)))
    scan = np.asarray(scan)
    wall_rows = scan[:, 0] == kernels.STATUS_WALL
    parities = set(int(s) % 2 for s in scan[wall_rows, 1])
    ws = [w for w in range(1, w_max + 1) if not parities or (w % 2) in parities]

    out: dict[int, tuple] = {}
    for w in ws:
        flags = wall_rows & (scan[:, 1] <= w)

        def pred(c: float, w=w) -> bool:
            _, _, _, status, _, _, _, strokes = roll(c)
            return status == kernels.STATUS_WALL and strokes <= w

        bracket = _bracket_from_scan(pred, cs, flags)
        if bracket is None:
            continue
        c_w = _bisect(pred, bracket[0], bracket[1], C_TOL)
        rolled = roll(c_w)
        if rolled[3] == kernels.STATUS_WALL and rolled[7] == w:
            out[w] = (c_w, rolled)
    return out


def solve_single_phase(
    x0: float,
    params: McParams = MC_DEFAULT,
    k_max: int = K_MAX,
    wc: Optional["WorstCasePolicyParams"] = None,
) -> Optional[AnalyticSolution]:
    """Loss-minimal single-phase schedule, or None if no stroke count works.

    Candidate gains are rolled in deployed form: proportional everywhere plus
    the boot kick near the equilibrium (no phase boundary — a single-phase
    schedule never launches from the wall).  Along the gain axis, wide wall
    windows (w strokes to the wall) are separated by narrow goal windows:
    just below the smallest gain that walls in w strokes, the would-be wall
    stroke turns short of the wall and the next stroke crests the goal, so
    gains reaching the goal in w + 1 strokes live between the wall thresholds
    for w + 2 and w strokes.  A coarse scan can anchor the wide wall windows
    but not the narrow goal windows, so each goal window is bisected between
    its two neighbouring wall thresholds; the smallest gain in the window
    that also fits the step budget is verified to use exactly k strokes, and
    the loss-minimal verified candidate wins.
    """
    _check_start(x0, params)
    if wc is None:
        wc = WorstCasePolicyParams()

    # Wall-threshold anchors are pure stroke geometry, probed without the
    # step budget; goal candidates must fit the budget.
    def roll_geom(c: float):
        return _search_rollout(c, x0, params, 4 * params.t_max, True, wc)

    def roll_budget(c: float):
        return _search_rollout(c, x0, params, params.t_max, True, wc)

    thresholds = _wall_thresholds(roll_geom, k_max + 1)

    best: Optional[AnalyticSolution] = None
    for w, (c_w, _) in sorted(thresholds.items()):
        k = w + 1
        if k > k_max:
            continue
        below = thresholds.get(w + 2)
        lo = below[0] if below is not None else C_LO
        hi = c_w - 1e-7
        if hi <= lo:
            continue

        def pred(c: float, k=k) -> bool:
            _, _, _, status, _, _, wall_t, strokes = roll_budget(c)
            return status == kernels.STATUS_GOAL and wall_t < 0 and strokes <= k

        if not pred(hi):
            continue  # no goal window under this threshold (or too slow)
        c_k = lo if pred(lo) else _bisect(pred, lo, hi, C_TOL)
        xs, vs, acts, status, loss, _, wall_t, strokes = roll_budget(c_k)
        if not (status == kernels.STATUS_GOAL and wall_t < 0 and strokes == k):
            continue
        if best is None or loss < best.loss:
            best = AnalyticSolution(
                kind="single-phase",
                x0=x0,
                k=k,
                c1=c_k,
                c2=None,
                v_wall=None,
                loss=float(loss),
                ret=100.0 - 0.1 * float(loss),
                t_star=len(acts),
                v_star=float(vs[-1]),
                trajectory=_traj_from_kernel(xs, vs, acts, status),
            )
    return best


def _stitch(xs1, vs1, acts1, p2: Phase2Result) -> Trajectory:
    xs = np.concatenate([xs1, p2.trajectory.xs[1:]])
    vs = np.concatenate([vs1, p2.trajectory.vs[1:]])
    acts = np.concatenate([acts1, p2.trajectory.actions])
    return Trajectory(
        xs=xs, vs=vs, actions=acts, rewards=rewards_from_actions(acts, True), terminated=True
    )


def _two_phase_candidate(
    x0: float, w: int, xs1, vs1, acts1, loss1: float, v_impact: float, p2: Phase2Result
) -> AnalyticSolution:
    traj = _stitch(xs1, vs1, acts1, p2)
    loss = float(loss1) + p2.loss
    return AnalyticSolution(
        kind="two-phase",
        x0=x0,
        k=w + 1,
        c1=float("nan"),  # caller fills in
        c2=p2.c,
        v_wall=abs(float(v_impact)),
        loss=loss,
        ret=100.0 - 0.1 * loss,
        t_star=traj.n_steps,
        v_star=float(traj.vs[-1]),
        trajectory=traj,
        boundary_x=p2.trajectory.xs,
        boundary_v=p2.trajectory.vs,
    )


def solve_two_phase(
    x0: float,
    params: McParams = MC_DEFAULT,
    k_max: int = K_MAX,
    wc: Optional["WorstCasePolicyParams"] = None,
) -> Optional[AnalyticSolution]:
    """Loss-minimal two-phase schedule, or None if no stroke count works.

    Phase 2 is solved once per parameter set.  Phase-1 gains are rolled in
    deployed form — proportional outside, the phase-2 launch gain inside its
    boundary region, boot kick near the equilibrium — so the searched gain is
    the one the stitched feedback policy actually uses.  For each admissible
    wall stroke count w the smallest gain reaching the wall in at most w
    strokes is bisected (its impact speed is then ~0); stroke geometry is
    probed without the step budget, which is enforced on the stitched
    schedule.  If the combined schedule exceeds the budget, a golden-section
    search over the wall-impact speed (tolerance V_WALL_TOL) trades phase-1
    pumping against a faster, higher-gain launch that still fits.
    """
    _check_start(x0, params)
    if wc is None:
        wc = WorstCasePolicyParams()
    p2 = _solve_phase2_cached(params)
    bnd = (p2.trajectory.xs, p2.trajectory.vs)
    cap = 4 * params.t_max

    def roll(c: float, max_steps: int = cap):
        return _search_rollout(c, x0, params, max_steps, True, wc, bnd=bnd, c_in=p2.c)

    thresholds = _wall_thresholds(roll, k_max - 1)

    candidates: list[AnalyticSolution] = []
    prev_c_star: Optional[float] = None
    branches_left = 2
    for w, (c_w, rolled) in sorted(thresholds.items()):
        xs1, vs1, acts1, _, loss1, v_wall, _, _ = rolled
        c_top = prev_c_star if prev_c_star is not None else C_HI
        prev_c_star = c_w
        tau = len(acts1)
        if tau + p2.t_star <= params.t_max:
            cand = _two_phase_candidate(x0, w, xs1, vs1, acts1, loss1, v_wall, p2)
            cand.c1 = c_w
            candidates.append(cand)
        else:
            if branches_left > 0:
                branches_left -= 1
                cand = _impact_branch(x0, w, c_w, c_top, params, roll)
                if cand is not None:
                    candidates.append(cand)
            if branches_left == 0:
                break

    if not candidates:
        return None
    return min(candidates, key=lambda s: s.loss)


def _impact_branch(
    x0: float, w: int, c_lo: float, c_hi: float, params: McParams, roll
) -> Optional[AnalyticSolution]:
    """Golden-section over the wall-impact speed for a step-budgeted schedule.

    Within the gain window [c_lo, c_hi) the wall is reached in at most w
    strokes and the impact speed grows monotonically with the gain, so the
    smallest gain with impact speed >= v is found by bisection; the remaining
    steps budget the launch.  Phase-1 rollouts here are capped at the step
    budget outright — a phase 1 that alone overruns it can never fit.
    """
    cache: dict[float, Optional[tuple]] = {}

    def attempt(vw: float) -> Optional[tuple]:
        if vw in cache:
            return cache[vw]

        def pred(c: float) -> bool:
            _, _, _, status, _, v_wall, _, strokes = roll(c, params.t_max)
            return status == kernels.STATUS_WALL and strokes <= w and -v_wall >= vw

        result = None
        if pred(c_hi):
            c1 = c_lo if pred(c_lo) else _bisect(pred, c_lo, c_hi, C_TOL)
            xs1, vs1, acts1, status, loss1, v_wall, _, strokes = roll(c1, params.t_max)
            if status == kernels.STATUS_WALL and strokes <= w and -v_wall >= vw - 1e-9:
                budget = params.t_max - len(acts1)
                p2b = solve_phase2(params, max_steps=budget, required=False)
                if p2b is not None:
                    result = (float(loss1) + p2b.loss, c1, xs1, vs1, acts1, loss1, v_wall, p2b)
        cache[vw] = result
        return result

    def objective(vw: float) -> float:
        r = attempt(vw)
        return math.inf if r is None else r[0]

    a, b = 0.0, params.v_max
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > V_WALL_TOL:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = objective(d)
    best = attempt(0.5 * (a + b))
    for vw in cache:
        r = cache[vw]
        if r is not None and (best is None or r[0] < best[0]):
            best = r
    if best is None:
        return None
    _, c1, xs1, vs1, acts1, loss1, v_wall, p2b = best
    cand = _two_phase_candidate(x0, w, xs1, vs1, acts1, loss1, v_wall, p2b)
    cand.c1 = c1
    return cand


# ---------------------------------------------------------------------------
# Deployed feedback policies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WorstCasePolicyParams:
    """Constants of the fixed (start-independent) feedback policy."""

    c_phase2: float = C_PHASE2_WORST
    c_phase1: float = C_PHASE1_WORST
    x_hat: float = X_HAT
    boot_radius: float = BOOT_RADIUS
    boot_action: float = BOOT_ACTION

    def __post_init__(self):
        if min(self.c_phase2, self.c_phase1, self.boot_radius, self.boot_action) <= 0:
            raise ConfigError("policy constants must be positive")
        if self.c_phase2 <= self.c_phase1:
            raise ConfigError("the launch gain must exceed the pumping gain")


def _phase_boundary(c_boundary: float, params: McParams) -> tuple[np.ndarray, np.ndarray]:
    """Launch trajectory from (x_min, 0) at the given gain, verified to reach
    the goal in one stroke; its states sample the phase boundary polyline."""
    xs, vs, _, status, _, _, _, strokes = _prop_raw(
        c_boundary, params.x_min, 0.0, params, params.t_max, True
    )
    if not (status == kernels.STATUS_GOAL and strokes == 1):
        raise SearchError(
            f"gain {c_boundary} does not launch from the wall to the goal in one stroke"
        )
    return np.asarray(xs), np.asarray(vs)


def make_pi_ana(
    wc: WorstCasePolicyParams = WorstCasePolicyParams(),
    params: McParams = MC_DEFAULT,
) -> PhasePolicy:
    """The fixed feedback policy: launch gain inside the phase-2 region,
    pumping gain elsewhere, boot kick near the equilibrium."""
    bnd_x, bnd_v = _phase_boundary(wc.c_phase2, params)
    return PhasePolicy(
        c_out=wc.c_phase1,
        c_in=wc.c_phase2,
        boundary_x=bnd_x,
        boundary_v=bnd_v,
        boot_lo=wc.x_hat - wc.boot_radius,
        boot_hi=wc.x_hat + wc.boot_radius,
        boot_action=wc.boot_action,
    )


def pi_opt_x0(
    x0: float,
    params: McParams = MC_DEFAULT,
    wc: WorstCasePolicyParams = WorstCasePolicyParams(),
    k_max: int = K_MAX,
) -> tuple[PhasePolicy, AnalyticSolution]:
    """Per-start feedback policy built from the two-phase schedule for x0."""
    sol = solve_two_phase(x0, params, k_max, wc)
    if sol is None:
        raise SearchError(f"no two-phase schedule found for start {x0}")
    policy = PhasePolicy(
        c_out=sol.c1,
        c_in=sol.c2,
        boundary_x=sol.boundary_x,
        boundary_v=sol.boundary_v,
        boot_lo=wc.x_hat - wc.boot_radius,
        boot_hi=wc.x_hat + wc.boot_radius,
        boot_action=wc.boot_action,
    )
    return policy, sol


# ---------------------------------------------------------------------------
# Period, continuous-time checks, feasibility, variants
# ---------------------------------------------------------------------------


def _agm(a: float, b: float) -> float:
    while abs(a - b) > 1e-15 * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return 0.5 * (a + b)


def oscillation_period(x0: float, g: float = MC_DEFAULT.gravity) -> float:
    """Continuous-time free-oscillation period T = (4/sqrt(3g)) K(sin(a/2)),
    a = 3 x0 + pi/2, with K evaluated by the arithmetic-geometric mean."""
    alpha = 3.0 * x0 + math.pi / 2.0
    m = math.sin(0.5 * alpha)
    if abs(m) >= 1.0:
        raise DomainError(
            f"start {x0} is not strictly between the potential's turning points"
        )
    k_complete = math.pi / (2.0 * _agm(1.0, math.sqrt(1.0 - m * m)))
    return 4.0 / math.sqrt(3.0 * g) * k_complete


def continuous_free_oscillation(
    x0: float,
    h: float = 1e-3,
    params: McParams = MC_DEFAULT,
    max_time: float = 400.0,
) -> tuple[float, float, float]:
    """(first half-period, full period, max |energy| drift) of the zero-action
    continuous dynamics from rest at x0, integrated with RK4 at step h."""
    t_half, t_full, e_max = kernels.rk4_free_crossings(
        float(x0), params.gravity, float(h), float(max_time)
    )
    if t_full < 0.0:
        raise SearchError("no full oscillation within the integration window")
    return float(t_half), float(t_full), float(e_max)


def continuous_prop_rollout(
    x0: float,
    c: float,
    h: float = 1e-3,
    params: McParams = MC_DEFAULT,
    max_time: float = 2000.0,
):
    """Continuous-time rollout of alpha = clamp(C v) from rest; returns
    (xs, vs, acts, n_samples) sampled at step h."""
    xs, vs, acts, n = kernels.rk4_prop_rollout(
        float(x0),
        float(c),
        params.gravity,
        params.a_max,
        float(h),
        params.x_goal,
        float(max_time),
    )
    return xs[: n + 1], vs[: n + 1], acts[:n], int(n)


def wall_feasibility(
    x_wall: float, params: McParams = MC_DEFAULT, max_steps: int = 5000
) -> bool:
    """Whether the goal is reachable with the left wall moved to x_wall.

    The wall caps the energy attainable on the left side at U_g(x_wall) (any
    impact discards kinetic energy), so the problem is solvable exactly when
    a single full-throttle stroke from rest at the wall crests the goal.
    """
    if x_wall >= params.x_goal:
        raise DomainError("the wall must sit left of the goal")
    _, _, _, status, _, _, _, _ = kernels.mc_const_rollout(
        float(x_wall),
        0.0,
        1.0,
        params.a_max,
        params.gravity,
        float(x_wall),
        params.x_max,
        params.v_max,
        params.x_goal,
        params.v_goal,
        int(max_steps),
        1,
    )
    return status == kernels.STATUS_GOAL


def feasibility_scan(
    params: McParams = MC_DEFAULT,
    lo: float = -0.75,
    hi: float = 0.40,
    resolution: float = 1e-3,
) -> tuple[float, float]:
    """(leftmost, rightmost) infeasible wall position on a uniform grid."""
    grid = np.arange(lo, hi + 0.5 * resolution, resolution)
    feasible = np.array([wall_feasibility(float(x), params) for x in grid])
    infeasible = np.flatnonzero(~feasible)
    if infeasible.size == 0:
        raise SearchError("no infeasible wall position inside the scanned range")
    if infeasible[0] == 0 or infeasible[-1] == len(grid) - 1:
        raise SearchError("scan range does not bracket the infeasible interval")
    return float(grid[infeasible[0]]), float(grid[infeasible[-1]])


def benchmark_variants(base: McParams = MC_DEFAULT, **overrides) -> McParams:
    """Parameter variants (moved wall, tighter speed cap, ...) with all
    environment invariants re-checked; the empty override is the identity."""
    return base.replace(**overrides)
