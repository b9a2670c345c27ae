"""Hot numerical kernels: environment rollouts, scalar Chebyshev evaluation, RK4 probes.

Every kernel is written as a plain scalar-loop function and JIT-compiled with numba
when available.  Setting the environment variable ``CHEBYRL_NUMBA=0`` (or running
without numba installed) selects the interpreted fallback.  Both paths execute the
identical statements in the identical order, so results are bit-for-bit equal.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env flag instead
    njit = None
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("CHEBYRL_NUMBA", "1") != "0"

_JIT_KWARGS = {"cache": True, "fastmath": False, "nogil": True}


def _jit(fn):
    if USE_NUMBA:
        return njit(**_JIT_KWARGS)(fn)
    return fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# rollout status codes
STATUS_DIVERGED = -1
STATUS_TRUNCATED = 0
STATUS_GOAL = 1
STATUS_WALL = 2


# ---------------------------------------------------------------------------
# Chebyshev evaluation (scalar, used inside rollout loops)
# ---------------------------------------------------------------------------


@_jit
def _cheby_t_row(z, d, out):
    out[0] = 1.0
    if d >= 1:
        out[1] = z
        for i in range(2, d + 1):
            out[i] = 2.0 * z * out[i - 1] - out[i - 2]


@_jit
def _scale01(x, lo, hi):
    z = 2.0 * (x - lo) / (hi - lo) - 1.0
    if z < -1.0:
        z = -1.0
    elif z > 1.0:
        z = 1.0
    return z


@_jit
def cheby_eval_2d(coeffs, d, z0, z1):
    t0 = np.empty(d + 1)
    t1 = np.empty(d + 1)
    _cheby_t_row(z0, d, t0)
    _cheby_t_row(z1, d, t1)
    s = 0.0
    for i in range(d + 1):
        acc = 0.0
        row = i * (d + 1)
        for j in range(d + 1):
            acc += coeffs[row + j] * t1[j]
        s += t0[i] * acc
    return s


@_jit
def cheby_eval_3d(coeffs, d, z0, z1, z2):
    t0 = np.empty(d + 1)
    t1 = np.empty(d + 1)
    t2 = np.empty(d + 1)
    _cheby_t_row(z0, d, t0)
    _cheby_t_row(z1, d, t1)
    _cheby_t_row(z2, d, t2)
    s = 0.0
    for i in range(d + 1):
        acc_i = 0.0
        for j in range(d + 1):
            acc_j = 0.0
            row = (i * (d + 1) + j) * (d + 1)
            for k in range(d + 1):
                acc_j += coeffs[row + k] * t2[k]
            acc_i += t1[j] * acc_j
        s += t0[i] * acc_i
    return s


# ---------------------------------------------------------------------------
# Mountain-car dynamics
# ---------------------------------------------------------------------------


@_jit
def _mc_step_core(x, v, a, a_max, g, x_min, x_max, v_max, x_goal, v_goal):
    """One transition with an already-clamped action.

    Returns (x', v', v_pre, wall_hit, terminated) where v_pre is the clipped
    velocity before the inelastic wall reset.
    """
    v2 = v + a_max * a - g * math.cos(3.0 * x)
    if v2 > v_max:
        v2 = v_max
    elif v2 < -v_max:
        v2 = -v_max
    x2 = x + v2
    if x2 > x_max:
        x2 = x_max
    if x2 < x_min:
        x2 = x_min
    v_pre = v2
    wall = 1 if (x2 == x_min and v2 < 0.0) else 0
    if wall == 1:
        v2 = 0.0
    term = 1 if (x2 >= x_goal and v2 >= v_goal) else 0
    return x2, v2, v_pre, wall, term


@_jit
def _phase_prop_action(x, v, c_out, c_in, bnd_x, bnd_v, boot_lo, boot_hi, boot_a):
    """Velocity-proportional action with an optional phase boundary and boot kick.

    The action is sign(v) * max(C|v|, boot) with C = c_in when (x, v) lies on or
    above the boundary polyline (rightward motion only), c_out otherwise.  At
    v == 0 inside the boot band the kick is positive.
    """
    c = c_out
    nb = bnd_x.shape[0]
    if nb > 0 and v >= 0.0 and x >= bnd_x[0] and x <= bnd_x[nb - 1]:
        vb = np.interp(x, bnd_x, bnd_v)
        if v >= vb:
            c = c_in
    mag = c * (v if v >= 0.0 else -v)
    in_boot = boot_a > 0.0 and x >= boot_lo and x <= boot_hi
    if in_boot and mag < boot_a:
        mag = boot_a
    if v > 0.0:
        return mag
    if v < 0.0:
        return -mag
    return boot_a if in_boot else 0.0


@_jit
def mc_prop_rollout(
    x0,
    v0,
    c_out,
    c_in,
    bnd_x,
    bnd_v,
    boot_lo,
    boot_hi,
    boot_a,
    a_max,
    g,
    x_min,
    x_max,
    v_max,
    x_goal,
    v_goal,
    max_steps,
    stop_on_wall,
):
    """Roll out the phase-proportional policy.

    Returns (xs, vs, actions, status, loss, v_wall, wall_t, strokes).  v_wall is
    the signed pre-reset velocity at the first wall contact (0 if none), wall_t
    the step count at that contact (-1 if none).
    """
    xs = np.empty(max_steps + 1)
    vs = np.empty(max_steps + 1)
    acts = np.empty(max_steps)
    xs[0] = x0
    vs[0] = v0
    x = x0
    v = v0
    loss = 0.0
    strokes = 0
    sdir = 0
    status = STATUS_TRUNCATED
    t_end = max_steps
    v_wall = 0.0
    wall_t = -1
    for t in range(max_steps):
        a = _phase_prop_action(x, v, c_out, c_in, bnd_x, bnd_v, boot_lo, boot_hi, boot_a)
        if a > 1.0:
            a = 1.0
        elif a < -1.0:
            a = -1.0
        x2, v2, v_pre, wall, term = _mc_step_core(
            x, v, a, a_max, g, x_min, x_max, v_max, x_goal, v_goal
        )
        acts[t] = a
        loss += a * a
        xs[t + 1] = x2
        vs[t + 1] = v2
        vv = v_pre if wall == 1 else v2
        if vv != 0.0:
            s = 1 if vv > 0.0 else -1
            if sdir == 0:
                sdir = s
                strokes = 1
            elif s != sdir:
                strokes += 1
                sdir = s
        if wall == 1 and wall_t < 0:
            v_wall = v_pre
            wall_t = t + 1
        x = x2
        v = v2
        if term == 1:
            status = STATUS_GOAL
            t_end = t + 1
            break
        if stop_on_wall == 1 and wall == 1:
            status = STATUS_WALL
            t_end = t + 1
            break
    return xs[: t_end + 1], vs[: t_end + 1], acts[:t_end], status, loss, v_wall, wall_t, strokes


@_jit
def mc_const_rollout(
    x0,
    v0,
    a_const,
    a_max,
    g,
    x_min,
    x_max,
    v_max,
    x_goal,
    v_goal,
    max_steps,
    stop_on_turn,
):
    """Roll out a constant action.  Same return layout as mc_prop_rollout."""
    xs = np.empty(max_steps + 1)
    vs = np.empty(max_steps + 1)
    acts = np.empty(max_steps)
    xs[0] = x0
    vs[0] = v0
    x = x0
    v = v0
    loss = 0.0
    strokes = 0
    sdir = 0
    status = STATUS_TRUNCATED
    t_end = max_steps
    v_wall = 0.0
    wall_t = -1
    a = a_const
    if a > 1.0:
        a = 1.0
    elif a < -1.0:
        a = -1.0
    for t in range(max_steps):
        x2, v2, v_pre, wall, term = _mc_step_core(
            x, v, a, a_max, g, x_min, x_max, v_max, x_goal, v_goal
        )
        acts[t] = a
        loss += a * a
        xs[t + 1] = x2
        vs[t + 1] = v2
        vv = v_pre if wall == 1 else v2
        if vv != 0.0:
            s = 1 if vv > 0.0 else -1
            if sdir == 0:
                sdir = s
                strokes = 1
            elif s != sdir:
                strokes += 1
                sdir = s
        if wall == 1 and wall_t < 0:
            v_wall = v_pre
            wall_t = t + 1
        x = x2
        v = v2
        if term == 1:
            status = STATUS_GOAL
            t_end = t + 1
            break
        if stop_on_turn == 1 and strokes > 1:
            status = STATUS_WALL
            t_end = t + 1
            break
    return xs[: t_end + 1], vs[: t_end + 1], acts[:t_end], status, loss, v_wall, wall_t, strokes


@_jit
def mc_cheby_rollout_det(
    coeffs,
    d,
    lo0,
    hi0,
    lo1,
    hi1,
    gain,
    x0,
    v0,
    a_max,
    g,
    x_min,
    x_max,
    v_max,
    x_goal,
    v_goal,
    max_steps,
):
    """Deterministic Chebyshev-policy rollout on mountain car.

    Returns (xs, vs, actions, status, loss).
    """
    xs = np.empty(max_steps + 1)
    vs = np.empty(max_steps + 1)
    acts = np.empty(max_steps)
    xs[0] = x0
    vs[0] = v0
    x = x0
    v = v0
    loss = 0.0
    status = STATUS_TRUNCATED
    t_end = max_steps
    for t in range(max_steps):
        z0 = _scale01(x, lo0, hi0)
        z1 = _scale01(v, lo1, hi1)
        a = gain * cheby_eval_2d(coeffs, d, z0, z1)
        if not math.isfinite(a):
            status = STATUS_DIVERGED
            t_end = t
            break
        if a > 1.0:
            a = 1.0
        elif a < -1.0:
            a = -1.0
        x2, v2, v_pre, wall, term = _mc_step_core(
            x, v, a, a_max, g, x_min, x_max, v_max, x_goal, v_goal
        )
        acts[t] = a
        loss += a * a
        xs[t + 1] = x2
        vs[t + 1] = v2
        x = x2
        v = v2
        if term == 1:
            status = STATUS_GOAL
            t_end = t + 1
            break
    return xs[: t_end + 1], vs[: t_end + 1], acts[:t_end], status, loss


@_jit
def mc_cheby_rollout_stoch(
    mu,
    d_mu,
    sig,
    d_sig,
    lo0,
    hi0,
    lo1,
    hi1,
    floor,
    gain,
    x0,
    v0,
    normals,
    a_max,
    g,
    x_min,
    x_max,
    v_max,
    x_goal,
    v_goal,
    max_steps,
):
    """Stochastic Gaussian-Chebyshev rollout consuming pre-drawn standard normals.

    Returns (xs, vs, raw, acts, rewards, status, loss) where raw holds the
    unclamped Gaussian samples used for log-probabilities.
    """
    xs = np.empty(max_steps + 1)
    vs = np.empty(max_steps + 1)
    raw = np.empty(max_steps)
    acts = np.empty(max_steps)
    rewards = np.empty(max_steps)
    xs[0] = x0
    vs[0] = v0
    x = x0
    v = v0
    loss = 0.0
    status = STATUS_TRUNCATED
    t_end = max_steps
    for t in range(max_steps):
        z0 = _scale01(x, lo0, hi0)
        z1 = _scale01(v, lo1, hi1)
        m = cheby_eval_2d(mu, d_mu, z0, z1)
        s = cheby_eval_2d(sig, d_sig, z0, z1)
        if s < floor:
            s = floor
        a_raw = m + s * normals[t]
        if not math.isfinite(a_raw):
            status = STATUS_DIVERGED
            t_end = t
            break
        a = gain * a_raw
        if a > 1.0:
            a = 1.0
        elif a < -1.0:
            a = -1.0
        x2, v2, v_pre, wall, term = _mc_step_core(
            x, v, a, a_max, g, x_min, x_max, v_max, x_goal, v_goal
        )
        raw[t] = a_raw
        acts[t] = a
        loss += a * a
        rewards[t] = -0.1 * a * a + (100.0 if term == 1 else 0.0)
        xs[t + 1] = x2
        vs[t + 1] = v2
        x = x2
        v = v2
        if term == 1:
            status = STATUS_GOAL
            t_end = t + 1
            break
    return (
        xs[: t_end + 1],
        vs[: t_end + 1],
        raw[:t_end],
        acts[:t_end],
        rewards[:t_end],
        status,
        loss,
    )


# ---------------------------------------------------------------------------
# Pendulum dynamics
# ---------------------------------------------------------------------------


@_jit
def _wrap_cost(th):
    return ((th + math.pi) % (2.0 * math.pi)) - math.pi


@_jit
def _wrap_state(th):
    w = ((th + math.pi) % (2.0 * math.pi)) - math.pi
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


@_jit
def _pend_step_core(th, thdot, u, g, m, l, dt, max_speed):
    """One pendulum transition with an already-clamped torque.

    Returns (th', thdot', reward); the cost uses the pre-update state.
    """
    w = _wrap_cost(th)
    cost = w * w + 0.1 * thdot * thdot + 0.001 * u * u
    thdot2 = thdot + (3.0 * g / (2.0 * l) * math.sin(th) + 3.0 / (m * l * l) * u) * dt
    if thdot2 > max_speed:
        thdot2 = max_speed
    elif thdot2 < -max_speed:
        thdot2 = -max_speed
    th2 = _wrap_state(th + thdot2 * dt)
    return th2, thdot2, -cost


@_jit
def pend_cheby_rollout_det(
    coeffs,
    d,
    lo,
    hi,
    gain,
    th0,
    thdot0,
    g,
    m,
    l,
    dt,
    max_speed,
    max_torque,
    max_steps,
):
    """Deterministic Chebyshev rollout on the pendulum.  Returns (ths, thdots, acts, status, ret)."""
    ths = np.empty(max_steps + 1)
    thdots = np.empty(max_steps + 1)
    acts = np.empty(max_steps)
    ths[0] = th0
    thdots[0] = thdot0
    th = th0
    thdot = thdot0
    ret = 0.0
    status = STATUS_TRUNCATED
    t_end = max_steps
    for t in range(max_steps):
        z0 = _scale01(math.cos(th), lo[0], hi[0])
        z1 = _scale01(math.sin(th), lo[1], hi[1])
        z2 = _scale01(thdot / max_speed, lo[2], hi[2])
        u = gain * cheby_eval_3d(coeffs, d, z0, z1, z2)
        if not math.isfinite(u):
            status = STATUS_DIVERGED
            t_end = t
            break
        if u > max_torque:
            u = max_torque
        elif u < -max_torque:
            u = -max_torque
        th2, thdot2, r = _pend_step_core(th, thdot, u, g, m, l, dt, max_speed)
        acts[t] = u
        ret += r
        ths[t + 1] = th2
        thdots[t + 1] = thdot2
        th = th2
        thdot = thdot2
    return ths[: t_end + 1], thdots[: t_end + 1], acts[:t_end], status, ret


@_jit
def pend_cheby_rollout_stoch(
    mu,
    d_mu,
    sig,
    d_sig,
    lo,
    hi,
    floor,
    gain,
    th0,
    thdot0,
    normals,
    g,
    m,
    l,
    dt,
    max_speed,
    max_torque,
    max_steps,
):
    """Stochastic Gaussian-Chebyshev rollout on the pendulum.

    Returns (obs, raw, acts, rewards, status) with obs of shape (t_end + 1, 3):
    the observation at every acted step plus the final state's observation.
    """
    obs = np.empty((max_steps + 1, 3))
    raw = np.empty(max_steps)
    acts = np.empty(max_steps)
    rewards = np.empty(max_steps)
    th = th0
    thdot = thdot0
    status = STATUS_TRUNCATED
    t_end = max_steps
    for t in range(max_steps):
        o0 = math.cos(th)
        o1 = math.sin(th)
        o2 = thdot / max_speed
        obs[t, 0] = o0
        obs[t, 1] = o1
        obs[t, 2] = o2
        z0 = _scale01(o0, lo[0], hi[0])
        z1 = _scale01(o1, lo[1], hi[1])
        z2 = _scale01(o2, lo[2], hi[2])
        m_val = cheby_eval_3d(mu, d_mu, z0, z1, z2)
        s_val = cheby_eval_3d(sig, d_sig, z0, z1, z2)
        if s_val < floor:
            s_val = floor
        a_raw = m_val + s_val * normals[t]
        if not math.isfinite(a_raw):
            status = STATUS_DIVERGED
            t_end = t
            break
        u = gain * a_raw
        if u > max_torque:
            u = max_torque
        elif u < -max_torque:
            u = -max_torque
        th2, thdot2, r = _pend_step_core(th, thdot, u, g, m, l, dt, max_speed)
        raw[t] = a_raw
        acts[t] = u
        rewards[t] = r
        th = th2
        thdot = thdot2
    obs[t_end, 0] = math.cos(th)
    obs[t_end, 1] = math.sin(th)
    obs[t_end, 2] = thdot / max_speed
    return obs[: t_end + 1], raw[:t_end], acts[:t_end], rewards[:t_end], status


# ---------------------------------------------------------------------------
# Continuous-time probes (validation only; searches run on the discrete dynamics)
# ---------------------------------------------------------------------------


@_jit
def rk4_free_crossings(x0, g, h, max_time):
    """RK4 on the zero-action continuous dynamics from rest.

    Returns (t_half, t_full, e_max): the first two zero crossings of the
    velocity (linearly interpolated) and the largest |energy| drift observed.
    """
    x = x0
    v = 0.0
    sin3x0 = math.sin(3.0 * x0)
    e_max = 0.0
    t = 0.0
    t1 = -1.0
    t2 = -1.0
    n = int(max_time / h)
    for i in range(n):
        k1x = v
        k1v = -g * math.cos(3.0 * x)
        k2x = v + 0.5 * h * k1v
        k2v = -g * math.cos(3.0 * (x + 0.5 * h * k1x))
        k3x = v + 0.5 * h * k2v
        k3v = -g * math.cos(3.0 * (x + 0.5 * h * k2x))
        k4x = v + h * k3v
        k4v = -g * math.cos(3.0 * (x + h * k3x))
        x_new = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v_new = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        t_new = t + h
        e = 0.5 * v_new * v_new + (g / 3.0) * (math.sin(3.0 * x_new) - sin3x0)
        if abs(e) > e_max:
            e_max = abs(e)
        if i > 0 and ((v_new > 0.0) != (v > 0.0) or v_new == 0.0):
            tc = t_new if v == v_new else t + h * (v / (v - v_new))
            if t1 < 0.0:
                t1 = tc
            else:
                t2 = tc
                return t1, t2, e_max
        x = x_new
        v = v_new
        t = t_new
    return t1, t2, e_max


@_jit
def rk4_prop_rollout(x0, c, g, a_max, h, x_goal, max_time):
    """RK4 on the continuous dynamics under alpha = clamp(c * v, -1, 1).

    Records the state and action at every step until x >= x_goal.  Returns
    (xs, vs, acts, n); acts[i] is evaluated at the step start.
    """
    n_max = int(max_time / h) + 1
    xs = np.empty(n_max + 1)
    vs = np.empty(n_max + 1)
    acts = np.empty(n_max)
    x = x0
    v = 0.0
    xs[0] = x
    vs[0] = v
    n = 0
    for i in range(n_max):
        a = c * v
        if a > 1.0:
            a = 1.0
        elif a < -1.0:
            a = -1.0
        acts[i] = a

        a1 = c * v
        if a1 > 1.0:
            a1 = 1.0
        elif a1 < -1.0:
            a1 = -1.0
        k1x = v
        k1v = a_max * a1 - g * math.cos(3.0 * x)

        v2 = v + 0.5 * h * k1v
        a2 = c * v2
        if a2 > 1.0:
            a2 = 1.0
        elif a2 < -1.0:
            a2 = -1.0
        k2x = v2
        k2v = a_max * a2 - g * math.cos(3.0 * (x + 0.5 * h * k1x))

        v3 = v + 0.5 * h * k2v
        a3 = c * v3
        if a3 > 1.0:
            a3 = 1.0
        elif a3 < -1.0:
            a3 = -1.0
        k3x = v3
        k3v = a_max * a3 - g * math.cos(3.0 * (x + 0.5 * h * k2x))

        v4 = v + h * k3v
        a4 = c * v4
        if a4 > 1.0:
            a4 = 1.0
        elif a4 < -1.0:
            a4 = -1.0
        k4x = v4
        k4v = a_max * a4 - g * math.cos(3.0 * (x + h * k3x))

        x = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
        v = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        n = i + 1
        xs[n] = x
        vs[n] = v
        if x >= x_goal:
            break
    return xs[: n + 1], vs[: n + 1], acts[:n], n
