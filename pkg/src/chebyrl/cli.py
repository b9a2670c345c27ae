"""Command-line front end tying the solver, trainers, and evaluator together.

Four subcommands share one binary:

* ``analytic``  — closed-form gain schedules and grid evaluations of the
  fixed feedback policy.
* ``train``     — best-of-N training protocols for the Chebyshev Gaussian
  policies (REINFORCE, ARS, PPO).
* ``eval``      — per-start evaluation reports and phase-plane action
  heatmaps for saved or analytic policies.
* ``bench``     — rollout throughput and Horner multiplication counts over
  a polynomial-degree sweep.

Every output directory receives exactly one ``manifest.json`` recording the
command line, a hash of the effective configuration, the base seed, the
artifact list, the tool version, and a timestamp.  ``--replay <manifest>``
re-runs the recorded command; all numeric CSV/JSON artifacts are reproduced
byte for byte (the benchmark's measured throughput column and the manifest's
own timestamp are the only non-deterministic outputs).  Wall-clock timings
are therefore kept out of the numeric artifacts.

Exit codes: 0 success, 2 usage/configuration error, 3 training failure
(every run of a protocol diverged).  Numeric output is written with full
round-trip precision; ``--pretty`` adds a rounded human-readable table on
stdout.  The environment variable ``CHEBY_SEED`` overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from .analytic import (
    PhasePolicy,
    WorstCasePolicyParams,
    make_pi_ana,
    pi_opt_x0,
    rollout_phase,
    solve_single_phase,
    solve_two_phase,
)
from .cheby import eval_horner
from .env import MC_DEFAULT
from .errors import ChebyrlError, ConfigError, DomainError
from .evalharness import (
    eval_mc,
    eval_pendulum,
    heatmap_export,
    write_density_csv,
    write_per_start_csv,
)
from .policy import GaussianChebyPolicy, PolicyInit, init_policy
from .train import (
    default_config,
    default_policy_factory,
    default_sigma_degree,
    train_protocol,
)
from .train.common import MC_BOUNDS, MountainCarSpec, PendulumSpec

# Default base seeds reproduce the shipped reference results for each
# algorithm without any extra flags (see README).
DEFAULT_SEEDS = {"reinforce": 5000, "ars": 0, "ppo": 0}

ENV_NAMES = {"mountaincar": "mountain_car", "pendulum": "pendulum"}

_FMT = "%.17g"


# ---------------------------------------------------------------------------
# Small helpers: precision, manifests, output plumbing
# ---------------------------------------------------------------------------


def _g(value: float) -> str:
    return _FMT % float(value)


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _config_hash(obj: dict) -> str:
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _write_manifest(
    out: Path,
    argv: Sequence[str],
    config: dict,
    base_seed: Optional[int],
    artifacts: Sequence[Path],
) -> None:
    manifest = {
        "command": list(argv),
        "config_hash": _config_hash(config),
        "base_seed": base_seed,
        "artifacts": sorted(p.name for p in artifacts),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _write_json(out / "manifest.json", manifest)


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_kv(pairs: list[tuple[str, object]], pretty: bool) -> None:
    if pretty:
        width = max(len(k) for k, _ in pairs)
        for key, val in pairs:
            shown = f"{val:.4f}" if isinstance(val, float) else str(val)
            print(f"{key:<{width}}  {shown}")
    else:
        for key, val in pairs:
            shown = _g(val) if isinstance(val, float) else str(val)
            print(f"{key}={shown}")


def _check_start_range(x0: float) -> None:
    lo, hi = MC_DEFAULT.start_lo, MC_DEFAULT.start_hi
    if not (lo <= x0 <= hi):
        raise DomainError(f"--x0 {x0} outside the start range [{lo}, {hi}]")


def _write_boundary_csv(path: Path, xs: np.ndarray, vs: np.ndarray) -> None:
    lines = ["x,v"]
    lines += [f"{_g(x)},{_g(v)}" for x, v in zip(xs, vs)]
    path.write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# analytic
# ---------------------------------------------------------------------------


def _solution_payload(sol) -> dict:
    return sol.to_dict()


def _opt_x0_record(x0: float) -> dict:
    _, sol = pi_opt_x0(x0)
    return _solution_payload(sol)


def _write_gain_scan(path: Path, x0: float, gain_range: str, n: int) -> None:
    """Loss/return of the deployed proportional policy over a gain sweep.

    Columns c,loss,return,goal; the policy is the single-phase candidate
    form (uniform gain plus the boot kick near the equilibrium), rolled from
    rest at x0.
    """
    try:
        lo_s, hi_s = gain_range.split("..", 1)
        lo, hi = float(lo_s), float(hi_s)
    except ValueError as exc:
        raise ConfigError(f"--gain-range expects LO..HI, got {gain_range!r}") from exc
    if n < 2 or hi <= lo or lo <= 0:
        raise ConfigError(f"--gain-scan needs n >= 2 and 0 < LO < HI")
    wc = WorstCasePolicyParams()
    lines = ["c,loss,return,goal"]
    for c in np.linspace(lo, hi, n):
        policy = PhasePolicy(
            c_out=float(c), c_in=float(c),
            boot_lo=wc.x_hat - wc.boot_radius, boot_hi=wc.x_hat + wc.boot_radius,
            boot_action=wc.boot_action,
        )
        traj, info = rollout_phase(policy, x0, stop_on_wall=True)
        lines.append(
            f"{_g(c)},{_g(info.loss)},{_g(traj.ret)},{int(traj.terminated)}"
        )
    path.write_text("\n".join(lines) + "\n")


def cmd_analytic(args: argparse.Namespace, argv: Sequence[str]) -> int:
    out = _out_dir(args)
    artifacts: list[Path] = []
    config = {
        "mode": args.mode,
        "x0": args.x0,
        "scan_x0": args.scan_x0,
        "gain_scan": args.gain_scan,
        "gain_range": args.gain_range,
    }
    pairs: list[tuple[str, object]] = [("mode", args.mode)]

    if args.gain_scan is not None and args.mode != "single":
        raise ConfigError("--gain-scan applies to --mode single only")

    if args.mode in ("single", "two"):
        if args.x0 is None:
            raise ConfigError(f"--mode {args.mode} requires --x0")
        if args.scan_x0 is not None:
            raise ConfigError("--scan-x0 applies to --mode worst or opt-x0 only")
        _check_start_range(args.x0)
        if args.gain_scan is not None:
            path = out / "gain_scan.csv"
            _write_gain_scan(path, args.x0, args.gain_range, args.gain_scan)
            artifacts.append(path)
        solver = solve_single_phase if args.mode == "single" else solve_two_phase
        sol = solver(args.x0)
        if sol is None:
            raise DomainError(f"no {args.mode}-phase schedule reaches the goal from {args.x0}")
        path = out / "solution.json"
        _write_json(path, _solution_payload(sol))
        artifacts.append(path)
        path = out / "trajectory.csv"
        sol.trajectory.to_csv(path)
        artifacts.append(path)
        if sol.boundary_x is not None:
            path = out / "boundary.csv"
            _write_boundary_csv(path, sol.boundary_x, sol.boundary_v)
            artifacts.append(path)
        pairs += [
            ("x0", float(sol.x0)),
            ("k", sol.k),
            ("c1", float(sol.c1)),
            ("c2", float("nan") if sol.c2 is None else float(sol.c2)),
            ("return", float(sol.ret)),
            ("t_star", sol.t_star),
        ]

    elif args.mode == "worst":
        wc = WorstCasePolicyParams()
        policy = make_pi_ana(wc)
        path = out / "solution.json"
        _write_json(
            path,
            {
                "kind": "worst-case",
                "c1": wc.c_phase1,
                "c2": wc.c_phase2,
                "x_hat": wc.x_hat,
                "boot_radius": wc.boot_radius,
                "boot_action": wc.boot_action,
            },
        )
        artifacts.append(path)
        path = out / "boundary.csv"
        _write_boundary_csv(path, policy.boundary_x, policy.boundary_v)
        artifacts.append(path)
        pairs += [("c1", wc.c_phase1), ("c2", wc.c_phase2)]
        if args.x0 is not None:
            _check_start_range(args.x0)
            traj, _ = rollout_phase(policy, args.x0)
            path = out / "trajectory.csv"
            traj.to_csv(path)
            artifacts.append(path)
            pairs += [("x0", args.x0), ("return", traj.ret), ("t_star", traj.t_star)]
        if args.scan_x0 is not None:
            report = eval_mc(policy, n_points=args.scan_x0, with_reference=False)
            path = out / "report.json"
            _write_json(path, report.to_dict())
            artifacts.append(path)
            path = out / "per_start.csv"
            write_per_start_csv(report, path)
            artifacts.append(path)
            stats = report.return_stats
            pairs += [
                ("n_starts", report.n_starts),
                ("mean_return", stats["mean"]),
                ("min_return", stats["min"]),
                ("max_return", stats["max"]),
            ]

    else:  # opt-x0
        if args.x0 is None and args.scan_x0 is None:
            raise ConfigError("--mode opt-x0 requires --x0 or --scan-x0")
        if args.x0 is not None:
            _check_start_range(args.x0)
            policy, sol = pi_opt_x0(args.x0)
            path = out / "solution.json"
            _write_json(path, _solution_payload(sol))
            artifacts.append(path)
            path = out / "trajectory.csv"
            sol.trajectory.to_csv(path)
            artifacts.append(path)
            path = out / "boundary.csv"
            _write_boundary_csv(path, policy.boundary_x, policy.boundary_v)
            artifacts.append(path)
            pairs += [
                ("x0", float(sol.x0)),
                ("k", sol.k),
                ("c1", float(sol.c1)),
                ("return", float(sol.ret)),
            ]
        if args.scan_x0 is not None:
            starts = np.linspace(MC_DEFAULT.start_lo, MC_DEFAULT.start_hi, args.scan_x0)
            if args.jobs > 1:
                with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                    records = list(pool.map(_opt_x0_record, starts))
            else:
                records = [_opt_x0_record(x) for x in starts]
            path = out / "scan.csv"
            lines = ["x0,return,loss,k,c1,c2,t_star,v_star"]
            for rec in records:
                lines.append(
                    ",".join(
                        [
                            _g(rec["x0"]),
                            _g(rec["return"]),
                            _g(rec["loss"]),
                            str(rec["k"]),
                            _g(rec["c1"]),
                            _g(rec["c2"]),
                            str(rec["t_star"]),
                            _g(rec["v_star"]),
                        ]
                    )
                )
            path.write_text("\n".join(lines) + "\n")
            artifacts.append(path)
            rets = np.array([rec["return"] for rec in records])
            path = out / "report.json"
            _write_json(
                path,
                {
                    "kind": "opt-x0-scan",
                    "n_starts": int(rets.size),
                    "mean_return": float(rets.mean()),
                    "min_return": float(rets.min()),
                    "max_return": float(rets.max()),
                },
            )
            artifacts.append(path)
            pairs += [
                ("n_starts", int(rets.size)),
                ("mean_return", float(rets.mean())),
                ("min_return", float(rets.min())),
                ("max_return", float(rets.max())),
            ]

    _write_manifest(out, argv, config, None, artifacts)
    _print_kv(pairs, args.pretty)
    return 0


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _load_config_overrides(cfg, path: str):
    """Apply JSON file overrides onto a config dataclass; unknown keys error.

    Returns (config, file_sets_seed) so the caller can rank seed sources.
    """
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    known = {f.name for f in dataclasses.fields(cfg)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(
            f"unknown config key(s) {', '.join(unknown)}; known keys: {', '.join(sorted(known))}"
        )
    return dataclasses.replace(cfg, **raw), "seed" in raw


def _scrub_wall_clock(obj):
    if isinstance(obj, dict):
        return {k: _scrub_wall_clock(v) for k, v in obj.items() if k != "wall_clock_s"}
    if isinstance(obj, list):
        return [_scrub_wall_clock(v) for v in obj]
    return obj


def cmd_train(args: argparse.Namespace, argv: Sequence[str]) -> int:
    env_name = ENV_NAMES[args.env]
    algo = args.algo
    d_sigma = args.sigma_degree
    if d_sigma is None:
        d_sigma = default_sigma_degree(algo, args.degree)
    if d_sigma > 3:
        raise ConfigError(f"--sigma-degree must be at most 3, got {d_sigma}")

    cfg = default_config(algo, env_name)
    file_sets_seed = False
    if args.config is not None:
        cfg, file_sets_seed = _load_config_overrides(cfg, args.config)
    env_seed = os.environ.get("CHEBY_SEED")
    if env_seed is not None:
        seed = int(env_seed)
    elif args.seed is not None:
        seed = args.seed
    elif file_sets_seed:
        seed = cfg.seed
    else:
        seed = DEFAULT_SEEDS[algo]
    cfg = dataclasses.replace(cfg, seed=seed)

    env = PendulumSpec() if env_name == "pendulum" else MountainCarSpec()
    make_policy = default_policy_factory(env_name, algo, args.degree, d_sigma)
    result = train_protocol(
        algo, env, make_policy, cfg, n_runs=args.runs, jobs=args.jobs
    )

    out = _out_dir(args)
    artifacts: list[Path] = []
    payload = _scrub_wall_clock(result.to_dict())
    payload["env"] = env_name
    payload["degree"] = args.degree
    payload["sigma_degree"] = d_sigma
    path = out / "runs.json"
    _write_json(path, payload)
    artifacts.append(path)

    if not result.failed:
        path = out / "best_policy.json"
        result.best.policy.save(path)
        artifacts.append(path)
        path = out / "learning_curve.csv"
        lines = ["update,mean_return"]
        lines += [f"{i},{_g(r)}" for i, r in enumerate(result.best.returns)]
        path.write_text("\n".join(lines) + "\n")
        artifacts.append(path)

    config_echo = dataclasses.asdict(cfg)
    config_echo.update(
        {"algo": algo, "env": env_name, "degree": args.degree, "sigma_degree": d_sigma}
    )
    _write_manifest(out, argv, config_echo, seed, artifacts)

    pairs: list[tuple[str, object]] = [
        ("algo", algo),
        ("env", env_name),
        ("degree", args.degree),
        ("runs", len(result.runs)),
        ("diverged", result.n_diverged),
        ("base_seed", seed),
    ]
    if result.failed:
        pairs.append(("failed", True))
        _print_kv(pairs, args.pretty)
        print("error: every training run diverged; see runs.json", file=sys.stderr)
        return 3
    pairs += [("best_index", result.best_index), ("best_mean", result.best_mean)]
    if args.pretty:
        _print_kv(pairs, True)
        print("run  eval_mean")
        for i, m in enumerate(result.eval_means):
            shown = "diverged" if np.isnan(m) else f"{m:.4f}"
            print(f"{i:>3}  {shown}")
    else:
        _print_kv(pairs, False)
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------


def _load_policy(path: str) -> GaussianChebyPolicy:
    try:
        return GaussianChebyPolicy.load(path)
    except OSError as exc:
        raise ConfigError(f"cannot read policy file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"policy file {path} is not valid JSON: {exc}") from exc
    except ConfigError as exc:
        raise ConfigError(f"policy file {path} failed schema validation: {exc}") from exc


def cmd_eval(args: argparse.Namespace, argv: Sequence[str]) -> int:
    env_name = ENV_NAMES[args.env]
    if args.analytic_worst:
        if env_name != "mountain_car":
            raise ConfigError("--analytic-worst is defined for --env mountaincar only")
        policy = make_pi_ana()
        policy_desc = "analytic-worst"
    else:
        policy = _load_policy(args.policy)
        policy_desc = args.policy
    if args.heatmap and env_name != "mountain_car":
        raise ConfigError("--heatmap is defined for --env mountaincar only")
    if args.overlay_x0 is not None and not args.heatmap:
        raise ConfigError("--overlay-x0 requires --heatmap")

    out = _out_dir(args)
    artifacts: list[Path] = []
    pairs: list[tuple[str, object]] = [("policy", policy_desc), ("env", env_name)]

    if env_name == "mountain_car":
        n_grid = 100 if args.grid is None else args.grid
        report = eval_mc(policy, n_points=n_grid)
        path = out / "per_start.csv"
        write_per_start_csv(report, path)
        artifacts.append(path)
    else:
        n_grid = 50 if args.grid is None else args.grid
        report = eval_pendulum(policy, grid=(n_grid, n_grid))
        path = out / "density.csv"
        write_density_csv(report.returns, path)
        artifacts.append(path)
    path = out / "report.json"
    _write_json(path, report.to_dict())
    artifacts.append(path)

    if args.heatmap:
        grid = heatmap_export(policy, overlay_x0=args.overlay_x0)
        path = out / "heatmap.csv"
        grid.to_csv(path)
        artifacts.append(path)
        if grid.overlay_xs is not None:
            path = out / "overlay.csv"
            _write_boundary_csv(path, grid.overlay_xs, grid.overlay_vs)
            artifacts.append(path)

    config = {
        "policy": policy_desc,
        "env": env_name,
        "grid": args.grid,
        "heatmap": args.heatmap,
        "overlay_x0": args.overlay_x0,
    }
    _write_manifest(out, argv, config, None, artifacts)

    stats = report.return_stats
    pairs += [
        ("n_starts", report.n_starts),
        ("mean_return", stats["mean"]),
        ("min_return", stats["min"]),
        ("max_return", stats["max"]),
        ("goal_failures", report.goal_failures),
    ]
    if np.isfinite(report.regret):
        pairs.append(("regret", report.regret))
    if np.isfinite(report.l2_distance):
        pairs.append(("l2_distance", report.l2_distance))
    _print_kv(pairs, args.pretty)
    return 0


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------


def _parse_sweep(text: str) -> list[int]:
    try:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
    except ValueError as exc:
        raise ConfigError(f"--degree-sweep expects LO..HI, got {text!r}") from exc
    if lo < 1 or hi < lo:
        raise ConfigError(f"--degree-sweep {text!r} is empty or starts below 1")
    return list(range(lo, hi + 1))


def _bench_degree(env: MountainCarSpec, d: int, min_seconds: float) -> tuple[float, int]:
    policy = init_policy(n=2, d_mu=d, d_sigma=0, bounds=MC_BOUNDS, init=PolicyInit(seed=0))
    start = (-0.5, 0.0)
    env.rollout_det(policy, start)  # warm-up: compile/caches outside the window
    steps = 0
    elapsed = 0.0
    t0 = time.perf_counter()
    while elapsed < min_seconds or steps == 0:
        _, n_steps, _, _ = env.rollout_det(policy, start)
        steps += n_steps
        elapsed = time.perf_counter() - t0
    _, ops = eval_horner(policy.mu, np.array(start))
    return steps / elapsed, ops.mults


def _bench_other_backend(sweep: str, min_seconds: float) -> list[tuple[int, float]]:
    """Run the sweep in a subprocess with the kernel backend flipped."""
    import subprocess
    import tempfile

    flipped = "0" if kernels.USE_NUMBA else "1"
    env = dict(os.environ, CHEBYRL_NUMBA=flipped)
    with tempfile.TemporaryDirectory() as tmp:
        proc = subprocess.run(
            [sys.executable, "-m", "chebyrl.cli", "bench",
             "--degree-sweep", sweep, "--min-seconds", str(min_seconds),
             "--out", tmp],
            env=env, capture_output=True, text=True,
        )
        if proc.returncode != 0:
            raise ChebyrlError(
                f"backend-comparison subprocess failed: {proc.stderr.strip()}"
            )
        lines = (Path(tmp) / "bench.csv").read_text().splitlines()[1:]
    rows = []
    for line in lines:
        d_s, sps_s, _ = line.split(",")
        rows.append((int(d_s), float(sps_s)))
    return rows


def cmd_bench(args: argparse.Namespace, argv: Sequence[str]) -> int:
    degrees = _parse_sweep(args.degree_sweep)
    env = MountainCarSpec()
    backend = kernels.backend_name()
    rows = []
    for d in degrees:
        steps_per_s, mults = _bench_degree(env, d, args.min_seconds)
        rows.append((d, steps_per_s, mults))
        if args.pretty:
            print(f"degree {d:>3}: {steps_per_s:>12.0f} steps/s, {mults} mults")

    out = _out_dir(args)
    artifacts = []
    path = out / "bench.csv"
    lines = ["degree,steps_per_s,mults"]
    lines += [f"{d},{_g(sps)},{m}" for d, sps, m in rows]
    path.write_text("\n".join(lines) + "\n")
    artifacts.append(path)

    if args.compare_backends:
        other_name = "numpy" if kernels.USE_NUMBA else "numba"
        other_rows = dict(_bench_other_backend(args.degree_sweep, args.min_seconds))
        path = out / "backends.csv"
        lines = ["degree,backend,steps_per_s"]
        for d, sps, _ in rows:
            lines.append(f"{d},{backend},{_g(sps)}")
            lines.append(f"{d},{other_name},{_g(other_rows[d])}")
        path.write_text("\n".join(lines) + "\n")
        artifacts.append(path)
        if args.pretty:
            for d, sps, _ in rows:
                print(f"degree {d:>3}: {backend} {sps:.0f} vs "
                      f"{other_name} {other_rows[d]:.0f} steps/s")

    _write_manifest(
        out, argv,
        {"degree_sweep": args.degree_sweep, "backend": backend,
         "compare_backends": args.compare_backends},
        None, artifacts,
    )
    if not args.pretty:
        for d, sps, m in rows:
            print(f"degree={d} steps_per_s={_g(sps)} mults={m}")
    return 0


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chebyrl",
        description="Analytic control and Chebyshev policy training for "
        "continuous-action mountain car and pendulum.",
    )
    parser.add_argument("--version", action="version", version=f"chebyrl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="worker processes (default: logical cores)")
        p.add_argument("--pretty", action="store_true",
                       help="rounded human-readable stdout instead of key=value")

    p = sub.add_parser("analytic", help="closed-form gain schedules and grid scans")
    p.add_argument("--mode", choices=("single", "two", "worst", "opt-x0"),
                   default="two", help="schedule family (default: two)")
    p.add_argument("--x0", type=float, default=None, help="start position")
    p.add_argument("--scan-x0", type=int, default=None, metavar="N",
                   help="evaluate over an N-point start grid (worst, opt-x0)")
    p.add_argument("--gain-scan", type=int, default=None, metavar="N",
                   help="sample the single-phase loss over N gains (mode single)")
    p.add_argument("--gain-range", default="2..10", metavar="LO..HI",
                   help="gain interval for --gain-scan (default 2..10)")
    common(p)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("train", help="best-of-N protocol for a Chebyshev Gaussian policy")
    p.add_argument("--env", choices=tuple(ENV_NAMES), default="mountaincar")
    p.add_argument("--algo", choices=("reinforce", "ars", "ppo"), required=True)
    p.add_argument("--degree", type=int, required=True, help="mean-head degree d")
    p.add_argument("--sigma-degree", type=int, default=None,
                   help="sigma-head degree (<= 3; default per algorithm)")
    p.add_argument("--runs", type=int, default=20, help="protocol size (default 20)")
    p.add_argument("--seed", type=int, default=None,
                   help="base seed; run i uses seed+i (default per algorithm)")
    p.add_argument("--config", default=None,
                   help="JSON file overriding config defaults (unknown keys error)")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-start evaluation report, optional heatmap")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--policy", default=None, help="policy JSON file")
    g.add_argument("--analytic-worst", action="store_true",
                   help="evaluate the fixed analytic feedback policy")
    p.add_argument("--env", choices=tuple(ENV_NAMES), default="mountaincar")
    p.add_argument("--grid", type=int, default=None,
                   help="start-grid size (default 100; pendulum is grid x grid, default 50)")
    p.add_argument("--heatmap", action="store_true",
                   help="export the phase-plane action heatmap CSV")
    p.add_argument("--overlay-x0", type=float, default=None,
                   help="overlay the policy trajectory from this start on the heatmap")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="rollout throughput over a degree sweep")
    p.add_argument("--degree-sweep", required=True, metavar="LO..HI",
                   help="inclusive degree range, e.g. 1..50")
    p.add_argument("--min-seconds", type=float, default=0.05,
                   help="minimum timing window per degree (default 0.05)")
    p.add_argument("--compare-backends", action="store_true",
                   help="also time the flipped kernel backend (numba vs numpy)")
    common(p)
    p.set_defaults(func=cmd_bench)

    return parser


def _override_out(argv: list[str], out: str) -> list[str]:
    argv = list(argv)
    for i, tok in enumerate(argv):
        if tok == "--out" and i + 1 < len(argv):
            argv[i + 1] = out
            return argv
        if tok.startswith("--out="):
            argv[i] = f"--out={out}"
            return argv
    return argv + ["--out", out]


def _replay(rest: list[str]) -> int:
    rp = argparse.ArgumentParser(prog="chebyrl --replay")
    rp.add_argument("manifest", help="manifest.json from a previous run")
    rp.add_argument("--out", default=None, help="redirect artifacts to this directory")
    try:
        ns = rp.parse_args(rest)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        manifest = json.loads(Path(ns.manifest).read_text())
        argv = list(manifest["command"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: cannot replay {ns.manifest}: {exc}", file=sys.stderr)
        return 2
    if ns.out is not None:
        argv = _override_out(argv, ns.out)
    return main(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args_list = list(sys.argv[1:]) if argv is None else list(argv)
    if args_list and args_list[0] == "--replay":
        return _replay(args_list[1:])
    parser = build_parser()
    try:
        ns = parser.parse_args(args_list)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return ns.func(ns, args_list)
    except (ChebyrlError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
