#!/usr/bin/env python3
"""Render figures from the chebyrl CLI's CSV artifacts.

Strictly downstream presentation: this script reads the documented CSV
schemas written by the primary package and draws them; no numeric work
happens here beyond what contouring/binning already implies.  Output is
deterministic for identical inputs (fixed dpi, fixed SVG hash salt, no
embedded dates), and inputs are never modified.

Figure kinds and their inputs:

  heatmap        heatmap.csv (x,v,action grid) [+ overlay.csv (x,v)]
                 phase-plane action field with the zero-action level set in
                 red and the optional overlay trajectory in white
  return-curve   per_start.csv (x0,R,t_star,v_star)
  density        density.csv (bin_lo,bin_hi,count)
  learning-curve learning_curve.csv (update,mean_return)
  loss-vs-C      gain_scan.csv (c,loss,return,goal)

Usage: render.py --kind <kind> --in <csv> [<csv>] --out <png/svg>
Exit codes: 0 success, 2 schema/usage error (the offending column is named).
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "chebyrl-plots"

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("heatmap", "return-curve", "density", "learning-curve", "loss-vs-C")

SCHEMAS = {
    "heatmap": ("x", "v", "action"),
    "overlay": ("x", "v"),
    "return-curve": ("x0", "R", "t_star", "v_star"),
    "density": ("bin_lo", "bin_hi", "count"),
    "learning-curve": ("update", "mean_return"),
    "loss-vs-C": ("c", "loss", "return", "goal"),
}


class SchemaError(Exception):
    """Input file does not match the documented artifact schema."""


@dataclass
class FigureSpec:
    """One figure: input artifact path(s), kind, output image, axis styling."""

    kind: str
    inputs: list[Path]
    output: Path
    xlabel: Optional[str] = None
    ylabel: Optional[str] = None
    xlim: Optional[tuple[float, float]] = None
    ylim: Optional[tuple[float, float]] = None
    title: Optional[str] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")
        self.inputs = [Path(p) for p in self.inputs]
        self.output = Path(self.output)
        if self.output.suffix.lower() not in (".png", ".svg"):
            raise SchemaError(f"output must end in .png or .svg, got {self.output.name}")
        want = 2 if self.kind == "heatmap" else 1
        if not (1 <= len(self.inputs) <= want):
            raise SchemaError(
                f"kind {self.kind} takes {'1 or 2' if want == 2 else '1'} input "
                f"file(s), got {len(self.inputs)}"
            )


def read_columns(path: Path, expected: Sequence[str]) -> dict[str, np.ndarray]:
    """Parse a CSV and return float arrays; schema violations name the column."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = list(reader)
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    if header is None:
        raise SchemaError(f"{path}: empty file")
    for col in expected:
        if col not in header:
            raise SchemaError(f"{path}: missing column '{col}' (found: {','.join(header)})")
    for col in header:
        if col not in expected:
            raise SchemaError(f"{path}: unexpected column '{col}'")
    out: dict[str, list[float]] = {c: [] for c in header}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}: line {lineno} has {len(row)} fields, want {len(header)}")
        for col, cell in zip(header, row):
            try:
                out[col].append(float(cell))
            except ValueError as exc:
                raise SchemaError(
                    f"{path}: line {lineno}, column '{col}': not a number: {cell!r}"
                ) from exc
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return {c: np.asarray(v) for c, v in out.items()}


# ---------------------------------------------------------------------------
# Heatmap helpers
# ---------------------------------------------------------------------------


def load_heatmap_grid(path: Path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reconstruct (xs, vs, actions[nx, nv]) from the grid-order CSV."""
    cols = read_columns(path, SCHEMAS["heatmap"])
    x, v, a = cols["x"], cols["v"], cols["action"]
    xs = np.unique(x)
    nx = xs.size
    if x.size % nx != 0:
        raise SchemaError(f"{path}: column 'x' is not a complete grid")
    nv = x.size // nx
    vs = v[:nv]
    if not np.all(np.diff(vs) > 0) or not np.array_equal(v, np.tile(vs, nx)):
        raise SchemaError(f"{path}: column 'v' is not in grid order (x outer, v inner)")
    if not np.array_equal(x, np.repeat(xs, nv)):
        raise SchemaError(f"{path}: column 'x' is not in grid order (x outer, v inner)")
    return xs, vs, a.reshape(nx, nv)


def zero_level_segments(
    xs: np.ndarray, vs: np.ndarray, actions: np.ndarray
) -> list[np.ndarray]:
    """Vertex arrays of the zero-action level set, as the renderer draws it."""
    fig, ax = plt.subplots()
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # flat fields produce no contour
            cs = ax.contour(xs, vs, actions.T, levels=[0.0])
        return [np.asarray(seg) for seg in cs.allsegs[0] if len(seg)]
    finally:
        plt.close(fig)


def _render_heatmap(spec: FigureSpec, ax) -> None:
    xs, vs, actions = load_heatmap_grid(spec.inputs[0])
    amax = max(float(np.abs(actions).max()), 1e-12)
    mesh = ax.pcolormesh(
        xs, vs, actions.T, cmap="RdBu_r", vmin=-amax, vmax=amax, shading="auto"
    )
    ax.figure.colorbar(mesh, ax=ax, label="action")
    if np.all(actions == 0.0):
        # the zero level set is the whole domain; mark its boundary
        ax.add_patch(
            plt.Rectangle(
                (xs[0], vs[0]), xs[-1] - xs[0], vs[-1] - vs[0],
                fill=False, edgecolor="red", linewidth=2.0,
            )
        )
    else:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            ax.contour(xs, vs, actions.T, levels=[0.0], colors="red", linewidths=1.5)
    if len(spec.inputs) == 2:
        overlay = read_columns(spec.inputs[1], SCHEMAS["overlay"])
        ax.plot(overlay["x"], overlay["v"], color="white", linewidth=1.8)
    ax.set_xlabel("position x")
    ax.set_ylabel("velocity v")


def _render_return_curve(spec: FigureSpec, ax) -> None:
    cols = read_columns(spec.inputs[0], SCHEMAS["return-curve"])
    x0, rets = cols["x0"], cols["R"]
    ax.plot(x0, rets, marker=".", linewidth=1.2)
    pad = max(0.25, 0.1 * float(rets.max() - rets.min()))
    ax.set_ylim(float(rets.min()) - pad, float(rets.max()) + pad)
    ax.set_xlabel("start position x0")
    ax.set_ylabel("return R")


def _render_density(spec: FigureSpec, ax) -> None:
    cols = read_columns(spec.inputs[0], SCHEMAS["density"])
    lo, hi, count = cols["bin_lo"], cols["bin_hi"], cols["count"]
    ax.bar(lo, count, width=hi - lo, align="edge", edgecolor="black", linewidth=0.4)
    ax.set_xlabel("return")
    ax.set_ylabel("count")


def _render_learning_curve(spec: FigureSpec, ax) -> None:
    cols = read_columns(spec.inputs[0], SCHEMAS["learning-curve"])
    ax.plot(cols["update"], cols["mean_return"], linewidth=1.2)
    ax.set_xlabel("update")
    ax.set_ylabel("mean return")


def _render_loss_vs_c(spec: FigureSpec, ax) -> None:
    cols = read_columns(spec.inputs[0], SCHEMAS["loss-vs-C"])
    goal = cols["goal"] == 1.0
    if np.any(goal):
        ax.plot(cols["c"][goal], cols["loss"][goal], "o", markersize=4,
                label="goal reached")
        ax.legend(loc="best")
    ax.set_xlabel("gain C")
    ax.set_ylabel("action loss")


_RENDERERS = {
    "heatmap": _render_heatmap,
    "return-curve": _render_return_curve,
    "density": _render_density,
    "learning-curve": _render_learning_curve,
    "loss-vs-C": _render_loss_vs_c,
}


def build_figure(spec: FigureSpec):
    """Build the matplotlib figure for a spec (exposed for tests)."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        _RENDERERS[spec.kind](spec, ax)
        if spec.xlabel is not None:
            ax.set_xlabel(spec.xlabel)
        if spec.ylabel is not None:
            ax.set_ylabel(spec.ylabel)
        if spec.xlim is not None:
            ax.set_xlim(*spec.xlim)
        if spec.ylim is not None:
            ax.set_ylim(*spec.ylim)
        if spec.title is not None:
            ax.set_title(spec.title)
        fig.tight_layout()
    except Exception:
        plt.close(fig)
        raise
    return fig


def render(spec: FigureSpec) -> Path:
    """Render the figure to spec.output; deterministic for identical inputs."""
    fig = build_figure(spec)
    try:
        metadata = {"Date": None} if spec.output.suffix.lower() == ".svg" else None
        fig.savefig(spec.output, dpi=150, metadata=metadata)
    finally:
        plt.close(fig)
    return spec.output


def _parse_limits(text: Optional[str], flag: str) -> Optional[tuple[float, float]]:
    if text is None:
        return None
    try:
        lo_s, hi_s = text.split(":", 1)
        return float(lo_s), float(hi_s)
    except ValueError as exc:
        raise SchemaError(f"{flag} expects LO:HI, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render.py",
        description="Render a figure from chebyrl CSV artifacts.",
    )
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input artifact path(s)")
    parser.add_argument("--out", required=True, help="output image (.png or .svg)")
    parser.add_argument("--xlabel", default=None)
    parser.add_argument("--ylabel", default=None)
    parser.add_argument("--xlim", default=None, metavar="LO:HI")
    parser.add_argument("--ylim", default=None, metavar="LO:HI")
    parser.add_argument("--title", default=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(list(sys.argv[1:]) if argv is None else list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        spec = FigureSpec(
            kind=ns.kind,
            inputs=ns.inputs,
            output=ns.out,
            xlabel=ns.xlabel,
            ylabel=ns.ylabel,
            xlim=_parse_limits(ns.xlim, "--xlim"),
            ylim=_parse_limits(ns.ylim, "--ylim"),
            title=ns.title,
        )
        out = render(spec)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
