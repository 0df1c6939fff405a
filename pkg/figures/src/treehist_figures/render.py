"""Render treehist CSV output into publication-style vector figures.

Strictly presentation: reads CSV files and their JSON sidecars, never
recomputes.  Three kinds:

- delta:   L1 disturbance vs measurement start time, log scale, with the
           predicted decay slope overlaid as a straight guide line.
- pointer: Bloch-disk projections of the conditional-state ensemble colored
           by the outcome, one column per input CSV, with the outcome
           density below (from the sibling *_density.csv when present).
- lg:      Leggett-Garg combination vs window start, with the classical
           bound drawn at 2.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("delta", "pointer", "lg")

REQUIRED_COLUMNS = {
    "delta": ("tau", "L", "l1", "stderr", "prediction"),
    "pointer": ("m", "p", "bloch_x", "bloch_y", "bloch_z", "purity"),
    "lg": ("t", "C12", "C23", "C34", "C14", "LG"),
}


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input CSVs, figure kind, output path, axis options."""

    inputs: tuple[Path, ...]
    kind: str
    output: Path
    logy: bool | None = None
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.inputs:
            raise ValueError("at least one input CSV is required")
        object.__setattr__(self, "inputs", tuple(Path(p) for p in self.inputs))
        object.__setattr__(self, "output", Path(self.output))


def load_table(path: Path, kind: str) -> dict[str, np.ndarray]:
    if not path.exists():
        raise FileNotFoundError(f"input CSV not found: {path}")
    with open(path) as fh:
        lines = [line.strip() for line in fh if line.strip()]
    if not lines:
        raise ValueError(f"{path} is empty; refusing to render an empty figure")
    header = lines[0].split(",")
    missing = [c for c in REQUIRED_COLUMNS[kind] if c not in header]
    if missing:
        raise ValueError(f"{path} lacks required column(s) {missing} for kind {kind!r}")
    if len(lines) < 2:
        raise ValueError(f"{path} has a header but no data rows")
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    return {name: data[:, idx] for idx, name in enumerate(header)}


def load_sidecar(path: Path) -> dict:
    sidecar = path.with_suffix(".json")
    if sidecar.exists():
        try:
            return json.loads(sidecar.read_text()).get("config", {})
        except (json.JSONDecodeError, AttributeError):
            return {}
    return {}


def _label_for(path: Path) -> str:
    config = load_sidecar(path)
    if "theta" in config:
        return f"theta = {config['theta'] / math.pi:.2f} pi"
    return path.stem


def _draw_delta(spec: FigureSpec, fig) -> None:
    ax = fig.subplots()
    for path in spec.inputs:
        table = load_table(path, "delta")
        label_base = _label_for(path)
        for window in np.unique(table["L"]):
            sel = table["L"] == window
            tau = table["tau"][sel]
            l1 = table["l1"][sel]
            err = table["stderr"][sel]
            label = label_base if len(np.unique(table["L"])) == 1 else f"{label_base}, L = {window:g}"
            line = ax.errorbar(tau, l1, yerr=err, marker="o", linestyle="-", capsize=2, label=label)
            prediction = table["prediction"][sel]
            if np.all(prediction > 0) and np.all(l1 > 0):
                anchored = prediction * l1[0] / prediction[0]
                ax.plot(tau, anchored, linestyle="--", color=line.lines[0].get_color(), alpha=0.6,
                        label=f"predicted slope ({label})")
    if spec.logy is not False:
        ax.set_yscale("log", base=2)
    ax.set_xlabel("measurement start time tau")
    ax.set_ylabel(r"$\Vert \Delta \Vert_1$")
    ax.legend(fontsize=7)
    ax.set_title(spec.title or "disturbance of the final outcome by third-party measurements")


def _draw_pointer(spec: FigureSpec, fig) -> None:
    columns = len(spec.inputs)
    axes = fig.subplots(2, columns, squeeze=False)
    for col, path in enumerate(spec.inputs):
        table = load_table(path, "pointer")
        top, bottom = axes[0][col], axes[1][col]
        disk = plt.Circle((0, 0), 1.0, fill=False, color="0.6", linewidth=0.8)
        top.add_patch(disk)
        scatter = top.scatter(table["bloch_x"], table["bloch_z"], c=table["m"], cmap="coolwarm",
                              s=8, linewidths=0)
        top.set_xlim(-1.1, 1.1)
        top.set_ylim(-1.1, 1.1)
        top.set_aspect("equal")
        top.set_xlabel("<X>")
        top.set_ylabel("<Z>" if col == 0 else "")
        top.set_title(_label_for(path), fontsize=9)
        fig.colorbar(scatter, ax=top, shrink=0.7, label="m")
        density_path = path.with_name(path.stem + "_density" + path.suffix)
        if density_path.exists():
            density = load_table(density_path, "pointer")
            bottom.plot(density["m"], density["p"], color="k", linewidth=1.0)
        else:
            order = np.argsort(table["m"])
            bottom.plot(table["m"][order], table["p"][order], ".", color="k", markersize=2)
        bottom.set_xlabel("outcome m")
        bottom.set_ylabel("p(m)" if col == 0 else "")
    if spec.title:
        fig.suptitle(spec.title)


def _draw_lg(spec: FigureSpec, fig) -> None:
    ax = fig.subplots()
    for path in spec.inputs:
        table = load_table(path, "lg")
        config = load_sidecar(path)
        label = _label_for(path)
        if "t_m" in config:
            label += f", t_m = {config['t_m']}"
        ax.plot(table["t"], table["LG"], marker="o", linestyle="-", label=label)
    ax.axhline(2.0, color="red", linewidth=1.2, label="classical bound")
    ax.set_xlabel("window start t")
    ax.set_ylabel("C12 + C23 + C34 - C14")
    ax.legend(fontsize=8)
    ax.set_title(spec.title or "Leggett-Garg combination on windows (t, t+1, t+2, t+3)")


_DRAWERS = {"delta": _draw_delta, "pointer": _draw_pointer, "lg": _draw_lg}


def build_figure(spec: FigureSpec):
    """Validate the inputs and return the assembled matplotlib figure."""
    width = 4.0 * (len(spec.inputs) if spec.kind == "pointer" else 1.4)
    height = 6.0 if spec.kind == "pointer" else 3.6
    fig = plt.figure(figsize=(width, height), constrained_layout=True)
    try:
        _DRAWERS[spec.kind](spec, fig)
    except Exception:
        plt.close(fig)
        raise
    return fig


def render(spec: FigureSpec) -> Path:
    """Render the figure to spec.output (vector formats keep no timestamp)."""
    fig = build_figure(spec)
    metadata = {"Date": None} if spec.output.suffix in (".svg", ".pdf") else None
    try:
        fig.savefig(spec.output, metadata=metadata)
    finally:
        plt.close(fig)
    return spec.output


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="render_figure", description=__doc__)
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--in", dest="inputs", action="append", required=True, type=Path,
                        help="input CSV (repeat for multi-panel figures)")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--linear-y", action="store_true", help="disable the log scale on delta plots")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    spec = FigureSpec(
        inputs=tuple(args.inputs),
        kind=args.kind,
        output=args.out,
        logy=False if args.linear_y else None,
        title=args.title,
    )
    try:
        render(spec)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
