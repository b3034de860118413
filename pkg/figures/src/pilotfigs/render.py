"""Render figures from sweep CSV files.

Five figure kinds are supported:

* ``nmse-vs-N`` / ``nmse-vs-K`` / ``nmse-vs-energy`` -- NMSE curves in dB
  against UE antennas, number of UEs, or pilot energy.
* ``tradeoff`` -- spectral efficiency against the pilot energy fraction,
  with per-series optimum markers when the CSV carries them.
* ``scaling`` -- peak spectral efficiency against the BS antenna count.

Rendering is deterministic: a fixed palette keyed by scenario name, no
timestamps or toolchain metadata in the output, so re-rendering the same CSV
yields a byte-identical file.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

KINDS = ("nmse-vs-N", "nmse-vs-K", "nmse-vs-energy", "tradeoff", "scaling")

# fixed palette/markers keyed by scenario; unknown series fall back to a
# deterministic assignment by sorted label
SCENARIO_COLORS = {"nPuC": "#1f77b4", "PuC": "#d62728", "PC": "#2ca02c"}
SCENARIO_MARKERS = {"nPuC": "o", "PuC": "s", "PC": "^"}
FALLBACK_COLORS = ("#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22",
                   "#17becf", "#ff7f0e")

# per-metric line styles for the NMSE kinds
NMSE_STYLES = {
    "nmse_closed": dict(linestyle="-"),
    "nmse_mc": dict(linestyle="none", fillstyle="none"),
    "nmse_lower": dict(linestyle=":", marker=""),
    "nmse_upper": dict(linestyle="--", marker=""),
}

_AXES = {
    "nmse-vs-N": ("N", "UE antennas N", "log"),
    "nmse-vs-K": ("K", "number of UEs K", "linear"),
    "nmse-vs-energy": ("rho_tau", "pilot energy", "linear"),
    "scaling": ("M", "BS antennas M", "log"),
}


class RenderError(ValueError):
    """Bad figure request: unknown kind, missing columns, empty selection."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure: input CSVs, kind, grouping and output path."""

    kind: str
    inputs: tuple
    output: str
    group_by: tuple = ("scenario", "L")
    x_scale: str | None = None
    y_scale: str | None = None
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise RenderError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise RenderError("at least one input CSV is required")
        for scale in (self.x_scale, self.y_scale):
            if scale not in (None, "linear", "log"):
                raise RenderError(f"axis scale must be linear or log, got {scale!r}")
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "group_by", tuple(self.group_by))


def spec_from_dict(raw: dict) -> FigureSpec:
    known = {"kind", "inputs", "input", "output", "group_by", "x_scale",
             "y_scale", "title"}
    unknown = set(raw) - known
    if unknown:
        raise RenderError(f"unknown spec keys: {sorted(unknown)}")
    inputs = raw.get("inputs", raw.get("input"))
    if isinstance(inputs, str):
        inputs = [inputs]
    try:
        return FigureSpec(
            kind=raw.get("kind", ""), inputs=tuple(inputs or ()),
            output=str(raw.get("output", "")),
            group_by=tuple(raw.get("group_by", ("scenario", "L"))),
            x_scale=raw.get("x_scale"), y_scale=raw.get("y_scale"),
            title=raw.get("title"))
    except TypeError as exc:
        raise RenderError(f"malformed spec: {exc}") from None


def read_rows(paths) -> list[dict]:
    rows = []
    for path in paths:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                raise RenderError(f"{path}: empty CSV, nothing to render")
            file_rows = list(reader)
        if not file_rows:
            raise RenderError(f"{path}: no data rows")
        rows.extend(file_rows)
    return rows


def _require_columns(rows: list[dict], columns) -> None:
    have = set(rows[0])
    missing = [c for c in columns if c not in have]
    if missing:
        raise RenderError(f"missing CSV columns: {missing} (have {sorted(have)})")


def _series_key(row: dict, group_by) -> tuple:
    return tuple(row[c] for c in group_by)


def _series_label(key: tuple, group_by) -> str:
    parts = []
    for col, val in zip(group_by, key):
        parts.append(val if col == "scenario" else f"{col}={val}")
    return ", ".join(parts)


def _series_style(key: tuple, group_by, fallback_index: int) -> dict:
    style = {}
    for col, val in zip(group_by, key):
        if col == "scenario" and val in SCENARIO_COLORS:
            style["color"] = SCENARIO_COLORS[val]
            style["marker"] = SCENARIO_MARKERS[val]
    if "color" not in style:
        style["color"] = FALLBACK_COLORS[fallback_index % len(FALLBACK_COLORS)]
        style["marker"] = "odv^s<>"[fallback_index % 7]
    return style


def _sorted_series(rows, group_by):
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(_series_key(row, group_by), []).append(row)
    return sorted(groups.items())


def _to_db(value: float) -> float:
    return 10.0 * math.log10(value) if value > 0 else float("nan")


def _new_figure():
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.grid(True, which="both", alpha=0.3)
    return fig, ax


def _render_nmse(spec: FigureSpec, rows: list[dict], ax) -> None:
    x_col, x_label, default_scale = _AXES[spec.kind]
    _require_columns(rows, (x_col, "metric", "value", *spec.group_by))
    data = [r for r in rows if r["metric"].startswith("nmse")]
    if not data:
        raise RenderError("no NMSE rows in the selection")
    for idx, (key, series) in enumerate(_sorted_series(data, spec.group_by)):
        base = _series_style(key, spec.group_by, idx)
        for metric in sorted({r["metric"] for r in series}):
            pts = sorted((float(r[x_col]), _to_db(float(r["value"])))
                         for r in series if r["metric"] == metric)
            style = dict(base, **NMSE_STYLES.get(metric, {}))
            label = _series_label(key, spec.group_by)
            if metric != "nmse_closed":
                label = f"{label} ({metric.removeprefix('nmse_')})"
            ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label, **style)
    ax.set_xlabel(x_label)
    ax.set_ylabel("NMSE [dB]")
    ax.set_xscale(spec.x_scale or default_scale)


def _render_tradeoff(spec: FigureSpec, rows: list[dict], ax) -> None:
    _require_columns(rows, ("rho_tau", "rho_d", "metric", "value", *spec.group_by))
    curves = [r for r in rows if r["metric"] == "spectral_efficiency"]
    if not curves:
        raise RenderError("no spectral_efficiency rows in the selection")
    optima = {_series_key(r, spec.group_by): r for r in rows
              if r["metric"] == "max_spectral_efficiency"}
    fractions = {_series_key(r, spec.group_by): r for r in rows
                 if r["metric"] == "optimal_pilot_fraction"}
    for idx, (key, series) in enumerate(_sorted_series(curves, spec.group_by)):
        style = _series_style(key, spec.group_by, idx)
        pts = []
        for r in series:
            total = float(r["rho_tau"]) + float(r["rho_d"])
            frac = float(r["rho_tau"]) / total if total > 0 else 0.0
            pts.append((frac, float(r["value"])))
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                label=_series_label(key, spec.group_by), **style)
        if key in optima and key in fractions:
            ax.plot([float(fractions[key]["value"])],
                    [float(optima[key]["value"])],
                    marker="*", markersize=14, linestyle="none",
                    color=style["color"])
    ax.set_xlabel("pilot energy fraction")
    ax.set_ylabel("spectral efficiency [bits/use]")
    ax.set_xscale(spec.x_scale or "linear")


def _render_scaling(spec: FigureSpec, rows: list[dict], ax) -> None:
    x_col, x_label, default_scale = _AXES["scaling"]
    _require_columns(rows, (x_col, "metric", "value", *spec.group_by))
    data = [r for r in rows if r["metric"] == "max_spectral_efficiency"]
    if not data:
        raise RenderError("no max_spectral_efficiency rows in the selection")
    for idx, (key, series) in enumerate(_sorted_series(data, spec.group_by)):
        style = _series_style(key, spec.group_by, idx)
        pts = sorted((float(r[x_col]), float(r["value"])) for r in series)
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                label=_series_label(key, spec.group_by), **style)
    ax.set_xlabel(x_label)
    ax.set_ylabel("peak spectral efficiency [bits/use]")
    ax.set_xscale(spec.x_scale or default_scale)


def render(spec: FigureSpec) -> str:
    """Render one figure; returns the output path."""
    rows = read_rows(spec.inputs)
    fig, ax = _new_figure()
    try:
        if spec.kind == "tradeoff":
            _render_tradeoff(spec, rows, ax)
        elif spec.kind == "scaling":
            _render_scaling(spec, rows, ax)
        else:
            _render_nmse(spec, rows, ax)
        if spec.y_scale:
            ax.set_yscale(spec.y_scale)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend(fontsize=8)
        fig.tight_layout()
        if spec.output.lower().endswith(".pdf"):
            # suppress toolchain/timestamp metadata for reproducible bytes
            metadata = {"CreationDate": None, "Producer": None, "Creator": None}
        else:
            metadata = {"Software": None}
        fig.savefig(spec.output, dpi=150, metadata=metadata)
    finally:
        plt.close(fig)
    return spec.output


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render", description="Render figures from sweep CSV output.")
    parser.add_argument("--spec", help="JSON figure spec (overrides other flags)")
    parser.add_argument("--kind", choices=KINDS, help="figure kind")
    parser.add_argument("--in", dest="inputs", action="append", default=[],
                        metavar="CSV", help="input CSV path, repeatable")
    parser.add_argument("--out", help="output image path (.png or .pdf)")
    parser.add_argument("--group-by", default="scenario,L",
                        help="comma-separated series grouping columns")
    parser.add_argument("--x-scale", choices=("linear", "log"))
    parser.add_argument("--y-scale", choices=("linear", "log"))
    parser.add_argument("--title")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.spec:
            with open(args.spec, encoding="utf-8") as fh:
                raw = json.load(fh)
            specs = raw if isinstance(raw, list) else [raw]
            for raw_spec in specs:
                path = render(spec_from_dict(raw_spec))
                print(f"wrote {path}")
        else:
            if not (args.kind and args.inputs and args.out):
                print("error: --kind, --in and --out are required without --spec",
                      file=sys.stderr)
                return 2
            spec = FigureSpec(kind=args.kind, inputs=tuple(args.inputs),
                              output=args.out,
                              group_by=tuple(args.group_by.split(",")),
                              x_scale=args.x_scale, y_scale=args.y_scale,
                              title=args.title)
            print(f"wrote {render(spec)}")
        return 0
    except (RenderError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
