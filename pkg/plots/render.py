"""Render publication-style figures from simulation CSV tables and JSON manifests.

The figures are pure views: every number shown (points, error bars, crossing
and slope annotations) is read from the CSV table or the run manifest, never
recomputed here.  Rendering is deterministic: with pinned library versions
(see requirements.lock) the same inputs produce byte-identical SVG and PNG
output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "plots"
matplotlib.rcParams["svg.fonttype"] = "none"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

PathLike = Union[str, Path]

SCHEMA_VERSION = 1

REQUIRED_COLUMNS = (
    "model", "d", "p", "p_e", "p_p", "r_e",
    "shots", "failures", "p_l", "stderr", "seed", "wall_s",
)

_COLUMN_TYPES = {
    "d": int, "p": float, "p_e": float, "p_p": float, "r_e": float,
    "shots": int, "failures": int, "p_l": float, "stderr": float,
    "wall_s": float,
}

# figure kind -> producing subcommand recorded in the manifest
KIND_COMMANDS = {
    "threshold": "threshold",
    "distance": "distance-fit",
    "sweep": "sweep-re",
    "compare": "compare",
}

# sub-threshold scaling figures are read on log-log axes
_KIND_SCALES = {
    "threshold": ("linear", "linear"),
    "distance": ("log", "log"),
    "sweep": ("linear", "linear"),
    "compare": ("log", "log"),
}

_MODEL_LABELS = {"lt": "LT", "ec": "EC", "pauli": "Pauli", "loss": "loss"}

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


class SchemaError(ValueError):
    """The CSV table or manifest does not match the expected schema."""


@dataclass(frozen=True)
class FigureSpec:
    """One figure to render: inputs, output path, and axis scales."""

    kind: str
    csv_path: Path
    manifest_path: Path
    out_path: Path
    x_scale: str
    y_scale: str

    @classmethod
    def for_kind(cls, kind: str, csv_path: PathLike, manifest_path: PathLike,
                 out_path: PathLike) -> "FigureSpec":
        if kind not in KIND_COMMANDS:
            raise SchemaError(f"unknown figure kind {kind!r}")
        x_scale, y_scale = _KIND_SCALES[kind]
        return cls(kind=kind, csv_path=Path(csv_path),
                   manifest_path=Path(manifest_path), out_path=Path(out_path),
                   x_scale=x_scale, y_scale=y_scale)


def fmt(value: float) -> str:
    """Annotation number format; tests assert these exact strings appear."""
    return f"{value:.6g}"


def load_table(path: PathLike) -> List[dict]:
    """Read a results CSV, checking the schema and converting numeric columns."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for column in REQUIRED_COLUMNS:
            if column not in header:
                raise SchemaError(f"{path}: missing required column '{column}'")
        rows = []
        for record in reader:
            row = dict(record)
            for key, cast in _COLUMN_TYPES.items():
                row[key] = cast(record[key])
            rows.append(row)
    return rows


def load_manifest(path: PathLike, kind: str) -> dict:
    """Read a run manifest and check it was produced by the matching command."""
    payload = json.loads(Path(path).read_text())
    version = payload.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path}: unsupported manifest schema version {version!r}")
    expected = KIND_COMMANDS[kind]
    command = payload.get("command")
    if command != expected:
        raise SchemaError(
            f"{path}: manifest command {command!r} does not match figure kind "
            f"'{kind}' (expected {expected!r})"
        )
    return payload


def _series(rows: Sequence[dict], **match) -> List[dict]:
    """Rows matching the given column values, ordered by rate."""
    keep = [row for row in rows
            if all(row[key] == value for key, value in match.items())]
    return sorted(keep, key=lambda row: row["p"])


def _errorbar(ax, series: Sequence[dict], label: str, color: str,
              drop_zeros: bool = False) -> None:
    if drop_zeros:
        series = [row for row in series if row["p_l"] > 0.0]
    xs = [row["p"] for row in series]
    ys = [row["p_l"] for row in series]
    yerr = [row["stderr"] for row in series]
    ax.errorbar(xs, ys, yerr=yerr, label=label, color=color,
                marker="o", markersize=4, linestyle="-", linewidth=1.0,
                capsize=2)


def _apply_scales(ax, spec: FigureSpec) -> None:
    ax.set_xscale(spec.x_scale)
    ax.set_yscale(spec.y_scale)


def _render_threshold(ax, spec: FigureSpec, rows: Sequence[dict],
                      results: dict) -> None:
    info = results["threshold"]
    model = info["model"]
    for color, d in zip(_COLORS, sorted({row["d"] for row in rows})):
        _errorbar(ax, _series(rows, model=model, d=d), f"d = {d}", color)
    p_th, p_th_err = info["p_th"], info["p_th_err"]
    ax.axvspan(p_th - p_th_err, p_th + p_th_err, color="0.85", zorder=0)
    ax.axvline(p_th, color="0.4", linestyle="--", linewidth=1.0)
    ax.annotate(f"p_th = {fmt(p_th)} ± {fmt(p_th_err)}",
                xy=(p_th, 0.02), xycoords=("data", "axes fraction"),
                ha="left", va="bottom", fontsize=9,
                xytext=(4, 0), textcoords="offset points")
    ax.set_xlabel("physical error rate p")
    ax.set_ylabel("logical error rate p_L")
    label = _MODEL_LABELS.get(model, model)
    ax.set_title(f"{label} curve crossing (R_e = {fmt(info['r_e'])})")
    ax.legend(loc="upper left", fontsize=9)


def _render_distance(ax, spec: FigureSpec, rows: Sequence[dict],
                     results: dict) -> None:
    info = results["distance_fit"]
    model, d, p_th = info["model"], info["d"], info["p_th"]
    series = [row for row in _series(rows, model=model, d=d)
              if row["p_l"] > 0.0]
    xs = [row["p"] / p_th for row in series]
    ys = [row["p_l"] for row in series]
    yerr = [row["stderr"] for row in series]
    label = _MODEL_LABELS.get(model, model)
    ax.errorbar(xs, ys, yerr=yerr, color=_COLORS[0], marker="o",
                markersize=4, linestyle="none", capsize=2,
                label=f"{label} d = {d}")
    # Guide line with the manifest's fitted slope, anchored at the highest
    # plotted point inside the fit window.
    slope, slope_err = info["slope"], info["slope_err"]
    anchored = [(x, y) for x, y in zip(xs, ys)
                if x * p_th <= info["fit_bound"]]
    if anchored:
        x0, y0 = anchored[-1]
        line_x = [min(xs), max(xs)]
        line_y = [y0 * (x / x0) ** slope for x in line_x]
        ax.plot(line_x, line_y, color="0.3", linestyle="--", linewidth=1.0,
                label=f"d_e = {fmt(slope)} ± {fmt(slope_err)}")
    ax.set_xlabel("p / p_th")
    ax.set_ylabel("logical error rate p_L")
    ax.set_title(f"sub-threshold scaling, {label} d = {d}")
    ax.legend(loc="upper left", fontsize=9)


def _render_sweep(ax, spec: FigureSpec, rows: Sequence[dict],
                  results: dict) -> None:
    estimates = results["thresholds"]
    models = []
    for entry in estimates:
        if entry["model"] not in models:
            models.append(entry["model"])
    for color, model in zip(_COLORS, models):
        points = sorted((e for e in estimates if e["model"] == model),
                        key=lambda e: e["r_e"])
        xs = [e["r_e"] for e in points]
        ys = [e["p_th"] for e in points]
        yerr = [e["p_th_err"] for e in points]
        ax.errorbar(xs, ys, yerr=yerr, label=_MODEL_LABELS.get(model, model),
                    color=color, marker="o", markersize=4, linestyle="-",
                    linewidth=1.0, capsize=2)
        for x, y in zip(xs, ys):
            ax.annotate(fmt(y), xy=(x, y), fontsize=7, ha="center",
                        va="bottom", xytext=(0, 4),
                        textcoords="offset points")
    ax.set_xlabel("leak fraction R_e")
    ax.set_ylabel("threshold p_th")
    ax.set_title("threshold vs leak fraction")
    ax.legend(loc="upper right", fontsize=9)


def _render_compare(ax, spec: FigureSpec, rows: Sequence[dict],
                    results: dict) -> None:
    info = results["compare"]
    curves = []
    for row in rows:
        key = (row["model"], row["d"])
        if key not in curves:
            curves.append(key)
    for color, (model, d) in zip(_COLORS, curves):
        label = _MODEL_LABELS.get(model, model)
        _errorbar(ax, _series(rows, model=model, d=d), f"{label} d = {d}",
                  color, drop_zeros=True)
    lines = []
    for entry in info["slopes"]:
        label = _MODEL_LABELS.get(entry["model"], entry["model"])
        lines.append(f"slope {label} d = {entry['d']}: "
                     f"{fmt(entry['slope'])} ± {fmt(entry['slope_err'])}")
    if lines:
        ax.text(0.02, 0.98, "\n".join(lines), transform=ax.transAxes,
                ha="left", va="top", fontsize=8,
                bbox={"boxstyle": "round", "facecolor": "white",
                      "edgecolor": "0.7"})
    ax.set_xlabel("physical error rate p")
    ax.set_ylabel("logical error rate p_L")
    ax.set_title(f"tracking vs conversion (R_e = {fmt(info['r_e'])})")
    ax.legend(loc="lower right", fontsize=9)


_RENDERERS = {
    "threshold": _render_threshold,
    "distance": _render_distance,
    "sweep": _render_sweep,
    "compare": _render_compare,
}


def _save_metadata(out_path: Path) -> Optional[Dict[str, Optional[str]]]:
    # Strip the volatile fields the backends would otherwise embed.
    suffix = out_path.suffix.lower()
    if suffix == ".svg":
        return {"Date": None}
    if suffix == ".png":
        return {"Software": None}
    return None


def render(spec: FigureSpec) -> Path:
    """Render one figure and return the output path."""
    rows = load_table(spec.csv_path)
    manifest = load_manifest(spec.manifest_path, spec.kind)
    results = manifest["results"]
    fig = plt.figure(figsize=(6.0, 4.5), dpi=100)
    try:
        ax = fig.add_subplot()
        _apply_scales(ax, spec)
        _RENDERERS[spec.kind](ax, spec, rows, results)
        ax.grid(True, which="both", alpha=0.25)
        fig.tight_layout()
        fig.savefig(spec.out_path, metadata=_save_metadata(spec.out_path))
    finally:
        plt.close(fig)
    return spec.out_path
