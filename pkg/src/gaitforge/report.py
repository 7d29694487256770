"""Deterministic SVG figure rendering from the CSV outputs.

Uses the non-interactive SVG backend only, with the hash salt and date
metadata pinned so identical inputs give byte-identical files. CSV parsing
is strict: a malformed cell aborts with the row and column named.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

import matplotlib
matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "gaitforge"
matplotlib.rcParams["svg.fonttype"] = "path"

_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}


class CsvFormatError(ValueError):
    """A CSV cell failed to parse; message names the row and column."""


def read_csv_strict(path, required_columns, numeric_columns,
                    optional_numeric=()):
    """Parse a CSV into a list of dicts with numeric coercion.

    Raises CsvFormatError naming the offending row (1-based, header = 1)
    and column for missing headers, short rows, or unparsable numbers.
    Columns in optional_numeric may be empty strings (-> None).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path.name}: empty file, no header row")
        missing = [c for c in required_columns if c not in header]
        if missing:
            raise CsvFormatError(
                f"{path.name}: row 1 missing column(s) {missing}")
        idx = {c: header.index(c) for c in header}
        rows = []
        for rno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise CsvFormatError(
                    f"{path.name}: row {rno} has {len(row)} cells, "
                    f"expected {len(header)}")
            rec = {}
            for col in header:
                cell = row[idx[col]]
                if col in numeric_columns or col in optional_numeric:
                    if cell == "" and col in optional_numeric:
                        rec[col] = None
                        continue
                    try:
                        rec[col] = float(cell)
                    except ValueError:
                        raise CsvFormatError(
                            f"{path.name}: row {rno}, column '{col}': "
                            f"cannot parse {cell!r} as a number")
                else:
                    rec[col] = cell
            rows.append(rec)
    return rows


def _new_figure(width=6.4, height=4.2):
    fig, ax = plt.subplots(figsize=(width, height), dpi=100)
    return fig, ax


def _save(fig, out_path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)
    return out_path


def render_cot_vs_speed(csv_paths, out_path):
    """Multi-series cost-of-transport curves, one line per gait name.

    Expects columns gait,speed,cot,fell (extra columns such as mean_speed
    pass through); points with fell=true or empty cot are skipped (a gait
    that cannot reach a speed has no cost there).
    """
    series: dict[str, list] = {}
    for path in csv_paths:
        rows = read_csv_strict(path, ("gait", "speed", "cot", "fell"),
                               ("speed",), optional_numeric=("cot",
                                                             "speed_err",
                                                             "mean_speed"))
        for rec in rows:
            if str(rec["fell"]).lower() in ("true", "1") or rec["cot"] is None:
                continue
            series.setdefault(rec["gait"], []).append(
                (rec["speed"], rec["cot"]))
    fig, ax = _new_figure()
    for name in sorted(series):
        pts = sorted(series[name])
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label=name)
    ax.set_xlabel("speed [m/s]")
    ax.set_ylabel("cost of transport")
    ax.set_title("Cost of transport vs speed")
    ax.grid(True, alpha=0.3)
    if series:
        ax.legend()
    return _save(fig, out_path)


def render_learning_curves(csv_paths, out_path):
    """Best-ever return vs environment steps, one line per seed file, plus
    the across-seed mean when several files are given."""
    curves = []
    for path in csv_paths:
        rows = read_csv_strict(path, ("iteration", "env_steps",
                                      "best_return_ever"),
                               ("iteration", "env_steps",
                                "best_return_ever"))
        xs = [r["env_steps"] for r in rows]
        ys = [r["best_return_ever"] for r in rows]
        curves.append((Path(path).stem, xs, ys))
    fig, ax = _new_figure()
    for name, xs, ys in curves:
        ax.plot(xs, ys, alpha=0.6 if len(curves) > 1 else 1.0, label=name)
    if len(curves) > 1:
        n = min(len(c[1]) for c in curves)
        if n > 0:
            mean = [sum(c[2][i] for c in curves) / len(curves)
                    for i in range(n)]
            ax.plot(curves[0][1][:n], mean, color="black", linewidth=2,
                    label="mean")
    ax.set_xlabel("environment steps")
    ax.set_ylabel("best return")
    ax.set_title("Learning curves")
    ax.grid(True, alpha=0.3)
    if curves:
        ax.legend(fontsize=7)
    return _save(fig, out_path)


def render_contact_raster(trace_csv, out_path, max_seconds=None):
    """Foot contact raster: 4 rows, dark where the leg is in stance, with
    the measured speed overlaid."""
    legs = ("stance_fr", "stance_fl", "stance_rr", "stance_rl")
    rows = read_csv_strict(trace_csv, ("time_s", "vx") + legs,
                           ("time_s", "vx") + legs)
    if max_seconds is not None:
        rows = [r for r in rows if r["time_s"] <= max_seconds]
    fig, (ax, ax2) = plt.subplots(
        2, 1, figsize=(7.5, 4.0), dpi=100, sharex=True,
        gridspec_kw={"height_ratios": [3, 1]})
    if rows:
        t = [r["time_s"] for r in rows]
        grid = np.array([[r[leg] for r in rows] for leg in legs])
        ax.imshow(grid, aspect="auto", interpolation="nearest",
                  cmap="Blues", vmin=0.0, vmax=1.3,
                  extent=(t[0], t[-1], 3.5, -0.5))
        ax2.plot(t, [r["vx"] for r in rows], linewidth=0.8)
    ax.set_yticks(range(4))
    ax.set_yticklabels(["FR", "FL", "RR", "RL"])
    ax.set_title("Foot contacts (dark = stance)")
    ax2.set_xlabel("time [s]")
    ax2.set_ylabel("v [m/s]")
    ax2.grid(True, alpha=0.3)
    return _save(fig, out_path)
