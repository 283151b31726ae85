"""Render one figure from CSV inputs, deterministically.

The renderer draws exactly what the CSV holds: values, and error bars taken
from a named column. The only computed overlay is an ordinary least-squares
line (slope and R^2 go to stdout and into the report). Repeated renders of
the same (spec, inputs) write byte-identical PNGs.
"""

import csv
import math
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .spec import FigureSpec

DPI = 130
FIGSIZE = (6.4, 4.2)

_RC = {
    "font.family": "DejaVu Sans",
    "font.size": 10.0,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "figure.autolayout": True,
    "svg.hashsalt": "figpipe",
}


def read_rows(path: str) -> list:
    """All rows of a CSV as dicts. Missing file or zero data rows -> error."""
    if not os.path.isfile(path):
        raise ValueError(f"input file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"empty input: {path} has no header")
        rows = [dict(r) for r in reader]
    if not rows:
        raise ValueError(f"empty input: {path} has a header but no rows")
    return rows


def _check_columns(spec: FigureSpec, path: str, rows: list) -> None:
    have = list(rows[0])
    for col in spec.columns():
        if col not in have:
            raise ValueError(
                f"input {os.path.basename(path)} is missing column {col!r} "
                f"(have: {', '.join(have)})")


def _to_float(cell: str, col: str, path: str) -> float:
    try:
        return float(cell)
    except (TypeError, ValueError):
        raise ValueError(
            f"input {os.path.basename(path)}: column {col!r} has "
            f"non-numeric cell {cell!r}") from None


def _err_length(cell: str) -> float:
    """Error-bar half-length: blank or non-finite cells draw a zero-length bar."""
    if cell is None or cell == "":
        return 0.0
    try:
        v = float(cell)
    except ValueError:
        return 0.0
    return v if math.isfinite(v) else 0.0


def load_series(spec: FigureSpec, data_dir: str) -> dict:
    """Filtered, grouped, numeric plot data: {series: {"x","y","err","path"}}.

    Series keep first-appearance order; points within a series (and within a
    path, if the spec splits paths) are sorted by x.
    """
    kept = []
    for name in spec.inputs:
        path = os.path.join(data_dir, name)
        rows = read_rows(path)
        _check_columns(spec, path, rows)
        for row in rows:
            if all(row[c] == str(v) for c, v in spec.filter.items()):
                x = _to_float(row[spec.x], spec.x, path)
                y = _to_float(row[spec.y], spec.y, path)
                err = _err_length(row[spec.error_bar]) if spec.error_bar else 0.0
                pth = row[spec.path] if spec.path else ""
                kept.append((row[spec.group], pth, x, y, err))
    if not kept:
        flt = f" after filter {spec.filter}" if spec.filter else ""
        raise ValueError(
            f"no rows to plot from {', '.join(spec.inputs)}{flt}")
    series = {}
    for grp, pth, x, y, err in kept:
        series.setdefault(grp, []).append((pth, x, y, err))
    out = {}
    for grp, pts in series.items():
        pts.sort(key=lambda p: (p[0], p[1]))
        out[grp] = {
            "path": [p[0] for p in pts],
            "x": np.array([p[1] for p in pts]),
            "y": np.array([p[2] for p in pts]),
            "err": np.array([p[3] for p in pts]),
        }
    return out


def least_squares(x: np.ndarray, y: np.ndarray) -> tuple:
    """Ordinary least-squares line fit: (slope, intercept, r_squared)."""
    if len(x) < 2:
        raise ValueError("least-squares overlay needs at least 2 points")
    xbar, ybar = x.mean(), y.mean()
    sxx = float(((x - xbar) ** 2).sum())
    if sxx == 0.0:
        raise ValueError("least-squares overlay needs at least 2 distinct x")
    slope = float(((x - xbar) * (y - ybar)).sum()) / sxx
    intercept = ybar - slope * xbar
    ss_res = float(((y - (slope * x + intercept)) ** 2).sum())
    ss_tot = float(((y - ybar) ** 2).sum())
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return slope, float(intercept), r2


def render(spec: FigureSpec, data_dir: str, out_path: str | None = None) -> dict:
    """Draw the figure and return a report of what was plotted.

    Report keys: figure_id, out, series (name -> point count), paths
    (name -> distinct path count, when the spec splits paths), x_range,
    y_range, xscale, yscale, series_data (name -> x/y/err lists for point
    figures), and overlay (slope/intercept/r2, when fitted). The overlay
    line is also printed to stdout.
    """
    data = load_series(spec, data_dir)
    out = out_path or spec.output

    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        report_series = {}
        report_paths = {}
        series_data = {}
        for grp, d in data.items():
            if spec.path:
                paths = sorted(set(d["path"]))
                color = None
                for p in paths:
                    sel = [i for i, q in enumerate(d["path"]) if q == p]
                    line, = ax.plot(d["x"][sel], d["y"][sel], alpha=0.35,
                                    linewidth=0.9, color=color,
                                    label=grp if color is None else None)
                    color = line.get_color()
                report_paths[grp] = len(paths)
                report_series[grp] = len(d["x"])
            else:
                ax.errorbar(d["x"], d["y"], yerr=d["err"], marker="o",
                            markersize=4, capsize=3, linewidth=1.2, label=grp)
                report_series[grp] = len(d["x"])
                series_data[grp] = {"x": d["x"].tolist(), "y": d["y"].tolist(),
                                    "err": d["err"].tolist()}

        all_x = np.concatenate([d["x"] for d in data.values()])
        all_y = np.concatenate([d["y"] for d in data.values()])
        report = {
            "figure_id": spec.figure_id,
            "out": os.path.abspath(out),
            "series": report_series,
            "x_range": [float(all_x.min()), float(all_x.max())],
            "y_range": [float(all_y.min()), float(all_y.max())],
        }
        if spec.path:
            report["paths"] = report_paths
        else:
            report["series_data"] = series_data

        if spec.overlay == "least_squares":
            slope, intercept, r2 = least_squares(all_x, all_y)
            xs = np.array([all_x.min(), all_x.max()])
            ax.plot(xs, slope * xs + intercept, "k--", linewidth=1.0,
                    label=f"least squares (R$^2$={r2:.3f})")
            report["overlay"] = {"slope": slope, "intercept": intercept,
                                 "r2": r2}
            print(f"least-squares overlay: slope={slope:.12g} "
                  f"intercept={intercept:.12g} r2={r2:.12g}")

        ax.set_xscale(spec.scale.get("x", "linear"))
        ax.set_yscale(spec.scale.get("y", "linear"))
        ax.set_xlabel(spec.x_label or spec.x)
        ax.set_ylabel(spec.y_label or spec.y)
        if spec.title:
            ax.set_title(spec.title)
        ax.legend(loc="best")
        report["xscale"] = ax.get_xscale()
        report["yscale"] = ax.get_yscale()

        os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
        fig.savefig(out, dpi=DPI, metadata={"Software": None})
        plt.close(fig)
    return report
