"""Render the report data files to PNG figures.

Every figure is a plain matplotlib line/scatter rendering of one ``.dat``
file produced by emit_plot_data; output is deterministic for fixed inputs.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be fixed first)

_DPI = 110


def _load_dat(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8") as handle:
        header = handle.readline().lstrip("# ").split()
        rows = [line.split() for line in handle if line.strip()]
    return header, rows


def _timeseries_plot(ax, header, rows):
    ts = [float(r[0]) for r in rows]
    for col in range(1, len(header)):
        ax.plot(ts, [float(r[col]) for r in rows], marker=".", label=header[col])
    ax.set_xlabel(header[0])
    ax.legend(fontsize=8)


def _render_stability(ax_left, ax_right, header, rows):
    ts = [float(r[0]) for r in rows]
    ax_left.plot(ts, [float(r[2]) for r in rows], marker=".", label="i_node")
    ax_left.plot(ts, [float(r[3]) for r in rows], marker=".", label="i_channel")
    ax_left.set_ylim(0.0, 1.05)
    ax_left.set_xlabel("t")
    ax_left.legend(fontsize=8)
    ax_right.plot(ts, [float(r[5]) for r in rows], marker=".", label="ks_p")
    ax_right.plot(ts, [float(r[6]) for r in rows], marker=".", label="wasserstein")
    ax_right.axhline(0.05, linestyle="--", linewidth=0.8, color="gray")
    ax_right.set_xlabel("t")
    ax_right.legend(fontsize=8)


def _render_curves(ax, rows, key_cols, x_col, y_col):
    curves: dict[tuple, list[tuple[float, float]]] = {}
    for row in rows:
        key = tuple(row[c] for c in key_cols)
        curves.setdefault(key, []).append((float(row[x_col]), float(row[y_col])))
    for key in sorted(curves):
        points = curves[key]
        ax.plot([p[0] for p in points], [p[1] for p in points],
                linewidth=0.9, label="/".join(key))
    ax.plot([0, 1], [0, 1], linestyle=":", linewidth=0.8, color="gray")
    if len(curves) <= 12:
        ax.legend(fontsize=6)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)


def render_figures(report_dir: Union[str, Path],
                   figures: Sequence[str] | None = None) -> list[Path]:
    """Render a PNG next to each present ``.dat`` file; returns written paths."""
    report = Path(report_dir)
    written: list[Path] = []
    for dat_path in sorted(report.glob("*.dat")):
        figure = dat_path.stem
        if figures is not None and figure not in figures:
            continue
        header, rows = _load_dat(dat_path)
        if not rows:
            continue
        out_path = report / f"{figure}.png"
        if figure == "stability":
            fig, (ax_left, ax_right) = plt.subplots(1, 2, figsize=(9, 3.5))
            _render_stability(ax_left, ax_right, header, rows)
        elif figure in ("hops", "lorenz"):
            fig, ax = plt.subplots(figsize=(5, 4))
            key_cols = (0, 1) if figure == "hops" else (0,)
            x_col, y_col = (2, 3) if figure == "hops" else (1, 2)
            _render_curves(ax, rows, key_cols, x_col, y_col)
            ax.set_xlabel("rank fraction")
            ax.set_ylabel("cumulative share")
        elif figure == "powerlaw":
            fig, ax = plt.subplots(figsize=(6, 3.5))
            _timeseries_plot(ax, header, rows)
            ax.set_ylabel("fit parameters")
        else:
            fig, ax = plt.subplots(figsize=(6, 3.5))
            _timeseries_plot(ax, header, rows)
        fig.suptitle(figure, fontsize=10)
        fig.tight_layout()
        fig.savefig(out_path, dpi=_DPI)
        plt.close(fig)
        written.append(out_path)
    return written
