"""SVG line plots of sweep CSVs, deterministic in the CSV bytes."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import matplotlib
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

from .experiments import CSV_HEADER

# kind -> (x column, y column, y label)
PLOT_KINDS = {
    "bleu_vs_snr": ("snr_db", "bleu1", "BLEU-1"),
    "bleu4_vs_snr": ("snr_db", "bleu4", "BLEU-4"),
    "ser_vs_snr": ("snr_db", "ser", "word error ratio"),
    "cycles_vs_snr": ("snr_db", "mean_cycles", "mean ACT cycles"),
    "train_snr_regimes": ("snr_db", "bleu1", "BLEU-1"),
    "depth_compare": ("snr_db", "bleu1", "BLEU-1"),
    "symbols_per_word": ("k_symbols", "bleu1", "BLEU-1"),
}
X_LABELS = {"snr_db": "SNR (dB)", "k_symbols": "symbols per word"}
MARGIN = 0.05


@dataclass
class PlotInfo:
    path: Path
    series: dict[str, tuple[list[float], list[float]]]
    xlim: tuple[float, float]
    ylim: tuple[float, float]


def read_series(text: str, x_col: str, y_col: str) -> dict[str, tuple[list[float], list[float]]]:
    """Group rows by ``system`` into x-sorted (x, y) lists; raise ValueError on malformed input."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError("malformed CSV: header does not match the sweep schema")
    xi, yi = CSV_HEADER.index(x_col), CSV_HEADER.index(y_col)
    series: dict[str, list[tuple[float, float]]] = {}
    for n, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"malformed CSV: line {n} has {len(row)} fields")
        try:
            point = (float(row[xi]), float(row[yi]))
        except ValueError as exc:
            raise ValueError(f"malformed CSV: line {n}: {exc}") from None
        series.setdefault(row[0], []).append(point)
    if not series:
        raise ValueError("malformed CSV: no data rows")
    return {k: ([p[0] for p in sorted(v)], [p[1] for p in sorted(v)]) for k, v in sorted(series.items())}


def padded_range(values) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    span = hi - lo
    if span == 0:
        span = abs(lo) or 1.0
        return lo - MARGIN * span, hi + MARGIN * span
    return lo - MARGIN * span, hi + MARGIN * span


def emit_plot(csv_path, kind: str = "bleu_vs_snr", out=None) -> PlotInfo:
    """Render one line per system to ``out`` (default: the CSV path with ``.svg``)."""
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    csv_path = Path(csv_path)
    x_col, y_col, y_label = PLOT_KINDS[kind]
    series = read_series(csv_path.read_text(encoding="utf-8"), x_col, y_col)
    out = Path(out) if out is not None else csv_path.with_suffix(".svg")

    xs = [x for xv, _ in series.values() for x in xv]
    ys = [y for _, yv in series.values() for y in yv]
    xlim, ylim = padded_range(xs), padded_range(ys)
    with matplotlib.rc_context({"svg.hashsalt": "semcom", "svg.fonttype": "none"}):
        fig = Figure(figsize=(5.0, 3.6))
        FigureCanvasSVG(fig)
        ax = fig.add_subplot(1, 1, 1)
        for name, (x, y) in series.items():
            ax.plot(x, y, marker="o", markersize=3, linewidth=1.2, label=name)
        ax.set_xlim(*xlim)
        ax.set_ylim(*ylim)
        ax.set_xlabel(X_LABELS[x_col])
        ax.set_ylabel(y_label)
        ax.grid(True, linewidth=0.3, alpha=0.5)
        ax.legend(fontsize=7, frameon=False)
        fig.tight_layout()
        fig.savefig(out, format="svg", metadata={"Date": None})
    return PlotInfo(out, series, xlim, ylim)
