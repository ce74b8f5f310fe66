"""Dependency-free SVG charts whose bytes depend only on the input data."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 480
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 150, 40, 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
META_COLUMNS = {"policy_id", "iteration", "policy_index", "config_hash"}


@dataclass
class Series:
    label: str
    xs: list[float]
    ys: list[float]


@dataclass
class Table:
    label: str
    header: list[str]
    rows: list[list[str]]

    def column(self, name: str) -> list[float]:
        i = self.header.index(name)
        return [float(r[i]) for r in self.rows]

    @property
    def value_columns(self) -> list[str]:
        return [h for h in self.header if h not in META_COLUMNS]


def read_table(path: str | Path) -> Table:
    text = Path(path).read_text(encoding="utf-8")
    rows = [r for r in csv.reader(io.StringIO(text)) if r]
    if len(rows) < 2:
        raise ValueError(f"{path}: CSV has no data rows")
    return Table(Path(path).stem, rows[0], rows[1:])


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _tick_label(x: float) -> str:
    return f"{x:.4g}"


def _bounds(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def render(series: list[Series], x_label: str, y_label: str, lines: bool, title: str = "") -> str:
    """Scatter (``lines=False``) or line chart of the given series as SVG text."""
    if not series or not any(s.xs for s in series):
        raise ValueError("nothing to plot")
    x0, x1 = _bounds([x for s in series for x in s.xs])
    y0, y1 = _bounds([y for s in series for y in s.ys])
    pw = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    ph = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x):
        return MARGIN_LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MARGIN_TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for k in range(5):
        tx = x0 + (x1 - x0) * k / 4
        ty = y0 + (y1 - y0) * k / 4
        out.append(f'<line x1="{_fmt(px(tx))}" y1="{MARGIN_TOP + ph}" x2="{_fmt(px(tx))}" y2="{MARGIN_TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(tx))}" y="{MARGIN_TOP + ph + 18}" text-anchor="middle">{escape(_tick_label(tx))}</text>')
        out.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{_fmt(py(ty))}" x2="{MARGIN_LEFT}" y2="{_fmt(py(ty))}" stroke="black"/>')
        out.append(f'<text x="{MARGIN_LEFT - 8}" y="{_fmt(py(ty) + 4)}" text-anchor="end">{escape(_tick_label(ty))}</text>')
    out.append(f'<text x="{MARGIN_LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(x_label)}</text>')
    cy = MARGIN_TOP + ph / 2
    out.append(f'<text x="20" y="{cy:.2f}" text-anchor="middle" transform="rotate(-90 20 {cy:.2f})">{escape(y_label)}</text>')
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = [(px(x), py(y)) for x, y in zip(s.xs, s.ys)]
        if lines and len(pts) > 1:
            path = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for a, b in pts:
            out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="3" fill="{color}"/>')
        ly = MARGIN_TOP + 10 + 18 * i
        lx = WIDTH - MARGIN_RIGHT + 15
        out.append(f'<circle cx="{lx}" cy="{ly}" r="4" fill="{color}"/>')
        out.append(f'<text x="{lx + 10}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _is_series_log(table: Table) -> bool:
    return "iteration" in table.header and "policy_index" not in table.header and "policy_id" not in table.header


def plot_files(paths: list[str | Path], title: str = "", columns: list[str] | None = None) -> str:
    """SVG for CSV files: metric-vs-iteration lines for per-iteration logs, else a return scatter.

    Line charts draw ``columns`` (default: every value column) of each log.
    Scatter plots use ``columns`` (default: the first two objective columns), one series per file.
    """
    tables = [read_table(p) for p in paths]
    for t in tables:
        missing = [c for c in columns or () if c not in t.value_columns]
        if missing:
            raise ValueError(f"{t.label}: no column(s) {missing}; available: {t.value_columns}")
    if all(_is_series_log(t) for t in tables):
        series, names = [], []
        for t in tables:
            xs = t.column("iteration")
            for col in columns or t.value_columns:
                label = col if len(tables) == 1 else f"{t.label}: {col}"
                series.append(Series(label, xs, t.column(col)))
                names.append(col)
        y_label = names[0] if len(set(names)) == 1 else "value"
        return render(series, "iteration", y_label, lines=True, title=title)
    if columns is not None and len(columns) != 2:
        raise ValueError("a scatter plot needs exactly two columns")
    series = []
    for t in tables:
        if _is_series_log(t):
            raise ValueError(f"cannot mix per-iteration logs and return sets ({t.label})")
        cols = columns or t.value_columns[:2]
        if len(cols) < 2:
            raise ValueError(f"{t.label}: need at least two objective columns")
        columns = columns or cols
        series.append(Series(t.label, t.column(cols[0]), t.column(cols[1])))
    return render(series, columns[0], columns[1], lines=False, title=title)
