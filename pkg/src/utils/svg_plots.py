# flake8: noqa: E501
"""
Minimal SVG line charts for batch outputs.
"""

import math
from typing import Dict, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

WIDTH = 640
HEIGHT = 420
MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 55}

SERIES_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"]


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> List[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_chart(
    x: Sequence[float],
    y: Sequence[float],
    errors: Optional[Sequence[float]] = None,
    extra_series: Optional[Dict[str, Sequence[float]]] = None,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    log_x: bool = False,
    y_range: Optional[Tuple[float, float]] = None,
) -> str:
    """
    Render one or more polylines over shared x values, with optional error bars on the first.

    Args:
        x: Abscissae (positive when log_x)
        y: Main series
        errors: Symmetric error bar half-widths for the main series
        extra_series: Further named series on the same x values
        title: Chart title
        x_label: Axis label
        y_label: Axis label
        log_x: Logarithmic x axis
        y_range: Fixed (min, max) for the y axis

    Returns:
        SVG document as a string
    """
    series = {"main": list(y)}
    series.update({k: list(v) for k, v in (extra_series or {}).items()})
    if any(len(s) != len(x) for s in series.values()):
        raise ValueError("Every series needs one value per x")
    if log_x and any(v <= 0 for v in x):
        raise ValueError("A logarithmic x axis needs positive values")

    tx = [math.log10(v) for v in x] if log_x else [float(v) for v in x]
    errs = list(errors) if errors is not None else [0.0] * len(x)
    finite = [v for s in series.values() for v in s if math.isfinite(v)]
    finite += [a + e for a, e in zip(y, errs) if math.isfinite(a + e)] + [a - e for a, e in zip(y, errs) if math.isfinite(a - e)]
    y_lo, y_hi = y_range if y_range else (min(finite, default=0.0), max(finite, default=1.0))
    if y_hi <= y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    x_lo, x_hi = (min(tx), max(tx)) if tx else (0.0, 1.0)
    if x_hi <= x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v: float) -> float:
        return MARGIN["left"] + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v: float) -> float:
        return MARGIN["top"] + (1.0 - (v - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<line x1="{MARGIN["left"]}" y1="{_fmt(py(y_lo))}" x2="{WIDTH - MARGIN["right"]}" y2="{_fmt(py(y_lo))}" stroke="black"/>',
        f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"]}" x2="{MARGIN["left"]}" y2="{_fmt(py(y_lo))}" stroke="black"/>',
    ]
    for v, label in zip(tx, x):
        parts.append(f'<text x="{_fmt(px(v))}" y="{HEIGHT - MARGIN["bottom"] + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{label:g}</text>')
    for v in _ticks(y_lo, y_hi):
        parts.append(f'<text x="{MARGIN["left"] - 8}" y="{_fmt(py(v) + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{v:.3g}</text>')
        parts.append(f'<line x1="{MARGIN["left"]}" y1="{_fmt(py(v))}" x2="{WIDTH - MARGIN["right"]}" y2="{_fmt(py(v))}" stroke="#dddddd"/>')
    parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-family="sans-serif" font-size="13">{escape(x_label)}</text>')
    parts.append(f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {HEIGHT / 2})">{escape(y_label)}</text>')

    for n, (name, values) in enumerate(series.items()):
        color = SERIES_COLORS[n % len(SERIES_COLORS)]
        pts = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in zip(tx, values) if math.isfinite(b))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in zip(tx, values):
            if math.isfinite(b):
                parts.append(f'<circle cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="3" fill="{color}"/>')
        if name != "main":
            parts.append(f'<text x="{WIDTH - MARGIN["right"] - 4}" y="{MARGIN["top"] + 14 * n}" text-anchor="end" font-family="sans-serif" font-size="11" fill="{color}">{escape(name)}</text>')

    if errors is not None:
        for a, b, e in zip(tx, y, errs):
            if math.isfinite(b) and math.isfinite(e) and e > 0:
                parts.append(f'<line x1="{_fmt(px(a))}" y1="{_fmt(py(b - e))}" x2="{_fmt(px(a))}" y2="{_fmt(py(b + e))}" stroke="{SERIES_COLORS[0]}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
