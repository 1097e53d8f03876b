"""Dependency-free SVG line charts.

Output is plain-string SVG: deterministic for identical inputs (fixed
two-decimal coordinates), XML-parseable, and diffable in tests. One
circle is emitted per data point so charts can be checked structurally.
"""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape


def _nice_step(span: float, target_ticks: int) -> float:
    """A 1/2/5-scaled tick step giving roughly target_ticks divisions."""
    raw = span / max(target_ticks, 1)
    magnitude = 10.0 ** math.floor(math.log10(raw)) if raw > 0 else 1.0
    for mult in (1.0, 2.0, 5.0, 10.0):
        if magnitude * mult >= raw:
            return magnitude * mult
    return magnitude * 10.0


def _ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = _nice_step(hi - lo, target)
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return [round(i * step, 10) for i in range(first, last + 1)]


def _fmt(v: float) -> str:
    return format(v, ".2f")


def _label(v: float) -> str:
    text = format(v, ".10g")
    return text


def render_line_chart(points: Sequence[tuple[float, float]], *, x_label: str,
                      y_label: str, title: str = "", y_min: float = 0.0,
                      y_max: float = 100.0, width: int = 640,
                      height: int = 400) -> str:
    """Render (x, y) points as an SVG line chart with labeled axes.

    The y axis spans [y_min, y_max] regardless of the data; the x axis
    spans the data range. Points must be non-empty with finite values.
    """
    if not points:
        raise ValueError("no points to chart")
    for x, y in points:
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite point ({x}, {y})")
    if y_max <= y_min:
        raise ValueError(f"empty y range [{y_min}, {y_max}]")

    margin_left, margin_right, margin_top, margin_bottom = 62.0, 18.0, 34.0, 54.0
    plot_w = width - margin_left - margin_right
    plot_h = height - margin_top - margin_bottom

    xs = [p[0] for p in points]
    x_lo, x_hi = min(xs), max(xs)
    if x_hi == x_lo:  # single point: give the axis some width
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5

    def sx(x: float) -> float:
        return margin_left + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y: float) -> float:
        return margin_top + (y_max - y) / (y_max - y_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" role="img">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_fmt(width / 2)}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14" fill="#222222">{escape(title)}</text>'
        )

    for yt in _ticks(y_min, y_max):
        py = sy(yt)
        parts.append(
            f'<line x1="{_fmt(margin_left)}" y1="{_fmt(py)}" '
            f'x2="{_fmt(width - margin_right)}" y2="{_fmt(py)}" '
            f'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(margin_left - 8)}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="#444444">{escape(_label(yt))}</text>'
        )
    for xt in _ticks(x_lo, x_hi, target=8):
        px = sx(xt)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(margin_top + plot_h)}" '
            f'x2="{_fmt(px)}" y2="{_fmt(margin_top + plot_h + 5)}" '
            f'stroke="#444444" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(margin_top + plot_h + 18)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11" fill="#444444">{escape(_label(xt))}</text>'
        )

    # axis lines on top of the gridlines
    parts.append(
        f'<line x1="{_fmt(margin_left)}" y1="{_fmt(margin_top)}" '
        f'x2="{_fmt(margin_left)}" y2="{_fmt(margin_top + plot_h)}" '
        f'stroke="#444444" stroke-width="1.5"/>'
    )
    parts.append(
        f'<line x1="{_fmt(margin_left)}" y1="{_fmt(margin_top + plot_h)}" '
        f'x2="{_fmt(width - margin_right)}" y2="{_fmt(margin_top + plot_h)}" '
        f'stroke="#444444" stroke-width="1.5"/>'
    )
    parts.append(
        f'<text x="{_fmt(margin_left + plot_w / 2)}" y="{_fmt(height - 14)}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'fill="#222222">{escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="16" y="{_fmt(margin_top + plot_h / 2)}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" fill="#222222" '
        f'transform="rotate(-90 16 {_fmt(margin_top + plot_h / 2)})">{escape(y_label)}</text>'
    )

    coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in points)
    parts.append(
        f'<polyline points="{coords}" fill="none" stroke="#1f6fb2" stroke-width="2"/>'
    )
    for x, y in points:
        parts.append(
            f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3.5" fill="#1f6fb2"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
