"""Static SVG rendering of sensitivity-interval results: one solid bar per
sensitivity bound for the range of point estimates, dashed extensions out to
the confidence limits, and a marker at the midpoint of the solid bar.

Pure string assembly with fixed-precision coordinates, so the output is
byte-for-byte deterministic for identical inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = ["IntervalBar", "render_interval_plot"]


@dataclass(frozen=True)
class IntervalBar:
    label: str
    point_lo: float
    point_hi: float
    ci_lo: float
    ci_hi: float


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    start = step * math.ceil(lo / step)
    out = []
    t = start
    while t <= hi + 1e-12 * max(1.0, abs(hi)):
        out.append(round(t, 10))
        t += step
    return out


def render_interval_plot(
    bars: list[IntervalBar],
    *,
    title: str = "",
    xlabel: str = "Lambda",
    ylabel: str = "estimate",
    width: int = 640,
    height: int = 420,
) -> str:
    """Render interval bars against their labels. Returns the SVG text."""
    if not bars:
        raise ValueError("nothing to plot")
    left, right, top, bottom = 64.0, 16.0, 34.0, 48.0
    plot_w = width - left - right
    plot_h = height - top - bottom

    y_lo = min(b.ci_lo for b in bars)
    y_hi = max(b.ci_hi for b in bars)
    pad = 0.06 * (y_hi - y_lo if y_hi > y_lo else max(abs(y_hi), 1.0))
    y_lo -= pad
    y_hi += pad

    def xpos(i: int) -> float:
        return left + plot_w * (i + 0.5) / len(bars)

    def ypos(v: float) -> float:
        return top + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{_fmt(left)}" y="{_fmt(top)}" width="{_fmt(plot_w)}" '
        f'height="{_fmt(plot_h)}" fill="none" stroke="black" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_fmt(width / 2)}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    for t in _ticks(y_lo + pad, y_hi - pad):
        y = ypos(t)
        parts.append(
            f'<line x1="{_fmt(left - 4)}" y1="{_fmt(y)}" x2="{_fmt(left)}" '
            f'y2="{_fmt(y)}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(left - 8)}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{t:g}</text>'
        )
    parts.append(
        f'<text x="14" y="{_fmt(top + plot_h / 2)}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {_fmt(top + plot_h / 2)})">{ylabel}</text>'
    )
    parts.append(
        f'<text x="{_fmt(left + plot_w / 2)}" y="{_fmt(height - 10)}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    for i, bar in enumerate(bars):
        x = xpos(i)
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(ypos(bar.ci_lo))}" x2="{_fmt(x)}" '
            f'y2="{_fmt(ypos(bar.point_lo))}" stroke="black" stroke-width="1.5" '
            f'stroke-dasharray="5,4"/>'
        )
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(ypos(bar.point_hi))}" x2="{_fmt(x)}" '
            f'y2="{_fmt(ypos(bar.ci_hi))}" stroke="black" stroke-width="1.5" '
            f'stroke-dasharray="5,4"/>'
        )
        parts.append(
            f'<line x1="{_fmt(x)}" y1="{_fmt(ypos(bar.point_lo))}" x2="{_fmt(x)}" '
            f'y2="{_fmt(ypos(bar.point_hi))}" stroke="black" stroke-width="2.5"/>'
        )
        for v in (bar.ci_lo, bar.ci_hi):
            parts.append(
                f'<line x1="{_fmt(x - 5)}" y1="{_fmt(ypos(v))}" x2="{_fmt(x + 5)}" '
                f'y2="{_fmt(ypos(v))}" stroke="black" stroke-width="1.5"/>'
            )
        mid = 0.5 * (bar.point_lo + bar.point_hi)
        parts.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(ypos(mid))}" r="4" fill="white" '
            f'stroke="black" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(top + plot_h + 16)}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{bar.label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
