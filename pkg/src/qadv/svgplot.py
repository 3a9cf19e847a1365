"""Minimal deterministic SVG line plots (no display dependencies).

The output is a pure function of the numbers passed in: fixed canvas,
fixed palette, fixed float formatting.
"""

from __future__ import annotations

import math
from pathlib import Path

WIDTH, HEIGHT = 760, 500
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 180, 40, 55

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def write_curves_svg(path, xs, series, title: str = "", ylabel: str = "") -> None:
    """Render curves against log-scaled x values.

    ``series`` is a list of (label, values) pairs with values aligned to
    ``xs``; non-finite values are skipped.
    """
    xs = [float(x) for x in xs]
    if not xs or any(x <= 0 for x in xs):
        raise ValueError("log-x plot needs positive x values")
    lo_x, hi_x = math.log10(min(xs)), math.log10(max(xs))
    span_x = hi_x - lo_x or 1.0
    finite = [v for _, vals in series for v in vals if math.isfinite(v)]
    hi_y = max(finite) * 1.05 if finite else 1.0
    lo_y = 0.0
    span_y = hi_y - lo_y or 1.0
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (math.log10(x) - lo_x) / span_x * plot_w

    def py(y: float) -> float:
        return MARGIN_T + (hi_y - y) / span_y * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{title}</text>',
    ]
    # axes
    x0, y0 = MARGIN_L, MARGIN_T + plot_h
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0 + plot_w}" y2="{y0}" stroke="black"/>'
    )
    parts.append(f'<line x1="{x0}" y1="{MARGIN_T}" x2="{x0}" y2="{y0}" stroke="black"/>')
    for x in xs:
        parts.append(
            f'<line x1="{_fmt(px(x))}" y1="{y0}" x2="{_fmt(px(x))}" y2="{y0 + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(px(x))}" y="{y0 + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{int(x)}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_L + plot_w / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">training set size T (log scale)</text>'
    )
    for k in range(6):
        y = lo_y + span_y * k / 5
        parts.append(
            f'<line x1="{x0 - 5}" y1="{_fmt(py(y))}" x2="{x0}" y2="{_fmt(py(y))}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x0 - 9}" y="{_fmt(py(y) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{y:.3g}</text>'
        )
    if ylabel:
        parts.append(
            f'<text x="18" y="{MARGIN_T + plot_h / 2:.0f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 18 {MARGIN_T + plot_h / 2:.0f})">{ylabel}</text>'
        )
    for idx, (label, vals) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(
            f"{_fmt(px(x))},{_fmt(py(v))}" for x, v in zip(xs, vals) if math.isfinite(v)
        )
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"/>'
        )
        ly = MARGIN_T + 18 + 20 * idx
        lx = WIDTH - MARGIN_R + 12
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.8"/>'
        )
        parts.append(
            f'<text x="{lx + 30}" y="{ly}" font-family="sans-serif" font-size="12">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
