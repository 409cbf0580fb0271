"""Minimal static SVG renderers for heatmaps and curves.

Deliberately tiny: the interactive UI is the real renderer, these exist
so a CLI-only run can still produce figures. Output is deterministic.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

__all__ = ["heatmap_svg", "curve_svg"]

_CELL = 48
_MARGIN = 70

# Two-stop blue ramp; undefined cells are hatched, never colored as zero.
_LOW = (247, 251, 255)
_HIGH = (8, 48, 107)


def _color(v: float, vmin: float, vmax: float) -> str:
    t = 0.0 if vmax <= vmin else (v - vmin) / (vmax - vmin)
    r = round(_LOW[0] + t * (_HIGH[0] - _LOW[0]))
    g = round(_LOW[1] + t * (_HIGH[1] - _LOW[1]))
    b = round(_LOW[2] + t * (_HIGH[2] - _LOW[2]))
    return f"rgb({r},{g},{b})"


def heatmap_svg(
    values: Sequence[Sequence[float | None]],
    row_labels: Sequence[float],
    col_labels: Sequence[float],
    title: str,
) -> str:
    """Grid heatmap; rows are delta_alpha, columns delta_cov.

    None cells render with a diagonal hatch pattern.
    """
    rows, cols = len(values), len(values[0])
    width = _MARGIN + cols * _CELL + 20
    height = _MARGIN + rows * _CELL + 20
    finite = [v for row in values for v in row if v is not None]
    vmin = min(finite) if finite else 0.0
    vmax = max(finite) if finite else 1.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        "<defs><pattern id='hatch' width='6' height='6' patternUnits='userSpaceOnUse'>"
        "<path d='M0,6 L6,0' stroke='#999' stroke-width='1'/></pattern></defs>",
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
    ]
    for i, row in enumerate(values):
        y = _MARGIN + i * _CELL
        parts.append(
            f'<text x="{_MARGIN - 6}" y="{y + _CELL / 2 + 4}" text-anchor="end">{row_labels[i]:.2f}</text>'
        )
        for j, v in enumerate(row):
            x = _MARGIN + j * _CELL
            if v is None:
                fill = "url(#hatch)"
                label = "n/a"
            else:
                fill = _color(v, vmin, vmax)
                label = f"{v:.2f}"
            parts.append(
                f'<rect x="{x}" y="{y}" width="{_CELL}" height="{_CELL}" fill="{fill}" '
                'stroke="#fff"/>'
            )
            text_fill = "#000" if v is None or (vmax - vmin) == 0 or (v - vmin) / (vmax - vmin) < 0.6 else "#fff"
            parts.append(
                f'<text x="{x + _CELL / 2}" y="{y + _CELL / 2 + 4}" text-anchor="middle" '
                f'fill="{text_fill}">{label}</text>'
            )
    for j, c in enumerate(col_labels):
        x = _MARGIN + j * _CELL
        parts.append(
            f'<text x="{x + _CELL / 2}" y="{_MARGIN - 8}" text-anchor="middle">{c:.2f}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def curve_svg(
    series: Mapping[str, Sequence[tuple[float, float]]],
    x_label: str,
    y_label: str,
    title: str,
    width: int = 520,
    height: int = 360,
) -> str:
    """Polyline chart for one or more (x, y) series."""
    pad = 55
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts if math.isfinite(y)]
    if not xs or not ys:
        return '<svg xmlns="http://www.w3.org/2000/svg" width="10" height="10"/>'
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)
    if xmax == xmin:
        xmax = xmin + 1.0
    if ymax == ymin:
        ymax = ymin + 1.0

    def sx(x: float) -> float:
        return pad + (x - xmin) / (xmax - xmin) * (width - 2 * pad)

    def sy(y: float) -> float:
        return height - pad - (y - ymin) / (ymax - ymin) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="#333"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="#333"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">{x_label}</text>',
        f'<text x="14" y="{height / 2}" text-anchor="middle" transform="rotate(-90 14 {height / 2})">{y_label}</text>',
        f'<text x="{pad}" y="{height - pad + 16}" text-anchor="middle">{xmin:.2f}</text>',
        f'<text x="{width - pad}" y="{height - pad + 16}" text-anchor="middle">{xmax:.2f}</text>',
        f'<text x="{pad - 6}" y="{height - pad + 4}" text-anchor="end">{ymin:.2f}</text>',
        f'<text x="{pad - 6}" y="{pad + 4}" text-anchor="end">{ymax:.2f}</text>',
    ]
    for idx, (name, pts) in enumerate(series.items()):
        color = colors[idx % len(colors)]
        coords = " ".join(
            f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts if math.isfinite(y)
        )
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        parts.append(
            f'<text x="{width - pad + 4}" y="{pad + 14 * idx + 10}" fill="{color}">{name}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
