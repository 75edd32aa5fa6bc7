"""Native SVG emission for correlation trajectories and severity strips.

Deliberately dependency-free: simple polylines and circles. CSV output is
always available for external plotting tools.
"""

from __future__ import annotations

import numpy as np

from .correlation import CorrelationFeatureTable
from .phasors import ParameterId
from .severity import SeverityRow

_W, _H, _PAD = 900, 420, 50

_SPOOFED_COLOR = "#d95f02"
_NORMAL_COLOR = "#1b9e77"


def _scale(vals, lo, hi, out_lo, out_hi):
    span = hi - lo or 1.0
    return out_lo + (np.asarray(vals) - lo) * (out_hi - out_lo) / span


def trajectory_svg(table: CorrelationFeatureTable, target_pmu: int, channel: ParameterId) -> str:
    """Per-pair correlation curves; pairs touching the target PMU stand out."""
    ch = table.channels.index(channel)
    cycles = np.arange(table.first_cycle, table.first_cycle + table.n_valid_cycles)
    y_lo = min(-1.0, float(table.r[:, :, ch].min()))
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="20" text-anchor="middle" font-size="14">'
        f"r({channel.short_name}), window {table.window} cycles</text>",
    ]
    xs = _scale(cycles, cycles[0], cycles[-1], _PAD, _W - _PAD)
    for k, (i, j) in enumerate(table.pairs):
        ys = _scale(table.r[k, :, ch], y_lo, 1.0, _H - _PAD, _PAD)
        color = _SPOOFED_COLOR if target_pmu in (i, j) else _NORMAL_COLOR
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(xs[::4], ys[::4]))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>')
    parts.append(
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD}" y2="{_H - _PAD}" stroke="black"/>'
    )
    parts.append(f'<line x1="{_PAD}" y1="{_PAD}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def severity_svg(rows: list[SeverityRow]) -> str:
    """Strip plot of per-trajectory MCD (top) and MCOOB (bottom) values,
    grouped spoofed-left / non-spoofed-right as in the source layout."""
    half = _H // 2
    ordered = sorted(rows, key=lambda r: (not r.spoofed, int(r.channel), r.window))
    n_cols = len(ordered) or 1
    col_w = (_W - 2 * _PAD) / n_cols
    mcd_hi = max((r.mcd_max for r in ordered), default=1.0) or 1.0
    mcoob_hi = max((float(np.max(r.mcoob_values)) for r in ordered), default=1.0) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        '<text x="10" y="20" font-size="12">MCD</text>',
        f'<text x="10" y="{half + 20}" font-size="12">MCOOB</text>',
    ]
    for c, row in enumerate(ordered):
        x = _PAD + (c + 0.5) * col_w
        color = _SPOOFED_COLOR if row.spoofed else _NORMAL_COLOR
        for v in row.mcd_values:
            y = half - _PAD - (v / mcd_hi) * (half - 2 * _PAD)
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2" fill="{color}"/>')
        for v in row.mcoob_values:
            y = _H - _PAD - (v / mcoob_hi) * (half - 2 * _PAD)
            parts.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="2" fill="{color}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
