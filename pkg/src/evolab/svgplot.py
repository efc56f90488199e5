"""Tiny dependency-free SVG line plots.

Charts are built from in-memory series (the CSVs stay the source of truth);
output is deterministic: fixed precision, no timestamps, stable ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import InputError

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#17becf", "#7f7f7f", "#bcbd22", "#e377c2",
)


@dataclass(frozen=True)
class Series:
    name: str
    xs: Sequence[float]
    ys: Sequence[float]


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def line_plot(
    path: str | Path,
    series: Sequence[Series],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 640,
    height: int = 420,
) -> None:
    """Render series as polylines with axes, ticks, and a legend."""
    if not series:
        raise InputError("need at least one series")
    pts = [
        (float(x), float(y))
        for s in series
        for x, y in zip(s.xs, s.ys)
        if math.isfinite(float(x)) and math.isfinite(float(y))
    ]
    if not pts:
        raise InputError("series contain no finite points")
    xs, ys = zip(*pts)
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad_y = 0.06 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    ml, mr, mt, mb = 62, 16, 34 if title else 16, 46
    pw, ph = width - ml - mr, height - mt - mb

    def sx(v: float) -> float:
        return ml + (v - x_lo) / (x_hi - x_lo) * pw

    def sy(v: float) -> float:
        return mt + ph - (v - y_lo) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        'stroke="#333" stroke-width="1"/>',
    ]
    if title:
        out.append(
            f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" '
            f'font-size="13">{_esc(title)}</text>'
        )
    for t in _nice_ticks(x_lo, x_hi):
        if not (x_lo <= t <= x_hi):
            continue
        x = sx(t)
        out.append(
            f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + 4}" '
            'stroke="#333"/>'
        )
        out.append(
            f'<text x="{x:.2f}" y="{mt + ph + 16}" text-anchor="middle">{_fmt(t)}</text>'
        )
    for t in _nice_ticks(y_lo, y_hi):
        if not (y_lo <= t <= y_hi):
            continue
        y = sy(t)
        out.append(
            f'<line x1="{ml - 4}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="#333"/>'
        )
        out.append(
            f'<text x="{ml - 7}" y="{y + 3.5:.2f}" text-anchor="end">{_fmt(t)}</text>'
        )
        out.append(
            f'<line x1="{ml}" y1="{y:.2f}" x2="{ml + pw}" y2="{y:.2f}" '
            'stroke="#ddd" stroke-width="0.5"/>'
        )
    if xlabel:
        out.append(
            f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" '
            f'text-anchor="middle">{_esc(xlabel)}</text>'
        )
    if ylabel:
        out.append(
            f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{_esc(ylabel)}</text>'
        )
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        coords = [
            f"{sx(float(x)):.2f},{sy(float(y)):.2f}"
            for x, y in zip(s.xs, s.ys)
            if math.isfinite(float(x)) and math.isfinite(float(y))
        ]
        if len(coords) == 1:
            cx, cy = coords[0].split(",")
            out.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')
        elif coords:
            out.append(
                f'<polyline points="{" ".join(coords)}" fill="none" '
                f'stroke="{color}" stroke-width="1.5"/>'
            )
    lx, ly = ml + 10, mt + 10
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        y = ly + 15 * i
        out.append(
            f'<line x1="{lx}" y1="{y}" x2="{lx + 18}" y2="{y}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        out.append(f'<text x="{lx + 23}" y="{y + 3.5}">{_esc(s.name)}</text>')
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")


def _esc(text: str) -> str:
    return (
        str(text).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )


def histogram_series(
    values: Sequence[float], bin_width: float, name: str, lo: float | None = None,
    hi: float | None = None,
) -> Series:
    """Bin values and return the counts as a step-shaped series."""
    if bin_width <= 0:
        raise InputError(f"bin_width must be positive, got {bin_width}")
    vals = [float(v) for v in values if math.isfinite(float(v))]
    if not vals:
        raise InputError("no finite values to bin")
    lo = math.floor((min(vals) if lo is None else lo) / bin_width) * bin_width
    hi = max(vals) if hi is None else hi
    n_bins = max(1, int(math.ceil((hi - lo) / bin_width - 1e-9)))
    counts = [0] * n_bins
    for v in vals:
        j = min(int((v - lo) / bin_width), n_bins - 1)
        counts[j] += 1
    xs: list[float] = []
    ys: list[float] = []
    for j, c in enumerate(counts):
        xs.extend((lo + j * bin_width, lo + (j + 1) * bin_width))
        ys.extend((c, c))
    return Series(name, xs, ys)
