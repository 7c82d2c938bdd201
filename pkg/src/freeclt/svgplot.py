"""Minimal template-based SVG emission: axes, optional log scales, point and
line series, histograms.  No external plotting dependency; output bytes are a
deterministic function of the data."""

from __future__ import annotations

import math

_W, _H = 640, 440
_ML, _MR, _MT, _MB = 70, 20, 40, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _transform(lo, hi, log):
    if log:
        lo, hi = math.log10(lo), math.log10(hi)

    def to_unit(v):
        v = math.log10(v) if log else v
        if hi == lo:
            return 0.5
        return (v - lo) / (hi - lo)

    return to_unit


def _ticks(lo, hi, log, count=5):
    if log:
        a, b = math.ceil(math.log10(lo) - 1e-9), math.floor(math.log10(hi) + 1e-9)
        if b >= a:
            return [10.0**k for k in range(a, b + 1)]
    if hi == lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _axes(x_lo, x_hi, y_lo, y_hi, logx, logy, title, xlabel, ylabel):
    tx = _transform(x_lo, x_hi, logx)
    ty = _transform(y_lo, y_hi, logy)

    def px(v):
        return _ML + tx(v) * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - ty(v) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="15">{title}</text>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black"/>',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {_H / 2})">{ylabel}</text>',
    ]
    for t in _ticks(x_lo, x_hi, logx):
        x = px(t)
        parts.append(f'<line x1="{_fmt(x)}" y1="{_H - _MB}" x2="{_fmt(x)}" y2="{_H - _MB + 5}" stroke="black"/>')
        label = f"{t:g}"
        parts.append(
            f'<text x="{_fmt(x)}" y="{_H - _MB + 18}" text-anchor="middle" font-size="10">{label}</text>'
        )
    for t in _ticks(y_lo, y_hi, logy):
        y = py(t)
        parts.append(f'<line x1="{_ML - 5}" y1="{_fmt(y)}" x2="{_ML}" y2="{_fmt(y)}" stroke="black"/>')
        parts.append(
            f'<text x="{_ML - 8}" y="{_fmt(y + 3)}" text-anchor="end" font-size="10">{t:g}</text>'
        )
    return parts, px, py


def line_plot(path, series, title="", xlabel="", ylabel="", logx=False, logy=False):
    """Write a line-and-marker plot.  ``series`` is a list of
    (label, xs, ys) triples; log axes require positive data."""
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    if not xs_all:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if not logy:
        pad = 0.05 * (y_hi - y_lo or 1.0)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    parts, px, py = _axes(x_lo, x_hi, y_lo, y_hi, logx, logy, title, xlabel, ylabel)
    for k, (label, xs, ys) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in zip(xs, ys):
            parts.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="3" fill="{color}"/>')
        parts.append(
            f'<text x="{_W - _MR - 6}" y="{_MT + 14 + 14 * k}" text-anchor="end" '
            f'font-size="11" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))


def histogram_plot(path, values, bins=60, overlay=None, title="", xlabel="", ylabel="density"):
    """Write a density histogram with an optional overlay curve.

    ``overlay`` is a (xs, ys) pair, e.g. a reference density sampled on a
    grid.
    """
    values = sorted(float(v) for v in values)
    if not values:
        raise ValueError("nothing to plot")
    lo, hi = values[0], values[-1]
    span = hi - lo or 1.0
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in values:
        k = min(int((v - lo) / width), bins - 1)
        counts[k] += 1
    dens = [c / (len(values) * width) for c in counts]
    y_hi = max(dens)
    if overlay is not None:
        y_hi = max(y_hi, max(overlay[1]))
    parts, px, py = _axes(lo, hi, 0.0, y_hi * 1.05, False, False, title, xlabel, ylabel)
    for k, d in enumerate(dens):
        if d == 0:
            continue
        x0, x1 = px(lo + k * width), px(lo + (k + 1) * width)
        y0, y1 = py(0.0), py(d)
        parts.append(
            f'<rect x="{_fmt(x0)}" y="{_fmt(y1)}" width="{_fmt(x1 - x0)}" '
            f'height="{_fmt(y0 - y1)}" fill="#1f77b4" fill-opacity="0.6"/>'
        )
    if overlay is not None:
        xs, ys = overlay
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="2"/>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts))
