"""Minimal self-contained SVG line charts (generic font family only, no external assets)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
FONT = 'font-family="sans-serif"'


@dataclass
class Panel:
    title: str
    series: dict  # name -> (xs, ys)
    xlabel: str = ""
    ylabel: str = ""
    logx: bool = False
    logy: bool = False
    hlines: dict = field(default_factory=dict)  # name -> y (dashed reference lines)


def _tf(v, log):
    return math.log10(v) if log else v


def _ticks(lo, hi, log, count=5):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // count)
        return [(e, f"1e{e}") for e in range(a, b + 1, step) if lo - 1e-9 <= e <= hi + 1e-9]
    if hi == lo:
        return [(lo, f"{lo:.3g}")]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, v = [], start
    while v <= hi + 1e-12 * abs(step):
        out.append((v, f"{v:.3g}"))
        v += step
    return out


def _panel(p: Panel, ox: float, oy: float, w: float, h: float) -> list[str]:
    ml, mr, mt, mb = 60, 10, 28, 42
    pw, ph = w - ml - mr, h - mt - mb
    pts = []
    for xs, ys in p.series.values():
        for x, y in zip(xs, ys):
            if (not p.logx or x > 0) and (not p.logy or y > 0) and math.isfinite(x) and math.isfinite(y):
                pts.append((_tf(x, p.logx), _tf(y, p.logy)))
    for y in p.hlines.values():
        if not p.logy or y > 0:
            pts.append((pts[0][0] if pts else 0.0, _tf(y, p.logy)))
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(q[0] for q in pts), max(q[0] for q in pts)
    y0, y1 = min(q[1] for q in pts), max(q[1] for q in pts)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(v):
        return ox + ml + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return oy + mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<rect x="{ox + ml:.2f}" y="{oy + mt:.2f}" width="{pw:.2f}" height="{ph:.2f}" fill="none" stroke="#444"/>',
           f'<text x="{ox + ml + pw / 2:.2f}" y="{oy + 18:.2f}" text-anchor="middle" font-size="13" {FONT}>{escape(p.title)}</text>',
           f'<text x="{ox + ml + pw / 2:.2f}" y="{oy + h - 6:.2f}" text-anchor="middle" font-size="11" {FONT}>{escape(p.xlabel)}</text>',
           f'<text transform="translate({ox + 14:.2f},{oy + mt + ph / 2:.2f}) rotate(-90)" text-anchor="middle" font-size="11" {FONT}>{escape(p.ylabel)}</text>']
    for v, lab in _ticks(x0, x1, p.logx):
        out.append(f'<line x1="{sx(v):.2f}" y1="{oy + mt + ph:.2f}" x2="{sx(v):.2f}" y2="{oy + mt + ph + 4:.2f}" stroke="#444"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{oy + mt + ph + 15:.2f}" text-anchor="middle" font-size="9" {FONT}>{lab}</text>')
    for v, lab in _ticks(y0, y1, p.logy):
        out.append(f'<line x1="{ox + ml - 4:.2f}" y1="{sy(v):.2f}" x2="{ox + ml:.2f}" y2="{sy(v):.2f}" stroke="#444"/>')
        out.append(f'<text x="{ox + ml - 6:.2f}" y="{sy(v) + 3:.2f}" text-anchor="end" font-size="9" {FONT}>{lab}</text>')
    items = list(p.series.items())
    for i, (name, (xs, ys)) in enumerate(items):
        color = PALETTE[i % len(PALETTE)]
        coords = [f"{sx(_tf(x, p.logx)):.2f},{sy(_tf(y, p.logy)):.2f}" for x, y in zip(xs, ys)
                  if (not p.logx or x > 0) and (not p.logy or y > 0) and math.isfinite(x) and math.isfinite(y)]
        if coords:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.6" points="{" ".join(coords)}"/>')
        ly = oy + mt + 12 + 13 * i
        out.append(f'<line x1="{ox + ml + pw - 110:.2f}" y1="{ly - 3:.2f}" x2="{ox + ml + pw - 92:.2f}" y2="{ly - 3:.2f}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ox + ml + pw - 88:.2f}" y="{ly:.2f}" font-size="9" {FONT}>{escape(str(name))}</text>')
    for j, (name, y) in enumerate(p.hlines.items()):
        if p.logy and y <= 0:
            continue
        yy = sy(_tf(y, p.logy))
        out.append(f'<line x1="{ox + ml:.2f}" y1="{yy:.2f}" x2="{ox + ml + pw:.2f}" y2="{yy:.2f}" stroke="#777" stroke-dasharray="4,3"/>')
        out.append(f'<text x="{ox + ml + 4:.2f}" y="{yy - 3:.2f}" font-size="9" fill="#555" {FONT}>{escape(str(name))}</text>')
    return out


def render(panels, panel_width: float = 360, panel_height: float = 280) -> str:
    """Lay panels out horizontally and return a complete SVG document."""
    panels = list(panels)
    width = panel_width * len(panels)
    body = []
    for i, p in enumerate(panels):
        body.extend(_panel(p, i * panel_width, 0.0, panel_width, panel_height))
    return ('<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{panel_height:.0f}" '
            f'viewBox="0 0 {width:.0f} {panel_height:.0f}">\n'
            '<rect width="100%" height="100%" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n")
