"""Minimal self-contained SVG line charts with log10 axes."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=80, right=170, top=40, bottom=60)


def _num(x: float) -> str:
    return f"{x:.2f}"


def _decades(lo: float, hi: float) -> list:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def loglog_chart(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """Render ``{label: (xs, ys)}`` as an SVG document.

    Points with a nonpositive or non-finite coordinate are dropped; a series
    left with no points is listed in the legend only.
    """
    clean = {}
    for label, (xs, ys) in series.items():
        pts = [(math.log10(x), math.log10(y)) for x, y in zip(xs, ys)
               if x > 0 and y > 0 and math.isfinite(x) and math.isfinite(y)]
        clean[label] = pts
    allpts = [p for pts in clean.values() for p in pts]
    if allpts:
        xlo, xhi = min(p[0] for p in allpts), max(p[0] for p in allpts)
        ylo, yhi = min(p[1] for p in allpts), max(p[1] for p in allpts)
    else:
        xlo, xhi, ylo, yhi = 0.0, 1.0, 0.0, 1.0
    xlo, xhi = math.floor(xlo), max(math.ceil(xhi), math.floor(xlo) + 1)
    ylo, yhi = math.floor(ylo), max(math.ceil(yhi), math.floor(ylo) + 1)

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - xlo) / (xhi - xlo) * pw

    def sy(y):
        return MARGIN["top"] + (yhi - y) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    # grid and tick labels, one per decade
    ystep = max(1, (yhi - ylo) // 10)
    for d in _decades(xlo, xhi):
        x = _num(sx(d))
        out.append(f'<line x1="{x}" y1="{MARGIN["top"]}" x2="{x}" y2="{MARGIN["top"] + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">1e{d}</text>')
    for d in _decades(ylo, yhi)[::ystep]:
        y = _num(sy(d))
        out.append(f'<line x1="{MARGIN["left"]}" y1="{y}" x2="{MARGIN["left"] + pw}" y2="{y}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{d}</text>')
    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               'fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18,{MARGIN["top"] + ph / 2}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')

    for i, (label, pts) in enumerate(clean.items()):
        color = PALETTE[i % len(PALETTE)]
        if len(pts) > 1:
            path = " ".join(f"{_num(sx(x))},{_num(sy(y))}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{_num(sx(x))}" cy="{_num(sy(y))}" r="3.5" fill="{color}"/>')
        ly = MARGIN["top"] + 14 + 18 * i
        lx = MARGIN["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
