"""Minimal log-log SVG writer for convergence plots."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def loglog_svg(x, series, title: str = "", width: int = 560, height: int = 420) -> str:
    """``series`` is a list of ``(label, values, annotation)``; one polyline each."""
    margin = dict(left=70, right=150, top=40, bottom=50)
    xs = [float(v) for v in x]
    ys = [float(v) for _, vals, _ in series for v in vals if v > 0]
    xd, yd = _decades(min(xs), max(xs)), _decades(min(ys), max(ys))
    lx0, lx1 = xd[0], max(xd[-1], xd[0] + 1)
    ly0, ly1 = yd[0], max(yd[-1], yd[0] + 1)
    pw = width - margin["left"] - margin["right"]
    ph = height - margin["top"] - margin["bottom"]

    def px(v):
        return margin["left"] + (math.log10(v) - lx0) / (lx1 - lx0) * pw

    def py(v):
        return margin["top"] + (ly1 - math.log10(v)) / (ly1 - ly0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
        f'<rect x="{margin["left"]}" y="{margin["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for k in range(lx0, lx1 + 1):
        X = px(10.0**k)
        out.append(f'<line x1="{X:.1f}" y1="{margin["top"] + ph}" x2="{X:.1f}" y2="{margin["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.1f}" y="{margin["top"] + ph + 20}" text-anchor="middle" font-family="sans-serif" font-size="11">1e{k}</text>')
    for k in range(ly0, ly1 + 1):
        Y = py(10.0**k)
        out.append(f'<line x1="{margin["left"] - 5}" y1="{Y:.1f}" x2="{margin["left"]}" y2="{Y:.1f}" stroke="black"/>')
        out.append(f'<text x="{margin["left"] - 8}" y="{Y + 4:.1f}" text-anchor="end" font-family="sans-serif" font-size="11">1e{k}</text>')
    out.append(f'<text x="{margin["left"] + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">h</text>')
    out.append(f'<text x="16" y="{margin["top"] + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" transform="rotate(-90 16 {margin["top"] + ph / 2:.1f})">L2 error</text>')
    for i, (label, vals, note) in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(xs, vals) if b > 0)
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in zip(xs, vals):
            if b > 0:
                out.append(f'<circle cx="{px(a):.1f}" cy="{py(b):.1f}" r="3" fill="{color}"/>')
        ly = margin["top"] + 20 + 22 * i
        lx = margin["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}" font-family="sans-serif" font-size="12">{escape(label)}: {escape(note)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
