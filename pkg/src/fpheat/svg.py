"""Minimal SVG line plots (polylines and axes, no plotting dependency)."""

from __future__ import annotations

import math
from pathlib import Path

W, H, PAD = 480, 320, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _tf(v, log):
    return math.log10(v) if log else v


def line_plot(path, series: dict, *, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False) -> Path:
    """``series`` maps a label to ``(xs, ys)``; nonpositive values are dropped on log axes."""
    pts = {}
    for name, (xs, ys) in series.items():
        keep = [(_tf(x, logx), _tf(y, logy)) for x, y in zip(xs, ys)
                if (not logx or x > 0) and (not logy or y > 0) and math.isfinite(x) and math.isfinite(y)]
        pts[name] = keep
    flat = [p for v in pts.values() for p in v] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in flat), max(p[0] for p in flat)
    y0, y1 = min(p[1] for p in flat), max(p[1] for p in flat)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def X(v):
        return PAD + (v - x0) / (x1 - x0) * (W - 2 * PAD)

    def Y(v):
        return H - PAD - (v - y0) / (y1 - y0) * (H - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>',
           f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>']
    for frac in (0.0, 0.5, 1.0):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        xl = f"1e{xv:.2g}" if logx else f"{xv:.3g}"
        yl = f"1e{yv:.2g}" if logy else f"{yv:.3g}"
        out.append(f'<text x="{X(xv):.1f}" y="{H - PAD + 16}" font-size="10" text-anchor="middle">{xl}</text>')
        out.append(f'<text x="{PAD - 4}" y="{Y(yv) + 3:.1f}" font-size="10" text-anchor="end">{yl}</text>')
    out.append(f'<text x="{W / 2}" y="{PAD / 2}" font-size="13" text-anchor="middle">{title}</text>')
    out.append(f'<text x="{W / 2}" y="{H - 8}" font-size="11" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="12" y="{H / 2}" font-size="11" text-anchor="middle" '
               f'transform="rotate(-90 12 {H / 2})">{ylabel}</text>')
    for i, (name, p) in enumerate(pts.items()):
        c = COLORS[i % len(COLORS)]
        if p:
            poly = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in p)
            out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{poly}"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD + 14 * i}" font-size="10" fill="{c}" text-anchor="end">{name}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
