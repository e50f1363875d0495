"""Minimal self-rendered SVG line charts on log or linear axes.

Output depends only on the data, so repeated runs give identical files.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

__all__ = ["line_chart"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H = 520, 380
L, R, T, B = 70, 20, 36, 56


def _fmt(v):
    return f"{v:.6g}"


def _range(vals, log):
    vals = [math.log10(v) if log else v for v in vals if (v > 0 if log else math.isfinite(v))]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo, hi, log):
    if log:
        return [float(k) for k in range(math.ceil(lo), math.floor(hi) + 1)] or [lo, hi]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= 6:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step) + 1)]


def line_chart(series, title="", xlabel="", ylabel="", logx=True, logy=True):
    """Render ``series = [(label, xs, ys), ...]`` as an SVG string.

    Non-positive values are dropped on log axes.
    """
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    x0, x1 = _range(xs_all, logx)
    y0, y1 = _range(ys_all, logy)

    def px(x):
        v = math.log10(x) if logx else x
        return L + (v - x0) / (x1 - x0) * (W - L - R)

    def py(y):
        v = math.log10(y) if logy else y
        return H - B - (v - y0) / (y1 - y0) * (H - T - B)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{L}" y="{T}" width="{W - L - R}" height="{H - T - B}" fill="none" stroke="black"/>',
           f'<text x="{W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<text x="{(L + W - R) / 2}" y="{H - 14}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
           f'<text x="16" y="{(T + H - B) / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 16 {(T + H - B) / 2})">{escape(ylabel)}</text>']
    for t in _ticks(x0, x1, logx):
        xv = 10**t if logx else t
        X = px(xv)
        lab = f"1e{int(t)}" if logx else _fmt(t)
        out.append(f'<line x1="{X:.2f}" y1="{H - B}" x2="{X:.2f}" y2="{H - B + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{H - B + 18}" text-anchor="middle" font-size="10">{lab}</text>')
    for t in _ticks(y0, y1, logy):
        yv = 10**t if logy else t
        Y = py(yv)
        lab = f"1e{int(t)}" if logy else _fmt(t)
        out.append(f'<line x1="{L - 5}" y1="{Y:.2f}" x2="{L}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{L - 8}" y="{Y + 3:.2f}" text-anchor="end" font-size="10">{lab}</text>')
    for k, (label, xs, ys) in enumerate(series):
        col = _COLORS[k % len(_COLORS)]
        pts = [(px(x), py(y)) for x, y in zip(xs, ys)
               if (x > 0 or not logx) and (y > 0 or not logy) and math.isfinite(x) and math.isfinite(y)]
        if len(pts) > 1:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        for a, b in pts:
            out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{col}"/>')
        ly = T + 14 + 16 * k
        out.append(f'<line x1="{W - R - 150}" y1="{ly}" x2="{W - R - 130}" y2="{ly}" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{W - R - 125}" y="{ly + 4}" font-size="11">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
