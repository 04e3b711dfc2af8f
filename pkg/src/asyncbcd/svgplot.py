"""Minimal deterministic SVG line plots for convergence traces."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 450
MARGIN = {"left": 90, "right": 20, "top": 40, "bottom": 60}
STYLES = {
    "solid": 'stroke="#1f77b4" stroke-width="1.6" fill="none"',
    "dashed": 'stroke="#ff7f0e" stroke-width="1.6" fill="none" stroke-dasharray="7,4"',
}


def _nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def line_plot(series, title: str = "", xlabel: str = "t", ylabel: str = "", log_y: bool = False) -> str:
    """Render ``series`` = [(label, x, y, style), ...] as an SVG document.

    With ``log_y`` nonpositive values are dropped and ticks sit at powers
    of ten.
    """
    pts = []
    for label, x, y, style in series:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        keep = np.isfinite(x) & np.isfinite(y)
        if log_y:
            keep &= y > 0
        x, y = x[keep], y[keep]
        if log_y:
            y = np.log10(y)
        pts.append((label, x, y, style))
    allx = np.concatenate([p[1] for p in pts]) if pts else np.array([0.0])
    ally = np.concatenate([p[2] for p in pts]) if pts else np.array([0.0])
    if allx.size == 0:
        allx = np.array([0.0, 1.0])
    if ally.size == 0:
        ally = np.array([0.0, 1.0])
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x1 = x0 + 1
    if log_y:
        y0, y1 = math.floor(y0), math.ceil(y1)
        if y1 == y0:
            y1 = y0 + 1
        yticks = list(range(int(y0), int(y1) + 1))
    else:
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
        pad = 0.05 * (y1 - y0)
        y0, y1 = y0 - pad, y1 + pad
        yticks = [v for v in _nice_ticks(y0, y1) if y0 <= v <= y1]
    xticks = [v for v in _nice_ticks(x0, x1) if x0 <= v <= x1]

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in xticks:
        X = sx(v)
        out.append(f'<line x1="{X:.2f}" y1="{MARGIN["top"] + ph}" x2="{X:.2f}" y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{MARGIN["top"] + ph + 20}" text-anchor="middle">{_fmt(v)}</text>')
    for v in yticks:
        Y = sy(v)
        lab = f"1e{int(v)}" if log_y else _fmt(v)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{Y:.2f}" x2="{MARGIN["left"]}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<line x1="{MARGIN["left"]}" y1="{Y:.2f}" x2="{MARGIN["left"] + pw}" y2="{Y:.2f}" stroke="#dddddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{Y + 4:.2f}" text-anchor="end">{lab}</text>')
    for label, x, y, style in pts:
        if x.size == 0:
            continue
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x.tolist(), y.tolist()))
        out.append(f'<polyline points="{coords}" {STYLES.get(style, STYLES["solid"])}/>')
    ly = MARGIN["top"] + 18
    for label, _, _, style in pts:
        lx = MARGIN["left"] + pw - 170
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 30}" y2="{ly - 4}" {STYLES.get(style, STYLES["solid"])}/>')
        out.append(f'<text x="{lx + 38}" y="{ly}">{escape(label)}</text>')
        ly += 18
    out.append(f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="18" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
