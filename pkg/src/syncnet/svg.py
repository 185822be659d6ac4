"""Minimal SVG line charts (no plotting dependency)."""
from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 960, 540
MARGIN = dict(left=80, right=30, top=40, bottom=60)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
LOG_FLOOR = 1e-16
MAX_POINTS = 2000


def line_chart(t, series: dict[str, Sequence[float]], switch_times: Sequence[float] = (),
               title: str = "", log_y: bool = True, y_label: str = "") -> str:
    """Render series against ``t`` as a standalone SVG document.

    One ``<polyline>`` per series; switch instants become dashed vertical
    ``<line>`` elements. With ``log_y`` values are clipped at ``1e-16``.
    """
    t = np.asarray(t, float)
    stride = max(1, int(math.ceil(len(t) / MAX_POINTS)))
    keep = np.unique(np.r_[np.arange(0, len(t), stride), len(t) - 1])
    t = t[keep]
    series = {k: np.asarray(v, float)[keep] for k, v in series.items()}
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    ys = {k: np.asarray(v, float) for k, v in series.items()}
    if log_y:
        ys = {k: np.log10(np.maximum(v, LOG_FLOOR)) for k, v in ys.items()}
    finite = np.concatenate([v[np.isfinite(v)] for v in ys.values()]) if ys else np.zeros(1)
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    t0 = float(t[0])
    t1 = float(t[-1]) if t[-1] > t[0] else t0 + 1.0

    def sx(v):
        return MARGIN["left"] + (v - t0) / (t1 - t0) * pw

    def sy(v):
        return MARGIN["top"] + (hi - v) / (hi - lo) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
        f'width="{WIDTH}" height="{HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" '
                   f'font-size="16">{escape(title)}</text>')
    for s in switch_times:
        if t0 <= s <= t1:
            x = sx(s)
            out.append(f'<line x1="{x:.2f}" y1="{MARGIN["top"]}" x2="{x:.2f}" '
                       f'y2="{MARGIN["top"] + ph}" stroke="#999" stroke-dasharray="4,4"/>')
    for k in range(5):
        v = lo + (hi - lo) * k / 4
        label = f"1e{v:.1f}" if log_y else f"{v:.3g}"
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{sy(v) + 4:.1f}" text-anchor="end" '
                   f'font-size="11">{label}</text>')
        tv = t0 + (t1 - t0) * k / 4
        out.append(f'<text x="{sx(tv):.1f}" y="{HEIGHT - MARGIN["bottom"] + 18}" '
                   f'text-anchor="middle" font-size="11">{tv:.3g}</text>')
    out.append(f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
               'font-size="13">t [s]</text>')
    if y_label:
        out.append(f'<text x="18" y="{HEIGHT / 2:.1f}" font-size="13" '
                   f'transform="rotate(-90 18 {HEIGHT / 2:.1f})" text-anchor="middle">'
                   f'{escape(y_label)}</text>')
    for idx, (name, v) in enumerate(ys.items()):
        color = COLORS[idx % len(COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t, v) if math.isfinite(b))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{pts}"><title>{escape(name)}</title></polyline>')
        out.append(f'<text x="{MARGIN["left"] + 10}" y="{MARGIN["top"] + 16 + 16 * idx}" '
                   f'font-size="12" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
