"""Minimal dependency-free SVG figures: heatmap, line plot, signed bars.

Output is deterministic text (fixed number formatting, no ids or dates).
"""

from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 420
PAD_L, PAD_R, PAD_T, PAD_B = 64, 20, 36, 48
MAX_CELLS = 128
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _n(v: float) -> str:
    return f"{v:.2f}"


def _head(title: str) -> list:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{escape(title)}</text>',
    ]


def _axes(xlabel: str, ylabel: str, xr, yr) -> list:
    x0, x1, y0, y1 = PAD_L, W - PAD_R, H - PAD_B, PAD_T
    out = [f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
           f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
           f'<text x="{(x0 + x1) / 2:.1f}" y="{H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{escape(xlabel)}</text>',
           f'<text x="14" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
           f'transform="rotate(-90 14 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>']
    for frac in (0.0, 0.5, 1.0):
        xv = xr[0] + frac * (xr[1] - xr[0])
        yv = yr[0] + frac * (yr[1] - yr[0])
        px = x0 + frac * (x1 - x0)
        py = y0 + frac * (y1 - y0)
        out.append(f'<text x="{_n(px)}" y="{y0 + 16}" text-anchor="middle" font-family="sans-serif" font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{x0 - 4}" y="{_n(py + 3)}" text-anchor="end" font-family="sans-serif" font-size="10">{yv:.3g}</text>')
    return out


def _block_mean(a: np.ndarray, limit: int = MAX_CELLS) -> np.ndarray:
    for axis in (0, 1):
        n = a.shape[axis]
        if n > limit:
            k = -(-n // limit)
            m = n // k * k
            a = np.take(a, np.arange(m), axis=axis)
            shape = list(a.shape)
            shape[axis:axis + 1] = [m // k, k]
            a = a.reshape(shape).mean(axis=axis + 1)
    return a


def _color(v: float) -> str:
    # diverging blue-white-red on [-1, 1]
    v = max(-1.0, min(1.0, v))
    if v >= 0:
        r, g, b = 255, int(255 * (1 - v)), int(255 * (1 - v))
    else:
        r, g, b = int(255 * (1 + v)), int(255 * (1 + v)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(values: np.ndarray, time_axis, freq_axis, title: str = "", xlabel: str = "time",
            ylabel: str = "frequency") -> str:
    """Time on x, frequency on y; grids larger than 128 per side are block-averaged."""
    v = _block_mean(np.asarray(values, dtype=float))
    scale = float(np.max(np.abs(v))) or 1.0
    nt, nf = v.shape
    x0, x1, y0, y1 = PAD_L, W - PAD_R, H - PAD_B, PAD_T
    cw, ch = (x1 - x0) / nt, (y0 - y1) / nf
    out = _head(title)
    for i in range(nt):
        for k in range(nf):
            out.append(f'<rect x="{_n(x0 + i * cw)}" y="{_n(y0 - (k + 1) * ch)}" width="{_n(cw + 0.01)}" '
                       f'height="{_n(ch + 0.01)}" fill="{_color(v[i, k] / scale)}"/>')
    out += _axes(xlabel, ylabel, (float(time_axis[0]), float(time_axis[-1])), (float(freq_axis[0]), float(freq_axis[-1])))
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_plot(x, series: Sequence, labels: Sequence[str], title: str = "", xlabel: str = "",
              ylabel: str = "") -> str:
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(s, dtype=float) for s in series]
    lo = min(float(np.nanmin(y)) for y in ys)
    hi = max(float(np.nanmax(y)) for y in ys)
    if hi == lo:
        hi, lo = hi + 0.5, lo - 0.5
    xlo, xhi = float(x.min()), float(x.max())
    if xhi == xlo:
        xhi += 1.0
    x0, x1, y0, y1 = PAD_L, W - PAD_R, H - PAD_B, PAD_T

    def px(v):
        return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0)

    def py(v):
        return y0 - (v - lo) / (hi - lo) * (y0 - y1)

    out = _head(title) + _axes(xlabel, ylabel, (xlo, xhi), (lo, hi))
    for j, (y, lab) in enumerate(zip(ys, labels)):
        c = PALETTE[j % len(PALETTE)]
        pts = " ".join(f"{_n(px(a))},{_n(py(b))}" for a, b in zip(x, y) if np.isfinite(b))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        out.append(f'<text x="{x1 - 4}" y="{PAD_T + 14 * (j + 1)}" text-anchor="end" font-family="sans-serif" '
                   f'font-size="11" fill="{c}">{escape(lab)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def signed_bars(labels: Sequence[str], values, errors: Optional[Sequence[float]] = None, title: str = "") -> str:
    """Vertical bars above/below a zero line, optional error whiskers."""
    v = np.asarray(values, dtype=float)
    e = np.zeros_like(v) if errors is None else np.asarray(errors, dtype=float)
    hi = float(np.max(np.abs(v) + e)) or 1.0
    x0, x1, y0, y1 = PAD_L, W - PAD_R, H - PAD_B, PAD_T
    mid = (y0 + y1) / 2
    half = (y0 - y1) / 2
    bw = (x1 - x0) / max(len(v), 1)
    out = _head(title)
    out.append(f'<line x1="{x0}" y1="{_n(mid)}" x2="{x1}" y2="{_n(mid)}" stroke="black"/>')
    for i, (lab, val, err) in enumerate(zip(labels, v, e)):
        h = val / hi * half
        x = x0 + i * bw + bw * 0.15
        top = mid - max(h, 0.0)
        out.append(f'<rect x="{_n(x)}" y="{_n(top)}" width="{_n(bw * 0.7)}" height="{_n(abs(h))}" '
                   f'fill="{PALETTE[0] if val >= 0 else PALETTE[1]}"/>')
        if err > 0:
            cx = x + bw * 0.35
            a, b = mid - (val + err) / hi * half, mid - (val - err) / hi * half
            out.append(f'<line x1="{_n(cx)}" y1="{_n(a)}" x2="{_n(cx)}" y2="{_n(b)}" stroke="black"/>')
        out.append(f'<text x="{_n(x + bw * 0.35)}" y="{y0 + 16}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="10">{escape(str(lab))}</text>')
    out.append(f'<text x="{x0 - 4}" y="{_n(y1 + 4)}" text-anchor="end" font-family="sans-serif" font-size="10">{hi:.3g}</text>')
    out.append(f'<text x="{x0 - 4}" y="{_n(y0)}" text-anchor="end" font-family="sans-serif" font-size="10">{-hi:.3g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
