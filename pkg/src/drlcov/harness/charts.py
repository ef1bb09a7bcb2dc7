"""Tiny static SVG charts: line plots with bands and colour-ramped scatters."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
# viridis anchors
_RAMP = np.array([
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
], dtype=float)

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=64, right=150, top=36, bottom=48)


def ramp_color(t: float) -> str:
    t = min(max(t, 0.0), 1.0) * (len(_RAMP) - 1)
    k = min(int(t), len(_RAMP) - 2)
    c = _RAMP[k] + (t - k) * (_RAMP[k + 1] - _RAMP[k])
    return "#%02x%02x%02x" % tuple(int(round(v)) for v in c)


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + 1e-9 * step:
        ticks.append(round(v, 10))
        v += step
    return ticks


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + (1.0 - (y - self.y0) / (self.y1 - self.y0)) * self.ph


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _axes(frame: _Frame, title: str, xlabel: str, ylabel: str) -> list[str]:
    L, T = MARGIN["left"], MARGIN["top"]
    out = [
        f'<rect x="{L}" y="{T}" width="{frame.pw}" height="{frame.ph}" fill="none" stroke="#333"/>',
        f'<text x="{WIDTH / 2:.0f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{L + frame.pw / 2:.0f}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{_esc(xlabel)}</text>',
        f'<text transform="translate(16,{T + frame.ph / 2:.0f}) rotate(-90)" text-anchor="middle" '
        f'font-size="12">{_esc(ylabel)}</text>',
    ]
    for t in _nice_ticks(frame.x0, frame.x1):
        x = frame.px(t)
        out.append(f'<line x1="{_fmt(x)}" y1="{T + frame.ph}" x2="{_fmt(x)}" y2="{T + frame.ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(x)}" y="{T + frame.ph + 18}" text-anchor="middle" font-size="10">{t:g}</text>')
    for t in _nice_ticks(frame.y0, frame.y1):
        y = frame.py(t)
        out.append(f'<line x1="{L - 5}" y1="{_fmt(y)}" x2="{L}" y2="{_fmt(y)}" stroke="#333"/>')
        out.append(f'<text x="{L - 8}" y="{_fmt(y + 3)}" text-anchor="end" font-size="10">{t:g}</text>')
    return out


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">')
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>', *body, "</svg>"]) + "\n"


def line_chart(path, series, title: str, xlabel: str, ylabel: str) -> None:
    """``series``: list of dicts with ``label``, ``x``, ``y`` and optional ``lo``/``hi`` band."""
    xs = np.concatenate([np.asarray(s["x"], float) for s in series])
    ys = [np.asarray(s["y"], float) for s in series]
    ys += [np.asarray(s[k], float) for s in series for k in ("lo", "hi") if s.get(k) is not None]
    yall = np.concatenate(ys)
    yall = yall[np.isfinite(yall)]
    frame = _Frame((float(xs.min()), float(xs.max())), (float(yall.min()), float(yall.max())))
    body = _axes(frame, title, xlabel, ylabel)
    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        x = np.asarray(s["x"], float)
        if s.get("lo") is not None and s.get("hi") is not None:
            upper = [f"{_fmt(frame.px(a))},{_fmt(frame.py(b))}" for a, b in zip(x, s["hi"])]
            lower = [f"{_fmt(frame.px(a))},{_fmt(frame.py(b))}" for a, b in zip(x[::-1], np.asarray(s["lo"])[::-1])]
            body.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{_fmt(frame.px(a))},{_fmt(frame.py(b))}" for a, b in zip(x, s["y"]))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 10
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="3"/>')
        body.append(f'<text x="{lx + 24}" y="{ly + 4}" font-size="11">{_esc(s["label"])}</text>')
    Path(path).write_text(_document(body))


def scatter_chart(path, points, values, title: str, value_label: str = "q(s, a0)") -> None:
    """Scatter of 2-D points coloured by ``values`` on a continuous ramp."""
    pts = np.asarray(points, float)
    vals = np.asarray(values, float)
    frame = _Frame((float(pts[:, 0].min()), float(pts[:, 0].max())),
                   (float(pts[:, 1].min()), float(pts[:, 1].max())))
    body = _axes(frame, title, "t-SNE 1", "t-SNE 2")
    vmin, vmax = float(vals.min()), float(vals.max())
    span = vmax - vmin if vmax > vmin else 1.0
    for (x, y), v in zip(pts, vals):
        body.append(f'<circle cx="{_fmt(frame.px(x))}" cy="{_fmt(frame.py(y))}" r="1.6" '
                    f'fill="{ramp_color((v - vmin) / span)}"/>')
    # colour bar
    bx, by, bh = WIDTH - MARGIN["right"] + 20, MARGIN["top"], frame.ph
    steps = 32
    for k in range(steps):
        y = by + bh * (1 - (k + 1) / steps)
        body.append(f'<rect x="{bx}" y="{_fmt(y)}" width="14" height="{_fmt(bh / steps + 0.5)}" '
                    f'fill="{ramp_color((k + 0.5) / steps)}"/>')
    body.append(f'<text x="{bx + 20}" y="{by + 8}" font-size="10">{vmax:.3g}</text>')
    body.append(f'<text x="{bx + 20}" y="{by + bh}" font-size="10">{vmin:.3g}</text>')
    body.append(f'<text x="{bx}" y="{by + bh + 20}" font-size="10">{_esc(value_label)}</text>')
    Path(path).write_text(_document(body))
