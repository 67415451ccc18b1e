"""Minimal SVG line plots, written without a plotting library."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


class _Canvas:
    def __init__(self, xlim, ylim, logx=False, title="", xlabel="", ylabel=""):
        self.logx = logx
        tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
        self.tx = tx
        self.x0, self.x1 = tx(xlim[0]), tx(xlim[1])
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1
        self.y0, self.y1 = ylim
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
            f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{escape(xlabel)}</text>',
            f'<text x="16" y="{_H / 2}" text-anchor="middle" '
            f'transform="rotate(-90 16 {_H / 2})">{escape(ylabel)}</text>',
        ]
        self._axes()

    def px(self, x):
        return _ML + (self.tx(x) - self.x0) / (self.x1 - self.x0) * (_W - _ML - _MR)

    def py(self, y):
        return _H - _MB - (y - self.y0) / (self.y1 - self.y0) * (_H - _MT - _MB)

    def _axes(self):
        left, right, top, bottom = _ML, _W - _MR, _MT, _H - _MB
        self.parts.append(
            f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}" '
            'fill="none" stroke="black"/>'
        )
        for t in _ticks(self.y0, self.y1):
            y = self.py(t)
            self.parts.append(f'<line x1="{left - 4}" y1="{y:.1f}" x2="{left}" y2="{y:.1f}" stroke="black"/>')
            self.parts.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{t:.3g}</text>')
        xt = ([10**k for k in range(math.floor(self.x0), math.ceil(self.x1) + 1)]
              if self.logx else _ticks(self.x0, self.x1))
        for t in xt:
            if not self.x0 - 1e-9 <= self.tx(t) <= self.x1 + 1e-9:
                continue
            x = self.px(t)
            self.parts.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" y2="{bottom + 4}" stroke="black"/>')
            self.parts.append(f'<text x="{x:.1f}" y="{bottom + 17}" text-anchor="middle">{t:.3g}</text>')

    def polyline(self, xs, ys, color, dash=None, width=1.5):
        pts = " ".join(f"{self.px(x):.2f},{self.py(y):.2f}" for x, y in zip(xs, ys))
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"{extra}/>'
        )

    def marker(self, x, y, err, color):
        cx, cy = self.px(x), self.py(y)
        if err:
            self.parts.append(
                f'<line x1="{cx:.2f}" y1="{self.py(y - err):.2f}" x2="{cx:.2f}" '
                f'y2="{self.py(y + err):.2f}" stroke="{color}"/>'
            )
        self.parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="3" fill="{color}"/>')

    def legend(self, labels):
        for i, (label, color) in enumerate(labels):
            y = _MT + 16 + 16 * i
            x = _W - _MR - 180
            self.parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 20}" y2="{y - 4}" stroke="{color}" stroke-width="2"/>')
            self.parts.append(f'<text x="{x + 26}" y="{y}">{escape(label)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def density_overlay(densities: dict, title: str = "", xlabel: str = "x") -> str:
    """Step curves of several histogram densities on one set of axes."""
    lo = min(float(d.edges[0]) for d in densities.values())
    hi = max(float(d.edges[-1]) for d in densities.values())
    top = max(float(np.max(d.density)) for d in densities.values()) * 1.05 or 1.0
    cv = _Canvas((lo, hi), (0.0, top), title=title, xlabel=xlabel, ylabel="density")
    labels = []
    for (label, dens), color in zip(densities.items(), COLORS):
        xs = np.repeat(dens.edges, 2)[1:-1]
        ys = np.repeat(dens.density, 2)
        cv.polyline(xs, ys, color)
        labels.append((label, color))
    cv.legend(labels)
    return cv.render()


def scaling_plot(l, mean, stderr, curves: dict, d: int = 1, title: str = "",
                 ylabel: str = "entropy (bits)", logx: bool = True) -> str:
    """Data points with error bars plus fitted curves ``label -> ScalingFit``."""
    l = np.asarray(l, dtype=float)
    mean = np.asarray(mean, dtype=float)
    err = np.zeros_like(mean) if stderr is None else np.nan_to_num(np.asarray(stderr, dtype=float))
    grid = np.geomspace(l.min(), l.max(), 200) if logx else np.linspace(l.min(), l.max(), 200)
    ys = [mean - err, mean + err] + [fit.predict(grid, d) for fit in curves.values()]
    lo = min(float(np.min(y)) for y in ys)
    hi = max(float(np.max(y)) for y in ys)
    pad = 0.05 * (hi - lo or 1.0)
    cv = _Canvas((l.min(), l.max()), (lo - pad, hi + pad), logx=logx, title=title,
                 xlabel="subsystem side l", ylabel=ylabel)
    labels = [("data", COLORS[0])]
    for x, y, e in zip(l, mean, err):
        cv.marker(x, y, e, COLORS[0])
    for (label, fit), color in zip(curves.items(), COLORS[1:]):
        cv.polyline(grid, fit.predict(grid, d), color, dash="5,3")
        labels.append((label, color))
    cv.legend(labels)
    return cv.render()
