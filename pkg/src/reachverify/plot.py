"""Minimal SVG output for traces and reachtubes (time on x, one variable on y).

Boxes are drawn as filled rectangles coloured by mode.  Output is a pure
function of the data, so identical runs give byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
           "#bcbd22", "#17becf")

W, H = 720, 360
ML, MR, MT, MB = 64, 150, 24, 44


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list:
    span = hi - lo
    if span <= 0 or not math.isfinite(span):
        return [lo]
    raw = span / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=mag * 10)
    first = math.ceil(lo / step) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


class _Canvas:
    def __init__(self, t0, t1, y0, y1, title, ylabel):
        if not (math.isfinite(y0) and math.isfinite(y1)):
            y0, y1 = -1.0, 1.0
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y1 + 0.5
        pad = 0.04 * (y1 - y0)
        self.t0, self.t1 = t0, (t1 if t1 > t0 else t0 + 1.0)
        self.y0, self.y1 = y0 - pad, y1 + pad
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
            f'font-family="sans-serif" font-size="11">',
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
            f'<text x="{ML}" y="16" font-size="13">{escape(title)}</text>',
        ]
        self._axes(ylabel)

    def x(self, t):
        return ML + (t - self.t0) / (self.t1 - self.t0) * (W - ML - MR)

    def y(self, v):
        v = min(max(v, self.y0), self.y1)
        return H - MB - (v - self.y0) / (self.y1 - self.y0) * (H - MT - MB)

    def _axes(self, ylabel):
        p = self.parts
        x0, x1, yb, yt = ML, W - MR, H - MB, MT
        p.append(f'<rect x="{x0}" y="{yt}" width="{x1 - x0}" height="{yb - yt}" fill="none" stroke="#444"/>')
        for t in _ticks(self.t0, self.t1):
            X = _fmt(self.x(t))
            p.append(f'<line x1="{X}" y1="{yb}" x2="{X}" y2="{yb + 4}" stroke="#444"/>')
            p.append(f'<text x="{X}" y="{yb + 16}" text-anchor="middle">{t:g}</text>')
        for v in _ticks(self.y0, self.y1):
            Y = _fmt(self.y(v))
            p.append(f'<line x1="{x0 - 4}" y1="{Y}" x2="{x0}" y2="{Y}" stroke="#444"/>')
            p.append(f'<text x="{x0 - 6}" y="{Y}" text-anchor="end" dominant-baseline="middle">{v:.4g}</text>')
        p.append(f'<text x="{(x0 + x1) // 2}" y="{H - 8}" text-anchor="middle">t</text>')
        p.append(f'<text x="14" y="{(yt + yb) // 2}" transform="rotate(-90 14 {(yt + yb) // 2})" '
                 f'text-anchor="middle">{escape(ylabel)}</text>')

    def box(self, t0, t1, lo, hi, color, opacity=0.35):
        X0, X1 = self.x(t0), self.x(t1)
        Yt, Yb = self.y(hi), self.y(lo)
        self.parts.append(f'<rect x="{_fmt(X0)}" y="{_fmt(Yt)}" width="{_fmt(max(X1 - X0, 0.3))}" '
                          f'height="{_fmt(max(Yb - Yt, 0.3))}" fill="{color}" fill-opacity="{opacity}" stroke="none"/>')

    def hline(self, v, color="#d62728", label=""):
        Y = _fmt(self.y(v))
        self.parts.append(f'<line x1="{ML}" y1="{Y}" x2="{W - MR}" y2="{Y}" stroke="{color}" stroke-dasharray="5,3"/>')
        if label:
            self.parts.append(f'<text x="{W - MR + 4}" y="{Y}" fill="{color}" dominant-baseline="middle">'
                              f'{escape(label)}</text>')

    def polyline(self, ts, vs, color="#000", width=1.0):
        pts = " ".join(f"{_fmt(self.x(t))},{_fmt(self.y(v))}" for t, v in zip(ts, vs))
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>')

    def legend(self, names):
        for i, name in enumerate(names):
            c = PALETTE[i % len(PALETTE)]
            y = MT + 8 + 16 * i
            self.parts.append(f'<rect x="{W - MR + 10}" y="{y - 5}" width="10" height="10" fill="{c}"/>')
            self.parts.append(f'<text x="{W - MR + 24}" y="{y}" dominant-baseline="middle">{escape(name)}</text>')

    def svg(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _finite_range(*arrays):
    vals = np.concatenate([np.ravel(a) for a in arrays])
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        return -1.0, 1.0
    return float(vals.min()), float(vals.max())


def boxes_svg(t_start, t_end, lo, hi, modes, dim: int, mode_names=None, title="", ylabel="",
              threshold=None, overlays=()) -> str:
    """Generic plot of time-stamped boxes; ``modes`` gives a label per box."""
    t_start, t_end = np.asarray(t_start, float), np.asarray(t_end, float)
    lo, hi = np.asarray(lo, float)[:, dim], np.asarray(hi, float)[:, dim]
    names = list(mode_names) if mode_names is not None else sorted(set(modes))
    y0, y1 = _finite_range(lo, hi, *[np.asarray(v) for _, v in overlays])
    if threshold is not None and math.isfinite(threshold):
        y1 = max(y1, threshold)
        y0 = min(y0, threshold)
    c = _Canvas(float(t_start[0]) if len(t_start) else 0.0, float(t_end[-1]) if len(t_end) else 1.0,
                y0, y1, title, ylabel)
    index = {nm: i for i, nm in enumerate(names)}
    for a, b, l, h, m in zip(t_start, t_end, lo, hi, modes):
        c.box(a, b, l, h, PALETTE[index.get(m, 0) % len(PALETTE)])
    for ts, vs in overlays:
        c.polyline(ts, vs)
    if threshold is not None:
        c.hline(threshold, label="unsafe")
    c.legend(names)
    return c.svg()


def trace_svg(trace, dim: int = 0, title: str = "", threshold=None) -> str:
    """Rectangles of a validated simulation."""
    labels = [" / ".join(trace.automaton.mode_names[q] for q in qs) for qs in trace.step_modes]
    names = sorted(set(labels), key=labels.index)
    name = trace.automaton.state_names[dim]
    return boxes_svg(trace.times[:-1], trace.times[1:], trace.lo, trace.hi, labels, dim, names,
                     title or f"simulation of {trace.automaton.name}", name, threshold)


def tubes_svg(tubes, dim: int = 0, title: str = "", threshold=None, state_names=None, overlays=()) -> str:
    """All tube segments of a verification run on one plot."""
    ts, te, lo, hi, labels = [], [], [], [], []
    for tube in tubes:
        ts.append(tube.t_start)
        te.append(tube.t_end)
        lo.append(tube.lo)
        hi.append(tube.hi)
        labels.extend(tube.modes)
    if not ts:
        return _Canvas(0.0, 1.0, -1.0, 1.0, title or "no tubes", "").svg()
    names = sorted(set(labels), key=labels.index)
    names_all = state_names or tubes[0].state_names
    return boxes_svg(np.concatenate(ts), np.concatenate(te), np.vstack(lo), np.vstack(hi), labels, dim, names,
                     title or "reachtube", names_all[dim] if names_all else f"x{dim}", threshold, overlays)


def save(text: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
