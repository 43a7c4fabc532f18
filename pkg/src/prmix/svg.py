"""Minimal, byte-stable SVG charts: boxplots and density overlays on a histogram."""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=64, right=16, top=36, bottom=48)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def _f(v):
    return f"{float(v):.2f}"


@dataclass(frozen=True)
class BoxStats:
    """Tukey boxplot summary."""

    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: tuple

    @classmethod
    def from_values(cls, values):
        v = np.sort(np.asarray(values, dtype=float))
        v = v[np.isfinite(v)]
        if v.size == 0:
            raise ValueError("boxplot needs at least one finite value")
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = v[(v >= lo_fence) & (v <= hi_fence)]
        return cls(
            float(med), float(q1), float(q3), float(inside.min()), float(inside.max()),
            tuple(float(x) for x in v[(v < lo_fence) | (v > hi_fence)]),
        )


class _Frame:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = map(float, xlim)
        self.y0, self.y1 = map(float, ylim)
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(self, x):
        return MARGIN["left"] + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + (1 - (np.asarray(y, dtype=float) - self.y0) / (self.y1 - self.y0)) * self.ph


def _document(body, title, xlabel, ylabel, frame, yticks=True, xticks=True):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    left, top = MARGIN["left"], MARGIN["top"]
    bottom = HEIGHT - MARGIN["bottom"]
    parts.append(f'<line x1="{left}" y1="{bottom}" x2="{WIDTH - MARGIN["right"]}" y2="{bottom}" stroke="black"/>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>')
    if yticks:
        for t in np.linspace(frame.y0, frame.y1, 5):
            y = _f(frame.py(t))
            parts.append(f'<line x1="{left - 4}" y1="{y}" x2="{left}" y2="{y}" stroke="black"/>')
            parts.append(f'<text x="{left - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">{t:.3g}</text>')
    if xticks:
        for t in np.linspace(frame.x0, frame.x1, 6):
            x = _f(frame.px(t))
            parts.append(f'<line x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + 4}" stroke="black"/>')
            parts.append(f'<text x="{x}" y="{bottom + 16}" text-anchor="middle">{t:.3g}</text>')
    parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="14" y="{(top + bottom) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {(top + bottom) / 2})">{escape(ylabel)}</text>'
    )
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def boxplot_svg(groups, title="", ylabel="", reference=None):
    """Side-by-side boxplots; ``groups`` maps label to values (insertion order kept).

    ``reference`` draws a dashed horizontal line, e.g. at a target ratio of 1.
    """
    stats = {k: BoxStats.from_values(v) for k, v in groups.items()}
    lo = min(min(s.whisker_low, *s.outliers) if s.outliers else s.whisker_low for s in stats.values())
    hi = max(max(s.whisker_high, *s.outliers) if s.outliers else s.whisker_high for s in stats.values())
    if reference is not None:
        lo, hi = min(lo, reference), max(hi, reference)
    pad = 0.05 * (hi - lo or 1.0)
    frame = _Frame((0, len(stats)), (lo - pad, hi + pad))
    body = []
    slot = frame.pw / max(len(stats), 1)
    bottom = HEIGHT - MARGIN["bottom"]
    for i, (label, s) in enumerate(stats.items()):
        color = PALETTE[i % len(PALETTE)]
        cx = MARGIN["left"] + (i + 0.5) * slot
        half = min(slot * 0.3, 40)
        y_q1, y_q3, y_med = frame.py(s.q1), frame.py(s.q3), frame.py(s.median)
        body.append(
            f'<rect x="{_f(cx - half)}" y="{_f(y_q3)}" width="{_f(2 * half)}" height="{_f(y_q1 - y_q3)}" '
            f'fill="{color}" fill-opacity="0.25" stroke="{color}"/>'
        )
        body.append(f'<line x1="{_f(cx - half)}" y1="{_f(y_med)}" x2="{_f(cx + half)}" y2="{_f(y_med)}" '
                    f'stroke="{color}" stroke-width="2"/>')
        for end, edge in ((s.whisker_low, y_q1), (s.whisker_high, y_q3)):
            y = frame.py(end)
            body.append(f'<line x1="{_f(cx)}" y1="{_f(edge)}" x2="{_f(cx)}" y2="{_f(y)}" stroke="{color}"/>')
            body.append(f'<line x1="{_f(cx - half / 2)}" y1="{_f(y)}" x2="{_f(cx + half / 2)}" y2="{_f(y)}" '
                        f'stroke="{color}"/>')
        for o in s.outliers:
            body.append(f'<circle cx="{_f(cx)}" cy="{_f(frame.py(o))}" r="2.5" fill="none" stroke="{color}"/>')
        body.append(f'<text x="{_f(cx)}" y="{bottom + 16}" text-anchor="middle">{escape(str(label))}</text>')
    if reference is not None:
        y = _f(frame.py(reference))
        body.append(f'<line x1="{MARGIN["left"]}" y1="{y}" x2="{WIDTH - MARGIN["right"]}" y2="{y}" '
                    f'stroke="gray" stroke-dasharray="4 3"/>')
    return _document(body, title, "", ylabel, frame, xticks=False)


def freedman_diaconis_edges(data):
    x = np.sort(np.asarray(data, dtype=float))
    lo, hi = float(x[0]), float(x[-1])
    q1, q3 = np.percentile(x, [25, 75])
    width = 2 * (q3 - q1) / np.cbrt(x.size)
    if not width > 0 or hi <= lo:
        return np.array([min(lo, 0.0), max(hi, lo + 1.0)])
    bins = int(min(max(np.ceil((hi - 0.0) / width), 1), 200))
    return np.linspace(0.0, hi, bins + 1)


def density_svg(data, curves, title="", xlabel="x", points=400):
    """Histogram of ``data`` (density scale) with density ``curves`` overlaid.

    ``curves`` maps a legend label to a vectorized density function.
    """
    data = np.asarray(data, dtype=float)
    edges = freedman_diaconis_edges(data)
    counts, _ = np.histogram(data, bins=edges)
    heights = counts / (data.size * np.diff(edges))
    xs = np.linspace(0.0, float(edges[-1]) * 1.02, points)
    ys = {k: np.asarray(fn(xs), dtype=float) for k, fn in curves.items()}
    top = max([float(heights.max())] + [float(np.percentile(v, 99.5)) for v in ys.values()])
    frame = _Frame((0.0, xs[-1]), (0.0, top * 1.08))
    body = []
    for h, a, b in zip(heights, edges[:-1], edges[1:]):
        y = frame.py(h)
        body.append(
            f'<rect x="{_f(frame.px(a))}" y="{_f(y)}" width="{_f(frame.px(b) - frame.px(a))}" '
            f'height="{_f(frame.py(0) - y)}" fill="#cccccc" stroke="white"/>'
        )
    for i, (label, v) in enumerate(ys.items()):
        color = PALETTE[i % len(PALETTE)]
        clipped = np.minimum(v, frame.y1)
        path = " ".join(f"{_f(px)},{_f(py)}" for px, py in zip(frame.px(xs), frame.py(clipped)))
        body.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN["top"] + 14 * (i + 1)
        lx = WIDTH - MARGIN["right"] - 120
        body.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        body.append(f'<text x="{lx + 22}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    return _document(body, title, xlabel, "density", frame)
