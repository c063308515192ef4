"""Small self-contained SVG renderer: line plots, scatter plots, heatmaps.

Plots are a convenience layer over the CSV artifacts; they carry no data of
their own. Output is deterministic (fixed palette, %.6g formatting).
"""

from __future__ import annotations

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 64, 16, 34, 48


def _g(v) -> str:
    return f"{float(v):.6g}"


class _Axes:
    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0
        if y_hi <= y_lo:
            y_hi = y_lo + 1.0
        pad = 0.04 * (y_hi - y_lo)
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo - pad, y_hi + pad

    def px(self, x):
        return _ML + (x - self.x_lo) / (self.x_hi - self.x_lo) * (_W - _ML - _MR)

    def py(self, y):
        return _H - _MB - (y - self.y_lo) / (self.y_hi - self.y_lo) * (_H - _MT - _MB)


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
    ]


def _frame_and_ticks(ax, xlabel, ylabel):
    parts = [
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        'fill="none" stroke="#444"/>',
        f'<text x="{(_ML + _W - _MR) / 2}" y="{_H - 10}" text-anchor="middle">{xlabel}</text>',
        f'<text x="14" y="{(_MT + _H - _MB) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {(_MT + _H - _MB) / 2})">{ylabel}</text>',
    ]
    for x in np.linspace(ax.x_lo, ax.x_hi, 5):
        px = ax.px(x)
        parts.append(f'<line x1="{_g(px)}" y1="{_H - _MB}" x2="{_g(px)}" y2="{_H - _MB + 4}" stroke="#444"/>')
        parts.append(f'<text x="{_g(px)}" y="{_H - _MB + 16}" text-anchor="middle">{_g(x)}</text>')
    for y in np.linspace(ax.y_lo, ax.y_hi, 5):
        py = ax.py(y)
        parts.append(f'<line x1="{_ML - 4}" y1="{_g(py)}" x2="{_ML}" y2="{_g(py)}" stroke="#444"/>')
        parts.append(f'<text x="{_ML - 7}" y="{_g(py + 3)}" text-anchor="end">{_g(y)}</text>')
    return parts


def _legend(labels):
    parts = []
    for i, label in enumerate(labels):
        y = _MT + 14 + 14 * i
        color = PALETTE[i % len(PALETTE)]
        parts.append(f'<rect x="{_ML + 8}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{_ML + 22}" y="{y}">{label}</text>')
    return parts


def _series_plot(series, path, title, xlabel, ylabel, mode):
    finite = [(np.asarray(xs, float), np.asarray(ys, float)) for _, xs, ys in series]
    all_x = np.concatenate([xs for xs, _ in finite]) if finite else np.array([0.0, 1.0])
    all_y = np.concatenate([ys[np.isfinite(ys)] for _, ys in finite]) if finite else np.array([0.0, 1.0])
    if all_y.size == 0:
        all_y = np.array([0.0, 1.0])
    ax = _Axes(all_x.min(), all_x.max(), all_y.min(), all_y.max())
    parts = _header(title) + _frame_and_ticks(ax, xlabel, ylabel)
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        keep = np.isfinite(ys)
        if mode == "line":
            pts = " ".join(f"{_g(ax.px(x))},{_g(ax.py(y))}" for x, y in zip(xs[keep], ys[keep]))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            for x, y in zip(xs[keep], ys[keep]):
                parts.append(f'<circle cx="{_g(ax.px(x))}" cy="{_g(ax.py(y))}" r="2" fill="{color}"/>')
    parts += _legend([label for label, _, _ in series])
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))


def line_plot(series, path, title="", xlabel="", ylabel=""):
    """series: iterable of (label, xs, ys)."""
    _series_plot(list(series), path, title, xlabel, ylabel, "line")


def scatter_plot(series, path, title="", xlabel="", ylabel=""):
    _series_plot(list(series), path, title, xlabel, ylabel, "scatter")


def _ramp(u):
    # dark blue -> teal -> yellow
    anchors = np.array([(68, 1, 84), (33, 145, 140), (253, 231, 37)], dtype=float)
    u = min(max(u, 0.0), 1.0) * (len(anchors) - 1)
    i = min(int(u), len(anchors) - 2)
    frac = u - i
    rgb = anchors[i] * (1 - frac) + anchors[i + 1] * frac
    return f"rgb({int(rgb[0])},{int(rgb[1])},{int(rgb[2])})"


def heatmap(xs, ys, values, path, title="", xlabel="", ylabel=""):
    """values[i, j] rendered at (xs[j], ys[i])."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    values = np.asarray(values, float)
    ax = _Axes(xs.min(), xs.max(), ys.min(), ys.max())
    v_lo, v_hi = float(np.nanmin(values)), float(np.nanmax(values))
    span = v_hi - v_lo if v_hi > v_lo else 1.0
    parts = _header(title)
    cell_w = (_W - _ML - _MR) / len(xs)
    cell_h = (_H - _MT - _MB) / len(ys)
    for i in range(len(ys)):
        for j in range(len(xs)):
            u = (values[i, j] - v_lo) / span
            px = _ML + j * cell_w
            py = _H - _MB - (i + 1) * cell_h
            parts.append(
                f'<rect x="{_g(px)}" y="{_g(py)}" width="{_g(cell_w + 0.5)}" '
                f'height="{_g(cell_h + 0.5)}" fill="{_ramp(u)}"/>'
            )
    parts += _frame_and_ticks(ax, xlabel, ylabel)
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
