"""Deterministic SVG charts: the feature-vector scatter and retraining curves.

Output bytes depend only on the inputs. Coordinates are printed with a
fixed number of decimals and nothing time- or RNG-dependent is written.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .embedding import FeatureEmbedding, importance
from .evaluation import PerformanceCurve

SIZE = 640
MARGIN = 48
MARKER_RADIUS = 6
LABEL_ALL_BELOW = 25
TOP_LABELS = 10
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2")


def _f(x: float) -> str:
    s = f"{x:.2f}"
    return "0.00" if s == "-0.00" else s


def hue_degrees(vx: float, vy: float) -> float:
    """Marker hue: the vector angle in degrees, mapped to [0, 360)."""
    return float(np.degrees(np.arctan2(vy, vx)) % 360.0)


def _header(width: int, height: int) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]


def _write(lines: list[str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def render_feature_vectors(E: FeatureEmbedding | np.ndarray, names: Sequence[str], path: str | Path,
                           knockoff_pairs: bool = False, title: str = "") -> None:
    """Scatter of the 2-D feature vectors with origin axes.

    Hue encodes the angle and distance from the origin the importance.
    With ``knockoff_pairs`` the second half of the vectors are knockoffs
    and are drawn as squares.
    """
    V = E.vectors if isinstance(E, FeatureEmbedding) else np.asarray(E, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] != 2:
        raise ValueError("vectors must have shape (d, 2)")
    if len(names) != len(V):
        raise ValueError(f"{len(names)} names for {len(V)} vectors")
    if not np.any(V):
        raise ValueError("nothing to draw: every vector is zero")
    if knockoff_pairs and len(V) % 2:
        raise ValueError("knockoff_pairs needs an even number of vectors")
    imp = np.hypot(V[:, 0], V[:, 1])
    extent = 1.1 * float(np.max(np.abs(V)))
    half = (SIZE - 2 * MARGIN) / 2
    cx = cy = SIZE / 2

    def px(x, y):
        return cx + x / extent * half, cy - y / extent * half

    if len(V) <= LABEL_ALL_BELOW:
        labelled = set(range(len(V)))
    else:
        labelled = set(np.argsort(-imp, kind="stable")[:TOP_LABELS].tolist())
    n_orig = len(V) // 2 if knockoff_pairs else len(V)

    lines = _header(SIZE, SIZE)
    if title:
        lines.append(f'<text x="{_f(cx)}" y="24" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="15">{escape(title)}</text>')
    lo, hi = MARGIN, SIZE - MARGIN
    lines.append(f'<line class="axis" x1="{lo}" y1="{_f(cy)}" x2="{hi}" y2="{_f(cy)}" stroke="#888888"/>')
    lines.append(f'<line class="axis" x1="{_f(cx)}" y1="{lo}" x2="{_f(cx)}" y2="{hi}" stroke="#888888"/>')
    for i, (vx, vy) in enumerate(V):
        x, y = px(vx, vy)
        fill = f"hsl({_f(hue_degrees(vx, vy))},70%,45%)"
        if i < n_orig:
            lines.append(f'<circle class="marker" cx="{_f(x)}" cy="{_f(y)}" r="{MARKER_RADIUS}" '
                         f'fill="{fill}" stroke="#333333"/>')
        else:
            r = MARKER_RADIUS
            lines.append(f'<rect class="marker knockoff" x="{_f(x - r)}" y="{_f(y - r)}" width="{2 * r}" '
                         f'height="{2 * r}" fill="{fill}" stroke="#333333"/>')
        if i in labelled:
            lines.append(f'<text class="label" x="{_f(x + MARKER_RADIUS + 2)}" y="{_f(y - MARKER_RADIUS)}" '
                         f'font-family="sans-serif" font-size="11">{escape(str(names[i]))}</text>')
    lines.append("</svg>")
    _write(lines, path)


def render_curves(curves: Sequence[PerformanceCurve], path: str | Path, title: str = "",
                  ylabel: str = "metric") -> None:
    """Line chart with one polyline per curve and a legend of method names."""
    if not curves:
        raise ValueError("no curves to draw")
    width, height = 720, 440
    left, right, top, bottom = 64, 190, 36, 48
    kmax = max(float(np.max(c.k)) for c in curves) or 1.0
    ys = np.concatenate([np.asarray(c.metric, dtype=np.float64) for c in curves])
    ymin, ymax = float(ys.min()), float(ys.max())
    if ymax - ymin < 1e-12:
        ymin, ymax = ymin - 0.5, ymax + 0.5
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad
    pw, ph = width - left - right, height - top - bottom

    def px(k, m):
        return left + k / kmax * pw, top + (ymax - m) / (ymax - ymin) * ph

    lines = _header(width, height)
    if title:
        lines.append(f'<text x="{_f(left + pw / 2)}" y="22" text-anchor="middle" font-family="sans-serif" '
                     f'font-size="15">{escape(title)}</text>')
    lines.append(f'<rect class="frame" x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" '
                 f'stroke="#888888"/>')
    for t in np.linspace(ymin, ymax, 5):
        _, y = px(0, t)
        lines.append(f'<text class="tick" x="{left - 6}" y="{_f(y + 4)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10">{t:.3f}</text>')
    step = max(1, int(np.ceil(kmax / 10)))
    for k in range(0, int(kmax) + 1, step):
        x, _ = px(k, ymin)
        lines.append(f'<text class="tick" x="{_f(x)}" y="{top + ph + 16}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10">{k}</text>')
    lines.append(f'<text x="{_f(left + pw / 2)}" y="{height - 10}" text-anchor="middle" '
                 f'font-family="sans-serif" font-size="12">k</text>')
    lines.append(f'<text x="14" y="{_f(top + ph / 2)}" text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" transform="rotate(-90 14 {_f(top + ph / 2)})">{escape(ylabel)}</text>')
    for i, c in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in (px(k, m) for k, m in zip(c.k, c.metric)))
        lines.append(f'<polyline class="curve" points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 14 + 18 * i
        lx = left + pw + 14
        lines.append(f'<line class="legend-swatch" x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        lines.append(f'<text class="legend" x="{lx + 26}" y="{ly}" font-family="sans-serif" '
                     f'font-size="11">{escape(c.method)}</text>')
    lines.append("</svg>")
    _write(lines, path)
