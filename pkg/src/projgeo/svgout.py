"""Minimal hand-rolled SVG output: scatter layers and polyline curves.

No plotting dependency; the files are plain markup so artifacts stay
inspectable without a toolchain.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _transform(bounds, width, height, pad):
    (x0, x1), (y0, y1) = bounds
    sx = (width - 2 * pad) / (x1 - x0)
    sy = (height - 2 * pad) / (y1 - y0)

    def to_px(p):
        return (
            pad + (p[0] - x0) * sx,
            height - pad - (p[1] - y0) * sy,  # flip y for screen coords
        )

    return to_px


def write_svg(
    path,
    scatter_layers=(),
    curve_layers=(),
    bounds=None,
    width: int = 640,
    height: int = 640,
    pad: int = 20,
) -> None:
    """Write scatter/curve layers: each layer is (points (N,2), color, size)."""
    pts_all = [np.atleast_2d(np.asarray(p)) for p, _, _ in scatter_layers] + [
        np.atleast_2d(np.asarray(p)) for p, _, _ in curve_layers
    ]
    pts_all = [p for p in pts_all if p.size]
    if bounds is None:
        if not pts_all:
            bounds = ((0.0, 1.0), (0.0, 1.0))
        else:
            allp = np.concatenate(pts_all, axis=0)
            margin = 0.05 * max(np.ptp(allp[:, 0]), np.ptp(allp[:, 1]), 1e-9)
            bounds = (
                (allp[:, 0].min() - margin, allp[:, 0].max() + margin),
                (allp[:, 1].min() - margin, allp[:, 1].max() + margin),
            )
    to_px = _transform(bounds, width, height, pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for pts, color, _size in curve_layers:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if pts.shape[0] < 2:
            continue
        coords = " ".join("%.3f,%.3f" % to_px(p) for p in pts)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
    for pts, color, size in scatter_layers:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        for p in pts:
            cx, cy = to_px(p)
            parts.append(f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{size}" fill="{color}"/>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))
