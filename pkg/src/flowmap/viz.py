"""Dependency-free SVG scatter export for embedding snapshots.

Points are colored by true class, misclassified points get a ring marker,
and each class is outlined by the boundary of the smallest set of
128 x 128 histogram cells holding at least 90% of its mass. Output is
plain deterministic SVG text.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

PALETTE = ("#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2", "#9d755d", "#bab0ac")

GRID = 128
MASS = 0.9

_WIDTH = 640
_HEIGHT = 640
_MARGIN = 40


def class_colors(classes: Sequence[str]) -> dict[str, str]:
    return {name: PALETTE[i % len(PALETTE)] for i, name in enumerate(sorted(set(classes)))}


def _bounds(points: np.ndarray) -> tuple[float, float, float, float]:
    x0, y0 = points.min(axis=0)
    x1, y1 = points.max(axis=0)
    pad_x = (x1 - x0) * 0.05 or 1.0
    pad_y = (y1 - y0) * 0.05 or 1.0
    return x0 - pad_x, x1 + pad_x, y0 - pad_y, y1 + pad_y


def mass_mask(points: np.ndarray, bounds: tuple[float, float, float, float], grid: int = GRID, mass: float = MASS) -> np.ndarray:
    """Boolean (grid x grid) mask of the smallest cell set holding ``mass``."""
    x0, x1, y0, y1 = bounds
    hist, _, _ = np.histogram2d(
        points[:, 0], points[:, 1], bins=grid, range=[[x0, x1], [y0, y1]]
    )
    total = hist.sum()
    if total == 0:
        return np.zeros((grid, grid), dtype=bool)
    flat = np.sort(hist.reshape(-1))[::-1]
    cum = np.cumsum(flat)
    cutoff = flat[np.searchsorted(cum, mass * total)]
    mask = hist >= max(cutoff, 1)
    return mask


def _mask_boundary_segments(mask: np.ndarray) -> list[tuple[int, int, int, int, int, int]]:
    """Cell-edge segments (ix, iy, corner offsets) on the mask boundary."""
    segments = []
    grid = mask.shape[0]
    for ix in range(grid):
        for iy in range(grid):
            if not mask[ix, iy]:
                continue
            if ix == 0 or not mask[ix - 1, iy]:
                segments.append((ix, iy, 0, 0, 0, 1))
            if ix == grid - 1 or not mask[ix + 1, iy]:
                segments.append((ix, iy, 1, 0, 1, 1))
            if iy == 0 or not mask[ix, iy - 1]:
                segments.append((ix, iy, 0, 0, 1, 0))
            if iy == grid - 1 or not mask[ix, iy + 1]:
                segments.append((ix, iy, 0, 1, 1, 1))
    return segments


def render_scatter_svg(
    points: np.ndarray,
    labels: Sequence[str],
    pred_labels: Optional[Sequence[str]] = None,
    title: str = "",
    grid: int = GRID,
    mass: float = MASS,
) -> str:
    """SVG scatter of 2-D points with per-class 90%-mass contours."""
    points = np.asarray(points, dtype=np.float64)
    labels = list(labels)
    colors = class_colors(labels)
    x0, x1, y0, y1 = _bounds(points)

    def sx(x: float) -> float:
        return _MARGIN + (x - x0) / (x1 - x0) * (_WIDTH - 2 * _MARGIN)

    def sy(y: float) -> float:
        return _HEIGHT - _MARGIN - (y - y0) / (y1 - y0) * (_HEIGHT - 2 * _MARGIN)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{title}</text>',
    ]

    cell_w = (x1 - x0) / grid
    cell_h = (y1 - y0) / grid
    for name in sorted(colors):
        cls_points = points[np.asarray([lab == name for lab in labels])]
        if len(cls_points) == 0:
            continue
        mask = mass_mask(cls_points, (x0, x1, y0, y1), grid=grid, mass=mass)
        path_bits = []
        for ix, iy, ax, ay, bx, by in _mask_boundary_segments(mask):
            x_a = sx(x0 + (ix + ax) * cell_w)
            y_a = sy(y0 + (iy + ay) * cell_h)
            x_b = sx(x0 + (ix + bx) * cell_w)
            y_b = sy(y0 + (iy + by) * cell_h)
            path_bits.append(f"M{x_a:.2f} {y_a:.2f}L{x_b:.2f} {y_b:.2f}")
        if path_bits:
            out.append(
                f'<path d="{"".join(path_bits)}" stroke="{colors[name]}" stroke-width="1" '
                f'fill="none" opacity="0.8"/>'
            )

    for i in range(len(points)):
        px, py = sx(points[i, 0]), sy(points[i, 1])
        out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="2" fill="{colors[labels[i]]}" opacity="0.75"/>')
        if pred_labels is not None and pred_labels[i] and pred_labels[i] != labels[i]:
            out.append(f'<circle cx="{px:.2f}" cy="{py:.2f}" r="3.5" fill="none" stroke="#d62728" stroke-width="1"/>')

    legend_y = 36
    for name in sorted(colors):
        out.append(f'<circle cx="{_WIDTH - 130}" cy="{legend_y}" r="4" fill="{colors[name]}"/>')
        out.append(
            f'<text x="{_WIDTH - 120}" y="{legend_y + 4}" font-family="sans-serif" font-size="12">{name}</text>'
        )
        legend_y += 16

    out.append("</svg>")
    return "\n".join(out) + "\n"
