"""Deterministic PGM and SVG rendering of 2D fields and embeddings.

NaN cells are treated as walls.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import RenderError

WALL_GRAY = 0
# lowest gray level used for data when walls are present, so walls stay distinct
DATA_FLOOR_WITH_WALLS = 48
WALL_FILL = "#404040"
CLASS_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _validated(field) -> tuple[np.ndarray, np.ndarray]:
    f = np.asarray(field, dtype=np.float64)
    if f.ndim != 2 or f.size == 0:
        raise RenderError(f"expected a non-empty 2D field, got shape {f.shape}")
    walls = np.isnan(f)
    if walls.all():
        raise RenderError("field has no finite cell")
    if np.isinf(f).any():
        raise RenderError("field contains infinite values")
    return f, walls


def gray_levels(field) -> np.ndarray:
    """Min-max map finite cells onto 0..255 (constant fields map to 128)."""
    f, walls = _validated(field)
    vals = f[~walls]
    lo, hi = vals.min(), vals.max()
    floor = DATA_FLOOR_WITH_WALLS if walls.any() else 0
    out = np.full(f.shape, WALL_GRAY, dtype=np.uint8)
    if hi == lo:
        out[~walls] = 128
    else:
        out[~walls] = np.rint(floor + (vals - lo) / (hi - lo) * (255 - floor)).astype(np.uint8)
    return out


def render_pgm(field, scale: int = 1) -> bytes:
    """Binary (P5) grayscale image, each cell ``scale`` pixels wide."""
    px = gray_levels(field)
    if scale > 1:
        px = np.kron(px, np.ones((scale, scale), dtype=np.uint8))
    h, w = px.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + px.tobytes()


def _diverging(t: float) -> str:
    if t < 0:
        g = int(round(255 * (1 + t)))
        return f"#{g:02x}{g:02x}ff"
    g = int(round(255 * (1 - t)))
    return f"#ff{g:02x}{g:02x}"


def render_svg(field, cell: int = 20) -> bytes:
    """Zero-centred blue-white-red grid of rectangles."""
    f, walls = _validated(field)
    rows, cols = f.shape
    span = np.abs(f[~walls]).max()
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{cols * cell}" height="{rows * cell}" '
        f'viewBox="0 0 {cols * cell} {rows * cell}">'
    ]
    for r in range(rows):
        for c in range(cols):
            if walls[r, c]:
                fill = WALL_FILL
            else:
                fill = _diverging(f[r, c] / span if span > 0 else 0.0)
            parts.append(f'<rect x="{c * cell}" y="{r * cell}" width="{cell}" height="{cell}" fill="{fill}"/>')
    parts.append("</svg>\n")
    return "\n".join(parts).encode("utf-8")


def render_heatmap(field, palette: str = "gray", scale: int = 1) -> bytes:
    """PGM bytes for ``gray``, SVG bytes for ``diverging``."""
    if palette == "gray":
        return render_pgm(field, scale)
    if palette == "diverging":
        return render_svg(field, max(scale, 1))
    raise ValueError(f"unknown palette {palette!r}")


def write_heatmap(path: str | Path, field, palette: str = "gray", scale: int = 1) -> None:
    Path(path).write_bytes(render_heatmap(field, palette, scale))


def render_scatter(coords, labels=None, size: int = 400, title: str = "") -> bytes:
    """SVG scatter plot of 2D points coloured by integer label."""
    pts = np.asarray(coords, dtype=np.float64)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    pad = 20
    xy = pad + (pts - lo) / span * (size - 2 * pad)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}">']
    if title:
        parts.append(f'<text x="{pad}" y="14" font-size="12">{title}</text>')
    for i, (x, y) in enumerate(xy):
        color = "#000000" if labels is None else CLASS_COLORS[int(labels[i]) % len(CLASS_COLORS)]
        parts.append(f'<circle cx="{x:.3f}" cy="{size - y:.3f}" r="4" fill="{color}"/>')
    parts.append("</svg>\n")
    return "\n".join(parts).encode("utf-8")
