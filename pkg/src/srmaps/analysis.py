"""Classical MDS, silhouette scores, matrix error metrics and
autocorrelogram peak statistics for eigenmaps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .environments import TransitionMatrix
from .errors import ClusteringError, ShapeError
from .sr import EigenMap, SuccessorMatrix, jacobi_eigen


@dataclass
class Embedding2D:
    coords: np.ndarray
    labels: np.ndarray | None = None
    captured: tuple[float, float] = (0.0, 0.0)
    stress: float | None = None

    @property
    def x(self) -> np.ndarray:
        return self.coords[:, 0]

    @property
    def y(self) -> np.ndarray:
        return self.coords[:, 1]


def squared_distances(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    diff = points[:, None, :] - points[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def double_center(d2: np.ndarray) -> np.ndarray:
    """B = -1/2 J D^2 J with J the centering matrix."""
    n = d2.shape[0]
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ d2 @ j
    return (b + b.T) / 2


def classical_mds(vectors, labels=None, out_dim: int = 2) -> Embedding2D:
    """Torgerson scaling of row vectors into the plane.

    Axes with non-positive eigenvalue are left at zero.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("classical MDS needs at least two points")
    if not np.all(np.isfinite(x)):
        raise ValueError("point coordinates must be finite")
    if out_dim != 2:
        raise ValueError("only 2D embeddings are supported")
    b = double_center(squared_distances(x))
    dec = jacobi_eigen(b)
    n = x.shape[0]
    coords = np.zeros((n, 2))
    captured = [0.0, 0.0]
    for k in range(min(2, n)):
        lam = dec.eigenvalues[k]
        if lam > 0:
            coords[:, k] = dec.eigenvectors[:, k] * np.sqrt(lam)
            captured[k] = float(lam)
    lab = None if labels is None else np.asarray(labels)
    return Embedding2D(coords, lab, (captured[0], captured[1]))


def raw_stress(coords: np.ndarray, distances: np.ndarray) -> float:
    """Sum over pairs of squared differences between embedded and target distances."""
    d = np.sqrt(squared_distances(coords))
    iu = np.triu_indices(len(coords), 1)
    return float(np.sum((d[iu] - distances[iu]) ** 2))


def metric_mds(vectors, labels=None, max_iter: int = 3000, tol: float = 1e-10) -> Embedding2D:
    """Stress-minimising (SMACOF) embedding started from the classical solution.

    Unlike the classical projection it can place several mutually orthogonal
    clusters apart in the plane. Iterates Guttman transforms until the
    relative stress decrease falls below ``tol``.
    """
    start = classical_mds(vectors, labels)
    target = np.sqrt(squared_distances(np.asarray(vectors, dtype=np.float64)))
    n = target.shape[0]
    y = start.coords.copy()
    stress = raw_stress(y, target)
    for _ in range(max_iter):
        d = np.sqrt(squared_distances(y))
        ratio = np.divide(target, d, out=np.zeros_like(d), where=d > 0)
        b = -ratio
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, -b.sum(axis=1))
        y = b @ y / n
        new = raw_stress(y, target)
        done = stress - new <= tol * max(stress, np.finfo(float).tiny)
        stress = new
        if done:
            break
    return Embedding2D(y, start.labels, start.captured, stress)


def silhouette_samples(points, labels) -> np.ndarray:
    """Per-point silhouette under Euclidean distance; singletons score 0."""
    pts = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ClusteringError("silhouette needs at least two distinct labels")
    dist = np.sqrt(squared_distances(pts))
    scores = np.zeros(len(pts))
    for i in range(len(pts)):
        same = labels == labels[i]
        if same.sum() == 1:
            continue
        a = dist[i, same].sum() / (same.sum() - 1)
        b = min(dist[i, labels == other].mean() for other in uniq if other != labels[i])
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0 else (b - a) / denom
    return scores


def silhouette(embedding: Embedding2D, labels=None) -> float:
    labels = embedding.labels if labels is None else labels
    if labels is None:
        raise ClusteringError("embedding carries no labels")
    return float(silhouette_samples(embedding.coords, labels).mean())


@dataclass
class ErrorReport:
    row_tv: np.ndarray
    mean_tv: float
    frobenius_relative: float
    excluded: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {
            "mean_tv": self.mean_tv,
            "max_tv": float(np.nanmax(self.row_tv)) if np.any(~self.excluded) else 0.0,
            "frobenius_relative": self.frobenius_relative,
            "n_rows": int(self.excluded.size),
            "n_excluded": int(self.excluded.sum()),
            "row_tv": [None if np.isnan(v) else float(v) for v in self.row_tv],
        }


def _matrix(m) -> np.ndarray:
    if isinstance(m, TransitionMatrix):
        return m.probs
    if isinstance(m, SuccessorMatrix):
        return m.entries
    return np.asarray(m, dtype=np.float64)


def matrix_error(predicted, truth, excluded=None) -> ErrorReport:
    """Row-wise total variation and relative Frobenius error.

    Rows flagged in ``excluded`` (default: the truth's excluded rows when it
    is a TransitionMatrix) get NaN TV and are left out of both summaries.
    """
    p, q = _matrix(predicted), _matrix(truth)
    if p.shape != q.shape:
        raise ShapeError(f"shape mismatch {p.shape} vs {q.shape}")
    if excluded is None:
        excluded = truth.excluded if isinstance(truth, TransitionMatrix) else np.zeros(q.shape[0], bool)
    excluded = np.asarray(excluded, dtype=bool)
    keep = ~excluded
    tv = np.full(q.shape[0], np.nan)
    tv[keep] = 0.5 * np.abs(p[keep] - q[keep]).sum(axis=1)
    if keep.any():
        mean_tv = float(tv[keep].mean())
        norm = np.linalg.norm(q[keep])
        diff = np.linalg.norm(p[keep] - q[keep])
        frob = float(diff / norm) if norm > 0 else float(diff)
    else:
        mean_tv = frob = 0.0
    return ErrorReport(tv, mean_tv, frob, excluded)


def autocorrelogram(field2d: np.ndarray) -> np.ndarray:
    """Zero-mean 2D autocorrelation over all lags, scaled to 1 at lag 0.

    Output has shape ``(2R-1, 2C-1)`` with lag (0, 0) at the centre. A
    constant field yields an all-zero array except for 1 at the centre.
    """
    f = np.asarray(field2d, dtype=np.float64)
    f = f - f.mean()
    rows, cols = f.shape
    out = np.zeros((2 * rows - 1, 2 * cols - 1))
    for dr in range(-(rows - 1), rows):
        a_r = slice(max(dr, 0), rows + min(dr, 0))
        b_r = slice(max(-dr, 0), rows + min(-dr, 0))
        for dc in range(-(cols - 1), cols):
            a = f[a_r, max(dc, 0) : cols + min(dc, 0)]
            b = f[b_r, max(-dc, 0) : cols + min(-dc, 0)]
            out[dr + rows - 1, dc + cols - 1] = np.sum(a * b)
    zero = out[rows - 1, cols - 1]
    if zero <= 0:
        out[:] = 0.0
        out[rows - 1, cols - 1] = 1.0
        return out
    return out / zero


def local_maxima(grid: np.ndarray) -> list[tuple[float, float]]:
    """Centroids of 8-neighbourhood maxima.

    A connected plateau of equal values counts once, and only when every
    cell bordering it is strictly lower.
    """
    g = np.asarray(grid, dtype=np.float64)
    rows, cols = g.shape

    def neighbours(i, j):
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                ni, nj = i + di, j + dj
                if (di or dj) and 0 <= ni < rows and 0 <= nj < cols:
                    yield ni, nj

    seen = np.zeros(g.shape, dtype=bool)
    peaks = []
    for i in range(rows):
        for j in range(cols):
            if seen[i, j]:
                continue
            v = g[i, j]
            if any(g[n] > v for n in neighbours(i, j)):
                continue
            # flood the equal-valued plateau containing (i, j)
            plateau, stack, is_peak = [], [(i, j)], True
            seen[i, j] = True
            while stack:
                cell = stack.pop()
                plateau.append(cell)
                for n in neighbours(*cell):
                    if g[n] == v:
                        if not seen[n]:
                            seen[n] = True
                            stack.append(n)
                    elif g[n] > v:
                        is_peak = False
            if is_peak:
                pts = np.array(plateau, dtype=np.float64)
                peaks.append((float(pts[:, 0].mean()), float(pts[:, 1].mean())))
    return peaks


def _field(m) -> np.ndarray:
    values = m.values if isinstance(m, EigenMap) else np.asarray(m, dtype=np.float64)
    if values.ndim != 2 or min(values.shape) < 3:
        raise ShapeError(f"map must be at least 3x3, got {values.shape}")
    return values


def autocorrelation_peak_count(m: EigenMap | np.ndarray) -> int:
    """Number of local maxima in the map's autocorrelogram (mesh-size proxy)."""
    values = _field(m)
    if np.ptp(values) == 0:
        return 1
    return len(local_maxima(autocorrelogram(values)))


def autocorrelation_peak_spacing(m: EigenMap | np.ndarray) -> float:
    """Distance from the central autocorrelogram peak to the nearest other peak.

    Returns ``inf`` when the central peak is the only one.
    """
    values = _field(m)
    rows, cols = values.shape
    centre = np.array([rows - 1, cols - 1], dtype=np.float64)
    others = [np.hypot(*(np.array(p) - centre)) for p in local_maxima(autocorrelogram(values))]
    others = [d for d in others if d > 0.5]
    return min(others) if others else float("inf")


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x, y) -> float:
    """Spearman rank correlation with average ranks for ties."""
    rx = _average_ranks(np.asarray(x, dtype=np.float64))
    ry = _average_ranks(np.asarray(y, dtype=np.float64))
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt((rx * rx).sum() * (ry * ry).sum())
    return float((rx * ry).sum() / denom) if denom > 0 else 0.0
