"""Successor representations, value functions and SR eigenmaps."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .environments import StateSpace, TransitionMatrix
from .errors import ConfigError, ShapeError, SymmetryError


@dataclass(frozen=True)
class SRConfig:
    """Discount ``gamma`` and number of steps ``horizon`` (None = unbounded)."""

    gamma: float = 0.9
    horizon: int | None = 10

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.horizon is not None and self.horizon < 0:
            raise ConfigError(f"horizon must be >= 0, got {self.horizon}")
        if self.horizon is None and self.gamma >= 1.0:
            raise ConfigError("gamma = 1 needs a finite horizon")


@dataclass
class SuccessorMatrix:
    entries: np.ndarray
    config: SRConfig
    source: str = ""

    @property
    def n_states(self) -> int:
        return self.entries.shape[0]


def _probs(tp) -> np.ndarray:
    if isinstance(tp, TransitionMatrix):
        return tp.probs
    return np.asarray(tp, dtype=np.float64)


def successor_matrix(tp, config: SRConfig = SRConfig(), source: str = "") -> SuccessorMatrix:
    """Accumulate ``sum_t gamma**t T**t`` for t = 0..horizon.

    With ``horizon=None`` the sum runs until the next term is below 1e-16 in
    max-norm (at most 100000 terms).
    """
    t = _probs(tp)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ShapeError(f"transition matrix must be square, got {t.shape}")
    n = t.shape[0]
    total = np.eye(n)
    term = np.eye(n)
    steps = config.horizon if config.horizon is not None else 100_000
    for _ in range(steps):
        if config.gamma == 0.0:
            break
        term = config.gamma * (term @ t)
        total += term
        if config.horizon is None and np.abs(term).max() < 1e-16:
            break
    return SuccessorMatrix(total, config, source)


def value_function(sr: SuccessorMatrix | np.ndarray, rewards=None) -> np.ndarray:
    """V(s) = sum over s' of M(s, s') R(s'); rewards default to all ones."""
    m = sr.entries if isinstance(sr, SuccessorMatrix) else np.asarray(sr, dtype=np.float64)
    r = np.ones(m.shape[1]) if rewards is None else np.asarray(rewards, dtype=np.float64)
    if r.shape != (m.shape[1],):
        raise ShapeError(f"reward vector of shape {r.shape} does not match SR of shape {m.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    return m @ r


@dataclass
class SpectralDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    symmetrization_residual: float = 0.0
    sweeps: int = 0


def _off_diagonal_max(a: np.ndarray) -> float:
    off = np.abs(a - np.diag(np.diag(a)))
    return float(off.max()) if off.size else 0.0


def jacobi_eigen(a, tol: float = 1e-10, max_sweeps: int = 100) -> SpectralDecomposition:
    """Eigen-decompose a real symmetric matrix with cyclic Jacobi rotations.

    Pivots are visited in row-major order ``(0,1), (0,2), ..., (n-2,n-1)``.
    Sweeps stop once every off-diagonal magnitude is below ``tol``. Pairs are
    returned by descending eigenvalue (stable in the original diagonal
    order) and each eigenvector is signed so its largest-magnitude entry is
    positive.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"matrix must be square, got {a.shape}")
    asym = float(np.abs(a - a.T).max()) if a.size else 0.0
    if asym >= 1e-9:
        raise SymmetryError(f"matrix asymmetry {asym:.3g} exceeds 1e-9; symmetrize first")
    a = (a + a.T) / 2
    n = a.shape[0]
    v = np.eye(n)
    skip = tol * 1e-2
    sweeps = 0
    while _off_diagonal_max(a) >= tol:
        if sweeps == max_sweeps:
            warnings.warn(f"Jacobi did not converge in {max_sweeps} sweeps", RuntimeWarning, stacklevel=2)
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q]
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :]
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q]
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    lam = np.diag(a).copy()
    order = np.argsort(-lam, kind="stable")
    lam = lam[order]
    v = v[:, order]
    if n:
        pivot = np.argmax(np.abs(v), axis=0)
        signs = np.sign(v[pivot, np.arange(n)])
        signs[signs == 0] = 1.0
        v = v * signs
    return SpectralDecomposition(lam, v, 0.0, sweeps)


@dataclass
class EigenMap:
    values: np.ndarray
    eigenvalue: float
    rank: int


def symmetric_part(m: np.ndarray) -> tuple[np.ndarray, float]:
    """Return ``(M + M.T) / 2`` and the Frobenius norm of ``(M - M.T) / 2``."""
    m = np.asarray(m, dtype=np.float64)
    return (m + m.T) / 2, float(np.linalg.norm((m - m.T) / 2))


def sr_decomposition(sr: SuccessorMatrix | np.ndarray, space: StateSpace, tol: float = 1e-10) -> SpectralDecomposition:
    """Decompose the symmetric part of the SR restricted to valid states."""
    m = sr.entries if isinstance(sr, SuccessorMatrix) else np.asarray(sr, dtype=np.float64)
    if m.shape != (space.n_states, space.n_states):
        raise ShapeError(f"SR of shape {m.shape} does not match {space.n_states} states")
    valid = space.valid_states
    sym, residual = symmetric_part(m[np.ix_(valid, valid)])
    dec = jacobi_eigen(sym, tol=tol)
    dec.symmetrization_residual = residual
    return dec


def sr_eigenmaps(
    sr: SuccessorMatrix | np.ndarray,
    space: StateSpace,
    k: int,
    decomposition: SpectralDecomposition | None = None,
) -> list[EigenMap]:
    """Top-``k`` SR eigenvectors reshaped onto the environment grid.

    Walls are set to 0. Ranks start at 1 for the largest eigenvalue.
    """
    if space.grid_shape is None:
        raise TypeError(f"{space.kind.value} space has no grid shape to reshape eigenvectors onto")
    valid = space.valid_states
    if not 0 <= k <= valid.size:
        raise ValueError(f"k={k} outside [0, {valid.size}]")
    dec = decomposition if decomposition is not None else sr_decomposition(sr, space)
    maps = []
    for i in range(k):
        field = np.zeros(space.n_states)
        field[valid] = dec.eigenvectors[:, i]
        maps.append(EigenMap(field.reshape(space.grid_shape), float(dec.eigenvalues[i]), i + 1))
    return maps
