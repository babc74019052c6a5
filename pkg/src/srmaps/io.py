"""CSV and JSON readers/writers for matrices, embeddings and episode logs."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np


def write_matrix_csv(path: str | Path, matrix) -> None:
    """Row-major CSV with 17 significant digits, enough to round-trip a float64."""
    np.savetxt(path, np.asarray(matrix, dtype=np.float64), fmt="%.17g", delimiter=",")


def read_matrix_csv(path: str | Path) -> np.ndarray:
    m = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    return m


def write_vector_csv(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_embedding_csv(path: str | Path, embedding, label_names=None) -> None:
    labels = embedding.labels
    rows = []
    for i, (x, y) in enumerate(embedding.coords):
        lab = "" if labels is None else labels[i]
        if label_names is not None and labels is not None:
            lab = label_names[int(labels[i])]
        rows.append((i, lab, x, y))
    write_vector_csv(path, ["item", "label", "x", "y"], rows)


def write_episodes_csv(path: str | Path, episodes) -> None:
    """One row per step: episode, step, state, action, reward, cause."""
    rows = []
    for k, ep in enumerate(episodes):
        if not ep.actions:
            rows.append((k, 0, ep.visited[0], "", 0.0, ep.cause.value))
        for step, (a, r) in enumerate(zip(ep.actions, ep.rewards)):
            rows.append((k, step, ep.visited[step], a, r, ep.cause.value))
    write_vector_csv(path, ["episode", "step", "state", "action", "reward", "cause"], rows)


def write_json(path: str | Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
