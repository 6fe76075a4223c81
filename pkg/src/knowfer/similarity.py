"""Cosine-form NCC similarity shared by clustering, search, and de-redundancy.

The score is <a, b> / (||a|| * ||b||) with no mean removal. Vectors with
norm below 1e-12 score 0 against everything: flat/empty patches match
nothing strongly and never cause a division crash.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

ZERO_NORM_EPS = 1e-12


def ncc(a: np.ndarray, b: np.ndarray) -> float:
    """Similarity of two equal-length vectors, in [-1, 1]."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionError(f"vector lengths differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] == 0:
        raise DimensionError("vectors must have length >= 1")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < ZERO_NORM_EPS or nb < ZERO_NORM_EPS:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def ncc_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Monotone distance wrapper 1 - ncc, in [0, 2]."""
    return 1.0 - ncc(a, b)


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Unit-normalize each row; rows below the zero-norm floor become zero."""
    m = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    safe = np.where(norms < ZERO_NORM_EPS, 1.0, norms)
    out = m / safe
    out[norms.reshape(-1) < ZERO_NORM_EPS] = 0.0
    return out


def ncc_to_rows(rows: np.ndarray, v: np.ndarray) -> np.ndarray:
    """ncc of one vector against every row of a matrix."""
    rows = np.asarray(rows, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if rows.shape[1] != v.shape[0]:
        raise DimensionError(f"vector lengths differ: {rows.shape[1]} vs {v.shape[0]}")
    nv = float(np.linalg.norm(v))
    if nv < ZERO_NORM_EPS:
        return np.zeros(rows.shape[0])
    norms = np.linalg.norm(rows, axis=1)
    dots = rows @ v
    out = np.zeros(rows.shape[0])
    ok = norms >= ZERO_NORM_EPS
    out[ok] = dots[ok] / (norms[ok] * nv)
    return out
