"""Binary k-means over a video's FC-1 representations.

The Lloyd iterations run in a compiled kernel when ``srad._kmeans_ext`` was
built, otherwise in the numpy fallback. Set ``SRAD_PURE_PYTHON=1`` to force
the fallback.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _kmeans_py
from .core import as_rng

if os.environ.get("SRAD_PURE_PYTHON", "0") not in ("", "0"):
    _ext = None
else:
    try:
        from . import _kmeans_ext as _ext
    except ImportError:  # pragma: no cover - depends on build
        _ext = None

KERNELS = {"python": _kmeans_py.lloyd2}
if _ext is not None:
    KERNELS["cython"] = _ext.lloyd2
BACKEND = "cython" if _ext is not None else "python"


class DegenerateInput(ValueError):
    """Raised when fewer than two points are given to ``kmeans2``."""


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray  # int8, 0 or 1
    C1: np.ndarray  # centre of label 0
    C2: np.ndarray  # centre of label 1
    distance: float
    degenerate: bool = False
    sse: float = 0.0

    @property
    def sizes(self) -> tuple[int, int]:
        n1 = int(self.labels.sum())
        return self.labels.shape[0] - n1, n1


def sse(points, labels) -> float:
    """Within-cluster sum of squared distances for a 0/1 labelling."""
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    total = 0.0
    for c in (0, 1):
        grp = points[labels == c]
        if len(grp):
            total += float(np.sum((grp - grp.mean(axis=0)) ** 2))
    return total


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    for x, y in zip(a, b):
        if x != y:
            return bool(x < y)
    return False


def kmeans2(points, rng=None, restarts: int = 10, max_iters: int = 100, tol: float = 1e-6,
            kernel: str | None = None) -> ClusterResult:
    """Two-cluster k-means with k-means++ seeding and best-of-``restarts``.

    Label 0 goes to the centre that is lexicographically smaller, so the
    output does not depend on which restart found it. If every point is
    identical the result is degenerate with a single cluster.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {X.shape}")
    m = X.shape[0]
    if m < 2:
        raise DegenerateInput(f"kmeans2 needs at least 2 points, got {m}; use cluster_degenerate")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain NaN or Inf")
    if restarts < 1 or max_iters < 1:
        raise ValueError("restarts and max_iters must be >= 1")
    if np.all(X == X[0]):
        c = X[0].copy()
        return ClusterResult(np.zeros(m, dtype=np.int8), c, c.copy(), 0.0, True, 0.0)

    uniforms = as_rng(rng).generator().random((restarts, 2))
    fn = KERNELS[kernel or BACKEND]
    labels, centers, best_sse, _ = fn(X, uniforms, int(max_iters), float(tol))
    labels = np.asarray(labels, dtype=np.int8)
    c0, c1 = np.array(centers[0]), np.array(centers[1])
    if _lex_less(c1, c0):
        c0, c1 = c1, c0
        labels = (1 - labels).astype(np.int8)
    d = float(np.sqrt(np.sum((c0 - c1) ** 2)))
    return ClusterResult(labels, c0, c1, d, False, float(best_sse))


def cluster_degenerate(points) -> ClusterResult:
    """Single-fragment fallback: one cluster, zero distance."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != 1:
        raise ValueError(f"cluster_degenerate expects exactly one point, got shape {X.shape}")
    c = X[0].copy()
    return ClusterResult(np.zeros(1, dtype=np.int8), c, c.copy(), 0.0, True, 0.0)


def cluster(points, rng=None, restarts: int = 10, max_iters: int = 100, tol: float = 1e-6) -> ClusterResult:
    X = np.asarray(points, dtype=np.float64)
    if X.shape[0] == 1:
        return cluster_degenerate(X)
    return kmeans2(X, rng, restarts, max_iters, tol)


def center_distance_gradient(points, result: ClusterResult) -> np.ndarray:
    """d(||C1 - C2||)/d(point_j) with the partition held fixed."""
    X = np.asarray(points, dtype=np.float64)
    if result.degenerate or result.distance <= 0.0:
        raise ValueError("centre distance is zero; gradient undefined")
    n0, n1 = result.sizes
    if n0 == 0 or n1 == 0:
        raise ValueError("one cluster is empty; gradient undefined")
    u = (result.C1 - result.C2) / result.distance
    grad = np.empty_like(X)
    in0 = result.labels == 0
    grad[in0] = u / n0
    grad[~in0] = -u / n1
    return grad
