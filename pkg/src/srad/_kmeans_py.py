"""numpy implementation of the two-centre Lloyd kernel.

Mirrors ``_kmeans_ext.pyx`` step for step: same seeding from pre-drawn
uniforms, same tie rules, same empty-cluster repair. Results agree with the
compiled kernel up to floating-point summation order.
"""
from __future__ import annotations

import numpy as np


def _sqdist(X, c):
    diff = X - c
    return np.einsum("ij,ij->i", diff, diff)


def _seed(X, u0, u1):
    m = X.shape[0]
    i0 = min(int(u0 * m), m - 1)
    d2 = _sqdist(X, X[i0])
    csum = np.cumsum(d2)
    total = csum[-1]
    hit = np.flatnonzero(csum > u1 * total)
    if hit.size:
        i1 = int(hit[0])
    else:
        i1 = int(np.flatnonzero(d2 > 0)[-1])
    return i0, i1


def _means(X, labels, centers):
    """Cluster means with farthest-point repair of an empty cluster."""
    out = centers.copy()
    n1 = int(labels.sum())
    n0 = labels.shape[0] - n1
    if n0 == 0 or n1 == 0:
        full = 1 if n0 == 0 else 0
        empty = 1 - full
        out[full] = X.mean(axis=0)
        far = int(np.argmax(_sqdist(X, out[full])))
        labels[far] = empty
        mask = labels == full
        out[full] = X[mask].mean(axis=0)
        out[empty] = X[far]
        return out, True
    out[0] = X[labels == 0].mean(axis=0)
    out[1] = X[labels == 1].mean(axis=0)
    return out, False


def _lloyd(X, i0, i1, max_iters, tol):
    centers = np.stack([X[i0], X[i1]]).astype(np.float64)
    labels = None
    n_iter = 0
    for n_iter in range(1, max_iters + 1):
        d0 = _sqdist(X, centers[0])
        d1 = _sqdist(X, centers[1])
        new_labels = (d1 < d0).astype(np.int8)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        new_centers, repaired = _means(X, labels, centers)
        shift = np.sqrt(np.max(np.sum((new_centers - centers) ** 2, axis=1)))
        centers = new_centers
        if not repaired and shift < tol:
            break
    # centers always equal the means of the returned labels
    centers, _ = _means(X, labels, centers)
    sse = float(np.sum(_sqdist(X[labels == 0], centers[0])) + np.sum(_sqdist(X[labels == 1], centers[1])))
    return labels, centers, sse, n_iter


def lloyd2(X, uniforms, max_iters, tol):
    """Best-of-restarts 2-means.

    ``uniforms`` is a ``(restarts, 2)`` array of U[0,1) draws that fixes the
    k-means++ seeding of each restart. Returns ``(labels, centers, sse,
    sse_per_restart)``; the first restart with minimal SSE wins.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    uniforms = np.asarray(uniforms, dtype=np.float64)
    best = None
    all_sse = np.empty(uniforms.shape[0])
    for r in range(uniforms.shape[0]):
        i0, i1 = _seed(X, uniforms[r, 0], uniforms[r, 1])
        labels, centers, sse, _ = _lloyd(X, i0, i1, max_iters, tol)
        all_sse[r] = sse
        if best is None or sse < best[2]:
            best = (labels, centers, sse)
    return best[0], best[1], best[2], all_sse
