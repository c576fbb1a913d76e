"""Per-video training loss: squared-error regression plus clustering distance term."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ANOMALOUS, NORMAL


@dataclass(frozen=True)
class Hyperparameters:
    lambda_: float = 0.05
    alpha: float = 1.0
    d_floor: float = 1e-3
    learning_rate: float = 5e-5
    dropout_rate: float = 0.6
    hidden_width: int = 512
    kmeans_restarts: int = 10
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-6
    epochs: int = 100
    seed: int = 0

    def problems(self) -> list[str]:
        out = []
        if not self.lambda_ >= 0:
            out.append("lambda must be >= 0")
        if not self.alpha > 0:
            out.append("alpha must be > 0")
        if not self.d_floor > 0:
            out.append("d_floor must be > 0")
        if not self.learning_rate > 0:
            out.append("learning_rate must be > 0")
        if not 0 <= self.dropout_rate < 1:
            out.append("dropout_rate must be in [0, 1)")
        if self.hidden_width < 1:
            out.append("hidden_width must be >= 1")
        if self.kmeans_restarts < 1 or self.kmeans_max_iters < 1:
            out.append("k-means restarts and max_iters must be >= 1")
        if not self.kmeans_tol >= 0:
            out.append("kmeans_tol must be >= 0")
        if self.epochs < 0:
            out.append("epochs must be >= 0")
        if not 0 <= self.seed < 2**64:
            out.append("seed must fit in 64 bits")
        return out


@dataclass(frozen=True)
class LossBreakdown:
    L_r: float
    L_c: float
    lambda_: float
    total: float
    d_used: float


def regression_loss(y, scores) -> tuple[float, np.ndarray]:
    """Mean squared error over a video's fragments and its gradient w.r.t. scores."""
    y = np.asarray(y, dtype=np.float64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {s.shape}")
    m = y.shape[0]
    r = s - y
    return float(np.dot(r, r) / m), (2.0 / m) * r


def clustering_loss(d: float, video_label: int, alpha: float = 1.0, d_floor: float = 1e-3) -> tuple[float, float]:
    """Capped distance for normal videos, inverse distance for anomalous ones.

    Returns ``(L_c, dL_c/dd)``. The subgradient at ``d == alpha`` and at
    ``d <= d_floor`` is 0.
    """
    if d < 0:
        raise ValueError(f"distance must be non-negative, got {d}")
    if video_label == NORMAL:
        if d < alpha:
            return float(d), 1.0
        return float(alpha), 0.0
    if video_label == ANOMALOUS:
        d_hat = max(d, d_floor)
        grad = -1.0 / (d_hat * d_hat) if d > d_floor else 0.0
        return 1.0 / d_hat, grad
    raise ValueError(f"video label must be 0 or 1, got {video_label!r}")


def total_loss(L_r: float, L_c: float, lambda_: float) -> float:
    return L_r + lambda_ * L_c
