"""Pseudo-labels for anomalous videos from cluster labels and network scores."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ANOMALOUS, NORMAL

AS_IS = "as-is"
INVERTED = "inverted"


def cosine(a, b) -> float:
    """Cosine similarity; 0 when either vector has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    na = np.sqrt(np.dot(a, a))
    nb = np.sqrt(np.dot(b, b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass(frozen=True)
class PseudoDecision:
    s1: float
    s2: float
    orientation: str
    y_p: np.ndarray


def orient_pseudo_labels(scores, cluster_labels) -> PseudoDecision:
    """Keep the cluster labelling or its negation, whichever agrees more with ``scores``.

    Ties keep the labelling as-is.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y_c = np.asarray(cluster_labels)
    if scores.shape != y_c.shape:
        raise ValueError(f"length mismatch: {scores.shape} vs {y_c.shape}")
    if not np.all((y_c == 0) | (y_c == 1)):
        raise ValueError("cluster labels must be binary")
    y_c = y_c.astype(np.int8)
    flipped = (1 - y_c).astype(np.int8)
    s1 = cosine(scores, y_c)
    s2 = cosine(scores, flipped)
    if s1 >= s2:
        return PseudoDecision(s1, s2, AS_IS, y_c)
    return PseudoDecision(s1, s2, INVERTED, flipped)


def training_targets(video_label: int, num_fragments: int, pseudo: PseudoDecision | None = None,
                     use_pseudo: bool = True) -> np.ndarray:
    """Fragment targets: zeros for normal videos, pseudo-labels for anomalous ones.

    With ``use_pseudo=False`` every fragment of an anomalous video is a 1.
    """
    if video_label == NORMAL:
        return np.zeros(num_fragments, dtype=np.float64)
    if video_label != ANOMALOUS:
        raise ValueError(f"video label must be 0 or 1, got {video_label!r}")
    if not use_pseudo:
        return np.ones(num_fragments, dtype=np.float64)
    if pseudo is None:
        raise ValueError("anomalous video needs pseudo-labels unless use_pseudo=False")
    if pseudo.y_p.shape != (num_fragments,):
        raise ValueError(f"pseudo-labels have shape {pseudo.y_p.shape}, expected ({num_fragments},)")
    return pseudo.y_p.astype(np.float64)
