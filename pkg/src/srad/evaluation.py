"""Frame-level scoring and pooled ROC-AUC."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import Dataset, num_fragments
from .network import Model, predict


class DegenerateLabels(ValueError):
    pass


@dataclass(frozen=True)
class FrameScores:
    video_id: str
    scores: np.ndarray
    ground_truth: np.ndarray | None = None


def expand_to_frames(fragment_scores, k: int, num_frames: int) -> np.ndarray:
    """Give every frame its fragment's value; the last fragment may be partial."""
    s = np.asarray(fragment_scores)
    if s.ndim != 1 or s.shape[0] != num_fragments(num_frames, k):
        raise ValueError(f"{s.shape[0] if s.ndim == 1 else s.shape} fragment values do not cover "
                         f"{num_frames} frames at k={k}")
    return np.repeat(s, k)[:num_frames]


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with half credit for ties, via one sort."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: {s.shape} vs {y.shape}")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("AUC needs at least one positive and one negative label")
    _, inv, counts = np.unique(s, return_inverse=True, return_counts=True)
    # average 1-based rank of each tie group, doubled to stay integral
    upper = np.cumsum(counts)
    twice_rank = 2 * upper - counts + 1
    rank_sum_x2 = int(np.sum(twice_rank[inv.ravel()][pos]))
    u_x2 = rank_sum_x2 - n_pos * (n_pos + 1)
    return u_x2 / (2.0 * n_pos * n_neg)


def evaluate(model: Model, dataset: Dataset, ground_truth: Mapping[str, np.ndarray]):
    """Inference-mode scores for every video plus the pooled frame-level AUC.

    ``ground_truth`` maps video id to a per-frame 0/1 vector.
    """
    k = dataset.frames_per_fragment
    per_video = []
    for v in dataset.videos:
        if v.video_id not in ground_truth:
            raise KeyError(f"no ground truth for video {v.video_id!r}")
        gt = np.asarray(ground_truth[v.video_id], dtype=np.int8)
        if gt.shape != (v.num_frames,):
            raise ValueError(f"ground truth for {v.video_id!r} has {gt.shape[0]} frames, expected {v.num_frames}")
        frames = expand_to_frames(predict(model, v.features), k, v.num_frames)
        per_video.append(FrameScores(v.video_id, frames, gt))
    all_scores = np.concatenate([f.scores for f in per_video])
    all_truth = np.concatenate([f.ground_truth for f in per_video])
    return roc_auc(all_scores, all_truth), per_video


def fragment_truth_to_frames(dataset: Dataset, fragment_truth: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    k = dataset.frames_per_fragment
    return {
        v.video_id: expand_to_frames(np.asarray(fragment_truth[v.video_id], dtype=np.int8), k, v.num_frames)
        for v in dataset.videos
    }


def write_timeline(fs: FrameScores, path) -> None:
    """CSV of ``frame_index,score,ground_truth`` for one video."""
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_index", "score", "ground_truth"])
        for i, s in enumerate(fs.scores):
            gt = "" if fs.ground_truth is None else int(fs.ground_truth[i])
            w.writerow([i, repr(float(s)), gt])
