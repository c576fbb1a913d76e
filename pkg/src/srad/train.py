"""Self-reasoning training loop: score, cluster, pseudo-label, update."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import network
from .clustering import ClusterResult, center_distance_gradient, cluster
from .core import ANOMALOUS, Dataset, RngHandle, VideoRecord, validate_dataset
from .objective import Hyperparameters, LossBreakdown, clustering_loss, regression_loss, total_loss
from .selfreason import PseudoDecision, orient_pseudo_labels, training_targets

log = logging.getLogger(__name__)

FULL = "full"
NO_LC = "no_Lc"
NO_YP = "no_yp"
ABLATIONS = (FULL, NO_LC, NO_YP)

HISTORY_COLUMNS = ("epoch", "iter", "video_id", "label", "Lr", "Lc", "L", "d", "s1", "s2", "orientation", "degenerate")


@dataclass(frozen=True)
class TrainConfig:
    hyper: Hyperparameters = field(default_factory=Hyperparameters)
    ablation: str = FULL
    warmup_epochs: int = 2
    checkpoint_every: int = 0  # epochs; 0 disables
    checkpoint_dir: str | None = None

    def problems(self) -> list[str]:
        out = list(self.hyper.problems())
        if self.ablation not in ABLATIONS:
            out.append(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.warmup_epochs < 0:
            out.append("warmup_epochs must be >= 0")
        if self.checkpoint_every < 0:
            out.append("checkpoint_every must be >= 0")
        return out


@dataclass(frozen=True)
class StepRecord:
    epoch: int
    iter: int
    video_id: str
    label: int
    L_r: float
    L_c: float | None  # None when the clustering term is ablated or skipped
    L: float
    d: float
    s1: float | None
    s2: float | None
    orientation: str
    degenerate: bool


@dataclass
class StepResult:
    """Everything one video contributes to an update."""

    loss: LossBreakdown
    grads: network.Gradients
    clusters: ClusterResult
    pseudo: PseudoDecision | None
    targets: np.ndarray
    cache: network.ForwardCache
    lc_active: bool


def video_objective(model: network.Model, X, video_label: int, cfg: TrainConfig, rng: RngHandle,
                    warmup: bool = False) -> StepResult:
    """Loss and parameter gradients for one whole video.

    During ``warmup`` anomalous videos train on all-one targets, as if
    pseudo-labels were ablated.
    """
    hp = cfg.hyper
    cache = network.forward(model, X, rng.child("dropout"), train=True)
    clusters = cluster(cache.R, rng.child("kmeans"), hp.kmeans_restarts, hp.kmeans_max_iters, hp.kmeans_tol)
    m = cache.R.shape[0]

    pseudo = None
    use_pseudo = cfg.ablation != NO_YP and not warmup
    if video_label == ANOMALOUS and use_pseudo and not clusters.degenerate:
        pseudo = orient_pseudo_labels(cache.scores, clusters.labels)
    # a degenerate anomalous video falls back to all-one targets
    targets = training_targets(video_label, m, pseudo, use_pseudo=pseudo is not None)

    L_r, dLr = regression_loss(targets, cache.scores)
    lc_active = cfg.ablation != NO_LC and not clusters.degenerate
    dL_dR = None
    if lc_active:
        L_c, dLc_dd = clustering_loss(clusters.distance, video_label, hp.alpha, hp.d_floor)
        lam = hp.lambda_
        if lam != 0.0 and dLc_dd != 0.0:
            dL_dR = (lam * dLc_dd) * center_distance_gradient(cache.R, clusters)
        d_used = max(clusters.distance, hp.d_floor) if video_label == ANOMALOUS else clusters.distance
    else:
        L_c, lam, d_used = 0.0, 0.0, clusters.distance
    loss = LossBreakdown(L_r, L_c, lam, total_loss(L_r, L_c, lam), d_used)
    grads = network.backward(model, cache, dLr, dL_dR)
    return StepResult(loss, grads, clusters, pseudo, targets, cache, lc_active)


def train_step(model: network.Model, adam: network.AdamState, video: VideoRecord, cfg: TrainConfig,
               rng: RngHandle, epoch: int = 0, iteration: int = 0, warmup: bool = False):
    """One forward/cluster/pseudo-label/backward/Adam step on ``video``."""
    res = video_objective(model, video.features, video.video_label, cfg, rng, warmup)
    model, adam = network.adam_step(model, res.grads, adam)
    rec = StepRecord(
        epoch=epoch,
        iter=iteration,
        video_id=video.video_id,
        label=video.video_label,
        L_r=res.loss.L_r,
        L_c=res.loss.L_c if res.lc_active else None,
        L=res.loss.total,
        d=res.clusters.distance,
        s1=res.pseudo.s1 if res.pseudo else None,
        s2=res.pseudo.s2 if res.pseudo else None,
        orientation=res.pseudo.orientation if res.pseudo else "",
        degenerate=res.clusters.degenerate,
    )
    return model, adam, rec


class TrainHistory(list):
    """List of ``StepRecord`` with CSV export."""

    def epoch_mean(self, attr: str = "L_c") -> dict[int, float]:
        sums: dict[int, list[float]] = {}
        for r in self:
            val = getattr(r, attr)
            if val is not None:
                sums.setdefault(r.epoch, []).append(val)
        return {e: float(np.mean(v)) for e, v in sorted(sums.items())}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_COLUMNS)
        for r in self:
            w.writerow([
                r.epoch,
                r.iter,
                r.video_id,
                r.label,
                repr(r.L_r),
                "" if r.L_c is None else repr(r.L_c),
                repr(r.L),
                repr(r.d),
                "" if r.s1 is None else repr(r.s1),
                "" if r.s2 is None else repr(r.s2),
                r.orientation,
                int(r.degenerate),
            ])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def init_training(dataset: Dataset, cfg: TrainConfig):
    hp = cfg.hyper
    root = RngHandle(int(hp.seed))
    model = network.init_model(dataset.feature_dim, hp.hidden_width, hp.dropout_rate, root.child("init"))
    return model, network.init_adam(model, hp.learning_rate)


def fit(dataset: Dataset, cfg: TrainConfig,
        on_epoch: Callable[[int, network.Model, network.AdamState], None] | None = None):
    """Train from scratch; returns ``(model, adam_state, history)``.

    Each epoch visits every video once in a seeded shuffled order, with one
    Adam step per video. The first ``cfg.warmup_epochs`` epochs train on
    video-level labels so that the scores used to orient clusters already
    carry signal; starting the cosine orientation from near-constant scores
    favours the larger cluster, which is usually the normal one.
    """
    problems = [str(p) for p in validate_dataset(dataset)] + cfg.problems()
    if problems:
        raise ValueError("; ".join(problems))
    hp = cfg.hyper
    root = RngHandle(int(hp.seed))
    model, adam = init_training(dataset, cfg)
    history = TrainHistory()
    videos = dataset.videos
    it = 0
    for epoch in range(1, hp.epochs + 1):
        warm = epoch <= cfg.warmup_epochs
        order = root.child("shuffle", epoch).generator().permutation(len(videos))
        for idx in order:
            model, adam, rec = train_step(
                model, adam, videos[idx], cfg, root.child("step", it), epoch, it, warmup=warm
            )
            history.append(rec)
            it += 1
        if on_epoch is not None:
            on_epoch(epoch, model, adam)
        if cfg.checkpoint_every and cfg.checkpoint_dir and epoch % cfg.checkpoint_every == 0:
            out = Path(cfg.checkpoint_dir) / f"epoch-{epoch:04d}.srck"
            network.save_checkpoint(out, model, adam)
            log.info("wrote %s", out)
    return model, adam, history
