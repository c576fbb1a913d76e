"""Shared domain types and the seeded randomness contract."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

NORMAL = 0
ANOMALOUS = 1


def num_fragments(num_frames: int, k: int) -> int:
    """Fragments needed to cover ``num_frames`` frames, last one possibly partial."""
    return -(-int(num_frames) // int(k))


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    video_label: int
    num_frames: int
    features: np.ndarray  # m_i x D, one row per fragment

    @property
    def num_fragments(self) -> int:
        return int(self.features.shape[0]) if self.features.ndim == 2 else 0


@dataclass(frozen=True)
class Dataset:
    videos: tuple[VideoRecord, ...]
    feature_dim: int
    frames_per_fragment: int = 16

    def __len__(self) -> int:
        return len(self.videos)

    def __iter__(self):
        return iter(self.videos)

    def by_id(self) -> dict[str, VideoRecord]:
        return {v.video_id: v for v in self.videos}


def make_video(video_id: str, label: int, num_frames: int, features) -> VideoRecord:
    """Build a record holding a read-only float64 copy of ``features``."""
    arr = np.array(features, dtype=np.float64, copy=True)
    if arr.ndim == 1:
        arr = arr[None, :]
    arr.setflags(write=False)
    return VideoRecord(str(video_id), int(label), int(num_frames), arr)


def make_dataset(videos: Sequence[VideoRecord], feature_dim: int | None = None, k: int = 16) -> Dataset:
    videos = tuple(videos)
    if feature_dim is None:
        feature_dim = int(videos[0].features.shape[1]) if videos else 0
    return Dataset(videos, int(feature_dim), int(k))


@dataclass(frozen=True)
class Violation:
    video_id: str | None
    kind: str
    reason: str

    def __str__(self) -> str:
        where = self.video_id if self.video_id is not None else "<dataset>"
        return f"{where}: {self.kind}: {self.reason}"


def validate_dataset(d: Dataset) -> list[Violation]:
    """Return every invariant violation in ``d``; an empty list means well-formed."""
    out: list[Violation] = []
    if len(d.videos) == 0:
        out.append(Violation(None, "empty", "dataset has no videos"))
    if d.frames_per_fragment < 1:
        out.append(Violation(None, "bad-k", f"frames_per_fragment={d.frames_per_fragment} < 1"))
    if d.feature_dim < 1:
        out.append(Violation(None, "bad-dim", f"feature_dim={d.feature_dim} < 1"))

    seen: set[str] = set()
    for v in d.videos:
        vid = v.video_id
        if vid in seen:
            out.append(Violation(vid, "duplicate-id", "video_id appears more than once"))
        seen.add(vid)
        if v.video_label not in (NORMAL, ANOMALOUS):
            out.append(Violation(vid, "bad-label", f"label {v.video_label!r} not in {{0, 1}}"))
        if v.num_frames < 1:
            out.append(Violation(vid, "bad-frames", f"num_frames={v.num_frames} < 1"))

        x = v.features
        if x.ndim != 2 or x.shape[0] < 1:
            out.append(Violation(vid, "bad-shape", f"features must be a non-empty matrix, got shape {x.shape}"))
            continue
        if x.shape[1] != d.feature_dim:
            out.append(
                Violation(vid, "dimension-mismatch", f"feature dim {x.shape[1]} != dataset dim {d.feature_dim}")
            )
        if not np.all(np.isfinite(x)):
            out.append(Violation(vid, "non-finite", "features contain NaN or Inf"))
        if v.num_frames >= 1 and d.frames_per_fragment >= 1:
            expected = num_fragments(v.num_frames, d.frames_per_fragment)
            if x.shape[0] != expected:
                out.append(
                    Violation(
                        vid,
                        "row-count",
                        f"{x.shape[0]} rows but ceil({v.num_frames}/{d.frames_per_fragment})={expected}",
                    )
                )
    return out


def _tag_key(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


@dataclass(frozen=True)
class RngHandle:
    """Addressable random stream.

    Streams are Philox generators keyed by ``(seed, path)``; ``child`` extends
    the path with a ``(tag, index)`` pair so each consumer draws from its own
    stream regardless of call order elsewhere.
    """

    seed: int
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def child(self, tag: str, index: int = 0) -> "RngHandle":
        return RngHandle(self.seed, self.path + (_tag_key(tag), int(index)))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def as_rng(rng: "RngHandle | int | None") -> RngHandle:
    if isinstance(rng, RngHandle):
        return rng
    return RngHandle(0 if rng is None else int(rng))


def l2_normalize_rows(x: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(x * x, axis=1, keepdims=True))
    return np.divide(x, norms, out=np.zeros_like(x), where=norms > 0)


__all__ = [
    "ANOMALOUS",
    "NORMAL",
    "Dataset",
    "RngHandle",
    "VideoRecord",
    "Violation",
    "as_rng",
    "l2_normalize_rows",
    "make_dataset",
    "make_video",
    "num_fragments",
    "validate_dataset",
]
