"""Feature files, manifests, annotation files and synthetic datasets.

Feature file layout (little-endian)::

    offset  size  field
    0       4     magic b"SRFV"
    4       2     format version (1)
    6       2     flags, bit0 set => 64-bit values
    8       4     rows
    12      4     cols
    16      ...   rows*cols IEEE-754 values, row-major
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .core import (
    ANOMALOUS,
    NORMAL,
    Dataset,
    RngHandle,
    l2_normalize_rows,
    make_dataset,
    make_video,
    num_fragments,
    validate_dataset,
)

FEATURE_MAGIC = b"SRFV"
FEATURE_VERSION = 1
FLAG_WIDE = 0x1
_HEADER = struct.Struct("<4sHHII")
HEADER_SIZE = _HEADER.size  # 16

MANIFEST_TAG = "#srad-manifest"
MANIFEST_VERSION = "v1"


class IngestError(ValueError):
    """Base class for malformed on-disk data."""


class FeatureFormatError(IngestError):
    pass


class ManifestError(IngestError):
    pass


class ShapeError(IngestError):
    pass


# --------------------------------------------------------------------------
# feature files


def write_features(matrix, path, wide: bool | None = None) -> None:
    """Write a finite ``m x D`` matrix to ``path``.

    ``wide=None`` keeps float64 ndarrays at 64 bits (lossless) and stores
    everything else as float32.
    """
    if wide is None:
        wide = isinstance(matrix, np.ndarray) and matrix.dtype == np.float64
    dtype = np.dtype("<f8") if wide else np.dtype("<f4")
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-D, got shape {arr.shape}")
    rows, cols = arr.shape
    if rows < 1 or cols < 1:
        raise ShapeError(f"feature matrix must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise FeatureFormatError("refusing to write non-finite feature values")
    payload = np.ascontiguousarray(arr, dtype=dtype)
    header = _HEADER.pack(FEATURE_MAGIC, FEATURE_VERSION, FLAG_WIDE if wide else 0, rows, cols)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload.tobytes(order="C"))


def read_features(path, expected_rows: int | None = None, expected_cols: int | None = None) -> np.ndarray:
    """Read a feature file, returning an array in its stored precision."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER_SIZE:
        raise FeatureFormatError(f"{path}: file shorter than the {HEADER_SIZE}-byte header")
    magic, version, flags, rows, cols = _HEADER.unpack_from(raw, 0)
    if magic != FEATURE_MAGIC:
        raise FeatureFormatError(f"{path}: bad magic {magic!r}")
    if version != FEATURE_VERSION:
        raise FeatureFormatError(f"{path}: unsupported format version {version}")
    if expected_rows is not None and rows != expected_rows:
        raise ShapeError(f"{path}: header has {rows} rows, expected {expected_rows}")
    if expected_cols is not None and cols != expected_cols:
        raise ShapeError(f"{path}: header has {cols} cols, expected {expected_cols}")
    if rows < 1 or cols < 1:
        raise ShapeError(f"{path}: empty matrix {rows}x{cols}")
    dtype = np.dtype("<f8") if flags & FLAG_WIDE else np.dtype("<f4")
    n_bytes = rows * cols * dtype.itemsize
    payload = raw[HEADER_SIZE:]
    if len(payload) < n_bytes:
        raise FeatureFormatError(
            f"{path}: truncated payload, {len(payload) // dtype.itemsize} of {rows * cols} values present"
        )
    if len(payload) > n_bytes:
        raise FeatureFormatError(f"{path}: {len(payload) - n_bytes} trailing bytes after payload")
    arr = np.frombuffer(payload, dtype=dtype).reshape(rows, cols).astype(dtype.newbyteorder("="))
    if not np.all(np.isfinite(arr)):
        raise FeatureFormatError(f"{path}: payload contains non-finite values")
    return arr


# --------------------------------------------------------------------------
# manifests


@dataclass(frozen=True)
class ManifestEntry:
    video_id: str
    video_label: int
    num_frames: int
    feature_path: str


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    feature_dim: int
    frames_per_fragment: int
    root: Path = field(default=Path("."))


def parse_manifest(path) -> Manifest:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ManifestError(f"{path}: empty manifest")
    head = lines[0].split()
    if len(head) != 4 or head[0] != MANIFEST_TAG or head[1] != MANIFEST_VERSION:
        raise ManifestError(f"{path}: bad header line {lines[0]!r}")
    opts = {}
    for tok in head[2:]:
        key, sep, val = tok.partition("=")
        if not sep:
            raise ManifestError(f"{path}: bad header token {tok!r}")
        opts[key] = val
    try:
        dim, k = int(opts["dim"]), int(opts["k"])
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"{path}: header must carry integer dim= and k=") from exc
    if dim < 1 or k < 1:
        raise ManifestError(f"{path}: dim and k must be >= 1")

    entries = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise ManifestError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
        vid, label, frames, rel = parts
        if label not in ("0", "1"):
            raise ManifestError(f"{path}:{lineno}: label must be 0 or 1, got {label!r}")
        try:
            n_frames = int(frames)
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: num_frames {frames!r} is not an integer") from exc
        if n_frames < 1:
            raise ManifestError(f"{path}:{lineno}: num_frames must be >= 1")
        entries.append(ManifestEntry(vid, int(label), n_frames, rel))
    if not entries:
        raise ManifestError(f"{path}: manifest lists no videos")
    return Manifest(tuple(entries), dim, k, path.parent)


def write_manifest(manifest: Manifest, path) -> None:
    lines = [f"{MANIFEST_TAG} {MANIFEST_VERSION} dim={manifest.feature_dim} k={manifest.frames_per_fragment}"]
    for e in manifest.entries:
        lines.append(f"{e.video_id}\t{e.video_label}\t{e.num_frames}\t{e.feature_path}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_manifest(path, l2_normalize: bool = False) -> Dataset:
    """Load every feature file named by the manifest at ``path``."""
    man = parse_manifest(path)
    videos = []
    for e in man.entries:
        fpath = man.root / e.feature_path
        if not fpath.is_file():
            raise FileNotFoundError(f"feature file not found: {fpath}")
        rows = num_fragments(e.num_frames, man.frames_per_fragment)
        x = read_features(fpath, expected_cols=man.feature_dim)
        if x.shape[0] != rows:
            raise ShapeError(
                f"{fpath}: {x.shape[0]} rows but ceil({e.num_frames}/{man.frames_per_fragment})={rows}"
            )
        x = x.astype(np.float64)
        if l2_normalize:
            x = l2_normalize_rows(x)
        videos.append(make_video(e.video_id, e.video_label, e.num_frames, x))
    ds = make_dataset(videos, man.feature_dim, man.frames_per_fragment)
    problems = validate_dataset(ds)
    if problems:
        raise ManifestError("; ".join(str(p) for p in problems))
    return ds


def save_dataset(ds: Dataset, directory, feature_subdir: str = "features", name: str = "manifest.tsv") -> Path:
    """Write ``ds`` as a manifest plus one feature file per video (64-bit payloads)."""
    directory = Path(directory)
    (directory / feature_subdir).mkdir(parents=True, exist_ok=True)
    entries = []
    for v in ds.videos:
        rel = f"{feature_subdir}/{v.video_id}.srfv"
        write_features(np.asarray(v.features, dtype=np.float64), directory / rel, wide=True)
        entries.append(ManifestEntry(v.video_id, v.video_label, v.num_frames, rel))
    out = directory / name
    write_manifest(Manifest(tuple(entries), ds.feature_dim, ds.frames_per_fragment), out)
    return out


# --------------------------------------------------------------------------
# frame-level annotation files: video_id<TAB>start<TAB>end, end exclusive


def read_annotations(path) -> dict[str, list[tuple[int, int]]]:
    out: dict[str, list[tuple[int, int]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ManifestError(f"{path}:{lineno}: expected video_id, start, end")
            try:
                start, end = int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ManifestError(f"{path}:{lineno}: non-integer interval") from exc
            if start < 0 or end <= start:
                raise ManifestError(f"{path}:{lineno}: empty or negative interval [{start}, {end})")
            out.setdefault(parts[0], []).append((start, end))
    return out


def write_annotations(intervals: Mapping[str, list[tuple[int, int]]], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# video_id\tstart_frame\tend_frame (0-indexed, end-exclusive)\n")
        for vid, spans in intervals.items():
            for s, e in spans:
                fh.write(f"{vid}\t{s}\t{e}\n")


def intervals_to_frames(spans, num_frames: int) -> np.ndarray:
    gt = np.zeros(num_frames, dtype=np.int8)
    for s, e in spans:
        if s >= num_frames:
            raise ShapeError(f"interval [{s}, {e}) starts beyond {num_frames} frames")
        gt[s : min(e, num_frames)] = 1
    return gt


def frames_to_intervals(gt) -> list[tuple[int, int]]:
    gt = np.asarray(gt, dtype=np.int8)
    padded = np.concatenate([[0], gt, [0]])
    edges = np.flatnonzero(np.diff(padded))
    return [(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


def frame_truth(ds: Dataset, annotations: Mapping[str, list[tuple[int, int]]]) -> dict[str, np.ndarray]:
    """Per-frame labels for every video; unannotated videos are all-normal."""
    return {v.video_id: intervals_to_frames(annotations.get(v.video_id, ()), v.num_frames) for v in ds.videos}


# --------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SyntheticConfig:
    """Gaussian stand-in for extracted clip features.

    When the means are not given, normal fragments are centred at the origin
    and anomalous ones are shifted by ``mean_separation * feature_stddev`` on
    every coordinate.
    """

    num_normal_videos: int = 40
    num_anomalous_videos: int = 40
    num_test_normal_videos: int = 10
    num_test_anomalous_videos: int = 10
    fragments_per_video_range: tuple[int, int] = (8, 16)
    feature_dim: int = 16
    normal_mean: tuple[float, ...] | None = None
    anomalous_mean: tuple[float, ...] | None = None
    mean_separation: float = 2.0
    feature_stddev: float = 1.0
    anomaly_portion_range: tuple[float, float] = (0.2, 0.4)
    frames_per_fragment: int = 16
    seed: int = 0

    def means(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.feature_dim
        mu_n = np.zeros(d) if self.normal_mean is None else np.asarray(self.normal_mean, dtype=np.float64)
        if self.anomalous_mean is None:
            mu_a = mu_n + self.mean_separation * self.feature_stddev
        else:
            mu_a = np.asarray(self.anomalous_mean, dtype=np.float64)
        return mu_n, mu_a

    def problems(self) -> list[str]:
        out = []
        if min(self.num_normal_videos, self.num_anomalous_videos) < 0:
            out.append("video counts must be non-negative")
        if min(self.num_test_normal_videos, self.num_test_anomalous_videos) < 0:
            out.append("test video counts must be non-negative")
        if self.num_normal_videos + self.num_anomalous_videos < 1:
            out.append("training split needs at least one video")
        lo, hi = self.fragments_per_video_range
        if lo < 1 or hi < lo:
            out.append(f"bad fragments_per_video_range {self.fragments_per_video_range}")
        if lo < 2 and (self.num_anomalous_videos or self.num_test_anomalous_videos):
            out.append("anomalous videos need at least 2 fragments")
        plo, phi = self.anomaly_portion_range
        if not (0 < plo <= phi < 1):
            out.append(f"anomaly_portion_range {self.anomaly_portion_range} must satisfy 0 < low <= high < 1")
        if self.feature_dim < 1:
            out.append("feature_dim must be >= 1")
        if not self.feature_stddev > 0:
            out.append("feature_stddev must be positive")
        if self.frames_per_fragment < 1:
            out.append("frames_per_fragment must be >= 1")
        for name, mu in (("normal_mean", self.normal_mean), ("anomalous_mean", self.anomalous_mean)):
            if mu is not None and len(mu) != self.feature_dim:
                out.append(f"{name} has length {len(mu)}, expected {self.feature_dim}")
        return out


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def _synth_video(cfg: SyntheticConfig, rng: np.random.Generator, vid: str, anomalous: bool):
    lo, hi = cfg.fragments_per_video_range
    k = cfg.frames_per_fragment
    m = int(rng.integers(lo, hi + 1))
    num_frames = (m - 1) * k + int(rng.integers(1, k + 1))
    truth = np.zeros(m, dtype=np.int8)
    if anomalous:
        portion = float(rng.uniform(*cfg.anomaly_portion_range))
        run = min(_round_half_up(portion * m), m)
        start = int(rng.integers(0, m - run + 1))
        truth[start : start + run] = 1
    mu_n, mu_a = cfg.means()
    centres = np.where(truth[:, None] == 1, mu_a[None, :], mu_n[None, :])
    x = centres + cfg.feature_stddev * rng.standard_normal((m, cfg.feature_dim))
    label = ANOMALOUS if anomalous else NORMAL
    return make_video(vid, label, num_frames, x), truth


def generate_synthetic(cfg: SyntheticConfig) -> tuple[Dataset, Dataset, dict[str, np.ndarray]]:
    """Return ``(train, test, fragment_truth)``; truth is keyed by video id."""
    problems = cfg.problems()
    if problems:
        raise ValueError("invalid SyntheticConfig: " + "; ".join(problems))
    root = RngHandle(int(cfg.seed)).child("synthetic")
    truth: dict[str, np.ndarray] = {}
    splits = []
    for split, n_norm, n_anom in (
        ("train", cfg.num_normal_videos, cfg.num_anomalous_videos),
        ("test", cfg.num_test_normal_videos, cfg.num_test_anomalous_videos),
    ):
        videos = []
        for kind, count in (("normal", n_norm), ("anomalous", n_anom)):
            for i in range(count):
                vid = f"{split}-{kind}-{i:04d}"
                gen = root.child(f"{split}/{kind}", i).generator()
                v, t = _synth_video(cfg, gen, vid, kind == "anomalous")
                videos.append(v)
                truth[vid] = t
        splits.append(make_dataset(videos, cfg.feature_dim, cfg.frames_per_fragment))
    return splits[0], splits[1], truth


def truth_intervals(ds: Dataset, fragment_truth: Mapping[str, np.ndarray]) -> dict[str, list[tuple[int, int]]]:
    """Frame intervals covering each video's anomalous fragments."""
    from .evaluation import expand_to_frames

    out = {}
    for v in ds.videos:
        t = fragment_truth.get(v.video_id)
        if t is None or not np.any(t):
            continue
        frames = expand_to_frames(np.asarray(t), ds.frames_per_fragment, v.num_frames)
        out[v.video_id] = frames_to_intervals(frames)
    return out
