"""Command-line interface: ``srad synth|train|eval|score``.

Exit codes: 0 success, 1 usage, 2 data validation, 3 IO.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import BACKEND
from .core import l2_normalize_rows, make_video, num_fragments
from .evaluation import DegenerateLabels, FrameScores, evaluate, expand_to_frames, write_timeline
from .ingest import (
    IngestError,
    SyntheticConfig,
    frame_truth,
    generate_synthetic,
    intervals_to_frames,
    load_manifest,
    read_annotations,
    read_features,
    save_dataset,
    truth_intervals,
    write_annotations,
)
from .network import CheckpointError, ShapeMismatch, load_checkpoint, predict, save_checkpoint
from .objective import Hyperparameters
from .train import ABLATIONS, TrainConfig, fit

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("srad")

_ABLATION_FLAGS = dict(zip(("full", "no-lc", "no-yp"), ABLATIONS))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number(kind, lo=None, hi=None, lo_open=False, hi_open=False):
    def parse(text):
        try:
            val = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid {kind.__name__} value: {text!r}")
        if isinstance(val, float) and not np.isfinite(val):
            raise argparse.ArgumentTypeError(f"value must be finite: {text!r}")
        if lo is not None and (val <= lo if lo_open else val < lo):
            raise argparse.ArgumentTypeError(f"{text} must be {'>' if lo_open else '>='} {lo}")
        if hi is not None and (val >= hi if hi_open else val > hi):
            raise argparse.ArgumentTypeError(f"{text} must be {'<' if hi_open else '<='} {hi}")
        return val

    return parse


nonneg_int = _number(int, 0)
pos_int = _number(int, 1)
seed_int = _number(int, 0, 2**64, hi_open=True)
pos_float = _number(float, 0.0, lo_open=True)
nonneg_float = _number(float, 0.0)
dropout_float = _number(float, 0.0, 1.0, hi_open=True)
fraction = _number(float, 0.0, 1.0, lo_open=True, hi_open=True)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="srad", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--version", action="version", version=f"srad {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="write a synthetic train/test dataset")
    s.add_argument("--out", required=True, type=Path)
    s.add_argument("--seed", type=seed_int, default=0)
    s.add_argument("--normal-videos", type=nonneg_int, default=40)
    s.add_argument("--anomalous-videos", type=nonneg_int, default=40)
    s.add_argument("--test-normal-videos", type=nonneg_int, default=10)
    s.add_argument("--test-anomalous-videos", type=nonneg_int, default=10)
    s.add_argument("--fragments", type=pos_int, help="fixed fragment count (overrides min/max)")
    s.add_argument("--min-fragments", type=pos_int, default=8)
    s.add_argument("--max-fragments", type=pos_int, default=16)
    s.add_argument("--anomaly-portion", type=fraction, help="fixed anomalous portion (overrides low/high)")
    s.add_argument("--portion-low", type=fraction, default=0.2)
    s.add_argument("--portion-high", type=fraction, default=0.4)
    s.add_argument("--dim", type=pos_int, default=16)
    s.add_argument("--separation", type=nonneg_float, default=2.0,
                   help="per-coordinate mean shift of anomalous fragments, in stddevs")
    s.add_argument("--stddev", type=pos_float, default=1.0)
    s.add_argument("--k", type=pos_int, default=16, help="frames per fragment")

    t = sub.add_parser(
        "train",
        help="train on a manifest",
        description="Defaults for --lr, --lambda, --alpha follow the published protocol. "
        "Assumed (unpublished) defaults: --hidden 512, --dropout 0.6, --epochs 100, "
        "--restarts 10, --d-floor 1e-3, --warmup-epochs 2.",
    )
    t.add_argument("--manifest", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--lr", type=pos_float, default=5e-5)
    t.add_argument("--lambda", dest="lambda_", type=nonneg_float, default=0.05)
    t.add_argument("--alpha", type=pos_float, default=1.0)
    t.add_argument("--k", type=pos_int, default=None,
                   help="frames per fragment; must match the manifest (default: take it from the manifest)")
    t.add_argument("--hidden", type=pos_int, default=512)
    t.add_argument("--dropout", type=dropout_float, default=0.6)
    t.add_argument("--epochs", type=nonneg_int, default=100)
    t.add_argument("--warmup-epochs", type=nonneg_int, default=2,
                   help="epochs trained on video-level labels before pseudo-labels switch on")
    t.add_argument("--restarts", type=pos_int, default=10)
    t.add_argument("--max-iters", type=pos_int, default=100)
    t.add_argument("--tol", type=nonneg_float, default=1e-6)
    t.add_argument("--d-floor", type=pos_float, default=1e-3)
    t.add_argument("--seed", type=seed_int, default=0)
    t.add_argument("--ablation", choices=sorted(_ABLATION_FLAGS), default="full")
    t.add_argument("--checkpoint-every", type=nonneg_int, default=0)
    t.add_argument("--l2-normalize", action="store_true")

    e = sub.add_parser("eval", help="pooled frame-level AUC on a test manifest")
    e.add_argument("--checkpoint", required=True, type=Path)
    e.add_argument("--manifest", required=True, type=Path)
    e.add_argument("--ground-truth", required=True, type=Path)
    e.add_argument("--out", type=Path, help="directory for per-video timeline CSVs")
    e.add_argument("--l2-normalize", action="store_true")

    c = sub.add_parser("score", help="score timeline for a single video")
    c.add_argument("--checkpoint", required=True, type=Path)
    src = c.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", type=Path)
    src.add_argument("--features", type=Path)
    c.add_argument("--video-id", help="video to score (with --manifest)")
    c.add_argument("--num-frames", type=pos_int, help="frame count (with --features)")
    c.add_argument("--k", type=pos_int, default=16, help="frames per fragment (with --features)")
    c.add_argument("--ground-truth", type=Path)
    c.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    c.add_argument("--l2-normalize", action="store_true")
    return p


def _write_run_record(out: Path, command: str, args: argparse.Namespace, extra: dict | None = None) -> None:
    flags = {}
    for key, val in sorted(vars(args).items()):
        if key in ("out", "verbose", "command"):
            continue
        flags[key] = str(val) if isinstance(val, Path) else val
    rec = {"command": command, "version": __version__, "kmeans_backend": BACKEND, "flags": flags}
    if extra:
        rec.update(extra)
    (out / "run.json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_synth(args) -> int:
    lo, hi = (args.fragments, args.fragments) if args.fragments else (args.min_fragments, args.max_fragments)
    plo, phi = (
        (args.anomaly_portion, args.anomaly_portion) if args.anomaly_portion else (args.portion_low, args.portion_high)
    )
    cfg = SyntheticConfig(
        num_normal_videos=args.normal_videos,
        num_anomalous_videos=args.anomalous_videos,
        num_test_normal_videos=args.test_normal_videos,
        num_test_anomalous_videos=args.test_anomalous_videos,
        fragments_per_video_range=(lo, hi),
        feature_dim=args.dim,
        mean_separation=args.separation,
        feature_stddev=args.stddev,
        anomaly_portion_range=(plo, phi),
        frames_per_fragment=args.k,
        seed=args.seed,
    )
    problems = cfg.problems()
    if problems:
        raise UsageError("; ".join(problems))
    train, test, truth = generate_synthetic(cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    for name, ds in (("train", train), ("test", test)):
        if not len(ds):
            continue
        d = args.out / name
        save_dataset(ds, d)
        write_annotations(truth_intervals(ds, truth), d / "ground_truth.tsv")
    _write_run_record(args.out, "synth", args)
    print(f"wrote {len(train)} train and {len(test)} test videos to {args.out}")
    return EXIT_OK


def _hyper(args) -> Hyperparameters:
    return Hyperparameters(
        lambda_=args.lambda_,
        alpha=args.alpha,
        d_floor=args.d_floor,
        learning_rate=args.lr,
        dropout_rate=args.dropout,
        hidden_width=args.hidden,
        kmeans_restarts=args.restarts,
        kmeans_max_iters=args.max_iters,
        kmeans_tol=args.tol,
        epochs=args.epochs,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    ds = load_manifest(args.manifest, l2_normalize=args.l2_normalize)
    if args.k is not None and args.k != ds.frames_per_fragment:
        raise IngestError(f"--k {args.k} does not match manifest k={ds.frames_per_fragment}")
    args.out.mkdir(parents=True, exist_ok=True)
    ck_dir = args.out / "checkpoints"
    if args.checkpoint_every:
        ck_dir.mkdir(exist_ok=True)
    cfg = TrainConfig(
        hyper=_hyper(args),
        ablation=_ABLATION_FLAGS[args.ablation],
        warmup_epochs=args.warmup_epochs,
        checkpoint_every=args.checkpoint_every,
        checkpoint_dir=str(ck_dir) if args.checkpoint_every else None,
    )
    problems = cfg.problems()
    if problems:
        raise UsageError("; ".join(problems))
    model, adam, history = fit(ds, cfg)
    save_checkpoint(args.out / "model.srck", model, adam)
    history.to_csv(args.out / "history.csv")
    _write_run_record(args.out, "train", args, {"videos": len(ds), "steps": len(history)})
    print(f"trained {len(history)} steps; wrote {args.out / 'model.srck'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    ds = load_manifest(args.manifest, l2_normalize=args.l2_normalize)
    truth = frame_truth(ds, read_annotations(args.ground_truth))
    auc, per_video = evaluate(model, ds, truth)
    if args.out is not None:
        tdir = args.out / "timelines"
        tdir.mkdir(parents=True, exist_ok=True)
        for fs in per_video:
            write_timeline(fs, tdir / f"{fs.video_id}.csv")
        _write_run_record(args.out, "eval", args, {"auc": auc})
    print(f"AUC={auc:.4f}")
    return EXIT_OK


def cmd_score(args) -> int:
    model, _ = load_checkpoint(args.checkpoint)
    if args.manifest is not None:
        if not args.video_id:
            raise UsageError("--video-id is required with --manifest")
        ds = load_manifest(args.manifest, l2_normalize=args.l2_normalize)
        videos = ds.by_id()
        if args.video_id not in videos:
            raise IngestError(f"video {args.video_id!r} not in {args.manifest}")
        video, k = videos[args.video_id], ds.frames_per_fragment
    else:
        if args.num_frames is None:
            raise UsageError("--num-frames is required with --features")
        k = args.k
        x = read_features(args.features, expected_rows=num_fragments(args.num_frames, k)).astype(np.float64)
        if args.l2_normalize:
            x = l2_normalize_rows(x)
        video = make_video(args.features.stem if args.video_id is None else args.video_id, 0, args.num_frames, x)
    gt = None
    if args.ground_truth is not None:
        spans = read_annotations(args.ground_truth).get(video.video_id, [])
        gt = intervals_to_frames(spans, video.num_frames)
    frames = expand_to_frames(predict(model, video.features), k, video.num_frames)
    fs = FrameScores(video.video_id, frames, gt)
    if args.out is not None:
        write_timeline(fs, args.out)
    else:
        sys.stdout.write("frame_index,score,ground_truth\n")
        for i, s in enumerate(frames):
            sys.stdout.write(f"{i},{float(s)!r},{'' if gt is None else int(gt[i])}\n")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "train": cmd_train, "eval": cmd_eval, "score": cmd_score}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"srad {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, CheckpointError, ShapeMismatch, DegenerateLabels, KeyError, ValueError) as exc:
        print(f"srad {args.command}: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"srad {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
