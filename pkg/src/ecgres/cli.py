"""Command-line pipeline driver: ingest, preprocess, train, evaluate, predict.

Exit codes: 0 success, 2 input/data errors, 3 pipeline errors, 4 numeric
training failure, 5 checkpoint/dataset compatibility errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import denoise as dn
from . import metrics as me
from . import model as md
from . import segment as sg
from . import wfdb_io as wf
from .errors import (
    CheckpointError,
    EcgresError,
    NumericError,
    ParseError,
    SelectionError,
    ShapeError,
    SizeError,
)

EXIT_INPUT = 2
EXIT_PIPELINE = 3
EXIT_NUMERIC = 4
EXIT_COMPAT = 5

DATA_DIR_ENV = "ECGRES_DATA_DIR"


@dataclass
class RunConfig:
    data_dir: str = "."
    output_dir: str = "out"
    seed: int = 0
    levels: int = dn.DEFAULT_LEVELS
    window: int = dn.DEFAULT_BASELINE_WINDOW
    threshold_mode: str = "soft"
    per_set_size: int | None = None
    epochs: int = 300
    batch_size: int = 32
    learning_rate: float = 0.001
    optimizer: str = "adam"
    eval_each_epoch: bool = False
    limit: int | None = None

    @classmethod
    def load(cls, args) -> "RunConfig":
        cfg = cls()
        if getattr(args, "config", None):
            text = Path(args.config).read_text()
            known = {f.name for f in fields(cls)}
            data = json.loads(text)
            unknown = set(data) - known
            if unknown:
                raise ParseError(f"unknown config keys: {sorted(unknown)}")
            cfg = replace(cfg, **data)
        env_dir = os.environ.get(DATA_DIR_ENV)
        if env_dir:
            cfg = replace(cfg, data_dir=env_dir)
        for f in fields(cls):
            val = getattr(args, f.name, None)
            if val is not None:
                cfg = replace(cfg, **{f.name: val})
        return cfg


def _load_selected(cfg: RunConfig):
    names = wf.discover_records(cfg.data_dir)
    if not names:
        raise ParseError(f"no .hea files found in {cfg.data_dir}")
    records = [wf.load_record(cfg.data_dir, n) for n in names]
    return names, wf.select_dataset(records)


def cmd_ingest(cfg: RunConfig) -> int:
    names, index = _load_selected(cfg)
    excluded = sorted(set(names) & wf.EXCLUDED_RECORDS)
    selected = sorted({ref.record.name for ref in index})
    counts = wf.class_counts(index)

    print(f"records found:    {len(names)}")
    print(f"records selected: {len(selected)}")
    print(f"records excluded: {len(excluded)} ({', '.join(excluded) or 'none'})")
    for name, n in counts.items():
        print(f"  {name:5s} {n}")
    print(f"total beats: {len(index)}")

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_doc = [
        {
            "record": ref.record.name,
            "channel": ref.channel,
            "sample_index": ref.annotation.sample_index,
            "code": ref.annotation.code,
        }
        for ref in index
    ]
    (out_dir / "beat_index.json").write_text(json.dumps(index_doc) + "\n")
    print(f"wrote {out_dir / 'beat_index.json'}")
    return 0


def cmd_preprocess(cfg: RunConfig) -> int:
    _, index = _load_selected(cfg)
    policy = dn.ThresholdPolicy(mode=cfg.threshold_mode)
    segments, skips = sg.segment_record_beats(
        index, levels=cfg.levels, window=cfg.window, policy=policy
    )
    split = sg.build_split(segments, cfg.seed, cfg.per_set_size)

    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sg.save_segments(split.train, out_dir / "train.ecgb")
    sg.save_segments(split.test, out_dir / "test.ecgb")

    print(f"segments: {len(segments)} (boundary skips: {skips})")
    for part, segs in (("train", split.train), ("test", split.test)):
        hist = {c.name: 0 for c in wf.BeatClass}
        for s in segs:
            hist[s.label.name] += 1
        pretty = "  ".join(f"{k}={v}" for k, v in hist.items())
        print(f"{part}: {len(segs)} beats  {pretty}")
    print(f"wrote {out_dir / 'train.ecgb'} and {out_dir / 'test.ecgb'}")
    return 0


def _load_split(cfg: RunConfig) -> sg.DatasetSplit:
    out_dir = Path(cfg.output_dir)
    train_path, test_path = out_dir / "train.ecgb", out_dir / "test.ecgb"
    for p in (train_path, test_path):
        if not p.exists():
            raise SizeError(f"dataset file {p} not found; run preprocess first")
    split = sg.DatasetSplit(
        sg.load_segments(train_path), sg.load_segments(test_path), cfg.seed
    )
    if cfg.limit is not None:
        rng = np.random.default_rng(cfg.seed)
        split.train = [split.train[i] for i in rng.permutation(len(split.train))[: cfg.limit]]
        split.test = [split.test[i] for i in rng.permutation(len(split.test))[: cfg.limit]]
    return split


def cmd_train(cfg: RunConfig) -> int:
    split = _load_split(cfg)
    model = md.build_model(md.ModelConfig(seed=cfg.seed))
    tc = md.TrainConfig(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        shuffle_seed=cfg.seed,
        optimizer=cfg.optimizer,
        eval_each_epoch=cfg.eval_each_epoch,
    )
    log = md.train(model, split, tc, verbose=True)

    out_dir = Path(cfg.output_dir)
    md.save_checkpoint(model, out_dir / "checkpoint.ecgm")
    (out_dir / "curves.csv").write_text(log.to_csv())

    x_test, y_test = sg.segments_to_arrays(split.test)
    pred, _ = md.predict_batch(model, x_test)
    report = me.compute_metrics(me.confusion(y_test, pred))
    print(f"final test accuracy:    {report.overall_accuracy:.4f}")
    print(f"macro sensitivity:      {report.macro_sensitivity:.4f}")
    print(f"macro specificity:      {report.macro_specificity:.4f}")
    print(f"wrote {out_dir / 'checkpoint.ecgm'} and {out_dir / 'curves.csv'}")
    return 0


def cmd_evaluate(cfg: RunConfig, checkpoint: str, dataset: str) -> int:
    model = md.load_checkpoint(checkpoint)
    segments = sg.load_segments(dataset)
    if cfg.limit is not None:
        rng = np.random.default_rng(cfg.seed)
        segments = [segments[i] for i in rng.permutation(len(segments))[: cfg.limit]]
    x, y = sg.segments_to_arrays(segments)
    if x.shape[2] != model.config.input_length:
        raise ShapeError(
            f"dataset segments of length {x.shape[2]} do not fit model input "
            f"{model.config.input_length}"
        )
    pred, _ = md.predict_batch(model, x)
    cm = me.confusion(y, pred)
    report = me.compute_metrics(cm)
    me.emit_report(report, cm, None, cfg.output_dir)
    print(f"accuracy:    {report.overall_accuracy:.4f}")
    print(f"sensitivity: {report.macro_sensitivity:.4f}")
    print(f"specificity: {report.macro_specificity:.4f}")
    print(f"wrote reports to {cfg.output_dir}")
    return 0


def cmd_predict(cfg: RunConfig, checkpoint: str, record: str, annotation_index: int) -> int:
    model = md.load_checkpoint(checkpoint)
    rec = wf.load_record(cfg.data_dir, record)
    index = wf.select_dataset([rec])
    if not (0 <= annotation_index < len(index)):
        raise ParseError(
            f"annotation index {annotation_index} out of range "
            f"(record {record} has {len(index)} eligible beats)"
        )
    ref = index[annotation_index]
    channel = dn.denoise(
        rec.channels[ref.channel],
        levels=cfg.levels,
        window=cfg.window,
        policy=dn.ThresholdPolicy(mode=cfg.threshold_mode),
    )
    win = sg.extract_window(channel, ref.annotation.sample_index)
    seg = sg.rescale(sg.reduce_dimension(win)).astype(np.float32)
    cls, probs = md.predict(model, seg)
    print(f"record {record}, beat {annotation_index} "
          f"(sample {ref.annotation.sample_index}, annotated {ref.annotation.code})")
    print(f"predicted: {cls.name}")
    for c in wf.BeatClass:
        print(f"  {c.name:5s} {probs[int(c)]:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ecgres",
                                     description="MIT-BIH heartbeat classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (RunConfig fields)")
        p.add_argument("--data-dir", dest="data_dir", help=f"WFDB directory (or ${DATA_DIR_ENV})")
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("ingest", help="parse records and build the beat index")
    add_common(p)

    p = sub.add_parser("preprocess", help="denoise, segment, and split the dataset")
    add_common(p)
    p.add_argument("--levels", type=int, help="wavelet decomposition levels")
    p.add_argument("--window", type=int, help="baseline moving-average window (odd)")
    p.add_argument("--threshold-mode", dest="threshold_mode", choices=["soft", "hard"])
    p.add_argument("--per-set-size", dest="per_set_size", type=int)

    p = sub.add_parser("train", help="train the CNN on a preprocessed dataset")
    add_common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", dest="learning_rate", type=float)
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--eval-each-epoch", dest="eval_each_epoch", action="store_const", const=True)
    p.add_argument("--limit", type=int, help="subsample each set for smoke runs")

    p = sub.add_parser("evaluate", help="evaluate a checkpoint on a dataset file")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--limit", type=int)

    p = sub.add_parser("predict", help="classify one annotated beat from a record")
    add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--record", required=True)
    p.add_argument("--annotation-index", dest="annotation_index", type=int, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "preprocess":
            return cmd_preprocess(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint, args.dataset)
        if args.command == "predict":
            return cmd_predict(cfg, args.checkpoint, args.record, args.annotation_index)
        raise AssertionError(args.command)
    except (CheckpointError, ShapeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_COMPAT
    except NumericError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, SelectionError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except EcgresError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
