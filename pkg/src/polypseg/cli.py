"""Command-line entry points: train, eval, predict, prepare-edges.

Every command writes its artifacts plus a plain-text run manifest into its
output directory, so a run is reproducible from that directory alone.
Exit codes: 0 success, 2 usage/input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime
import os
import subprocess
import sys

import cv2
import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, config_hash, dump_config, load_config
from .data import DatasetError, load_dataset, make_edge_ground_truth
from .metrics import evaluate, format_summary, write_report
from .trainer import TrainingDiverged, predict, restore_model, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

_CONFIG_FIELDS = dataclasses.fields(TrainConfig)


def _version_string():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except OSError:
        pass
    return f"polypseg-{__version__}"


def _add_config_flags(parser):
    group = parser.add_argument_group("config overrides")
    for f in _CONFIG_FIELDS:
        flag = "--" + f.name.replace("_", "-")
        if f.type == "bool" or isinstance(f.default, bool):
            group.add_argument(
                flag, type=lambda s: s.lower() in ("1", "true", "yes"),
                default=None, metavar="BOOL",
                help=f"{f.name} (default: {f.default})",
            )
        elif f.name in ("scales", "cfp_dilations"):
            group.add_argument(
                flag, type=lambda s: tuple(float(x) if "." in x else int(x) for x in s.split(",")),
                default=None, metavar="CSV",
                help=f"{f.name}, comma separated (default: {f.default})",
            )
        else:
            group.add_argument(
                flag, type=type(f.default) if f.default is not None else str,
                default=None, help=f"{f.name} (default: {f.default!r})",
            )


def _overrides_from_args(args):
    return {f.name: getattr(args, f.name) for f in _CONFIG_FIELDS if hasattr(args, f.name)}


def _write_manifest(out_dir, command, config_path, resolved_hash, started):
    path = os.path.join(out_dir, "manifest.txt")
    with open(path, "w") as fh:
        fh.write(f"command: {command}\n")
        fh.write(f"config: {config_path or '<flags only>'}\n")
        fh.write(f"config_hash: {resolved_hash}\n")
        fh.write(f"out_dir: {os.path.abspath(out_dir)}\n")
        fh.write(f"started: {started.isoformat()}\n")
        fh.write(f"finished: {datetime.datetime.now().isoformat()}\n")
        fh.write(f"version: {_version_string()}\n")
    return path


def _write_loss_log(path, history):
    if not history:
        return
    fieldnames = list(history[0])
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in history:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def cmd_train(args):
    started = datetime.datetime.now()
    config = load_config(args.config, _overrides_from_args(args)).validate()
    if not config.data_root:
        raise DatasetError("data_root is required (flag --data-root or config key)")
    split = load_dataset(config.data_root, resize_to=(config.base_size, config.base_size))
    os.makedirs(args.out_dir, exist_ok=True)
    ckpt, history = train(config, split)
    save_checkpoint(ckpt, os.path.join(args.out_dir, "checkpoint.zip"))
    _write_loss_log(os.path.join(args.out_dir, "loss_log.csv"), history)
    with open(os.path.join(args.out_dir, "config.yaml"), "w") as fh:
        fh.write(dump_config(config))
    _write_manifest(args.out_dir, "train", args.config, config_hash(config), started)
    print(f"trained {ckpt.step} steps -> {args.out_dir}")
    return EXIT_OK


def cmd_eval(args):
    started = datetime.datetime.now()
    ckpt = load_checkpoint(args.checkpoint)
    model, config = restore_model(ckpt)
    threshold = args.threshold if args.threshold is not None else config.threshold
    split = load_dataset(
        args.data_root, resize_to=(config.base_size, config.base_size), name=args.split_name
    )
    os.makedirs(args.out_dir, exist_ok=True)
    report = evaluate(model, split, threshold=threshold)
    write_report(report, os.path.join(args.out_dir, "metrics.csv"))
    summary = format_summary(report)
    with open(os.path.join(args.out_dir, "summary.txt"), "w") as fh:
        fh.write(summary + "\n")
    _write_manifest(args.out_dir, "eval", None, config_hash(config), started)
    print(summary)
    return EXIT_OK


def cmd_predict(args):
    started = datetime.datetime.now()
    ckpt = load_checkpoint(args.checkpoint)
    model, config = restore_model(ckpt)
    threshold = args.threshold if args.threshold is not None else config.threshold
    raw = cv2.imread(args.image, cv2.IMREAD_COLOR)
    if raw is None:
        raise DatasetError(f"unreadable image: {args.image}")
    image = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0
    prob, mask, overlay = predict(model, image, threshold=threshold)
    os.makedirs(args.out_dir, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.image))[0]
    cv2.imwrite(os.path.join(args.out_dir, f"{stem}_prob.png"), (prob * 255).astype(np.uint8))
    cv2.imwrite(os.path.join(args.out_dir, f"{stem}_mask.png"), mask * 255)
    cv2.imwrite(
        os.path.join(args.out_dir, f"{stem}_overlay.png"),
        cv2.cvtColor(overlay, cv2.COLOR_RGB2BGR),
    )
    _write_manifest(args.out_dir, "predict", None, config_hash(config), started)
    print(f"wrote prediction artifacts for '{stem}' -> {args.out_dir}")
    return EXIT_OK


def cmd_prepare_edges(args):
    started = datetime.datetime.now()
    masks_dir = os.path.join(args.data_root, "masks")
    if not os.path.isdir(masks_dir):
        raise DatasetError(f"no masks/ directory under {args.data_root}")
    out_dir = args.out_dir or os.path.join(args.data_root, "edges")
    os.makedirs(out_dir, exist_ok=True)
    count = 0
    for fname in sorted(os.listdir(masks_dir)):
        if not fname.endswith(".png"):
            continue
        raw = cv2.imread(os.path.join(masks_dir, fname), cv2.IMREAD_GRAYSCALE)
        if raw is None:
            raise DatasetError(f"unreadable mask: {fname}")
        mask = (raw.astype(np.float32) / max(raw.max(), 1) > 0.5).astype(np.uint8)
        cv2.imwrite(os.path.join(out_dir, fname), make_edge_ground_truth(mask) * 255)
        count += 1
    _write_manifest(out_dir, "prepare-edges", None, "-", started)
    print(f"wrote {count} edge maps -> {out_dir}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polypseg", description="Edge-guided polyp segmentation tooling"
    )
    parser.add_argument("--version", action="version", version=_version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model and write a checkpoint")
    p_train.add_argument("--config", default=None, help="YAML config file")
    p_train.add_argument("--out-dir", required=True)
    _add_config_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--data-root", required=True)
    p_eval.add_argument("--out-dir", required=True)
    p_eval.add_argument("--threshold", type=float, default=None,
                        help="binarisation threshold (default: from checkpoint config)")
    p_eval.add_argument("--split-name", default=None)
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="segment a single image")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("--image", required=True)
    p_pred.add_argument("--out-dir", required=True)
    p_pred.add_argument("--threshold", type=float, default=None,
                        help="binarisation threshold (default: from checkpoint config)")
    p_pred.set_defaults(func=cmd_predict)

    p_edges = sub.add_parser(
        "prepare-edges", help="write derived edge maps next to the masks for inspection"
    )
    p_edges.add_argument("--data-root", required=True)
    p_edges.add_argument("--out-dir", default=None, help="default: <data-root>/edges")
    p_edges.set_defaults(func=cmd_prepare_edges)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDiverged as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DatasetError, ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
