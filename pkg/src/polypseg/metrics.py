"""Per-image Dice, IoU and MAE, plus split-level evaluation and reporting."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import torch


def _binary_pair(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    return pred.astype(bool), gt.astype(bool)


def dice(pred_bin, gt):
    """2|P & G| / (|P| + |G|); 1.0 when both are empty."""
    p, g = _binary_pair(pred_bin, gt)
    denom = int(p.sum()) + int(g.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / denom


def iou(pred_bin, gt):
    """|P & G| / |P | G|; 1.0 when both are empty."""
    p, g = _binary_pair(pred_bin, gt)
    union = int((p | g).sum())
    if union == 0:
        return 1.0
    return int((p & g).sum()) / union


def mae(pred_prob, gt):
    """Mean absolute error of the continuous prediction against the mask."""
    pred = np.asarray(pred_prob, dtype=np.float64)
    gt_arr = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt_arr.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt_arr.shape}")
    if pred.min() < 0.0 or pred.max() > 1.0:
        raise ValueError("prediction values must lie in [0,1]")
    return float(np.abs(pred - gt_arr).mean())


@dataclass
class MetricsReport:
    split_name: str
    per_image: list = field(default_factory=list)  # (id, dice, iou, mae) rows
    m_dice: float = 0.0
    m_iou: float = 0.0
    mae_mean: float = 0.0


def evaluate(model, split, threshold=0.5) -> MetricsReport:
    """Run inference over a split and average per-image metrics.

    Dice/IoU are computed on the thresholded map, MAE on the continuous
    sigmoid map. Images are reflection-padded to a multiple of 32 if needed
    and the prediction cropped back.
    """
    from .trainer import predict_probabilities

    if len(split) == 0:
        raise ValueError(f"split '{split.name}' is empty")
    model.eval()
    rows = []
    for sample in split:
        prob = predict_probabilities(model, sample.image)
        pred_bin = prob > threshold
        rows.append(
            (sample.id, dice(pred_bin, sample.mask), iou(pred_bin, sample.mask), mae(prob, sample.mask))
        )
    report = MetricsReport(split_name=split.name, per_image=rows)
    report.m_dice = float(np.mean([r[1] for r in rows]))
    report.m_iou = float(np.mean([r[2] for r in rows]))
    report.mae_mean = float(np.mean([r[3] for r in rows]))
    return report


REPORT_HEADER = ("id", "dice", "iou", "mae")


def write_report(report, path):
    """One CSV row per image plus a trailing mean row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_HEADER)
        for row in report.per_image:
            writer.writerow([row[0], f"{row[1]:.6f}", f"{row[2]:.6f}", f"{row[3]:.6f}"])
        writer.writerow(
            ["mean", f"{report.m_dice:.6f}", f"{report.m_iou:.6f}", f"{report.mae_mean:.6f}"]
        )


def format_summary(report):
    return (
        f"{report.split_name}: n={len(report.per_image)} "
        f"mDice={report.m_dice:.4f} mIoU={report.m_iou:.4f} MAE={report.mae_mean:.4f}"
    )
