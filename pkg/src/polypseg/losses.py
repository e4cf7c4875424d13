"""Pixel-difficulty-weighted BCE + IoU loss and the six-output total loss.

Hard pixels are those whose 31x31 neighbourhood disagrees with them (object
boundaries, thin structures); the weight map emphasises them in both the BCE
and the IoU term. The total loss supervises the four coarse maps, the fused
map and the edge map.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .eem import edge_loss


@dataclass
class LossBreakdown:
    edge: torch.Tensor
    coarse: tuple  # four weighted BCE+IoU terms, finest level first
    fused: torch.Tensor
    total: torch.Tensor

    def values(self):
        terms = [t.item() for t in self.coarse]
        return {
            "l_f1": terms[0],
            "l_f2": terms[1],
            "l_f3": terms[2],
            "l_f4": terms[3],
            "l_p": self.fused.item(),
            "l_edge": self.edge.item(),
            "total": self.total.item(),
        }


def pixel_weight_map(gt):
    """Weight in [1,6]: 1 + 5 * |31x31 local mean - value| of the mask."""
    gt = gt.float() if not gt.is_floating_point() else gt
    return 1.0 + 5.0 * (F.avg_pool2d(gt, kernel_size=31, stride=1, padding=15) - gt).abs()


def _check_pair(logits, gt):
    if logits.shape != gt.shape:
        raise ValueError(f"shape mismatch: {tuple(logits.shape)} vs {tuple(gt.shape)}")


def weighted_bce(logits, gt, weight):
    """Weight-normalised BCE per image, averaged over the batch."""
    _check_pair(logits, gt)
    gt = gt.to(logits.dtype)
    bce = F.binary_cross_entropy_with_logits(logits, gt, reduction="none")
    per_image = (weight * bce).sum(dim=(2, 3)) / weight.sum(dim=(2, 3))
    return per_image.mean()


def weighted_iou(logits, gt, weight):
    """Weighted soft IoU loss in [0,1); +1 smoothing keeps empty masks finite."""
    _check_pair(logits, gt)
    gt = gt.to(logits.dtype)
    p = torch.sigmoid(logits)
    inter = (weight * p * gt).sum(dim=(2, 3))
    union = (weight * (p + gt)).sum(dim=(2, 3)) - inter
    per_image = 1.0 - (inter + 1.0) / (union + 1.0)
    return per_image.mean()


def structure_loss(logits, gt, weight=None):
    """Weighted BCE + weighted IoU with a shared difficulty map."""
    if weight is None:
        weight = pixel_weight_map(gt)
    return weighted_bce(logits, gt, weight) + weighted_iou(logits, gt, weight)


def total_loss(outputs, gt, edge_gt) -> LossBreakdown:
    """Sum of the six supervised terms.

    `outputs` holds the four coarse logit maps (finest first), the fused
    logits and the edge logits, all at ground-truth resolution. The weight
    map is computed once from gt and shared by the five mask terms; the edge
    term is plain BCE.
    """
    outputs = list(outputs)
    if len(outputs) != 6:
        raise ValueError(f"six supervised maps required, got {len(outputs)}")
    weight = pixel_weight_map(gt)
    coarse = tuple(structure_loss(o, gt, weight) for o in outputs[:4])
    fused = structure_loss(outputs[4], gt, weight)
    edge = edge_loss(outputs[5], edge_gt)
    total = sum(coarse) + fused + edge
    return LossBreakdown(edge=edge, coarse=coarse, fused=fused, total=total)
