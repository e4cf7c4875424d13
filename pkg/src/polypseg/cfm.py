"""Cascade fusion of the guided features into the fused prediction map.

The recursion starts from the coarsest decoder feature and descends three
steps: the running feature is upsampled to the next finer level, multiplied
with that level's guided feature, concatenated with it, and reduced back to
the decoder width by a 3x3 convolution. All four fusion features are
upsampled to the finest grid and summed before the 1-channel prediction head.
"""

from __future__ import annotations

from typing import NamedTuple, Optional

import torch
import torch.nn.functional as F
from torch import nn


class FusionOutput(NamedTuple):
    fused: Optional[tuple]  # (f1, f2, f3, f4), None when the cascade is disabled
    p_logits: torch.Tensor  # B*1*H*W at input resolution


def _up(x, size):
    if x.shape[-2:] == tuple(size):
        return x
    return F.interpolate(x, size=size, mode="bilinear", align_corners=False)


class CascadeFusion(nn.Module):
    """Coarse-to-fine fusion; with `cascade=False` (ablation wiring) the
    recursion is replaced by elementwise addition of the upsampled guided
    features and only the prediction head remains."""

    def __init__(self, width, cascade=True):
        super().__init__()
        self.cascade = cascade
        if cascade:
            # one 2T -> T reduction per fusion step, levels 3, 2, 1
            self.reduce = nn.ModuleList(
                nn.Conv2d(2 * width, width, 3, padding=1) for _ in range(3)
            )
        self.p_head = nn.Conv2d(width, 1, 1)

    def forward(self, guided, c4, out_size) -> FusionOutput:
        g1, g2, g3, g4 = guided
        finest = g1.shape[-2:]
        if self.cascade:
            f = c4
            feats = [c4]
            for conv, g in zip(self.reduce, (g3, g2, g1)):
                u = _up(f, g.shape[-2:])
                if u.shape[1] != g.shape[1]:
                    raise ValueError(
                        f"channel mismatch in fusion: {u.shape[1]} vs {g.shape[1]}"
                    )
                f = conv(torch.cat([u * g, g], dim=1))
                feats.append(f)
            f1, f2, f3, f4 = feats[3], feats[2], feats[1], feats[0]
            p_feat = f1 + _up(f2, finest) + _up(f3, finest) + _up(f4, finest)
            fused = (f1, f2, f3, f4)
        else:
            p_feat = g1 + _up(g2, finest) + _up(g3, finest) + _up(g4, finest)
            fused = None
        p_logits = F.interpolate(
            self.p_head(p_feat), size=out_size, mode="bilinear", align_corners=False
        )
        return FusionOutput(fused, p_logits)


class FinalPrediction(nn.Module):
    """Inference head: 1-channel projection of the finest guided feature,
    upsampled and summed with the fused prediction logits."""

    def __init__(self, width):
        super().__init__()
        self.head = nn.Conv2d(width, 1, 1)

    def forward(self, g1, p_logits):
        out_size = p_logits.shape[-2:]
        return _up(self.head(g1), out_size) + p_logits
