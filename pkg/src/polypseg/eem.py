"""Object-aware edge extraction from the lowest- and highest-level features.

The finest level carries boundary detail, the coarsest carries object
location; fusing the two suppresses non-object edges. The extracted edge
feature is shared by the guidance blocks at every level, and the 1-channel
edge map is supervised against the derived edge ground truth.
"""

from __future__ import annotations

from typing import NamedTuple

import torch
import torch.nn.functional as F
from torch import nn


class EdgeBundle(NamedTuple):
    edge_feat: torch.Tensor  # stride 4, `width` channels
    em_logits: torch.Tensor  # B*1*H*W at input resolution


class EdgeExtractor(nn.Module):
    """Fuse stride-4 and stride-32 features into an edge feature and edge map.

    Channel plumbing: low -> `width` and high -> `high_width` via 1x1
    convolutions, bilinear x8 upsample of the high branch, concatenation,
    two 3x3 convolutions producing the edge feature, and a final 1x1 head
    whose logits are upsampled to input resolution.
    """

    def __init__(self, low_channels, high_channels, width=32, high_width=256):
        super().__init__()
        self.low_proj = nn.Conv2d(low_channels, width, 1)
        self.high_proj = nn.Conv2d(high_channels, high_width, 1)
        self.fuse = nn.Sequential(
            nn.Conv2d(width + high_width, width, 3, padding=1),
            nn.ReLU(),
            nn.Conv2d(width, width, 3, padding=1),
        )
        self.head = nn.Conv2d(width, 1, 1)

    def forward(self, low, high, out_size) -> EdgeBundle:
        lh, lw = low.shape[-2:]
        hh, hw = high.shape[-2:]
        if (lh, lw) != (hh * 8, hw * 8):
            raise ValueError(
                f"expected stride-4 and stride-32 inputs, got {lh}x{lw} vs {hh}x{hw}"
            )
        up_high = F.interpolate(
            self.high_proj(high), size=(lh, lw), mode="bilinear", align_corners=False
        )
        feat = self.fuse(torch.cat([self.low_proj(low), up_high], dim=1))
        em = F.interpolate(self.head(feat), size=out_size, mode="bilinear", align_corners=False)
        return EdgeBundle(feat, em)


def edge_loss(em_logits, edge_gt):
    """Mean binary cross-entropy between the edge map and its ground truth.

    Reduced per pixel (not summed) so the term is resolution-independent and
    commensurate with the mask loss terms.
    """
    if em_logits.shape != edge_gt.shape:
        raise ValueError(f"shape mismatch: {tuple(em_logits.shape)} vs {tuple(edge_gt.shape)}")
    return F.binary_cross_entropy_with_logits(em_logits, edge_gt.to(em_logits.dtype))
