"""Full network assembly with ablation toggles.

Wiring, coarse to fine: backbone pyramid -> per-level refinement -> edge
extraction -> per-level separation gated by the coarser prediction -> edge
guidance -> cascade fusion. The supervised outputs are the four coarse maps,
the fused map and the edge map; the inference map adds a head on the finest
guided feature to the fused logits.

Toggles (all combinations train):
  use_se=False  gates identically 1, no seed head
  use_eg=False  no edge extractor or guidance blocks; guided feature = fg + bg
  use_cfm=False fusion recursion replaced by addition of upsampled features
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from .cfm import CascadeFusion, FinalPrediction
from .cfp import PyramidRefiner
from .eem import EdgeExtractor
from .encoder import ToyPyramidBackbone, validate_pyramid
from .seg import EdgeGuidance, StreamSeparator


@dataclass
class ModelOutputs:
    coarse_logits: tuple  # four maps at input resolution, finest level first
    fused_logits: torch.Tensor
    edge_logits: Optional[torch.Tensor]  # None when edge guidance is disabled
    final_logits: torch.Tensor

    def supervised(self):
        """The six supervised maps; raises when edge supervision is disabled."""
        if self.edge_logits is None:
            raise ValueError("edge supervision disabled: only five supervised maps exist")
        return [*self.coarse_logits, self.fused_logits, self.edge_logits]


class EdgeGuidedPolypNet(nn.Module):
    def __init__(
        self,
        backbone=None,
        width=32,
        use_se=True,
        use_eg=True,
        use_cfm=True,
        cfp_dilations=(1, 2, 4),
        sam_groups=4,
        edge_high_width=256,
    ):
        super().__init__()
        self.backbone = backbone if backbone is not None else ToyPyramidBackbone()
        self.use_se = use_se
        self.use_eg = use_eg
        self.use_cfm = use_cfm
        widths = tuple(self.backbone.channels)
        self.refiner = PyramidRefiner(widths, width=width, dilations=cfp_dilations)
        if use_se:
            # 1-channel global map seeding the coarsest separator; unsupervised
            self.seed_head = nn.Conv2d(width, 1, 1)
        if use_eg:
            self.edge = EdgeExtractor(widths[0], widths[3], width=width, high_width=edge_high_width)
            self.guidance = nn.ModuleList(
                EdgeGuidance(width, edge_channels=width, sam_groups=sam_groups)
                for _ in range(4)
            )
        self.separators = nn.ModuleList(StreamSeparator(width, gated=use_se) for _ in range(4))
        self.fusion = CascadeFusion(width, cascade=use_cfm)
        self.final = FinalPrediction(width)

    def forward(self, images) -> ModelOutputs:
        out_size = images.shape[-2:]
        pyramid = self.backbone(images)
        validate_pyramid(pyramid, out_size)
        level_feats = self.refiner(pyramid)

        edge_feat = None
        edge_logits = None
        if self.use_eg:
            edge_feat, edge_logits = self.edge(pyramid.en1, pyramid.en4, out_size)

        coarse = [None] * 4
        guided = [None] * 4
        prev = self.seed_head(level_feats[3]) if self.use_se else None
        for idx in (3, 2, 1, 0):  # coarse to fine
            fg, bg, out_i = self.separators[idx](level_feats[idx], prev)
            if self.use_se:
                prev = out_i
            coarse[idx] = out_i
            guided[idx] = self.guidance[idx](fg, bg, edge_feat) if self.use_eg else fg + bg

        fusion = self.fusion(tuple(guided), level_feats[3], out_size)
        final_logits = self.final(guided[0], fusion.p_logits)

        coarse_full = tuple(
            F.interpolate(c, size=out_size, mode="bilinear", align_corners=False)
            for c in coarse
        )
        return ModelOutputs(
            coarse_logits=coarse_full,
            fused_logits=fusion.p_logits,
            edge_logits=edge_logits,
            final_logits=final_logits,
        )
