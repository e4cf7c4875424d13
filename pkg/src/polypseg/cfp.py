"""Per-level feature refinement to a common decoder width.

Each encoder level is projected to the decoder width with a 1x1 convolution,
then passed through parallel 3x3 dilated branches whose outputs are summed
and added residually to the projection. The block is linear by design: with
zero biases, zero input gives zero output.
"""

from __future__ import annotations

import torch
from torch import nn


class DilatedRefineBlock(nn.Module):
    def __init__(self, in_channels, width=32, dilations=(1, 2, 4), split_branches=False):
        super().__init__()
        if split_branches and width % len(dilations) != 0:
            raise ValueError(
                f"width {width} not divisible by {len(dilations)} split branches"
            )
        self.split_branches = split_branches
        self.project = nn.Conv2d(in_channels, width, 1)
        branch_width = width // len(dilations) if split_branches else width
        self.branches = nn.ModuleList(
            nn.Conv2d(branch_width, branch_width, 3, padding=d, dilation=d)
            for d in dilations
        )

    def forward(self, x):
        proj = self.project(x)
        if self.split_branches:
            parts = proj.chunk(len(self.branches), dim=1)
            mixed = torch.cat([b(p) for b, p in zip(self.branches, parts)], dim=1)
        else:
            mixed = sum(b(proj) for b in self.branches)
        return proj + mixed


class PyramidRefiner(nn.Module):
    """Applies one refine block per pyramid level, yielding widths equal to T."""

    def __init__(self, in_channels, width=32, dilations=(1, 2, 4), split_branches=False):
        super().__init__()
        self.width = width
        self.blocks = nn.ModuleList(
            DilatedRefineBlock(c, width, dilations, split_branches) for c in in_channels
        )

    def forward(self, pyramid):
        return tuple(block(feat) for block, feat in zip(self.blocks, pyramid))
