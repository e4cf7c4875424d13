"""Separated edge guidance: two-stream splitting plus edge conditioning.

The separator gates decoder features into complementary foreground and
background streams using the coarser level's prediction, so the streams sum
back to the input feature exactly. The guidance block then conditions both
streams on the shared edge feature (multiplicative and additive edge terms)
and merges them under channel and shuffle attention.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def channel_shuffle(x, groups):
    """Re-interleave channels across groups; inverse is shuffling with C/groups."""
    b, c, h, w = x.shape
    if c % groups:
        raise ValueError(f"{c} channels not divisible by {groups} groups")
    return x.view(b, groups, c // groups, h, w).transpose(1, 2).reshape(b, c, h, w)


class ChannelAttention(nn.Module):
    """Gate in (0,1) per channel from a global pooled branch plus a local
    pointwise branch, each a 1x1-conv bottleneck, summed and squashed."""

    def __init__(self, width, reduction=4):
        super().__init__()
        if width < reduction:
            raise ValueError(f"width {width} below bottleneck reduction {reduction}")
        hidden = width // reduction
        self.global_fc1 = nn.Conv2d(width, hidden, 1)
        self.global_fc2 = nn.Conv2d(hidden, width, 1)
        self.local_fc1 = nn.Conv2d(width, hidden, 1)
        self.local_fc2 = nn.Conv2d(hidden, width, 1)

    def forward(self, x):
        pooled = x.mean(dim=(2, 3), keepdim=True)
        global_term = self.global_fc2(F.relu(self.global_fc1(pooled)))
        local_term = self.local_fc2(F.relu(self.local_fc1(x)))
        return torch.sigmoid(global_term + local_term)


class ShuffleAttention(nn.Module):
    """Grouped channel + spatial gating followed by a channel shuffle.

    Each group is multiplied by its own channel gate (bottleneck reduction 2)
    and a spatial gate (sigmoid of a 1x1 convolution over the group); with a
    single group the shuffle is the identity.
    """

    def __init__(self, width, groups=4, reduction=2):
        super().__init__()
        if width % groups:
            raise ValueError(f"width {width} not divisible by {groups} groups")
        self.groups = groups
        group_width = width // groups
        self.channel_gates = nn.ModuleList(
            ChannelAttention(group_width, reduction) for _ in range(groups)
        )
        self.spatial_convs = nn.ModuleList(
            nn.Conv2d(group_width, 1, 1) for _ in range(groups)
        )

    def forward(self, x):
        parts = x.chunk(self.groups, dim=1)
        gated = [
            part * gate(part) * torch.sigmoid(conv(part))
            for part, gate, conv in zip(parts, self.channel_gates, self.spatial_convs)
        ]
        return channel_shuffle(torch.cat(gated, dim=1), self.groups)


class StreamSeparator(nn.Module):
    """Split a decoder feature into foreground/background streams.

    The foreground gate is the sigmoid of the coarser level's logits
    (bilinearly upsampled); the background gate is its complement, so
    fg + bg equals the input feature exactly. The 1x1 head on the foreground
    stream produces this level's supervised coarse map. With `gated=False`
    (separator ablation) both gates are identically 1.
    """

    def __init__(self, width, gated=True):
        super().__init__()
        self.gated = gated
        self.head = nn.Conv2d(width, 1, 1)

    def forward(self, feat, coarse_logits=None):
        if self.gated:
            if coarse_logits is None:
                raise ValueError("gated separator needs the coarser level's logits")
            gate = torch.sigmoid(
                F.interpolate(
                    coarse_logits, size=feat.shape[-2:], mode="bilinear", align_corners=False
                )
            )
            fg = feat * gate
            bg = feat * (1.0 - gate)
        else:
            fg = feat
            bg = feat
        return fg, bg, self.head(fg)


class EdgeGuidance(nn.Module):
    """Condition both streams on the edge feature and merge them.

    w = channel attention over fg + bg; each stream is re-weighted (w for the
    foreground, 1-w for the background), batch-normalised, multiplied by its
    own 3x3 projection of the edge feature and offset by that same projection.
    The merged sum passes through shuffle attention. The two streams hold
    independent projection and normalisation parameters.
    """

    def __init__(self, width, edge_channels=32, sam_groups=4):
        super().__init__()
        self.attn = ChannelAttention(width)
        self.fg_edge = nn.Conv2d(edge_channels, width, 3, padding=1)
        self.bg_edge = nn.Conv2d(edge_channels, width, 3, padding=1)
        self.fg_norm = nn.BatchNorm2d(width)
        self.bg_norm = nn.BatchNorm2d(width)
        self.refine = ShuffleAttention(width, sam_groups)

    def forward(self, fg, bg, edge_feat):
        if edge_feat.shape[-2:] != fg.shape[-2:]:
            edge_feat = F.interpolate(
                edge_feat, size=fg.shape[-2:], mode="bilinear", align_corners=False
            )
        w = self.attn(fg + bg)
        fg_edge = self.fg_edge(edge_feat)
        bg_edge = self.bg_edge(edge_feat)
        guided_fg = self.fg_norm(w * fg) * fg_edge + fg_edge
        guided_bg = self.bg_norm((1.0 - w) * bg) * bg_edge + bg_edge
        return self.refine(guided_fg + guided_bg)
