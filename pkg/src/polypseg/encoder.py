"""Backbone contract and the desk-scale convolutional pyramid backbone.

Any encoder works as a backbone if it maps a B*3*H*W batch (H, W multiples
of 32) to four feature maps at strides 4/8/16/32 with non-decreasing channel
widths, and exposes a `channels` tuple. A pretrained pyramid transformer can
be plugged in through the same contract; the toy backbone below exists so the
whole pipeline is exercisable on a CPU.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import torch
from torch import nn


class FeaturePyramid(NamedTuple):
    en1: torch.Tensor  # stride 4
    en2: torch.Tensor  # stride 8
    en3: torch.Tensor  # stride 16
    en4: torch.Tensor  # stride 32

    @property
    def channels(self):
        return tuple(t.shape[1] for t in self)


STRIDES = (4, 8, 16, 32)


def check_input_size(images):
    h, w = images.shape[-2:]
    if h % 32 or w % 32:
        raise ValueError(f"input spatial size {h}x{w} must be a multiple of 32")


def validate_pyramid(pyramid, input_hw):
    """Assert the backbone contract: strides 4/8/16/32, widths non-decreasing."""
    h, w = input_hw
    for level, (feat, stride) in enumerate(zip(pyramid, STRIDES), start=1):
        expect = (h // stride, w // stride)
        if tuple(feat.shape[-2:]) != expect:
            raise ValueError(
                f"level {level} has spatial size {tuple(feat.shape[-2:])}, expected {expect}"
            )
    widths = pyramid.channels
    if any(a > b for a, b in zip(widths, widths[1:])):
        raise ValueError(f"channel widths must be non-decreasing with depth, got {widths}")


def _init_conv(conv):
    # fan-in-scaled uniform weights (ReLU gain, keeps activation variance
    # roughly constant with depth), zero bias
    fan_in = conv.in_channels * conv.kernel_size[0] * conv.kernel_size[1]
    bound = math.sqrt(6.0 / fan_in)
    nn.init.uniform_(conv.weight, -bound, bound)
    if conv.bias is not None:
        nn.init.zeros_(conv.bias)


class ToyPyramidBackbone(nn.Module):
    """Four-stage convolutional encoder with a stride-4 stem.

    Each stage is one downsampling convolution followed by two 3x3
    convolutions with GELU (smooth, as in the transformer pyramids this
    stands in for); widths (16, 32, 64, 128). Deliberately small and BN-free
    so encoding is a pure function of (parameters, input).
    """

    def __init__(self, in_channels=3, channels=(16, 32, 64, 128)):
        super().__init__()
        if len(channels) != 4:
            raise ValueError("backbone needs exactly four stage widths")
        self.channels = tuple(channels)
        stages = []
        prev = in_channels
        for i, width in enumerate(self.channels):
            if i == 0:
                down = nn.Conv2d(prev, width, kernel_size=7, stride=4, padding=3)
            else:
                down = nn.Conv2d(prev, width, kernel_size=3, stride=2, padding=1)
            stages.append(
                nn.Sequential(
                    down,
                    nn.GELU(),
                    nn.Conv2d(width, width, 3, padding=1),
                    nn.GELU(),
                    nn.Conv2d(width, width, 3, padding=1),
                    nn.GELU(),
                )
            )
            prev = width
        self.stages = nn.ModuleList(stages)
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                _init_conv(m)

    def forward(self, images) -> FeaturePyramid:
        check_input_size(images)
        feats = []
        x = images
        for stage in self.stages:
            x = stage(x)
            feats.append(x)
        return FeaturePyramid(*feats)
