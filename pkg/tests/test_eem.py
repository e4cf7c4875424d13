"""Edge extractor plumbing and the edge supervision loss."""

import math

import numpy as np
import pytest
import torch

from fdcheck import check_function_gradients, check_module_gradients

from polypseg.eem import EdgeExtractor, edge_loss


def _toy_inputs(batch=1, h=64, w=64, c_low=16, c_high=128, dtype=torch.float32):
    low = torch.rand(batch, c_low, h // 4, w // 4, dtype=dtype)
    high = torch.rand(batch, c_high, h // 32, w // 32, dtype=dtype)
    return low, high


class TestEdgeExtractor:
    def test_shapes_at_352(self):
        torch.manual_seed(0)
        eem = EdgeExtractor(16, 128)
        low, high = _toy_inputs(h=352, w=352)
        feat, em = eem(low, high, (352, 352))
        assert feat.shape == (1, 32, 88, 88)
        assert em.shape == (1, 1, 352, 352)

    def test_stride_mismatch_rejected(self):
        eem = EdgeExtractor(16, 128)
        low = torch.rand(1, 16, 16, 16)
        high = torch.rand(1, 128, 4, 4)  # stride ratio 4, not 8
        with pytest.raises(ValueError, match="stride"):
            eem(low, high, (64, 64))

    def test_zero_head_gives_uniform_half_probability(self):
        torch.manual_seed(0)
        eem = EdgeExtractor(16, 128)
        torch.nn.init.zeros_(eem.head.weight)
        torch.nn.init.zeros_(eem.head.bias)
        _, em = eem(*_toy_inputs(), (64, 64))
        assert torch.allclose(torch.sigmoid(em), torch.full_like(em, 0.5))

    def test_zero_inputs_zero_feature_with_zero_biases(self):
        torch.manual_seed(0)
        eem = EdgeExtractor(16, 128)
        for name, p in eem.named_parameters():
            if name.endswith("bias"):
                torch.nn.init.zeros_(p)
        low = torch.zeros(1, 16, 16, 16)
        high = torch.zeros(1, 128, 2, 2)
        feat, _ = eem(low, high, (64, 64))
        assert torch.all(feat == 0)

    def test_gradients_match_finite_differences(self):
        torch.manual_seed(4)
        eem = EdgeExtractor(4, 8, width=8, high_width=8)
        low = torch.rand(2, 4, 8, 8, dtype=torch.float64)
        high = torch.rand(2, 8, 1, 1, dtype=torch.float64)
        check_module_gradients(eem, [low, high, (8, 8)], seed=4)


class TestEdgeLoss:
    def test_saturated_correct_is_tiny(self):
        gt = (torch.rand(2, 1, 8, 8) > 0.7).float()
        logits = (gt * 2 - 1) * 20.0
        assert edge_loss(logits, gt).item() < 1e-8

    def test_uniform_half_is_ln2(self):
        logits = torch.zeros(2, 1, 8, 8)
        gt = (torch.rand(2, 1, 8, 8) > 0.5).float()
        assert abs(edge_loss(logits, gt).item() - math.log(2.0)) < 1e-7

    def test_single_pixel_hand_value(self):
        # prob 0.8 against gt 1: loss = -ln 0.8
        logit = torch.tensor([[[[math.log(0.8 / 0.2)]]]])
        gt = torch.ones(1, 1, 1, 1)
        assert abs(edge_loss(logit, gt).item() - 0.2231435513) < 1e-6

    def test_nonnegative_on_random_inputs(self):
        g = torch.Generator().manual_seed(0)
        for _ in range(50):
            logits = torch.randn(1, 1, 6, 6, generator=g) * 5
            gt = (torch.rand(1, 1, 6, 6, generator=g) > 0.5).float()
            assert edge_loss(logits, gt).item() >= 0.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            edge_loss(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 8, 8))

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(7)
        logits = torch.randn(2, 1, 4, 4, dtype=torch.float64)
        gt = (torch.rand(2, 1, 4, 4) > 0.5).double()
        check_function_gradients(edge_loss, [logits, gt], wrt=(0,), seed=7)
