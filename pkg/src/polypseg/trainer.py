"""End-to-end optimisation loop, single-image inference and overlays."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from . import losses
from .checkpoint import Checkpoint
from .data import epoch_plan, foreground_boundary, make_batch
from .eem import edge_loss
from .model import EdgeGuidedPolypNet


class TrainingDiverged(RuntimeError):
    """Raised when the loss goes non-finite; carries the offending batch ids."""

    def __init__(self, step, batch_ids):
        super().__init__(
            f"non-finite loss at step {step} on batch {batch_ids}"
        )
        self.step = step
        self.batch_ids = batch_ids


def build_model(config, backbone=None):
    """Construct the network for a config; seeds parameter initialisation."""
    config.validate()
    if backbone is None and config.backbone != "toy":
        raise ValueError(
            "backbone 'plugged' needs an explicit backbone object satisfying the pyramid contract"
        )
    torch.manual_seed(config.seed)
    return EdgeGuidedPolypNet(
        backbone=backbone,
        width=config.decoder_width,
        use_se=config.use_se,
        use_eg=config.use_eg,
        use_cfm=config.use_cfm,
        cfp_dilations=config.cfp_dilations,
        sam_groups=config.sam_groups,
        edge_high_width=config.edge_high_width,
    )


def training_loss(outputs, masks, edges):
    """LossBreakdown for a forward pass; drops the edge term when the model
    has no edge branch (ablations without edge guidance)."""
    if outputs.edge_logits is not None:
        return losses.total_loss(outputs.supervised(), masks, edges)
    weight = losses.pixel_weight_map(masks)
    coarse = tuple(losses.structure_loss(o, masks, weight) for o in outputs.coarse_logits)
    fused = losses.structure_loss(outputs.fused_logits, masks, weight)
    zero = torch.zeros((), dtype=fused.dtype, device=fused.device)
    return losses.LossBreakdown(edge=zero, coarse=coarse, fused=fused, total=sum(coarse) + fused)


def train(config, split, model=None):
    """Run the optimisation loop; returns (checkpoint, per-step loss rows).

    Deterministic given (config, split): parameter init, batch order and
    scale draws all derive from config.seed.
    """
    config.validate()
    if len(split) == 0:
        raise ValueError("cannot train on an empty split")
    if model is None:
        model = build_model(config)
    torch.manual_seed(config.seed)
    model.train()
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay
    )

    history = []
    step = 0
    for epoch in range(config.epochs):
        plan = epoch_plan(len(split), config.batch_size, config.scales, config.seed, epoch)
        for indices, scale in plan:
            images, masks, edges = make_batch(split, indices, scale, scale_set=config.scales)
            outputs = model(images)
            breakdown = training_loss(outputs, masks, edges)
            if not torch.isfinite(breakdown.total):
                raise TrainingDiverged(step, [split[i].id for i in indices])
            optimizer.zero_grad()
            breakdown.total.backward()
            nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip_norm)
            optimizer.step()
            step += 1
            row = {"step": step, "epoch": epoch, "scale": scale}
            row.update(breakdown.values())
            history.append(row)

    ckpt = Checkpoint(
        config=config.to_dict(),
        model_state={k: v.clone() for k, v in model.state_dict().items()},
        step=step,
        optimizer_state=optimizer.state_dict(),
    )
    return ckpt, history


def restore_model(ckpt, backbone=None):
    """Rebuild the network from a checkpoint and load its weights."""
    from .config import config_from_dict

    config = config_from_dict(ckpt.config).validate()
    model = build_model(config, backbone=backbone)
    model.load_state_dict(ckpt.model_state)
    model.eval()
    return model, config


def pad_to_multiple(images, multiple=32):
    """Reflection-pad NCHW images on the bottom/right to the next multiple."""
    h, w = images.shape[-2:]
    pad_h = (-h) % multiple
    pad_w = (-w) % multiple
    if pad_h == 0 and pad_w == 0:
        return images, (h, w)
    return F.pad(images, (0, pad_w, 0, pad_h), mode="reflect"), (h, w)


def predict_probabilities(model, image):
    """Sigmoid of the inference map for one H*W*3 image in [0,1]."""
    x = torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))[None]).float()
    x, (h, w) = pad_to_multiple(x)
    model.eval()
    with torch.no_grad():
        out = model(x)
    prob = torch.sigmoid(out.final_logits)[0, 0, :h, :w]
    return prob.numpy()


def overlay_boundary(image, mask, color=(255, 0, 0)):
    """Draw the predicted mask's boundary on the image (uint8 RGB out)."""
    canvas = (np.clip(image, 0.0, 1.0) * 255).astype(np.uint8).copy()
    boundary = foreground_boundary(mask.astype(np.uint8)) > 0
    canvas[boundary] = color
    return canvas


def predict(model, image, threshold=0.5):
    """(probability map, binary mask, overlay) for one image.

    Sizes that are not multiples of 32 are reflection-padded for the forward
    pass and the outputs cropped back to the input size.
    """
    prob = predict_probabilities(model, image)
    mask = (prob > threshold).astype(np.uint8)
    return prob, mask, overlay_boundary(image, mask)
