"""Dataset loading, edge ground-truth derivation and batch assembly.

Expected layout on disk:

    root/
      images/*.png|*.jpg|*.jpeg   RGB frames
      masks/*.png                 single-channel binary masks ({0,255} or {0,1})

Edge ground truth is always derived from the mask, never read from disk.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import cv2
import numpy as np
import torch

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")

_KERNEL3 = np.ones((3, 3), np.uint8)


class DatasetError(RuntimeError):
    """Raised for unusable datasets: missing files, non-binary masks, bad layout."""


@dataclass
class ImageSample:
    """One image/mask pair with its derived boundary label.

    image is H*W*3 float32 in [0,1]; mask and edge_gt are H*W uint8 in {0,1}.
    """

    id: str
    image: np.ndarray
    mask: np.ndarray
    edge_gt: np.ndarray


@dataclass
class DatasetSplit:
    name: str
    samples: list[ImageSample] = field(default_factory=list)
    seen: bool = True

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, index):
        return self.samples[index]

    def __iter__(self):
        return iter(self.samples)


def foreground_boundary(mask):
    """1-pixel-wide foreground boundary: mask minus its 3x3 erosion.

    The border is treated as replicated, so a transition is only counted where
    a 3x3 in-image neighbourhood contains both foreground and background; an
    all-ones mask therefore has no boundary.
    """
    mask = mask.astype(np.uint8)
    eroded = cv2.erode(mask, _KERNEL3, borderType=cv2.BORDER_REPLICATE)
    return mask - eroded


def make_edge_ground_truth(mask):
    """Derive the binary edge label for a binary mask.

    Canny (thresholds 100/200 on the {0,255} mask; any thresholds in (0,255)
    fire on the same transitions for binary input) localises the boundary, and
    its response band is snapped onto the foreground-side transition pixels so
    the label is exactly one pixel wide and lies on the mask.
    """
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise DatasetError(f"mask must be 2-D, got shape {mask.shape}")
    uniq = np.unique(mask)
    if not np.isin(uniq, (0, 1)).all():
        raise DatasetError(f"mask must be binary, found values {uniq[:8]}")
    mask = mask.astype(np.uint8)
    canny = cv2.Canny(mask * 255, 100, 200)
    band = cv2.dilate((canny > 0).astype(np.uint8), _KERNEL3)
    return band * foreground_boundary(mask)


def _load_mask(path, stem):
    raw = cv2.imread(path, cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise DatasetError(f"unreadable mask for '{stem}': {path}")
    values = raw.astype(np.float32)
    if values.max() > 1:
        values = values / 255.0
    # values must sit near 0 or near full scale; anything else is not a
    # binary mask and thresholding it at 0.5 would silently invent labels
    if np.abs(values - (values > 0.5)).max() > 0.25:
        raise DatasetError(f"non-binary mask for '{stem}': {path}")
    return (values > 0.5).astype(np.uint8)


def resize_mask(mask, size_hw):
    """Nearest-neighbour resize followed by re-binarisation."""
    h, w = size_hw
    out = cv2.resize(mask.astype(np.uint8), (w, h), interpolation=cv2.INTER_NEAREST)
    return (out > 0).astype(np.uint8)


def resize_image(image, size_hw):
    h, w = size_hw
    return cv2.resize(image, (w, h), interpolation=cv2.INTER_LINEAR)


def load_dataset(root, resize_to=(352, 352), name=None, manifest=None, seen=True):
    """Load every image/mask pair under root into a DatasetSplit.

    Images are resized bilinearly, masks with nearest neighbour (then
    re-binarised), and edge labels derived from the resized mask. A manifest
    (one id per line) pins split membership; ordering is always lexicographic
    by id.
    """
    images_dir = os.path.join(root, "images")
    masks_dir = os.path.join(root, "masks")
    if not os.path.isdir(images_dir) or not os.path.isdir(masks_dir):
        raise DatasetError(f"expected 'images/' and 'masks/' under {root}")

    by_stem = {}
    for fname in os.listdir(images_dir):
        stem, ext = os.path.splitext(fname)
        if ext.lower() not in IMAGE_EXTENSIONS:
            continue
        if stem in by_stem:
            raise DatasetError(f"duplicate image id '{stem}' in {images_dir}")
        by_stem[stem] = os.path.join(images_dir, fname)

    stems = sorted(by_stem)
    if manifest is not None:
        wanted = read_split_manifest(manifest)
        missing = sorted(set(wanted) - set(stems))
        if missing:
            raise DatasetError(f"manifest ids not found: {missing[:8]}")
        stems = sorted(wanted)

    samples = []
    for stem in stems:
        mask_path = os.path.join(masks_dir, stem + ".png")
        if not os.path.isfile(mask_path):
            raise DatasetError(f"missing mask for '{stem}' (expected {mask_path})")
        raw = cv2.imread(by_stem[stem], cv2.IMREAD_COLOR)
        if raw is None:
            raise DatasetError(f"unreadable image for '{stem}'")
        image = cv2.cvtColor(raw, cv2.COLOR_BGR2RGB).astype(np.float32) / 255.0
        image = resize_image(image, resize_to)
        mask = resize_mask(_load_mask(mask_path, stem), resize_to)
        samples.append(
            ImageSample(id=stem, image=image, mask=mask, edge_gt=make_edge_ground_truth(mask))
        )

    return DatasetSplit(name=name or os.path.basename(os.path.normpath(root)), samples=samples, seen=seen)


def round_to_multiple(value, multiple=32):
    """Nearest multiple, halves rounded up."""
    return int(value / multiple + 0.5) * multiple


def make_batch(split, indices, scale=1.0, scale_set=None):
    """Assemble a (images, masks, edges) tensor batch at the given scale.

    Spatial dims are scale * base size rounded to the nearest multiple of 32
    so the stride-32 encoder level stays integral. Masks are re-binarised
    after the resize and edge labels re-derived from the resized mask, which
    keeps them on the boundary at every scale.
    """
    if scale_set is not None and scale not in scale_set:
        raise ValueError(f"scale {scale} not in configured set {tuple(scale_set)}")
    if not indices:
        raise ValueError("empty index list")

    base_h, base_w = split[indices[0]].mask.shape
    target = (round_to_multiple(base_h * scale), round_to_multiple(base_w * scale))
    if min(target) < 64:
        raise ValueError(f"scaled size {target} below the 64-pixel pyramid minimum")

    images, masks, edges = [], [], []
    for i in indices:
        sample = split[i]
        images.append(resize_image(sample.image, target))
        mask = resize_mask(sample.mask, target)
        masks.append(mask)
        edges.append(make_edge_ground_truth(mask))

    image_t = torch.from_numpy(np.stack(images).transpose(0, 3, 1, 2).copy())
    mask_t = torch.from_numpy(np.stack(masks)[:, None].astype(np.float32))
    edge_t = torch.from_numpy(np.stack(edges)[:, None].astype(np.float32))
    return image_t, mask_t, edge_t


def epoch_plan(num_samples, batch_size, scales, seed, epoch):
    """Deterministic (seed, epoch) -> [(indices, scale), ...] batch plan.

    Pure function of its arguments, so batch contents do not depend on how
    many loader workers execute the plan.
    """
    if num_samples <= 0:
        raise ValueError("empty split")
    if batch_size <= 0:
        raise ValueError("batch_size must be positive")
    rng = np.random.default_rng([int(seed), int(epoch)])
    order = rng.permutation(num_samples)
    scales = tuple(scales)
    plan = []
    for start in range(0, num_samples, batch_size):
        chunk = [int(i) for i in order[start : start + batch_size]]
        plan.append((chunk, float(scales[rng.integers(len(scales))])))
    return plan


def split_ids(ids, n_train, seed):
    """Seeded shuffle split of sample ids into (train, test), both sorted."""
    ids = list(ids)
    if not 0 <= n_train <= len(ids):
        raise ValueError(f"n_train={n_train} out of range for {len(ids)} ids")
    order = np.random.default_rng(seed).permutation(len(ids))
    train = sorted(ids[i] for i in order[:n_train])
    test = sorted(ids[i] for i in order[n_train:])
    return train, test


def write_split_manifest(path, ids):
    with open(path, "w") as fh:
        for sample_id in ids:
            fh.write(f"{sample_id}\n")


def read_split_manifest(path):
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]
