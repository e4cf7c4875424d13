"""Shared fixtures: synthetic datasets written to disk."""

import cv2
import numpy as np
import pytest

from oracles import blob_mask


def render_pair(mask, rng):
    """Synthesise a colonoscopy-like frame: textured background, tinted blob."""
    h, w = mask.shape
    image = rng.uniform(0.25, 0.45, size=(h, w, 3)).astype(np.float32)
    tint = np.array([0.45, 0.1, 0.05], np.float32)
    image = image + mask[..., None].astype(np.float32) * tint
    return np.clip(image, 0.0, 1.0)


def write_dataset(root, n, size=96, seed=0, mask_ext=".png"):
    rng = np.random.default_rng(seed)
    (root / "images").mkdir(parents=True)
    (root / "masks").mkdir()
    ids = []
    for i in range(n):
        mask = blob_mask(size, rng, sigma=8.0)
        image = render_pair(mask, rng)
        stem = f"case_{i:03d}"
        bgr = cv2.cvtColor((image * 255).astype(np.uint8), cv2.COLOR_RGB2BGR)
        cv2.imwrite(str(root / "images" / f"{stem}.png"), bgr)
        cv2.imwrite(str(root / "masks" / f"{stem}{mask_ext}"), mask * 255)
        ids.append(stem)
    return ids


@pytest.fixture
def dataset_root(tmp_path):
    root = tmp_path / "data"
    write_dataset(root, n=6, size=96, seed=3)
    return root
