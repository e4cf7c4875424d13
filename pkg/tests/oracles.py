"""Independent oracle implementations used to check the package.

Everything here is deliberately written from scratch in plain numpy (loops,
cumsums, scipy.ndimage), not by calling the code under test, so each test is
a genuine dual-route check.
"""

import numpy as np
from scipy import ndimage


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def conv2d(x, w, b=None, stride=1, padding=0, dilation=1):
    """Direct-loop 2-D convolution (cross-correlation, torch convention)."""
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    batch, cin, h, win = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    eff_h = (kh - 1) * dilation + 1
    eff_w = (kw - 1) * dilation + 1
    hout = (h + 2 * padding - eff_h) // stride + 1
    wout = (win + 2 * padding - eff_w) // stride + 1
    out = np.zeros((batch, cout, hout, wout))
    for n in range(batch):
        for o in range(cout):
            for i in range(hout):
                for j in range(wout):
                    acc = 0.0
                    for c in range(cin):
                        for u in range(kh):
                            for v in range(kw):
                                acc += (
                                    xp[n, c, i * stride + u * dilation, j * stride + v * dilation]
                                    * w[o, c, u, v]
                                )
                    out[n, o, i, j] = acc + (b[o] if b is not None else 0.0)
    return out


def batchnorm_train(x, gamma, beta, eps=1e-5):
    """Training-mode batch normalisation (biased variance over B, H, W)."""
    x = np.asarray(x, dtype=np.float64)
    mean = x.mean(axis=(0, 2, 3), keepdims=True)
    var = ((x - mean) ** 2).mean(axis=(0, 2, 3), keepdims=True)
    norm = (x - mean) / np.sqrt(var + eps)
    return norm * gamma.reshape(1, -1, 1, 1) + beta.reshape(1, -1, 1, 1)


def avg_pool_same(x, kernel):
    """Stride-1 average pooling with zero padding counted in the mean."""
    x = np.asarray(x, dtype=np.float64)
    pad = kernel // 2
    batch, ch, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    out = np.zeros_like(x)
    for i in range(h):
        for j in range(w):
            out[:, :, i, j] = xp[:, :, i : i + kernel, j : j + kernel].sum(axis=(2, 3))
    return out / (kernel * kernel)


def channel_attention_gate(x, p):
    """Two-branch gate: global pooled bottleneck + local pointwise bottleneck.

    `p` maps the names global_fc1/global_fc2/local_fc1/local_fc2 to (w, b)
    numpy pairs taken from the module under test.
    """
    pooled = x.mean(axis=(2, 3), keepdims=True)
    g = conv2d(np.maximum(conv2d(pooled, *p["global_fc1"]), 0.0), *p["global_fc2"])
    l = conv2d(np.maximum(conv2d(x, *p["local_fc1"]), 0.0), *p["local_fc2"])
    return sigmoid(g + l)


def morphological_boundary(mask):
    """Foreground minus its 3x3 erosion; border treated as replicated,
    i.e. only in-image foreground/background transitions count."""
    m = np.asarray(mask).astype(bool)
    eroded = ndimage.binary_erosion(m, structure=np.ones((3, 3), bool), border_value=1)
    return (m & ~eroded).astype(np.uint8)


def count_dice(pred, gt):
    """Brute-force per-pixel counting Dice."""
    inter = 0
    p_count = 0
    g_count = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            p = bool(pred[i, j])
            g = bool(gt[i, j])
            inter += p and g
            p_count += p
            g_count += g
    if p_count + g_count == 0:
        return 1.0
    return 2.0 * inter / (p_count + g_count)


def count_iou(pred, gt):
    inter = 0
    union = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            p = bool(pred[i, j])
            g = bool(gt[i, j])
            inter += p and g
            union += p or g
    if union == 0:
        return 1.0
    return inter / union


def count_mae(pred, gt):
    total = 0.0
    n = 0
    for i in range(pred.shape[0]):
        for j in range(pred.shape[1]):
            total += abs(float(pred[i, j]) - float(gt[i, j]))
            n += 1
    return total / n


def blob_mask(size, rng, sigma=6.0):
    """Random smooth blob mask used across boundary and metric tests."""
    noise = rng.random((size, size))
    smooth = ndimage.gaussian_filter(noise, sigma=sigma)
    return (smooth > np.median(smooth)).astype(np.uint8)
