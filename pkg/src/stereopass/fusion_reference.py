"""Naive reference forward pass for the fusion network.

Deliberately independent of the optimized engine in :mod:`fusion`: plain
quadruple-loop convolution and per-pixel pooling/upsampling arithmetic in
float64. Used as the equivalence oracle by the test suite and the
``fusion-selftest`` CLI command. Too slow for real images by design; run it
on small inputs only.
"""

import numpy as np

from .errors import ShapeError
from .imaging import ImagePlane


def naive_conv2d(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, relu: bool = True) -> np.ndarray:
    """3x3 zero-padded convolution, (h, w, c_in) -> (h, w, c_out).

    Explicit per-output-pixel, per-tap loops; only the input-channel sum is
    an inner product.
    """
    h, w, c_in = x.shape
    c_out = kernel.shape[0]
    if kernel.shape != (c_out, c_in, 3, 3):
        raise ShapeError("kernel shape mismatch in reference conv")
    x64 = x.astype(np.float64)
    k64 = kernel.astype(np.float64)
    out = np.zeros((h, w, c_out), dtype=np.float64)
    for y in range(h):
        for xx in range(w):
            for co in range(c_out):
                acc = float(bias[co])
                for ky in range(3):
                    for kx in range(3):
                        sy = y + ky - 1
                        sx = xx + kx - 1
                        if 0 <= sy < h and 0 <= sx < w:
                            acc += float(np.dot(x64[sy, sx], k64[co, :, ky, kx]))
                out[y, xx, co] = max(acc, 0.0) if relu else acc
    return out


def naive_pool2(x: np.ndarray) -> np.ndarray:
    h, w, c = x.shape
    out = np.zeros((h // 2, w // 2, c), dtype=np.float64)
    for y in range(h // 2):
        for xx in range(w // 2):
            for ci in range(c):
                out[y, xx, ci] = (
                    x[2 * y, 2 * xx, ci]
                    + x[2 * y, 2 * xx + 1, ci]
                    + x[2 * y + 1, 2 * xx, ci]
                    + x[2 * y + 1, 2 * xx + 1, ci]
                ) / 4.0
    return out


def naive_up2(x: np.ndarray) -> np.ndarray:
    """Half-pixel-center bilinear doubling, evaluated per output sample."""
    h, w, c = x.shape
    out = np.zeros((2 * h, 2 * w, c), dtype=np.float64)
    for y in range(2 * h):
        sy = (y + 0.5) / 2.0 - 0.5
        y0 = int(np.floor(sy))
        fy = sy - y0
        y0c = min(max(y0, 0), h - 1)
        y1c = min(max(y0 + 1, 0), h - 1)
        for xx in range(2 * w):
            sx = (xx + 0.5) / 2.0 - 0.5
            x0 = int(np.floor(sx))
            fx = sx - x0
            x0c = min(max(x0, 0), w - 1)
            x1c = min(max(x0 + 1, 0), w - 1)
            for ci in range(c):
                top = x[y0c, x0c, ci] * (1 - fx) + x[y0c, x1c, ci] * fx
                bot = x[y1c, x0c, ci] * (1 - fx) + x[y1c, x1c, ci] * fx
                out[y, xx, ci] = top * (1 - fy) + bot * fy
    return out


def naive_fuse(f_left: ImagePlane, f_right: ImagePlane, weights) -> ImagePlane:
    """Layer-by-layer reference forward pass (sizes divisible by 4 only)."""
    x = np.concatenate([f_left.data, f_right.data], axis=2).astype(np.float64)
    if x.shape[0] % 4 or x.shape[1] % 4:
        raise ShapeError("reference forward expects sizes divisible by 4")
    k = [kk.astype(np.float64) for kk in weights.kernels]
    b = [bb.astype(np.float64) for bb in weights.biases]

    c0 = naive_conv2d(x, k[0], b[0])
    c1 = naive_conv2d(c0, k[1], b[1])
    c2 = naive_conv2d(naive_pool2(c1), k[2], b[2])
    c3 = naive_conv2d(c2, k[3], b[3])
    c4 = naive_conv2d(naive_pool2(c3), k[4], b[4])
    c5 = naive_conv2d(c4, k[5], b[5])
    c6 = naive_conv2d(np.concatenate([naive_up2(c5), c3], axis=2), k[6], b[6])
    c7 = naive_conv2d(c6, k[7], b[7])
    c8 = naive_conv2d(np.concatenate([naive_up2(c7), c1], axis=2), k[8], b[8])
    c9 = naive_conv2d(c8, k[9], b[9])
    c10 = naive_conv2d(c9, k[10], b[10])
    return ImagePlane(np.clip(c10, 0.0, 1.0).astype(np.float32))
