"""Image quality metrics: PSNR, SSIM, and the masked reconstruction loss.

The masked loss combines a weighted L1 term with SSIM, both averaged over
pixels outside the full-disocclusion mask. To make the loss exactly
invariant to content inside the mask (nothing there should be learned or
scored), the prediction is replaced by the reference inside the mask before
SSIM windows are evaluated; otherwise windows straddling the mask boundary
would leak masked pixels into unmasked scores.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import MetricError, ShapeError
from .imaging import ImagePlane

__all__ = ["MetricReport", "psnr", "ssim_map", "ssim_mean", "masked_loss"]

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


@dataclass
class MetricReport:
    psnr_db: float
    ssim_mean: float
    masked_loss: float
    total_pixels: int
    masked_pixels: int

    def to_dict(self) -> dict:
        return {
            "psnr_db": self.psnr_db,
            "ssim_mean": self.ssim_mean,
            "masked_loss": self.masked_loss,
            "total_pixels": self.total_pixels,
            "masked_pixels": self.masked_pixels,
        }


def _check_pair(a: ImagePlane, b: ImagePlane):
    if a.data.shape != b.data.shape:
        raise ShapeError(f"image sizes differ: {a.data.shape} vs {b.data.shape}")


def psnr(a: ImagePlane, b: ImagePlane, mask: np.ndarray = None) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images, capped at 99.

    ``mask`` (optional, (h, w) truthy = excluded) restricts the MSE to
    unmasked pixels.
    """
    _check_pair(a, b)
    da = a.data.astype(np.float64)
    db = b.data.astype(np.float64)
    err = (da - db) ** 2
    if mask is not None:
        keep = ~(np.asarray(mask) > 0.5)
        if not keep.any():
            raise MetricError("psnr undefined: every pixel masked")
        err = err[keep]
    mse = float(err.mean())
    if mse <= 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))


def _gaussian_window() -> np.ndarray:
    r = SSIM_WINDOW // 2
    coords = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(coords**2) / (2.0 * SSIM_SIGMA**2))
    g /= g.sum()
    return np.outer(g, g)


_WINDOW = _gaussian_window()


def _filt(x: np.ndarray) -> np.ndarray:
    return ndimage.correlate(x, _WINDOW, mode="reflect")


def ssim_map(a: ImagePlane, b: ImagePlane) -> ImagePlane:
    """Per-pixel SSIM (11x11 Gaussian window, sigma 1.5), channel-averaged."""
    _check_pair(a, b)
    da = a.data.astype(np.float64)
    db = b.data.astype(np.float64)
    if da.ndim == 2:
        da = da[..., None]
        db = db[..., None]
    maps = []
    for c in range(da.shape[2]):
        x, y = da[..., c], db[..., c]
        mu_x = _filt(x)
        mu_y = _filt(y)
        sxx = _filt(x * x) - mu_x * mu_x
        syy = _filt(y * y) - mu_y * mu_y
        sxy = _filt(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + SSIM_C1) * (2 * sxy + SSIM_C2)
        den = (mu_x**2 + mu_y**2 + SSIM_C1) * (sxx + syy + SSIM_C2)
        maps.append(num / den)
    return ImagePlane(np.mean(maps, axis=0).astype(np.float32))


def ssim_mean(a: ImagePlane, b: ImagePlane) -> float:
    return float(ssim_map(a, b).data.mean())


def masked_loss(output: ImagePlane, reference: ImagePlane, m_full: ImagePlane) -> float:
    """Reconstruction loss excluding fully disoccluded pixels.

    10 * mean(|output - reference|) - mean(ssim_map), both means over
    unmasked pixels; content inside the mask cannot change the value.
    Perfect reconstruction scores -1.0.
    """
    _check_pair(output, reference)
    mask = m_full.data > 0.5
    if output.data.shape[:2] != mask.shape:
        raise ShapeError("mask size does not match the images")
    keep = ~mask
    if not keep.any():
        raise MetricError("masked_loss undefined: every pixel masked")

    neutral = output.data.copy()
    neutral[mask] = reference.data[mask]
    l1 = float(np.abs(neutral.astype(np.float64) - reference.data.astype(np.float64))[keep].mean())
    smap = ssim_map(ImagePlane(neutral), reference).data
    return 10.0 * l1 - float(smap[keep].mean())


def evaluate_pair(output: ImagePlane, reference: ImagePlane, m_full: ImagePlane) -> MetricReport:
    """Bundle PSNR/SSIM/masked-loss for one synthesized view."""
    mask = m_full.data
    return MetricReport(
        psnr_db=psnr(output, reference),
        ssim_mean=ssim_mean(output, reference),
        masked_loss=masked_loss(output, reference, m_full),
        total_pixels=int(mask.size),
        masked_pixels=int((mask > 0.5).sum()),
    )
