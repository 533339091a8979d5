"""Disocclusion filtering of splatted images at one target eye.

Holes in a splatted image come in two kinds. Partial disocclusions are
covered by the other input view and fixed by masked blending. Full
disocclusions are visible in neither input; those are filled with a
depth-assisted anisotropic low-pass that only averages colors classified
as background within a Gaussian-weighted local window, which keeps filled
regions temporally stable without hallucinating content.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConfigError, ShapeError
from .imaging import ImagePlane, gaussian_kernel
from .splat import EyeSplats, SplatResult

__all__ = [
    "OcclusionMasks",
    "FilterConfig",
    "occlusion_masks",
    "fill_partial",
    "fill_full",
    "filter_target_view",
    "FilteredView",
]


@dataclass
class OcclusionMasks:
    """Per-view hole masks at one eye and their intersection."""

    m_left: ImagePlane
    m_right: ImagePlane
    m_full: ImagePlane  # holes in both views


@dataclass
class FilterConfig:
    epsilon: float = 0.1  # inverse-depth threshold marking splat holes
    valid_floor: float = 0.01  # neighborhood validity cutoff
    kernel_size: int = 29
    kernel_sigma: float = 7.0

    def __post_init__(self):
        if not (0.0 < self.valid_floor < self.epsilon):
            raise ConfigError("need 0 < valid_floor < epsilon")

    def kernel(self) -> np.ndarray:
        return gaussian_kernel(self.kernel_size, self.kernel_sigma)


def occlusion_masks(inv_depth_l: ImagePlane, inv_depth_r: ImagePlane, cfg: FilterConfig) -> OcclusionMasks:
    """Mark splat holes: mask is 1 wherever splatted inverse depth < epsilon."""
    if inv_depth_l.data.shape != inv_depth_r.data.shape:
        raise ShapeError("splatted depth maps differ in size")
    m_l = (inv_depth_l.data < cfg.epsilon).astype(np.float32)
    m_r = (inv_depth_r.data < cfg.epsilon).astype(np.float32)
    return OcclusionMasks(
        m_left=ImagePlane(m_l),
        m_right=ImagePlane(m_r),
        m_full=ImagePlane(m_l * m_r),
    )


def fill_partial(color_l: ImagePlane, color_r: ImagePlane, masks: OcclusionMasks):
    """Cross-blend the two splatted images over each other's holes.

    P_l = (1 - M_l) * C_l + M_l * C_r, and symmetrically for P_r. After
    this step the only remaining holes are the fully disoccluded pixels.
    """
    m_l = masks.m_left.data[..., None]
    m_r = masks.m_right.data[..., None]
    p_l = (1.0 - m_l) * color_l.data + m_l * color_r.data
    p_r = (1.0 - m_r) * color_r.data + m_r * color_l.data
    return ImagePlane(p_l), ImagePlane(p_r)


def fill_full(p: ImagePlane, inv_depth: ImagePlane, m_full: ImagePlane, cfg: FilterConfig) -> ImagePlane:
    """Fill fully disoccluded pixels from background-classified neighbors.

    For each masked pixel, valid neighbors (inverse depth > valid_floor)
    inside the kernel window vote on a depth range; only neighbors at or
    below the range midpoint (the background side) contribute their
    Gaussian-weighted color, so foreground never bleeds into a mixed
    neighborhood and uniform background neighborhoods still fill. Pixels
    with no valid neighbor at all keep their input value; unmasked pixels
    are copied unchanged.
    """
    if p.channels != 3:
        raise ShapeError("fill_full expects a color image")
    out = np.empty_like(p.data)
    _kernels.full_disocclusion_filter(
        p.data.astype(np.float32),
        inv_depth.data.astype(np.float32),
        m_full.data.astype(np.float32),
        cfg.kernel().astype(np.float64),
        float(cfg.valid_floor),
        out,
    )
    return ImagePlane(out)


@dataclass
class FilteredView:
    """Disocclusion-filtered warped views at one eye, ready for fusion."""

    f_left: ImagePlane
    f_right: ImagePlane
    masks: OcclusionMasks = field(repr=False)


def filter_target_view(splats: EyeSplats, cfg: FilterConfig) -> FilteredView:
    """Run mask computation, partial blending, and full filtering at one eye."""
    masks = occlusion_masks(splats.from_left.inv_depth, splats.from_right.inv_depth, cfg)
    p_l, p_r = fill_partial(splats.from_left.color, splats.from_right.color, masks)
    f_l = fill_full(p_l, splats.from_left.inv_depth, masks.m_full, cfg)
    f_r = fill_full(p_r, splats.from_right.inv_depth, masks.m_full, cfg)
    return FilteredView(f_left=f_l, f_right=f_r, masks=masks)
