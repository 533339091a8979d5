"""Softmax forward splatting of RGB-D views into target eye views.

Each source pixel is reprojected with its own inverse depth and scattered
into the 4 surrounding target pixels with bilinear footprint weights.
Collisions resolve by softmax weighting on an occlusion-aware importance
score derived from inverse depth, so nearer surfaces dominate. Pixels no
source maps to stay holes; nothing is filled at this stage.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ShapeError
from .imaging import ImagePlane, RgbdView
from .rig import PinholeCamera, RigModel, reproject_grid

__all__ = [
    "SplatAccumulator",
    "SplatResult",
    "EyeSplats",
    "importance_weight",
    "softmax_splat",
    "splat_all",
]

WEIGHT_LOW = 4.0
WEIGHT_HIGH = 40.0


@dataclass
class SplatAccumulator:
    """Weighted RGB+inverse-depth sums and the accumulated weight."""

    numerator: np.ndarray  # (h, w, 4) float64
    denominator: np.ndarray  # (h, w) float64


@dataclass
class SplatResult:
    """Splatted color/inverse depth plus the coverage mask at a target view."""

    color: ImagePlane  # zeros at holes
    inv_depth: ImagePlane  # zeros at holes
    covered: ImagePlane  # 1 where any source contribution landed

    @property
    def hole_count(self) -> int:
        return int((self.covered.data == 0).sum())


@dataclass
class EyeSplats:
    """The two splats arriving at one eye: one from each input camera."""

    from_left: SplatResult
    from_right: SplatResult


def importance_weight(inv_depth) -> ImagePlane:
    """Map inverse depth affinely to the importance range [4, 40].

    Uses the plane's own min/max; a constant map (max == min) degenerates
    to the low end of the range everywhere.
    """
    d = inv_depth.data if isinstance(inv_depth, ImagePlane) else np.asarray(inv_depth)
    d = d.astype(np.float64)
    d_min, d_max = float(d.min()), float(d.max())
    if d_max == d_min:
        return ImagePlane(np.full(d.shape, WEIGHT_LOW, dtype=np.float32))
    w = 36.0 * ((d - d_min) / (d_max - d_min) + 1.0 / 9.0)
    return ImagePlane(w.astype(np.float32))


def _finalize(acc: SplatAccumulator) -> SplatResult:
    covered = acc.denominator > 0.0
    safe = np.where(covered, acc.denominator, 1.0)
    rgbd = acc.numerator / safe[..., None]
    rgbd[~covered] = 0.0
    return SplatResult(
        color=ImagePlane(rgbd[..., :3].astype(np.float32)),
        inv_depth=ImagePlane(rgbd[..., 3].astype(np.float32)),
        covered=ImagePlane(covered.astype(np.float32)),
    )


def softmax_splat(view: RgbdView, src_cam: PinholeCamera, dst_cam: PinholeCamera) -> SplatResult:
    """Forward-splat a (sharpened) RGB-D view from src_cam into dst_cam."""
    if (view.color.height, view.color.width) != (src_cam.height, src_cam.width):
        raise ShapeError("view size does not match the source camera")
    inv_depth = view.inv_depth.data
    x_map, y_map, valid = reproject_grid(src_cam, dst_cam, inv_depth)

    w = importance_weight(view.inv_depth).data.astype(np.float64)
    exp_w = np.exp(w - w.max())

    numer = np.zeros((dst_cam.height, dst_cam.width, 4), dtype=np.float64)
    denom = np.zeros((dst_cam.height, dst_cam.width), dtype=np.float64)
    _kernels.splat_accumulate(
        x_map,
        y_map,
        valid,
        view.color.data,
        inv_depth,
        exp_w,
        numer,
        denom,
    )
    return _finalize(SplatAccumulator(numer, denom))


def splat_all(left: RgbdView, right: RgbdView, rig: RigModel):
    """Warp both (sharpened) input views to both eye views.

    Returns {"eye_left": EyeSplats, "eye_right": EyeSplats}; the four splats
    are independent.
    """
    results = {}
    for eye_name, eye_cam in (("eye_left", rig.eye_left), ("eye_right", rig.eye_right)):
        results[eye_name] = EyeSplats(
            from_left=softmax_splat(left, rig.cam_left, eye_cam),
            from_right=softmax_splat(right, rig.cam_right, eye_cam),
        )
    return results
