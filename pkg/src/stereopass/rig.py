"""Camera and rig modeling, reprojection, rectification, and the
camera-placement disocclusion analysis.

World frame convention: x to the right, y down, z forward into the scene.
The two input cameras sit on the rig's front plane at z = 0; the two target
eye views sit ``hmd_thickness`` meters behind them at z = -t. All four views
face straight ahead (+z) in a nominal rig; rectification handles the general
case of rotated cameras.

Poses map world to camera coordinates: p_cam = R @ p_world + t.
"""

from dataclasses import dataclass, replace
from io import StringIO
from itertools import product

import numpy as np

from .errors import ConfigError, ShapeError
from .imaging import ImagePlane, PixelCoord

__all__ = [
    "PinholeCamera",
    "RigModel",
    "SceneDepthPair",
    "build_rig",
    "disocclusion_width",
    "minimal_baseline",
    "reproject",
    "reproject_grid",
    "rectify_pair",
    "sweep_design_space",
    "sweep_to_csv",
    "SWEEP_CSV_HEADER",
]


_RAY_CACHE: dict = {}


@dataclass(frozen=True)
class PinholeCamera:
    """Pinhole camera with a rigid world-to-camera pose."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray  # (3, 3), world -> camera
    translation: np.ndarray  # (3,), world -> camera, meters

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ConfigError("focal lengths must be positive")
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if r.shape != (3, 3):
            raise ShapeError("rotation must be 3x3")
        if not np.allclose(r.T @ r, np.eye(3), rtol=0.0, atol=1e-9):
            raise ConfigError("rotation is not orthonormal within 1e-9")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @property
    def intrinsics(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def pixel_rays(self) -> np.ndarray:
        """Per-pixel ray directions in camera coordinates, shape (h, w, 3).

        Depends only on intrinsics, so grids are cached per intrinsics set;
        treat the returned array as read-only.
        """
        key = (self.fx, self.fy, self.cx, self.cy, self.width, self.height)
        cached = _RAY_CACHE.get(key)
        if cached is None:
            u = np.arange(self.width, dtype=np.float64)
            v = np.arange(self.height, dtype=np.float64)
            uu, vv = np.meshgrid(u, v)
            cached = np.stack(
                [(uu - self.cx) / self.fx, (vv - self.cy) / self.fy, np.ones_like(uu)],
                axis=-1,
            )
            cached.setflags(write=False)
            if len(_RAY_CACHE) > 16:
                _RAY_CACHE.clear()
            _RAY_CACHE[key] = cached
        return cached

    def project_points(self, pts_world: np.ndarray):
        """Project world points (..., 3) to pixel coords and camera depth."""
        p = pts_world @ self.rotation.T + self.translation
        z = p[..., 2]
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * p[..., 0] / z + self.cx
            v = self.fy * p[..., 1] / z + self.cy
        return u, v, z


def _forward_camera(center, fx, fy, cx, cy, width, height) -> PinholeCamera:
    c = np.asarray(center, dtype=np.float64)
    return PinholeCamera(fx, fy, cx, cy, width, height, np.eye(3), -c)


@dataclass(frozen=True)
class SceneDepthPair:
    """Near-occluder and background depths, meters from the camera plane.

    z_near == z_far is allowed as the degenerate single-plane case (no
    disocclusion possible).
    """

    z_near: float
    z_far: float

    def __post_init__(self):
        if not (0.0 < self.z_near <= self.z_far):
            raise ConfigError(f"need 0 < z_near <= z_far, got {self.z_near}, {self.z_far}")


@dataclass(frozen=True)
class RigModel:
    """Two input cameras on the front plane plus two target eye views.

    ``hmd_thickness`` (t) is the depth-axis camera/eye separation,
    ``camera_offset`` (x) the horizontal offset of each camera beyond its
    eye, ``ipd`` (e) the eye separation, and ``half_angle`` (phi) the
    angular region within which disocclusion is meant to be eliminated.
    """

    cam_left: PinholeCamera
    cam_right: PinholeCamera
    eye_left: PinholeCamera
    eye_right: PinholeCamera
    hmd_thickness: float
    camera_offset: float
    ipd: float
    half_angle: float

    def __post_init__(self):
        if self.hmd_thickness < 0:
            raise ConfigError("hmd_thickness must be >= 0")
        if not (0.0 <= self.half_angle < np.pi):
            raise ConfigError("half_angle must lie in [0, pi)")
        centers = np.stack(
            [c.center for c in (self.cam_left, self.cam_right, self.eye_left, self.eye_right)]
        )
        if not np.allclose(centers[:, 1], centers[0, 1], atol=1e-9):
            raise ConfigError("cameras and eyes must be vertically coplanar")
        if abs(centers[0, 0] + centers[1, 0]) > 1e-9 or abs(centers[2, 0] + centers[3, 0]) > 1e-9:
            raise ConfigError("cameras/eyes must be symmetric about the rig center")
        baseline = centers[1, 0] - centers[0, 0]
        if abs(baseline - (self.ipd + 2.0 * self.camera_offset)) > 1e-9:
            raise ConfigError("baseline must equal ipd + 2 * camera_offset")

    @property
    def baseline(self) -> float:
        return self.ipd + 2.0 * self.camera_offset


def build_rig(
    hmd_thickness: float,
    camera_offset: float,
    ipd: float,
    half_angle: float,
    focal_px: float,
    width: int,
    height: int,
) -> RigModel:
    """Construct a nominal forward-facing rig.

    Input cameras sit at (+-baseline/2, 0, 0); eyes at (+-ipd/2, 0, -t).
    All four views share the same intrinsics with the principal point at
    the image center.
    """
    b = ipd + 2.0 * camera_offset
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    mk = lambda cxr: _forward_camera(cxr, focal_px, focal_px, cx, cy, width, height)
    return RigModel(
        cam_left=mk((-b / 2.0, 0.0, 0.0)),
        cam_right=mk((b / 2.0, 0.0, 0.0)),
        eye_left=mk((-ipd / 2.0, 0.0, -hmd_thickness)),
        eye_right=mk((ipd / 2.0, 0.0, -hmd_thickness)),
        hmd_thickness=hmd_thickness,
        camera_offset=camera_offset,
        ipd=ipd,
        half_angle=half_angle,
    )


def disocclusion_width(rig: RigModel, depths: SceneDepthPair) -> float:
    """Width (meters, at the background plane) of the region visible to an
    eye but hidden from its camera, for an occluder edge at the rig's
    half-angle.

    Returns max(0, t*tan(phi/2) - x) * (z_far/z_near - 1); zero once the
    camera offset covers the eye's grazing ray.
    """
    t, x, phi = rig.hmd_thickness, rig.camera_offset, rig.half_angle
    reach = t * np.tan(phi / 2.0) - x
    return float(max(0.0, reach) * (depths.z_far / depths.z_near - 1.0))


def minimal_baseline(hmd_thickness: float, half_angle: float, ipd: float) -> float:
    """Smallest input-camera baseline that removes disocclusion inside the
    central cone of the given full angle: e + 2*t*tan(phi/2)."""
    return float(ipd + 2.0 * hmd_thickness * np.tan(half_angle / 2.0))


def reproject_grid(src: PinholeCamera, dst: PinholeCamera, inv_depth: np.ndarray):
    """Map every source pixel into the destination view.

    For inverse depth D, the destination homogeneous point of a source ray r
    is q = M r + D b with M = R2 R1^T and b = t2 - M t1, which degenerates to
    a rotation-only mapping at D = 0 (points at infinity).

    Returns (x_map, y_map, valid) float64/boolean arrays of the source shape;
    ``valid`` is False where the point lands behind the destination camera.
    """
    inv_depth = np.asarray(inv_depth, dtype=np.float64)
    if inv_depth.shape != (src.height, src.width):
        raise ShapeError("inverse depth shape must match the source camera")
    if (inv_depth < 0).any():
        raise ConfigError("inverse depth must be >= 0")
    rays = src.pixel_rays()
    m = dst.rotation @ src.rotation.T
    b = dst.translation - m @ src.translation
    q = rays @ m.T + inv_depth[..., None] * b
    z = q[..., 2]
    valid = z > 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        x_map = dst.fx * q[..., 0] / z + dst.cx
        y_map = dst.fy * q[..., 1] / z + dst.cy
    return x_map, y_map, valid


def reproject(coord: PixelCoord, inv_depth: float, src: PinholeCamera, dst: PinholeCamera):
    """Reproject one source pixel at the given inverse depth.

    Returns (PixelCoord, valid); invalid means the point lies behind the
    destination camera.
    """
    if inv_depth < 0:
        raise ConfigError("inverse depth must be >= 0")
    r = np.array(
        [(coord.x - src.cx) / src.fx, (coord.y - src.cy) / src.fy, 1.0]
    )
    m = dst.rotation @ src.rotation.T
    b = dst.translation - m @ src.translation
    q = m @ r + inv_depth * b
    if q[2] <= 1e-12:
        return PixelCoord(float("nan"), float("nan")), False
    return (
        PixelCoord(float(dst.fx * q[0] / q[2] + dst.cx), float(dst.fy * q[1] / q[2] + dst.cy)),
        True,
    )


def _bilinear_sample(img: np.ndarray, x_map: np.ndarray, y_map: np.ndarray) -> np.ndarray:
    """Sample img at continuous positions with clamp-to-edge behavior."""
    h, w = img.shape[:2]
    x = np.clip(x_map, 0.0, w - 1.0)
    y = np.clip(y_map, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None] if img.ndim == 3 else (x - x0)
    fy = (y - y0)[..., None] if img.ndim == 3 else (y - y0)
    top = img[y0, x0] * (1 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1 - fx) + img[y1, x1] * fx
    return (top * (1 - fy) + bot * fy).astype(img.dtype)


def _rectified_rotation(left: PinholeCamera, right: PinholeCamera) -> np.ndarray:
    c1, c2 = left.center, right.center
    base = c2 - c1
    norm = np.linalg.norm(base)
    if norm < 1e-12:
        raise ConfigError("cannot rectify a zero-baseline pair")
    e1 = base / norm
    z_avg = left.rotation[2] + right.rotation[2]
    z_avg = z_avg / np.linalg.norm(z_avg)
    e3 = z_avg - np.dot(z_avg, e1) * e1
    e3 = e3 / np.linalg.norm(e3)
    e2 = np.cross(e3, e1)
    return np.stack([e1, e2, e3])


def rectify_pair(left_img, right_img, rig: RigModel):
    """Resample an input pair so corresponding points share image rows.

    ``left_img``/``right_img`` may be color ImagePlanes or (color, inv_depth)
    tuples; inverse depth, when given, is resampled and re-expressed in the
    rectified camera frame. Returns (left_out, right_out, rectified_rig,
    (remap_left, remap_right)) where each remap table has shape (h, w, 2)
    holding source x/y coordinates for reuse on later frames.
    """
    r_rect = _rectified_rotation(rig.cam_left, rig.cam_right)
    fx = (rig.cam_left.fx + rig.cam_right.fx) / 2.0
    fy = (rig.cam_left.fy + rig.cam_right.fy) / 2.0
    cx = (rig.cam_left.cx + rig.cam_right.cx) / 2.0
    cy = (rig.cam_left.cy + rig.cam_right.cy) / 2.0

    def rect_cam(src: PinholeCamera) -> PinholeCamera:
        return PinholeCamera(
            fx, fy, cx, cy, src.width, src.height, r_rect, -r_rect @ src.center
        )

    new_left, new_right = rect_cam(rig.cam_left), rect_cam(rig.cam_right)

    outs, maps = [], []
    for src_cam, new_cam, img in (
        (rig.cam_left, new_left, left_img),
        (rig.cam_right, new_right, right_img),
    ):
        color, inv_depth = img if isinstance(img, tuple) else (img, None)
        rays = new_cam.pixel_rays()
        rel = src_cam.rotation @ new_cam.rotation.T
        d_src = rays @ rel.T
        with np.errstate(divide="ignore", invalid="ignore"):
            x_map = src_cam.fx * d_src[..., 0] / d_src[..., 2] + src_cam.cx
            y_map = src_cam.fy * d_src[..., 1] / d_src[..., 2] + src_cam.cy
        remap = np.stack([x_map, y_map], axis=-1)
        maps.append(remap)
        out_color = ImagePlane(_bilinear_sample(color.data, x_map, y_map))
        if inv_depth is None:
            outs.append(out_color)
        else:
            d_s = _bilinear_sample(inv_depth.data.astype(np.float64), x_map, y_map)
            # Re-express sampled depth along the rotated ray: scale factor is
            # the z of the source-frame ray direction per unit rectified z.
            z_ratio = d_src[..., 2]
            new_d = np.where(d_s > 0, d_s * z_ratio, 0.0)
            outs.append((out_color, ImagePlane(np.maximum(new_d, 0.0).astype(np.float32))))

    rect_rig = replace(
        rig, cam_left=new_left, cam_right=new_right
    )
    return outs[0], outs[1], rect_rig, (maps[0], maps[1])


SWEEP_CSV_HEADER = "t_m,x_m,e_m,phi_rad,z_near_m,z_far_m,beta_m"


def sweep_design_space(t_values, x_values, e_values, phi_values, depth_pairs):
    """Evaluate the disocclusion width over a parameter grid.

    Returns a list of (t, x, e, phi, z_near, z_far, beta) rows, ordered as
    the cartesian product of the inputs.
    """
    rows = []
    for t, x, e, phi, dp in product(t_values, x_values, e_values, phi_values, depth_pairs):
        rig = build_rig(t, x, e, phi, focal_px=500.0, width=64, height=64)
        beta = disocclusion_width(rig, dp)
        rows.append((t, x, e, phi, dp.z_near, dp.z_far, beta))
    return rows


def sweep_to_csv(rows) -> str:
    buf = StringIO()
    buf.write(SWEEP_CSV_HEADER + "\n")
    for r in rows:
        buf.write(",".join(format(v, ".9g") for v in r) + "\n")
    return buf.getvalue()
