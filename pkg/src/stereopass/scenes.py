"""Deterministic synthetic renderer with exact RGB-D ground truth.

Scenes are stacks of textured fronto-parallel planes (world z = const), so
per-pixel inverse depth is exact and visibility can be answered in closed
form by segment/plane intersection. That makes this module the trusted
oracle for depth estimation, warping, disocclusion analysis, and metric
evaluation. Textures are procedural and world-anchored: rendering the same
scene from two viewpoints samples the *same* continuous texture, exactly.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import ConfigError, ImageIOError
from .imaging import ImagePlane, RgbdView, save_color, save_pfm
from .rig import PinholeCamera, RigModel, build_rig

__all__ = [
    "TextureSpec",
    "PlaneLayer",
    "SceneSpec",
    "render",
    "PassthroughCase",
    "render_passthrough_case",
    "generate_dataset",
    "random_scene",
]


@dataclass(frozen=True)
class TextureSpec:
    kind: str  # checker | gradient | value_noise
    scale: float  # meters per cell / period
    color_a: tuple = (0.1, 0.1, 0.1)
    color_b: tuple = (0.9, 0.9, 0.9)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("checker", "gradient", "value_noise"):
            raise ConfigError(f"unknown texture kind {self.kind!r}")
        if self.scale <= 0:
            raise ConfigError("texture scale must be positive")


@dataclass(frozen=True)
class PlaneLayer:
    """Fronto-parallel textured plane; extent None means unbounded."""

    depth: float  # meters, world z
    texture: TextureSpec
    extent: tuple | None = None  # (x0, x1, y0, y1) meters

    def __post_init__(self):
        if self.depth <= 0:
            raise ConfigError("layer depth must be positive")
        if self.extent is not None:
            x0, x1, y0, y1 = self.extent
            if not (x0 < x1 and y0 < y1):
                raise ConfigError("layer extent is degenerate")


@dataclass(frozen=True)
class SceneSpec:
    """Ordered layers, near to far; the last must be an unbounded background."""

    layers: tuple
    seed: int = 0

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("scene needs at least one layer")
        depths = [l.depth for l in self.layers]
        if any(b <= a for a, b in zip(depths, depths[1:])):
            raise ConfigError("layer depths must be strictly increasing")
        if self.layers[-1].extent is not None:
            raise ConfigError("last layer must be an unbounded background")


def _hash01(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic integer-lattice hash to [0, 1) (splitmix-style)."""
    seed_mix = np.uint64((seed * 0xD6E8FEB86659FD93) % (1 << 64))
    h = (
        ix.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        ^ iy.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        ^ seed_mix
    )
    h ^= h >> np.uint64(30)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(27)
    h *= np.uint64(0x94D049BB133111EB)
    h ^= h >> np.uint64(31)
    return (h >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def _texture_color(tex: TextureSpec, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    ca = np.asarray(tex.color_a, dtype=np.float64)
    cb = np.asarray(tex.color_b, dtype=np.float64)
    if tex.kind == "checker":
        cells = np.floor(px / tex.scale) + np.floor(py / tex.scale)
        t = (cells.astype(np.int64) % 2).astype(np.float64)
    elif tex.kind == "gradient":
        t = 0.5 - 0.5 * np.cos(2.0 * np.pi * px / tex.scale)
    else:  # value_noise, smoothstep-interpolated lattice hash
        gx = px / tex.scale
        gy = py / tex.scale
        ix = np.floor(gx)
        iy = np.floor(gy)
        fx = gx - ix
        fy = gy - iy
        sx = fx * fx * (3.0 - 2.0 * fx)
        sy = fy * fy * (3.0 - 2.0 * fy)
        ix = ix.astype(np.int64)
        iy = iy.astype(np.int64)
        v00 = _hash01(ix, iy, tex.seed)
        v10 = _hash01(ix + 1, iy, tex.seed)
        v01 = _hash01(ix, iy + 1, tex.seed)
        v11 = _hash01(ix + 1, iy + 1, tex.seed)
        t = (v00 * (1 - sx) + v10 * sx) * (1 - sy) + (v01 * (1 - sx) + v11 * sx) * sy
    return ca + (cb - ca) * t[..., None]


def render(scene: SceneSpec, cam: PinholeCamera):
    """Render color, exact inverse depth, and per-pixel layer labels.

    Raises ConfigError if the camera sits at or beyond any layer plane, or
    if any pixel ray points away from the planes.
    """
    center = cam.center
    for layer in scene.layers:
        if center[2] >= layer.depth:
            raise ConfigError(
                f"camera at z={center[2]:.3f} is not in front of layer at z={layer.depth}"
            )
    rays_cam = cam.pixel_rays()
    rays_world = rays_cam @ cam.rotation  # row-vector form of R^T @ r
    if (rays_world[..., 2] <= 1e-9).any():
        raise ConfigError("camera orientation points rays away from the scene planes")

    n = len(scene.layers)
    plane_z = np.array([l.depth for l in scene.layers], dtype=np.float64)
    extents = np.zeros((n, 4), dtype=np.float64)
    for i, l in enumerate(scene.layers):
        extents[i] = l.extent if l.extent is not None else (0, 0, 0, 0)

    h, w = cam.height, cam.width
    point_xy = np.empty((h, w, 2), dtype=np.float64)
    inv_depth = np.empty((h, w), dtype=np.float64)
    label = np.empty((h, w), dtype=np.int64)
    _kernels.render_layers(
        np.ascontiguousarray(rays_world[..., 0]),
        np.ascontiguousarray(rays_world[..., 1]),
        np.ascontiguousarray(rays_world[..., 2]),
        center[0],
        center[1],
        center[2],
        plane_z,
        extents,
        point_xy,
        inv_depth,
        label,
    )

    color = np.zeros((h, w, 3), dtype=np.float64)
    for i, layer in enumerate(scene.layers):
        sel = label == i
        if sel.any():
            color[sel] = _texture_color(layer.texture, point_xy[sel, 0], point_xy[sel, 1])
    view = RgbdView(
        ImagePlane(np.clip(color, 0.0, 1.0).astype(np.float32)),
        ImagePlane(inv_depth.astype(np.float32)),
    )
    return view, label


def _world_points(cam: PinholeCamera, inv_depth: np.ndarray) -> np.ndarray:
    """Recover world hit points from a rendered view's exact inverse depth."""
    rays_world = cam.pixel_rays() @ cam.rotation
    z_cam = 1.0 / inv_depth.astype(np.float64)
    return cam.center[None, None, :] + rays_world * z_cam[..., None]


def _visible_from(points: np.ndarray, labels: np.ndarray, scene: SceneSpec, cam: PinholeCamera) -> np.ndarray:
    """Exact visibility of world points from a camera.

    A point is visible when it projects inside the image and no strictly
    nearer finite layer blocks the segment from the camera center.
    """
    u, v, z = cam.project_points(points)
    visible = (z > 0) & (u >= -0.5) & (u <= cam.width - 0.5) & (v >= -0.5) & (v <= cam.height - 0.5)
    c = cam.center
    seg = points - c[None, None, :]
    for i, layer in enumerate(scene.layers[:-1]):
        if layer.extent is None:
            continue
        blockable = labels > i  # only layers strictly nearer than the hit
        with np.errstate(divide="ignore", invalid="ignore"):
            s = (layer.depth - c[2]) / seg[..., 2]
        qx = c[0] + s * seg[..., 0]
        qy = c[1] + s * seg[..., 1]
        x0, x1, y0, y1 = layer.extent
        blocked = (
            blockable
            & (s > 0)
            & (s < 1)
            & (qx >= x0)
            & (qx <= x1)
            & (qy >= y0)
            & (qy <= y1)
        )
        visible &= ~blocked
    return visible


@dataclass
class PassthroughCase:
    """Inputs, eye ground truths, and analytic disocclusion masks."""

    input_left: RgbdView
    input_right: RgbdView
    gt_eye_left: RgbdView
    gt_eye_right: RgbdView
    labels: dict  # per-view layer label maps
    disocc_left: ImagePlane  # eye_left pixels hidden from both inputs
    disocc_right: ImagePlane
    partial_left: ImagePlane = None  # hidden from at least one input
    partial_right: ImagePlane = None


def render_passthrough_case(scene: SceneSpec, rig: RigModel) -> PassthroughCase:
    """Render all four views and exact per-eye disocclusion masks."""
    views = {}
    labels = {}
    for name, cam in (
        ("input_left", rig.cam_left),
        ("input_right", rig.cam_right),
        ("eye_left", rig.eye_left),
        ("eye_right", rig.eye_right),
    ):
        views[name], labels[name] = render(scene, cam)

    masks = {}
    partial = {}
    for eye_name, cam in (("eye_left", rig.eye_left), ("eye_right", rig.eye_right)):
        pts = _world_points(cam, views[eye_name].inv_depth.data)
        vis_l = _visible_from(pts, labels[eye_name], scene, rig.cam_left)
        vis_r = _visible_from(pts, labels[eye_name], scene, rig.cam_right)
        masks[eye_name] = ImagePlane((~vis_l & ~vis_r).astype(np.float32))
        partial[eye_name] = ImagePlane((~vis_l | ~vis_r).astype(np.float32))

    return PassthroughCase(
        input_left=views["input_left"],
        input_right=views["input_right"],
        gt_eye_left=views["eye_left"],
        gt_eye_right=views["eye_right"],
        labels=labels,
        disocc_left=masks["eye_left"],
        disocc_right=masks["eye_right"],
        partial_left=partial["eye_left"],
        partial_right=partial["eye_right"],
    )


_PALETTES = [
    ((0.08, 0.10, 0.30), (0.95, 0.85, 0.40)),
    ((0.05, 0.30, 0.10), (0.90, 0.95, 0.90)),
    ((0.25, 0.05, 0.05), (0.95, 0.80, 0.75)),
    ((0.10, 0.10, 0.10), (0.95, 0.95, 0.95)),
    ((0.30, 0.15, 0.05), (0.55, 0.85, 0.95)),
]


def random_scene(
    rng: np.random.Generator,
    n_occluders: int | None = None,
    low_texture: bool = False,
    focal_px: float = 256.0,
) -> SceneSpec:
    """Draw a random layered scene with matchable texture contrast.

    ``n_occluders`` of None draws 1-3 occluders; 0 gives background only.
    ``low_texture`` produces a nearly flat background palette, exercising
    invalid-disparity handling downstream. Texture feature sizes are chosen
    relative to ``focal_px`` so rendered features span a consistent number
    of pixels at any resolution.
    """
    if n_occluders is None:
        n_occluders = int(rng.integers(1, 4))
    depths = np.sort(rng.uniform(0.45, 1.6, size=n_occluders))
    bg_depth = float(rng.uniform(2.2, 4.0))
    layers = []
    for d in depths:
        pal = _PALETTES[int(rng.integers(len(_PALETTES)))]
        half_w = rng.uniform(0.08, 0.45) * d
        half_h = rng.uniform(0.08, 0.45) * d
        cx = rng.uniform(-0.3, 0.3) * d
        cy = rng.uniform(-0.3, 0.3) * d
        layers.append(
            PlaneLayer(
                depth=float(d),
                extent=(cx - half_w, cx + half_w, cy - half_h, cy + half_h),
                texture=TextureSpec(
                    "value_noise",
                    scale=float(rng.uniform(6.0, 14.0) * d / focal_px),
                    color_a=pal[0],
                    color_b=pal[1],
                    seed=int(rng.integers(1 << 31)),
                ),
            )
        )
    if low_texture:
        bg_tex = TextureSpec(
            "value_noise", scale=12.0 * bg_depth / focal_px, color_a=(0.5, 0.5, 0.5),
            color_b=(0.52, 0.52, 0.52), seed=int(rng.integers(1 << 31)),
        )
    else:
        pal = _PALETTES[int(rng.integers(len(_PALETTES)))]
        bg_tex = TextureSpec(
            "value_noise", scale=float(rng.uniform(10.0, 28.0) * bg_depth / focal_px),
            color_a=pal[0], color_b=pal[1], seed=int(rng.integers(1 << 31)),
        )
    layers.append(PlaneLayer(depth=bg_depth, texture=bg_tex, extent=None))
    return SceneSpec(layers=tuple(layers), seed=int(rng.integers(1 << 31)))


def _scene_to_json(scene: SceneSpec) -> dict:
    return {
        "seed": scene.seed,
        "layers": [
            {
                "depth": l.depth,
                "extent": list(l.extent) if l.extent else None,
                "texture": {
                    "kind": l.texture.kind,
                    "scale": l.texture.scale,
                    "color_a": list(l.texture.color_a),
                    "color_b": list(l.texture.color_b),
                    "seed": l.texture.seed,
                },
            }
            for l in scene.layers
        ],
    }


def scene_from_json(obj: dict) -> SceneSpec:
    layers = tuple(
        PlaneLayer(
            depth=l["depth"],
            extent=tuple(l["extent"]) if l["extent"] else None,
            texture=TextureSpec(
                kind=l["texture"]["kind"],
                scale=l["texture"]["scale"],
                color_a=tuple(l["texture"]["color_a"]),
                color_b=tuple(l["texture"]["color_b"]),
                seed=l["texture"]["seed"],
            ),
        )
        for l in obj["layers"]
    )
    return SceneSpec(layers=layers, seed=obj["seed"])


def generate_dataset(
    out_dir,
    count: int = 10,
    resolution: tuple = (512, 512),
    seed: int = 0,
    baseline: float = 0.10,
    hmd_thickness: float = 0.093,
    ipd_range: tuple = (0.048, 0.080),
    n_occluders: int | None = None,
) -> dict:
    """Write ``count`` randomized passthrough cases and a manifest.

    Layout per case: input/eye PNGs, matching inverse-depth PFMs, per-eye
    full-disocclusion mask PFMs. Eye baselines span ``ipd_range``; the last
    case uses a low-texture background. Fully reproducible from ``seed``.
    ``n_occluders`` fixes the occluder count per scene (None = random 1-3).
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ImageIOError(f"{out}: cannot create dataset directory ({exc})") from exc

    w, h = resolution
    rng = np.random.default_rng(seed)
    ipds = np.linspace(ipd_range[0], ipd_range[1], count) if count > 1 else [ipd_range[0]]
    manifest = {"version": 1, "seed": seed, "resolution": [w, h], "cases": []}

    for idx in range(count):
        ipd = float(ipds[idx])
        x_off = (baseline - ipd) / 2.0
        phi = 2.0 * np.arctan2(x_off, hmd_thickness)
        focal = w / 2.0  # 90 degree horizontal field of view
        rig = build_rig(hmd_thickness, x_off, ipd, phi, focal, w, h)
        scene = random_scene(
            rng,
            n_occluders=n_occluders,
            low_texture=(idx == count - 1 and count > 1),
            focal_px=focal,
        )
        case = render_passthrough_case(scene, rig)

        name = f"case_{idx:03d}"
        cdir = out / name
        cdir.mkdir(exist_ok=True)
        save_color(case.input_left.color, cdir / "input_l.png")
        save_color(case.input_right.color, cdir / "input_r.png")
        save_color(case.gt_eye_left.color, cdir / "eye_l_gt.png")
        save_color(case.gt_eye_right.color, cdir / "eye_r_gt.png")
        save_pfm(case.input_left.inv_depth, cdir / "input_l.pfm")
        save_pfm(case.input_right.inv_depth, cdir / "input_r.pfm")
        save_pfm(case.gt_eye_left.inv_depth, cdir / "eye_l_gt.pfm")
        save_pfm(case.gt_eye_right.inv_depth, cdir / "eye_r_gt.pfm")
        save_pfm(case.disocc_left, cdir / "disocc_l.pfm")
        save_pfm(case.disocc_right, cdir / "disocc_r.pfm")

        manifest["cases"].append(
            {
                "name": name,
                "rig": {
                    "hmd_thickness": hmd_thickness,
                    "camera_offset": x_off,
                    "ipd": ipd,
                    "half_angle": phi,
                    "focal_px": focal,
                    "width": w,
                    "height": h,
                },
                "scene": _scene_to_json(scene),
            }
        )

    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return manifest
