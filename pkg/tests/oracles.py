"""Shared oracle constructions for the test suite.

The disocclusion-width oracle builds a two-layer scene whose occluder edge
sits at a chosen angle from the right eye, derives the expected hidden band
on the background in closed form from similar triangles (independently of
the library's formula), and measures the rendered full-disocclusion mask.
"""

from dataclasses import dataclass

import numpy as np

from stereopass.rig import build_rig
from stereopass.scenes import PlaneLayer, SceneSpec, TextureSpec, render_passthrough_case


@dataclass
class BetaCase:
    scene: SceneSpec
    rig: object
    alpha: float
    z_near: float
    z_far: float
    band_start_u: float  # eye-image column where the hidden band starts
    band_end_u: float
    band_px: float  # expected band width in pixels
    beta_m: float  # expected band width in meters on the background
    center_row: int


def make_beta_case(t, x_off, e, alpha, z_near, z_far, focal, width, height) -> BetaCase:
    """Occluder edge at angle ``alpha`` from the right eye's optical axis.

    Similar-triangle shadow edges (computed here from first principles):
    an observer at horizontal position ox, depth oz sees the background
    shadow of the edge x_e end at  ox + (x_e - ox) * (z_f - oz) / (z_n - oz).
    """
    phi = 2.0 * alpha
    rig = build_rig(t, x_off, e, phi, focal, width, height)
    x_e = e / 2.0 + (z_near + t) * np.tan(alpha)

    tex = TextureSpec("value_noise", scale=0.05, seed=3)
    occluder = PlaneLayer(
        depth=z_near,
        extent=(x_e - 4.0, x_e, -3.0, 3.0),
        texture=TextureSpec("checker", scale=0.07, color_a=(0.8, 0.2, 0.2), color_b=(0.9, 0.8, 0.2)),
    )
    background = PlaneLayer(depth=z_far, texture=tex)
    scene = SceneSpec(layers=(occluder, background), seed=0)

    s_eye = e / 2.0 + (x_e - e / 2.0) * (z_far + t) / (z_near + t)
    cam_x = e / 2.0 + x_off
    s_cam = cam_x + (x_e - cam_x) * z_far / z_near
    beta = max(0.0, s_cam - s_eye)

    def to_u(world_x):  # right-eye projection at the background plane
        return (width - 1) / 2.0 + focal * (world_x - e / 2.0) / (z_far + t)

    return BetaCase(
        scene=scene,
        rig=rig,
        alpha=alpha,
        z_near=z_near,
        z_far=z_far,
        band_start_u=to_u(s_eye),
        band_end_u=to_u(min(s_cam, s_eye + max(beta, 0.0))),
        band_px=focal * beta / (z_far + t),
        beta_m=beta,
        center_row=(height - 1) // 2,
    )


def measured_band_px(case: BetaCase) -> float:
    """Count masked pixels of the center row near the predicted band."""
    rendered = render_passthrough_case(case.scene, case.rig)
    mask_row = rendered.disocc_right.data[case.center_row]
    w = mask_row.shape[0]
    lo = max(int(np.floor(case.band_start_u)) - 3, 0)
    hi = min(int(np.ceil(case.band_end_u)) + 4, w)
    return float(mask_row[lo:hi].sum()), rendered


def central_cone_bounds(case: BetaCase, width, height, focal):
    """Pixel box of the central cone (half-angle alpha both axes), with a
    1 px guard against boundary quantization."""
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    r = focal * np.tan(case.alpha)
    lo_u = int(np.ceil(cx - r)) + 1
    hi_u = int(np.floor(cx + r))
    lo_v = int(np.ceil(cy - r)) + 1
    hi_v = int(np.floor(cy + r))
    return lo_u, hi_u, max(lo_v, 0), min(hi_v, height)


def sample_beta_cases(n, seed, width=448, height=193, require_band=True):
    """Deterministically sample geometry configurations with measurable bands."""
    rng = np.random.default_rng(seed)
    focal = width / 2.0
    cases = []
    while len(cases) < n:
        t = rng.uniform(0.06, 0.12)
        e = rng.uniform(0.055, 0.07)
        alpha = rng.uniform(np.radians(4), np.radians(18))
        z_near = rng.uniform(0.4, 0.9)
        z_far = z_near * rng.uniform(1.8, 4.0)
        if require_band:
            x_off = rng.uniform(0.0, 0.9) * t * np.tan(alpha)
        else:
            x_off = t * np.tan(alpha) * rng.uniform(1.0, 1.6)
        case = make_beta_case(t, x_off, e, alpha, z_near, z_far, focal, width, height)
        if require_band and not (3.0 <= case.band_px <= 45.0):
            continue
        if case.band_end_u > width - 15 or case.band_start_u < width / 2 - 5:
            continue
        cases.append(case)
    return cases
