"""Disparity estimation for rectified stereo pairs.

The neural disparity stage is replaced by a pluggable provider. The default
is a classic semi-global matcher (5x5 census transform, Hamming costs,
8-path aggregation, left/right consistency check, parabolic sub-pixel
refinement). Ground-truth injection and external PFM files are the other
two provider kinds, selected through :class:`DepthProviderConfig`.

Disparity convention: for a left-view disparity d, the matching right-view
column is x - d, so d >= 0 everywhere.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError, ProviderError, ShapeError
from .imaging import ImagePlane, load_pfm

__all__ = [
    "DisparityMap",
    "DepthProviderConfig",
    "census_transform",
    "sgm_match",
    "estimate_disparity_pair",
    "disparity_to_inverse_depth",
    "fill_invalid",
    "provide_inverse_depth",
]

_CENSUS_RADIUS = 2  # 5x5 window, 24 neighbor bits
_MAX_HAMMING = 24.0


@dataclass
class DisparityMap:
    """Per-pixel horizontal disparity with an explicit validity mask."""

    data: np.ndarray  # (h, w) float32, pixels
    valid: np.ndarray  # (h, w) bool

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float32)
        self.valid = np.asarray(self.valid, dtype=bool)
        if self.data.shape != self.valid.shape:
            raise ShapeError("disparity and validity shapes differ")

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean())


@dataclass
class DepthProviderConfig:
    kind: str = "sgm"  # sgm | ground_truth | external_file
    d_max: int = 128
    p1: float = 8.0
    p2: float = 96.0
    lr_check_threshold: float = 1.0
    # matches are ambiguous (and rejected) unless the best aggregated cost
    # beats every non-neighboring disparity by this margin
    uniqueness_margin: float = 1.0
    # external_file provider only: PFM disparity maps per view
    left_path: str | None = None
    right_path: str | None = None

    def __post_init__(self):
        if self.kind not in ("sgm", "ground_truth", "external_file"):
            raise ConfigError(f"unknown depth provider kind: {self.kind!r}")
        if not (0 < self.p1 < self.p2):
            raise ConfigError("need 0 < P1 < P2")
        if self.d_max < 1:
            raise ConfigError("d_max must be >= 1")


def _to_gray(img) -> np.ndarray:
    arr = img.data if isinstance(img, ImagePlane) else np.asarray(img, np.float32)
    if arr.ndim == 2:
        return arr.astype(np.float32)
    return (
        0.2126 * arr[..., 0] + 0.7152 * arr[..., 1] + 0.0722 * arr[..., 2]
    ).astype(np.float32)


def census_transform(gray: np.ndarray) -> np.ndarray:
    """5x5 census descriptor per pixel: bit set where neighbor < center.

    Borders are handled by clamp-to-edge padding; a constant patch yields a
    zero descriptor.
    """
    gray = np.asarray(gray, dtype=np.float32)
    r = _CENSUS_RADIUS
    padded = np.pad(gray, r, mode="edge")
    h, w = gray.shape
    desc = np.zeros((h, w), dtype=np.uint32)
    bit = 0
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            if dy == 0 and dx == 0:
                continue
            neighbor = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            desc |= (neighbor < gray).astype(np.uint32) << np.uint32(bit)
            bit += 1
    return desc


def _cost_volume(census_src: np.ndarray, census_dst: np.ndarray, d_max: int) -> np.ndarray:
    """Hamming matching costs, shape (h, w, d_max+1); dst column = x - d.

    Candidates that fall outside the other image get a neutral zero cost;
    the left/right consistency check rejects any winner among them.
    """
    h, w = census_src.shape
    vol = np.zeros((h, w, d_max + 1), dtype=np.float32)
    for d in range(d_max + 1):
        if d >= w:
            break
        diff = census_src[:, d:] ^ census_dst[:, : w - d]
        vol[:, d:, d] = np.bitwise_count(diff).astype(np.float32)
    return vol


_DIRECTIONS = [(0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1)]


def _aggregate_one(cost: np.ndarray, dy: int, dx: int, p1: float, p2: float) -> np.ndarray:
    """Dynamic-programming path aggregation along one direction (dy, dx)."""
    h, w, nd = cost.shape
    out = np.empty_like(cost)
    big = np.float32(1e9)

    if dx != 0:
        steps = range(w) if dx > 0 else range(w - 1, -1, -1)
        axis_len, cross_len = w, h
    else:
        steps = range(h) if dy > 0 else range(h - 1, -1, -1)
        axis_len, cross_len = h, w

    prev = None
    for i, s in enumerate(steps):
        cur = cost[:, s, :] if dx != 0 else cost[s, :, :]
        if i == 0:
            line = cur.copy()
        else:
            shifted = prev
            shift = dy if dx != 0 else dx
            if shift != 0:
                shifted = np.full_like(prev, big)
                if shift > 0:
                    shifted[shift:] = prev[:-shift]
                else:
                    shifted[:shift] = prev[-shift:]
            m_prev = shifted.min(axis=1, keepdims=True)
            cand = np.minimum(shifted, m_prev + p2)
            cand[:, 1:] = np.minimum(cand[:, 1:], shifted[:, :-1] + p1)
            cand[:, :-1] = np.minimum(cand[:, :-1], shifted[:, 1:] + p1)
            line = cur + cand - m_prev
            # pixels whose predecessor left the image restart their path
            fresh = m_prev[:, 0] >= big
            if fresh.any():
                line[fresh] = cur[fresh]
        if dx != 0:
            out[:, s, :] = line
        else:
            out[s, :, :] = line
        prev = line
    return out


def _wta_subpixel(agg: np.ndarray, uniqueness_margin: float):
    """Winner-take-all disparity with parabolic sub-pixel refinement.

    Also flags ambiguous pixels: the winning cost must beat every disparity
    outside the winner's immediate neighborhood by the uniqueness margin.
    """
    d = np.argmin(agg, axis=2)
    h, w, nd = agg.shape
    yy, xx = np.mgrid[0:h, 0:w]
    disp = d.astype(np.float32)
    interior = (d > 0) & (d < nd - 1)
    c0 = agg[yy, xx, np.clip(d - 1, 0, nd - 1)]
    c1 = agg[yy, xx, d]
    c2 = agg[yy, xx, np.clip(d + 1, 0, nd - 1)]
    denom = c0 - 2.0 * c1 + c2
    with np.errstate(divide="ignore", invalid="ignore"):
        offset = (c0 - c2) / (2.0 * denom)
    ok = interior & (denom > 1e-9) & (np.abs(offset) <= 1.0)
    disp[ok] += offset[ok].astype(np.float32)

    masked = agg.copy()
    didx = np.arange(nd)[None, None, :]
    near_best = np.abs(didx - d[..., None]) <= 1
    masked[near_best] = np.inf
    second = masked.min(axis=2)
    unique = (second - c1) > uniqueness_margin
    return disp, unique


def _sgm_disparity(gray_src: np.ndarray, gray_dst: np.ndarray, cfg: DepthProviderConfig):
    census_s = census_transform(gray_src)
    census_d = census_transform(gray_dst)
    cost = _cost_volume(census_s, census_d, cfg.d_max)
    agg = np.zeros_like(cost)
    for dy, dx in _DIRECTIONS:
        agg += _aggregate_one(cost, dy, dx, cfg.p1, cfg.p2)
    return _wta_subpixel(agg, cfg.uniqueness_margin)


def _lr_validity(disp_a: np.ndarray, disp_b: np.ndarray, threshold: float) -> np.ndarray:
    """Mark pixels of disp_a whose match in the other view disagrees."""
    h, w = disp_a.shape
    xx = np.arange(w)[None, :].repeat(h, axis=0)
    target = np.rint(xx - disp_a).astype(np.int64)
    inside = (target >= 0) & (target < w)
    tgt = np.clip(target, 0, w - 1)
    other = np.take_along_axis(disp_b, tgt, axis=1)
    return inside & (np.abs(disp_a - other) <= threshold)


def _match_both(left_img, right_img, cfg: DepthProviderConfig):
    gl = _to_gray(left_img)
    gr = _to_gray(right_img)
    if gl.shape != gr.shape:
        raise ShapeError(f"stereo pair sizes differ: {gl.shape} vs {gr.shape}")
    if cfg.d_max >= gl.shape[1]:
        raise ConfigError("d_max must be smaller than the image width")
    disp_l, unique_l = _sgm_disparity(gl, gr, cfg)
    # right view matched through mirrored inputs so both views run the exact
    # same left-reference code path
    disp_r_m, unique_r_m = _sgm_disparity(gr[:, ::-1], gl[:, ::-1], cfg)
    disp_r = disp_r_m[:, ::-1]
    valid_l = unique_l & _lr_validity(disp_l, disp_r, cfg.lr_check_threshold)
    # for the right view the matching left column is x + d
    valid_r = (
        unique_r_m & _lr_validity(disp_r_m, disp_l[:, ::-1], cfg.lr_check_threshold)
    )[:, ::-1]
    return DisparityMap(disp_l, valid_l), DisparityMap(disp_r, valid_r)


def sgm_match(left_img, right_img, cfg: DepthProviderConfig) -> DisparityMap:
    """Semi-global matching; returns the left-view disparity map."""
    return _match_both(left_img, right_img, cfg)[0]


def estimate_disparity_pair(left_img, right_img, cfg: DepthProviderConfig):
    """Estimate a disparity map at each input view of a rectified pair."""
    if cfg.kind == "external_file":
        if not (cfg.left_path and cfg.right_path):
            raise ConfigError("external_file provider needs left_path and right_path")
        maps = []
        for p in (cfg.left_path, cfg.right_path):
            plane = load_pfm(p)
            if plane.channels != 1:
                raise ProviderError(f"{p}: disparity PFM must be single-channel")
            data = plane.data
            maps.append(DisparityMap(data, (data >= 0) & (data <= cfg.d_max)))
        return maps[0], maps[1]
    return _match_both(left_img, right_img, cfg)


def disparity_to_inverse_depth(disp: DisparityMap, focal_px: float, baseline_m: float) -> ImagePlane:
    """Convert disparity (pixels) to inverse depth (1/m): D = d / (f * b).

    Invalid pixels map to inverse depth 0; the validity mask itself is left
    untouched on the input.
    """
    if focal_px <= 0 or baseline_m <= 0:
        raise ConfigError("focal length and baseline must be positive")
    inv = disp.data / (focal_px * baseline_m)
    inv = np.where(disp.valid, inv, 0.0).astype(np.float32)
    return ImagePlane(inv)


def fill_invalid(disp: DisparityMap) -> DisparityMap:
    """Densify a disparity map.

    Invalid pixels take the smaller of the nearest valid disparities to
    their left and right (background-favoring); pixels with no valid value
    in their row fall back to the nearest valid pixel anywhere. A 3x3
    median pass removes isolated spikes afterwards.
    """
    if not disp.valid.any():
        raise ProviderError("cannot densify a fully invalid disparity map")
    h, w = disp.data.shape
    data = disp.data
    valid = disp.valid

    cols = np.arange(w)[None, :].repeat(h, axis=0)
    left_idx = np.where(valid, cols, -1)
    left_idx = np.maximum.accumulate(left_idx, axis=1)
    right_idx = np.where(valid, cols, w)
    right_idx = np.minimum.accumulate(right_idx[:, ::-1], axis=1)[:, ::-1]

    rows = np.arange(h)[:, None].repeat(w, axis=1)
    big = np.float32(np.inf)
    left_val = np.where(left_idx >= 0, data[rows, np.maximum(left_idx, 0)], big)
    right_val = np.where(right_idx < w, data[rows, np.minimum(right_idx, w - 1)], big)
    filled = np.where(valid, data, np.minimum(left_val, right_val))

    no_row_value = ~np.isfinite(filled)
    if no_row_value.any():
        _, (iy, ix) = ndimage.distance_transform_edt(
            ~valid, return_indices=True
        )
        filled[no_row_value] = data[iy[no_row_value], ix[no_row_value]]

    smoothed = ndimage.median_filter(filled.astype(np.float32), size=3, mode="nearest")
    return DisparityMap(smoothed, np.ones_like(valid))


def provide_inverse_depth(
    left_img,
    right_img,
    focal_px: float,
    baseline_m: float,
    cfg: DepthProviderConfig,
    ground_truth=None,
):
    """Produce dense inverse-depth maps at both input views.

    ``ground_truth`` (a pair of (h, w) inverse-depth arrays) is required by
    the ground_truth provider kind and passed through bit-identically.
    """
    if cfg.kind == "ground_truth":
        if ground_truth is None:
            raise ConfigError("ground_truth provider requires injected depth maps")
        dl, dr = ground_truth
        return np.asarray(dl, np.float32), np.asarray(dr, np.float32)
    map_l, map_r = estimate_disparity_pair(left_img, right_img, cfg)
    dense_l = fill_invalid(map_l)
    dense_r = fill_invalid(map_r)
    inv_l = disparity_to_inverse_depth(dense_l, focal_px, baseline_m)
    inv_r = disparity_to_inverse_depth(dense_r, focal_px, baseline_m)
    return inv_l.data, inv_r.data
