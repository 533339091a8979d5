"""Image containers, color/float-map file I/O, and elementary raster ops.

Conventions used throughout the package:

* color images are float32 arrays of shape (h, w, 3), linear-light values
  in [0, 1] (8-bit PNG input is sRGB-decoded on load and re-encoded on save);
* scalar maps (inverse depth, disparity, masks, weights) are float32 arrays
  of shape (h, w); inverse depth is 1/meters with 0 meaning infinity or hole;
* masks contain only 0.0 and 1.0;
* continuous pixel coordinates place integer coordinates at pixel centers.

Border handling is clamp-to-edge unless an operation states otherwise.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ConfigError, ImageIOError, ShapeError

__all__ = [
    "ImagePlane",
    "PixelCoord",
    "RgbdView",
    "srgb_to_linear",
    "linear_to_srgb",
    "load_color",
    "save_color",
    "load_pfm",
    "save_pfm",
    "sobel_magnitude",
    "dilate",
    "gaussian_kernel",
]


@dataclass
class ImagePlane:
    """Dense 2D grid of scalar or RGB samples.

    ``data`` has shape (h, w) for single-channel planes and (h, w, 3) for
    color. Planes are treated as immutable values once constructed; every
    operation in this package returns fresh arrays.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim == 2:
            pass
        elif arr.ndim == 3 and arr.shape[2] == 3:
            pass
        else:
            raise ShapeError(f"expected (h, w) or (h, w, 3), got {arr.shape}")
        self.data = arr

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def samples(self) -> np.ndarray:
        """Row-major flat view of all samples (length = w*h*channels)."""
        return self.data.reshape(-1)

    def validate_color(self):
        if self.channels != 3:
            raise ShapeError("color plane must have 3 channels")
        if not np.all(np.isfinite(self.data)):
            raise ShapeError("color plane contains non-finite values")
        if self.data.min() < 0.0 or self.data.max() > 1.0:
            raise ShapeError("color plane values outside [0, 1]")
        return self

    def validate_mask(self):
        if self.channels != 1:
            raise ShapeError("mask plane must have 1 channel")
        bad = (self.data != 0.0) & (self.data != 1.0)
        if bad.any():
            raise ShapeError("mask plane contains values other than 0 and 1")
        return self


@dataclass(frozen=True)
class PixelCoord:
    """Continuous pixel position; integer coordinates lie at pixel centers."""

    x: float
    y: float


@dataclass
class RgbdView:
    """A color image paired with an inverse-depth map at one viewpoint."""

    color: ImagePlane
    inv_depth: ImagePlane

    def __post_init__(self):
        if self.color.channels != 3 or self.inv_depth.channels != 1:
            raise ShapeError("RgbdView needs 3-channel color and 1-channel depth")
        if self.color.data.shape[:2] != self.inv_depth.data.shape:
            raise ShapeError("color and inverse depth sizes differ")


def srgb_to_linear(c: np.ndarray) -> np.ndarray:
    """Decode sRGB-encoded values in [0, 1] to linear light."""
    c = np.asarray(c, dtype=np.float32)
    out = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    return out.astype(np.float32)


def linear_to_srgb(c: np.ndarray) -> np.ndarray:
    """Encode linear-light values in [0, 1] to sRGB."""
    c = np.clip(np.asarray(c, dtype=np.float32), 0.0, 1.0)
    out = np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)
    return out.astype(np.float32)


def load_color(path) -> ImagePlane:
    """Load an 8-bit RGB PNG and decode it to a linear-light color plane.

    Raises
    ------
    ImageIOError
        If the file cannot be read or is not 8-bit RGB.
    """
    try:
        with Image.open(path) as im:
            if im.mode not in ("RGB", "RGBA"):
                # Pillow reports 16-bit grayscale as I;16 etc.
                if im.mode in ("I;16", "I", "F", "I;16B"):
                    raise ImageIOError(f"{path}: unsupported bit depth (mode {im.mode})")
                im = im.convert("RGB")
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except ImageIOError:
        raise
    except Exception as exc:
        raise ImageIOError(f"{path}: cannot read image ({exc})") from exc
    return ImagePlane(srgb_to_linear(arr.astype(np.float32) / 255.0))


def save_color(plane: ImagePlane, path) -> None:
    """Encode a linear-light color plane to sRGB and write an 8-bit PNG."""
    if plane.channels != 3:
        raise ShapeError("save_color expects a 3-channel plane")
    srgb = linear_to_srgb(plane.data)
    arr = np.round(srgb * 255.0).astype(np.uint8)
    try:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")
    except Exception as exc:
        raise ImageIOError(f"{path}: cannot write image ({exc})") from exc


def save_pfm(plane: ImagePlane, path) -> None:
    """Write a float map as little-endian PFM (scale -1.0).

    Single-channel planes use the "Pf" variant; 3-channel planes "PF".
    Scanlines are stored bottom-to-top as the format prescribes.
    """
    data = plane.data
    magic = b"Pf" if plane.channels == 1 else b"PF"
    header = magic + b"\n%d %d\n-1.0\n" % (plane.width, plane.height)
    payload = np.flipud(data).astype("<f4").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise ImageIOError(f"{path}: cannot write PFM ({exc})") from exc


def load_pfm(path) -> ImagePlane:
    """Read a PFM float map written by :func:`save_pfm` (or compatible tools)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ImageIOError(f"{path}: cannot read PFM ({exc})") from exc

    try:
        magic, rest = raw.split(b"\n", 1)
        dims, rest = rest.split(b"\n", 1)
        scale_s, payload = rest.split(b"\n", 1)
        channels = {b"Pf": 1, b"PF": 3}[magic]
        w, h = (int(v) for v in dims.split())
        scale = float(scale_s)
    except (ValueError, KeyError) as exc:
        raise ImageIOError(f"{path}: malformed PFM header") from exc

    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    data = np.frombuffer(payload, dtype=dtype, count=-1)
    if data.size != count:
        raise ImageIOError(
            f"{path}: PFM payload has {data.size} floats, expected {count}"
        )
    shape = (h, w) if channels == 1 else (h, w, 3)
    return ImagePlane(np.flipud(data.reshape(shape)).astype(np.float32))


_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float32)
_SOBEL_Y = _SOBEL_X.T


def sobel_magnitude(plane: ImagePlane) -> ImagePlane:
    """Gradient magnitude sqrt(gx^2 + gy^2) of the standard 3x3 Sobel kernels.

    Borders use clamp-to-edge padding; a constant map yields zeros everywhere.
    """
    if plane.channels != 1:
        raise ShapeError("sobel_magnitude expects a 1-channel plane")
    gx = ndimage.correlate(plane.data, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(plane.data, _SOBEL_Y, mode="nearest")
    return ImagePlane(np.hypot(gx, gy))


def dilate(mask: ImagePlane, radius: int = 1, iterations: int = 1) -> ImagePlane:
    """Binary dilation with a square structuring element of side 2*radius+1."""
    if mask.channels != 1:
        raise ShapeError("dilate expects a 1-channel mask")
    if radius < 1 or iterations < 0:
        raise ConfigError("dilate requires radius >= 1 and iterations >= 0")
    if iterations == 0:
        return ImagePlane(mask.data.copy())
    structure = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    out = ndimage.binary_dilation(
        mask.data > 0.5, structure=structure, iterations=iterations
    )
    return ImagePlane(out.astype(np.float32))


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Zero-mean 2D Gaussian sampled at integer offsets, normalized to sum 1.

    ``size`` must be odd. ``size=1`` degenerates to [[1.0]].
    """
    if size < 1 or size % 2 == 0:
        raise ConfigError(f"gaussian_kernel size must be odd and >= 1, got {size}")
    if sigma <= 0:
        raise ConfigError("gaussian_kernel sigma must be positive")
    r = size // 2
    coords = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / (2.0 * sigma**2))
    return (g / g.sum()).astype(np.float64)
