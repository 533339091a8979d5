"""From-scratch inference engine for the fusion U-Net.

The network fuses the two disocclusion-filtered warped views into the final
eye image. Topology: eleven 3x3 same-padding convolutions, each followed by
relu, arranged as a two-level U-Net with average-pool downsampling,
bilinear upsampling, and two concatenation skips; the output is clamped to
[0, 1]. Weights load from the NPFW binary format (also produced by the
trainer), validated layer-by-layer against the fixed layer plan.

Engine internals use NHWC float32 feature maps; inference is deterministic
and bit-stable across runs and thread counts.
"""

import struct
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ShapeError, WeightLoadError
from .imaging import ImagePlane

__all__ = [
    "ConvLayerSpec",
    "LAYER_PLAN",
    "FusionWeights",
    "FeatureMap",
    "conv2d",
    "avg_pool2",
    "bilinear_up2",
    "fuse",
    "load_weights",
    "save_weights",
    "random_weights",
    "total_parameter_count",
]

KERNEL = 3


@dataclass(frozen=True)
class ConvLayerSpec:
    name: str
    in_channels: int
    out_channels: int
    kernel_h: int = KERNEL
    kernel_w: int = KERNEL
    activation: str = "relu"


LAYER_PLAN = (
    ConvLayerSpec("conv0", 6, 16),
    ConvLayerSpec("conv1", 16, 16),
    ConvLayerSpec("conv2", 16, 32),
    ConvLayerSpec("conv3", 32, 32),
    ConvLayerSpec("conv4", 32, 64),
    ConvLayerSpec("conv5", 64, 64),
    ConvLayerSpec("conv6", 96, 32),
    ConvLayerSpec("conv7", 32, 32),
    ConvLayerSpec("conv8", 48, 16),
    ConvLayerSpec("conv9", 16, 16),
    ConvLayerSpec("conv10", 16, 3),
)


def total_parameter_count() -> int:
    return sum(
        s.in_channels * s.out_channels * s.kernel_h * s.kernel_w + s.out_channels
        for s in LAYER_PLAN
    )


class FeatureMap:
    """Channels-first (c, h, w) float32 activation grid."""

    __slots__ = ("data",)

    def __init__(self, data: np.ndarray):
        data = np.ascontiguousarray(data, dtype=np.float32)
        if data.ndim != 3:
            raise ShapeError("feature map must be (c, h, w)")
        self.data = data

    @property
    def channels(self) -> int:
        return self.data.shape[0]


@dataclass
class FusionWeights:
    """Ordered (kernel, bias) tensors matching LAYER_PLAN.

    Kernels are stored (out, in, kh, kw) float32, biases (out,).
    """

    kernels: list
    biases: list

    def __post_init__(self):
        if len(self.kernels) != len(LAYER_PLAN) or len(self.biases) != len(LAYER_PLAN):
            raise WeightLoadError(
                f"expected {len(LAYER_PLAN)} layers, got {len(self.kernels)}"
            )
        for spec, k, b in zip(LAYER_PLAN, self.kernels, self.biases):
            expect = (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)
            if k.shape != expect:
                raise WeightLoadError(
                    f"{spec.name}: kernel shape {k.shape} does not match {expect}"
                )
            if b.shape != (spec.out_channels,):
                raise WeightLoadError(f"{spec.name}: bias shape {b.shape} invalid")
            if not (np.isfinite(k).all() and np.isfinite(b).all()):
                raise WeightLoadError(f"{spec.name}: weights contain non-finite values")

    def parameter_count(self) -> int:
        return sum(k.size + b.size for k, b in zip(self.kernels, self.biases))


def conv2d(fmap: FeatureMap, kernel: np.ndarray, bias: np.ndarray, relu: bool = True) -> FeatureMap:
    """Same-padding (zeros) 3x3 convolution + bias, optionally relu."""
    c_out, c_in, kh, kw = kernel.shape
    if (kh, kw) != (KERNEL, KERNEL):
        raise ShapeError("only 3x3 kernels are supported")
    if fmap.channels != c_in:
        raise ShapeError(f"input has {fmap.channels} channels, kernel expects {c_in}")
    _, h, w = fmap.data.shape
    out = np.empty((c_out, h, w), dtype=np.float32)
    _kernels.conv3x3_relu(
        fmap.data, np.ascontiguousarray(kernel, dtype=np.float32),
        np.ascontiguousarray(bias, dtype=np.float32), relu, out,
    )
    return FeatureMap(out)


def avg_pool2(fmap: FeatureMap) -> FeatureMap:
    """2x2 mean pooling with stride 2; spatial dims must be even."""
    c, h, w = fmap.data.shape
    if h == 0 or w == 0:
        raise ShapeError("cannot pool an empty feature map")
    if h % 2 or w % 2:
        raise ShapeError(f"pooling needs even dimensions, got {h}x{w}")
    out = np.empty((c, h // 2, w // 2), dtype=np.float32)
    _kernels.avg_pool2_nchw(fmap.data, out)
    return FeatureMap(out)


def bilinear_up2(fmap: FeatureMap) -> FeatureMap:
    """2x bilinear upsampling with half-pixel centers and clamped edges.

    Output sample 2k blends 0.75*in[k] + 0.25*in[k-1] and sample 2k+1
    blends 0.75*in[k] + 0.25*in[k+1] along each axis; box-downsampling an
    upsampled linear ramp recovers it exactly away from the borders.
    """
    c, h, w = fmap.data.shape
    if h == 0 or w == 0:
        raise ShapeError("cannot upsample an empty feature map")
    out = np.empty((c, 2 * h, 2 * w), dtype=np.float32)
    _kernels.bilinear_up2_nchw(fmap.data, out)
    return FeatureMap(out)


def _concat(a: FeatureMap, b: FeatureMap) -> FeatureMap:
    if a.data.shape[1:] != b.data.shape[1:]:
        raise ShapeError("concat requires equal spatial sizes")
    return FeatureMap(np.concatenate([a.data, b.data], axis=0))


def _pad_to_multiple(img: np.ndarray, multiple: int):
    h, w = img.shape[1:]
    ph = (-h) % multiple
    pw = (-w) % multiple
    if ph == 0 and pw == 0:
        return img, (0, 0)
    padded = np.pad(img, ((0, 0), (0, ph), (0, pw)), mode="reflect")
    return padded, (ph, pw)


def fuse(f_left: ImagePlane, f_right: ImagePlane, weights: FusionWeights) -> ImagePlane:
    """Run the fusion U-Net on a pair of filtered views; output in [0, 1].

    Sizes not divisible by 4 are reflect-padded for the two pooling levels
    and cropped back afterwards.
    """
    if f_left.data.shape != f_right.data.shape:
        raise ShapeError("fusion inputs must share a size")
    if f_left.channels != 3:
        raise ShapeError("fusion inputs must be color images")
    x = np.concatenate(
        [f_left.data.transpose(2, 0, 1), f_right.data.transpose(2, 0, 1)], axis=0
    )
    x, (ph, pw) = _pad_to_multiple(x, 4)

    k, b = weights.kernels, weights.biases
    c0 = conv2d(FeatureMap(x), k[0], b[0])
    c1 = conv2d(c0, k[1], b[1])
    c2 = conv2d(avg_pool2(c1), k[2], b[2])
    c3 = conv2d(c2, k[3], b[3])
    c4 = conv2d(avg_pool2(c3), k[4], b[4])
    c5 = conv2d(c4, k[5], b[5])
    c6 = conv2d(_concat(bilinear_up2(c5), c3), k[6], b[6])
    c7 = conv2d(c6, k[7], b[7])
    c8 = conv2d(_concat(bilinear_up2(c7), c1), k[8], b[8])
    c9 = conv2d(c8, k[9], b[9])
    c10 = conv2d(c9, k[10], b[10])

    out = c10.data
    if ph or pw:
        out = out[:, : out.shape[1] - ph, : out.shape[2] - pw]
    return ImagePlane(np.clip(out.transpose(1, 2, 0), 0.0, 1.0))


_MAGIC = b"NPFW"
_VERSION = 1


def save_weights(weights: FusionWeights, path) -> None:
    """Write weights in the NPFW binary layout (all little-endian)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(LAYER_PLAN)))
        for spec, kern, bias in zip(LAYER_PLAN, weights.kernels, weights.biases):
            name = spec.name.encode("utf-8")
            fh.write(struct.pack("<H", len(name)))
            fh.write(name)
            fh.write(
                struct.pack(
                    "<IIII", spec.in_channels, spec.out_channels, spec.kernel_h, spec.kernel_w
                )
            )
            fh.write(kern.astype("<f4").tobytes())
            fh.write(bias.astype("<f4").tobytes())


def load_weights(path) -> FusionWeights:
    """Read and validate an NPFW weight file.

    Raises WeightLoadError naming the offending layer on any shape or
    format mismatch.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise WeightLoadError(f"{path}: cannot read weight file ({exc})") from exc

    view = memoryview(raw)
    off = 0

    def take(n, what):
        nonlocal off
        if off + n > len(view):
            raise WeightLoadError(f"{path}: truncated file while reading {what}")
        chunk = view[off : off + n]
        off += n
        return chunk

    if bytes(take(4, "magic")) != _MAGIC:
        raise WeightLoadError(f"{path}: bad magic, not an NPFW file")
    version, layer_count = struct.unpack("<II", take(8, "header"))
    if version != _VERSION:
        raise WeightLoadError(f"{path}: unsupported NPFW version {version}")
    if layer_count != len(LAYER_PLAN):
        raise WeightLoadError(
            f"{path}: file declares {layer_count} layers, expected {len(LAYER_PLAN)}"
        )

    kernels, biases = [], []
    for spec in LAYER_PLAN:
        (name_len,) = struct.unpack("<H", take(2, "layer name length"))
        name = bytes(take(name_len, "layer name")).decode("utf-8")
        if name != spec.name:
            raise WeightLoadError(f"{path}: layer {name!r} out of order, expected {spec.name!r}")
        c_in, c_out, kh, kw = struct.unpack("<IIII", take(16, f"{name} dims"))
        if (c_in, c_out, kh, kw) != (
            spec.in_channels,
            spec.out_channels,
            spec.kernel_h,
            spec.kernel_w,
        ):
            raise WeightLoadError(
                f"{path}: layer {name} declares {c_in}/{c_out} {kh}x{kw}, expected "
                f"{spec.in_channels}/{spec.out_channels} {spec.kernel_h}x{spec.kernel_w}"
            )
        n_w = c_out * c_in * kh * kw
        kern = np.frombuffer(take(4 * n_w, f"{name} weights"), dtype="<f4").reshape(
            c_out, c_in, kh, kw
        )
        bias = np.frombuffer(take(4 * c_out, f"{name} bias"), dtype="<f4")
        kernels.append(np.ascontiguousarray(kern, dtype=np.float32))
        biases.append(np.ascontiguousarray(bias, dtype=np.float32))
    if off != len(view):
        raise WeightLoadError(f"{path}: {len(view) - off} trailing bytes after last layer")
    return FusionWeights(kernels, biases)


def random_weights(seed: int = 0, scale: float | None = None) -> FusionWeights:
    """He-style random weights, mainly for self-tests and smoke runs."""
    rng = np.random.default_rng(seed)
    kernels, biases = [], []
    for spec in LAYER_PLAN:
        fan_in = spec.in_channels * spec.kernel_h * spec.kernel_w
        std = scale if scale is not None else np.sqrt(2.0 / fan_in)
        kernels.append(
            rng.normal(0.0, std, (spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w)).astype(np.float32)
        )
        biases.append(np.zeros(spec.out_channels, dtype=np.float32))
    return FusionWeights(kernels, biases)
