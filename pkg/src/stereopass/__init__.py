"""Stereo-to-stereo passthrough view synthesis.

Reconstructs the images a user's eyes would see from a pair of
forward-facing stereo cameras: per-view disparity estimation, RGB-D
sharpening, softmax forward splatting into the eye views, two-stage
disocclusion filtering, and a lightweight fusion network executed by a
from-scratch inference engine. A deterministic synthetic-scene renderer
provides exact ground truth for verification, and a camera-placement
analysis quantifies how rig geometry bounds disocclusion.
"""

from .depth import DepthProviderConfig, DisparityMap, estimate_disparity_pair, sgm_match
from .disocclusion import FilterConfig, filter_target_view
from .errors import (
    ConfigError,
    ImageIOError,
    MetricError,
    ProviderError,
    ShapeError,
    StereopassError,
    WeightLoadError,
)
from .fusion import FusionWeights, fuse, load_weights, save_weights
from .imaging import ImagePlane, PixelCoord, RgbdView, load_color, load_pfm, save_color, save_pfm
from .metrics import masked_loss, psnr, ssim_map, ssim_mean
from .pipeline import PipelineConfig, PipelineResult, StageTiming, run_pipeline
from .rig import (
    PinholeCamera,
    RigModel,
    SceneDepthPair,
    build_rig,
    disocclusion_width,
    minimal_baseline,
    rectify_pair,
    reproject,
)
from .scenes import PlaneLayer, SceneSpec, TextureSpec, generate_dataset, render, render_passthrough_case
from .sharpen import SharpenConfig, sharpen_rgbd
from .splat import SplatResult, importance_weight, softmax_splat, splat_all

__version__ = "0.1.0"
