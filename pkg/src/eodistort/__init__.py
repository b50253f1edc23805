"""Class-conditional image distortions and a robustness-evaluation harness
for land-cover segmentation.

The package distorts images one semantic class at a time (gray mixing,
within-class pixel shuffling, single-channel duplication, context masking),
sweeps the distortions over a dataset split against a pluggable predictor,
and reports per-class IoU degradation curves.
"""

from .dataset import (
    ChannelStats,
    DatasetManifest,
    class_pixel_histogram,
    compute_channel_means,
    load_manifest,
    validate_manifest,
)
from .distortions import (
    COLOR_DUP,
    CONTEXT_MASK,
    GRAY,
    KINDS,
    PIXEL_SWAP,
    DistortionSpec,
    RngStream,
    apply,
    color_duplication,
    context_mask,
    gray_scale_transform,
    pixel_swap,
    rgb_to_gray,
)
from .metrics import ConfusionMatrix, accumulate, iou, miou
from .predictors import (
    ConstantClassPredictor,
    ExternalPredictor,
    NearestColorPredictor,
    OraclePredictor,
    make_variance_predictor,
)
from .raster_io import (
    ImageBuffer,
    LabelMap,
    class_positions,
    load_image,
    load_labels,
    save_image,
    save_labels,
)
from .report import CurveSet, build_curves, read_csv, render_svg, to_csv
from .sweep import (
    SweepConfig,
    SweepReport,
    collect_sweep,
    load_sweep_config,
    run_sweep,
    stage_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelStats",
    "ConfusionMatrix",
    "ConstantClassPredictor",
    "CurveSet",
    "DatasetManifest",
    "DistortionSpec",
    "ExternalPredictor",
    "ImageBuffer",
    "LabelMap",
    "NearestColorPredictor",
    "OraclePredictor",
    "RngStream",
    "SweepConfig",
    "SweepReport",
    "GRAY",
    "PIXEL_SWAP",
    "COLOR_DUP",
    "CONTEXT_MASK",
    "KINDS",
    "accumulate",
    "apply",
    "build_curves",
    "class_pixel_histogram",
    "class_positions",
    "collect_sweep",
    "color_duplication",
    "compute_channel_means",
    "context_mask",
    "gray_scale_transform",
    "iou",
    "load_image",
    "load_labels",
    "load_manifest",
    "load_sweep_config",
    "make_variance_predictor",
    "miou",
    "pixel_swap",
    "read_csv",
    "render_svg",
    "rgb_to_gray",
    "run_sweep",
    "save_image",
    "save_labels",
    "stage_sweep",
    "to_csv",
    "validate_manifest",
]
