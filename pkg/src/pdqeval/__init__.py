"""Probability-based detection quality evaluation engine."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    BBox,
    Cov2,
    Detection,
    Frame,
    GroundTruthObject,
    LabelDist,
    PBox,
    SegMask,
    iou,
    mask_foreground_pixels,
)
from .heatmap import ProbMap, pixel_prob, render, support_region  # noqa: F401
from .metric import (  # noqa: F401
    FrameEvaluation,
    PairQuality,
    PdqReport,
    aggregate,
    evaluate,
    label_quality,
    match_frame,
    pairwise_pdq,
    spatial_quality,
)
from .postprocess import CovarianceMode, PostProcessConfig, run_pipeline  # noqa: F401
from .batch import FlatFrameBatch, evaluate_batch, postprocess_batch  # noqa: F401
from .errors import ValidationError  # noqa: F401
