"""Waterline estimation from canoe segmentation masks, and the expert study around it."""

from .config import Config
from .errors import (
    DegenerateRegressionError,
    NoDetectionError,
    NoForegroundError,
    WaterlineError,
)
from .geometry import (
    GROUP_OFFSETS,
    Line,
    StudyGroup,
    WaterlineParams,
    line_to_params,
    params_to_line,
    perturb,
)
from .mask import Mask
from .pipeline import (
    PointSet,
    bottom_envelope,
    detect_waterline,
    extract_contour,
    filter_above,
    fit_line_ols,
)
from .segmentation import (
    CLASSES,
    Detection,
    DetectionSet,
    GroundTruthMask,
    f1_per_class,
    iou,
    load_detection_index,
    load_groundtruth_index,
    select_instance,
)
from .stats import (
    AcceptanceRange,
    AcceptanceResult,
    AnnotationRecord,
    DeviationRow,
    DeviationTable,
    GroundTruthLine,
    KruskalWallisResult,
    StudyReport,
    acceptance_check,
    aggregate_ground_truth,
    calibrate_u,
    deviations,
    kruskal_wallis,
    load_annotations,
    pooled_sigma,
    save_annotations,
    study_report,
)
from .study import (
    B_RESHOW_SUFFIX,
    GroupSizes,
    ImageRef,
    StudyTask,
    base_image_id,
    build_study,
    dataset_image_id,
    load_manifest,
    save_manifest,
    shuffle_for_expert,
)
from .synth import Notch, SynthSpec, generate, generate_batch

__all__ = [
    "B_RESHOW_SUFFIX",
    "CLASSES",
    "GROUP_OFFSETS",
    "AcceptanceRange",
    "AcceptanceResult",
    "AnnotationRecord",
    "Config",
    "DegenerateRegressionError",
    "Detection",
    "DetectionSet",
    "DeviationRow",
    "DeviationTable",
    "GroundTruthLine",
    "GroundTruthMask",
    "GroupSizes",
    "ImageRef",
    "KruskalWallisResult",
    "Line",
    "Mask",
    "NoDetectionError",
    "NoForegroundError",
    "Notch",
    "PointSet",
    "StudyGroup",
    "StudyReport",
    "StudyTask",
    "SynthSpec",
    "WaterlineError",
    "WaterlineParams",
    "acceptance_check",
    "aggregate_ground_truth",
    "base_image_id",
    "bottom_envelope",
    "build_study",
    "calibrate_u",
    "dataset_image_id",
    "detect_waterline",
    "deviations",
    "extract_contour",
    "f1_per_class",
    "filter_above",
    "fit_line_ols",
    "generate",
    "generate_batch",
    "iou",
    "kruskal_wallis",
    "line_to_params",
    "load_annotations",
    "load_detection_index",
    "load_groundtruth_index",
    "load_manifest",
    "params_to_line",
    "perturb",
    "pooled_sigma",
    "save_annotations",
    "save_manifest",
    "select_instance",
    "shuffle_for_expert",
    "study_report",
]

__version__ = "0.1.0"
