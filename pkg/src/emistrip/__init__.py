"""Row-loss EMI corruption simulator for Bayer camera pipelines.

Models how interference on the sensor link discards raw readout rows, shifts
the remaining rows up, and leaves the demosaicer misinterpreting colors below
the loss point (the colored strips seen in attacked captures), then
quantifies the object-detection impact on paired Non-Attack/Under-Attack
datasets via mAP, creating/hiding effect counts, and attack success rate.
"""

from ._kernels import active_backend
from .attack_injector import (
    AttackDeviceMetadata,
    AttackSpec,
    InjectionResult,
    detect_strips,
    drop_and_shift,
    inject,
    predict_strip_bands,
    sample_corrupted_rows,
)
from .detection_data import (
    DatasetManifest,
    ImagePair,
    build_manifest,
    load_annotations,
    load_detections,
    load_manifest,
    merge_majority_vote,
    save_manifest,
)
from .errors import (
    DimensionError,
    EmistripError,
    EvaluationError,
    IngestionError,
    ManifestError,
    PairingError,
    ParameterError,
)
from .imageio import load_png, load_raw_pgm, save_png, save_raw_pgm
from .metrics import (
    EffectOverrides,
    EffectReport,
    EvalSummary,
    MatchResult,
    MatchSlice,
    average_precision,
    classify_effects,
    evaluate_dataset,
    iou,
    match_dataset,
    match_detections,
    mean_ap,
    mean_precision_recall,
    success_rate,
)
from .sensor_model import (
    BayerPattern,
    Channel,
    RawFrame,
    RgbImage,
    channel_at,
    demosaic,
    mosaic,
)
from .types import CLASSES, BoundingBox, ClassId, Detection, GroundTruthObject

__version__ = "0.1.0"

__all__ = [
    "AttackDeviceMetadata",
    "AttackSpec",
    "BayerPattern",
    "BoundingBox",
    "CLASSES",
    "Channel",
    "ClassId",
    "DatasetManifest",
    "Detection",
    "DimensionError",
    "EffectOverrides",
    "EffectReport",
    "EmistripError",
    "EvalSummary",
    "EvaluationError",
    "GroundTruthObject",
    "ImagePair",
    "IngestionError",
    "InjectionResult",
    "ManifestError",
    "MatchResult",
    "MatchSlice",
    "PairingError",
    "ParameterError",
    "RawFrame",
    "RgbImage",
    "active_backend",
    "average_precision",
    "build_manifest",
    "channel_at",
    "classify_effects",
    "demosaic",
    "detect_strips",
    "drop_and_shift",
    "evaluate_dataset",
    "inject",
    "iou",
    "load_annotations",
    "load_detections",
    "load_manifest",
    "load_png",
    "load_raw_pgm",
    "match_dataset",
    "match_detections",
    "mean_ap",
    "mean_precision_recall",
    "merge_majority_vote",
    "mosaic",
    "predict_strip_bands",
    "sample_corrupted_rows",
    "save_manifest",
    "save_png",
    "save_raw_pgm",
    "success_rate",
]
