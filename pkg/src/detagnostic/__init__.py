"""Dataset-agnostic object-detection training toolkit.

Pieces: COCO annotation ingestion and dataset statistics, a COCO-style AP
evaluator, corpus-level leaderboard aggregation, anchor re-clustering, an
adaptive plateau/early-stop controller with iteration patience, model
templates, and an NDJSON sidecar exposing the controller to trainers.
"""

from .anchors import (
    AnchorSet,
    BoxDims,
    KMeansTrace,
    anchor_quality,
    assign_to_heads,
    best_anchor_iou,
    cluster_details,
    collect_box_dims,
    kmeans_cluster,
)
from .boxes import BoundingBox, aligned_iou, iou
from .coco import (
    Annotation,
    Category,
    DatasetIndex,
    DatasetStats,
    ImageInfo,
    RegimeLabel,
    RegimeThresholds,
    classify_many,
    classify_regime,
    compute_stats,
    parse_coco,
    stats_from_splits,
)
from .controller import (
    ControllerConfig,
    ControllerState,
    Decision,
    EpochReport,
    TrainingController,
    observe_epoch,
    restore,
    snapshot,
)
from .corpus import (
    CorpusMetrics,
    CorpusRecord,
    aggregate,
    parse_corpus,
    render_leaderboard,
)
from .errors import (
    AnnotationParseError,
    DetagnosticError,
    LifecycleError,
    ReferentialIntegrityError,
    SequencingError,
    SnapshotError,
    TemplateNotFoundError,
    ValidationError,
)
from .evaluation import (
    COCO_IOU_THRESHOLDS,
    APResult,
    Detection,
    PRCurve,
    PRPoint,
    average_precision,
    coco_map,
    match_detections,
    parse_detections,
    precision_recall_curve,
)
from .sidecar import (
    Session,
    handle_line,
    make_tcp_server,
    serve_stdio,
    serve_stream,
    serve_tcp,
)
from .templates import (
    AnchorPolicy,
    AugmentationPlan,
    ModelTemplate,
    TrainingPlan,
    builtin_templates,
    get_template,
    instantiate,
    resize_geometry,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AnchorPolicy",
    "AnchorSet",
    "Annotation",
    "AnnotationParseError",
    "APResult",
    "AugmentationPlan",
    "BoundingBox",
    "BoxDims",
    "Category",
    "COCO_IOU_THRESHOLDS",
    "ControllerConfig",
    "ControllerState",
    "CorpusMetrics",
    "CorpusRecord",
    "DatasetIndex",
    "DatasetStats",
    "Decision",
    "DetagnosticError",
    "Detection",
    "EpochReport",
    "ImageInfo",
    "KMeansTrace",
    "LifecycleError",
    "ModelTemplate",
    "PRCurve",
    "PRPoint",
    "ReferentialIntegrityError",
    "RegimeLabel",
    "RegimeThresholds",
    "SequencingError",
    "Session",
    "SnapshotError",
    "TemplateNotFoundError",
    "TrainingController",
    "TrainingPlan",
    "ValidationError",
    "aggregate",
    "aligned_iou",
    "anchor_quality",
    "assign_to_heads",
    "average_precision",
    "best_anchor_iou",
    "builtin_templates",
    "classify_many",
    "classify_regime",
    "cluster_details",
    "coco_map",
    "collect_box_dims",
    "compute_stats",
    "get_template",
    "handle_line",
    "instantiate",
    "iou",
    "kmeans_cluster",
    "make_tcp_server",
    "match_detections",
    "observe_epoch",
    "parse_coco",
    "parse_corpus",
    "parse_detections",
    "precision_recall_curve",
    "render_leaderboard",
    "resize_geometry",
    "restore",
    "serve_stdio",
    "serve_stream",
    "serve_tcp",
    "snapshot",
    "stats_from_splits",
]
