"""Expression-imitation game platform.

Players imitate a target facial expression; a detector reads facial action
units (AUs) off each captured frame, the overlap with the target's AU set
becomes the score, and an explainer turns the set difference into plain-text
coaching.  The package also ships the data-collection side: an HTTP game
service with an append-only attempt log, dataset export, a small from-scratch
expression CNN for enrichment experiments, and trajectory statistics.
"""

from .core import (
    ALL_AUS,
    AU_NAMES,
    ActionUnit,
    AuSet,
    BadImage,
    BadLandmarks,
    EMPTY_AU_SET,
    Emotion,
    GrayImage,
    LandmarkSet,
    MimicLabError,
    N_LANDMARKS,
    RoundRecord,
    TargetEntry,
    UnknownAuCode,
    au_codes,
    au_set_from_codes,
)
from .explain import (
    AuDictionary,
    AuDiff,
    EmptyUniverse,
    Prescription,
    describe,
    diff,
    prescribe,
    score,
)
from .features import (
    AlignedFace,
    FEATURE_LENGTH,
    SimilarityTransform,
    align_face,
    compute_hog,
    convex_hull,
    extract_features,
    hull_mask,
    mask_face,
)
from .detector import (
    AUS_IN_ORDER,
    AuModel,
    AuTrainingSet,
    detect_aus,
    load_model,
    predict_probabilities,
    save_model,
    train,
)
from .game import GameEngine, RecordStore, create_app, load_records
from .forge import (
    CooccurrenceMatrix,
    ExportManifest,
    cooccurrence,
    export_dataset,
    filter_records,
    read_manifest,
    render_heatmap,
)
from .stats import (
    GameTrajectory,
    ImprovementRates,
    TTestResult,
    analysis_report,
    improvement_rate,
    paired_t_test,
    regularized_incomplete_beta,
    student_t_two_sided_p,
    trajectories,
)

__version__ = "0.1.0"

__all__ = [
    "ALL_AUS", "AU_NAMES", "ActionUnit", "AuSet", "BadImage", "BadLandmarks",
    "EMPTY_AU_SET", "Emotion", "GrayImage", "LandmarkSet", "MimicLabError",
    "N_LANDMARKS", "RoundRecord", "TargetEntry", "UnknownAuCode", "au_codes",
    "au_set_from_codes",
    "AuDictionary", "AuDiff", "EmptyUniverse", "Prescription", "describe",
    "diff", "prescribe", "score",
    "AlignedFace", "FEATURE_LENGTH", "SimilarityTransform", "align_face",
    "compute_hog", "convex_hull", "extract_features", "hull_mask", "mask_face",
    "AUS_IN_ORDER", "AuModel", "AuTrainingSet", "detect_aus", "load_model",
    "predict_probabilities", "save_model", "train",
    "GameEngine", "RecordStore", "create_app", "load_records",
    "CooccurrenceMatrix", "ExportManifest", "cooccurrence", "export_dataset",
    "filter_records", "read_manifest", "render_heatmap",
    "GameTrajectory", "ImprovementRates", "TTestResult", "analysis_report",
    "improvement_rate", "paired_t_test", "regularized_incomplete_beta",
    "student_t_two_sided_p", "trajectories",
    "__version__",
]
