from .cnn import (BadInputSize, CnnModel, ShapeMismatch, TrainHistory,
                  accuracy, load_cnn, save_cnn, train_cnn)
from .data import LabeledImageSet, empty_set, load_image_dir, save_image_dir
from .experiment import EnrichmentReport, EnrichmentRow, run_enrichment_experiment
from .sampling import InsufficientClassData, SamplePair, balanced_sample

__all__ = [
    "BadInputSize", "CnnModel", "ShapeMismatch", "TrainHistory", "accuracy",
    "load_cnn", "save_cnn", "train_cnn", "LabeledImageSet", "empty_set",
    "load_image_dir", "save_image_dir", "EnrichmentReport", "EnrichmentRow",
    "run_enrichment_experiment", "InsufficientClassData", "SamplePair",
    "balanced_sample",
]
