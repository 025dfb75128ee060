"""Deep feature extraction with a frozen ResNet50 backbone and an L2 logistic-regression head."""

__version__ = "0.1.0"

from .dataset import DatasetManifest, ImageRecord, scan_dataset, stratified_kfold, stratified_split
from .evaluation import confusion_matrix, cross_validate, grid_search, metrics_from_cm
from .extractor import FeatureMatrix, MockBackbone, PreprocessConfig, extract_features, load_backbone
from .linear_head import LinearModel, TrainConfig, fit, predict, predict_proba

__all__ = [
    "DatasetManifest", "ImageRecord", "scan_dataset", "stratified_split", "stratified_kfold",
    "FeatureMatrix", "MockBackbone", "PreprocessConfig", "extract_features", "load_backbone",
    "LinearModel", "TrainConfig", "fit", "predict", "predict_proba",
    "confusion_matrix", "metrics_from_cm", "cross_validate", "grid_search",
]
