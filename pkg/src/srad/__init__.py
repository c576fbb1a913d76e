"""Weakly supervised video anomaly scoring with clustering-based self-reasoning."""
from .clustering import BACKEND as KMEANS_BACKEND
from .core import Dataset, RngHandle, VideoRecord, validate_dataset
from .evaluation import evaluate, roc_auc
from .ingest import SyntheticConfig, generate_synthetic, load_manifest
from .objective import Hyperparameters
from .train import TrainConfig, fit

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Hyperparameters",
    "KMEANS_BACKEND",
    "RngHandle",
    "SyntheticConfig",
    "TrainConfig",
    "VideoRecord",
    "evaluate",
    "fit",
    "generate_synthetic",
    "load_manifest",
    "roc_auc",
    "validate_dataset",
]
