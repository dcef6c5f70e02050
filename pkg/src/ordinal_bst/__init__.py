"""Ordinal regression as a binary search learned by a recurrent network."""

from .data import Dataset, load_csv, synthesize
from .model import OrdinalModel, predict_class, predict_distribution, project
from .training import TrainConfig, fit

__all__ = [
    "Dataset",
    "OrdinalModel",
    "TrainConfig",
    "fit",
    "load_csv",
    "predict_class",
    "predict_distribution",
    "project",
    "synthesize",
]
__version__ = "0.1.0"
