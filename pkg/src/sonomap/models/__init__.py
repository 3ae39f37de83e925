from .classify import (
    ClassPosterior,
    KnnClassifier,
    NaiveBayesClassifier,
    interpolate_presets,
)
from .dtw import DtwClassifier, GestureTemplate, dtw_distance
from .mlp import MlpRegressor, gradient_check

__all__ = [
    "ClassPosterior",
    "DtwClassifier",
    "GestureTemplate",
    "KnnClassifier",
    "MlpRegressor",
    "NaiveBayesClassifier",
    "dtw_distance",
    "gradient_check",
    "interpolate_presets",
]
