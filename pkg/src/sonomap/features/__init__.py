from .base import FeatureVector, Window, sliding_windows
from .emg import BayesAmplitudeFilter, bayes_amplitude, mav, rms, tkeo, zcr
from .extract import FeatureExtractor, assemble_gesture_vector, available_features
from .motion import (
    BandSpec,
    bounding_box,
    contraction_index,
    convex_hull_volume,
    derivative,
    fluidity_index,
    imu_contraction_estimate,
    pqom,
    quantity_of_motion,
)

__all__ = [
    "BandSpec",
    "BayesAmplitudeFilter",
    "FeatureExtractor",
    "FeatureVector",
    "Window",
    "assemble_gesture_vector",
    "available_features",
    "bayes_amplitude",
    "bounding_box",
    "contraction_index",
    "convex_hull_volume",
    "derivative",
    "fluidity_index",
    "imu_contraction_estimate",
    "mav",
    "pqom",
    "quantity_of_motion",
    "rms",
    "sliding_windows",
    "tkeo",
    "zcr",
]
