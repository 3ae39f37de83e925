"""Dynamic time warping alignment and template-vocabulary classification."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..errors import InsufficientDataError, SchemaError


def _as_series(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise SchemaError(f"{name} must be a nonempty 1-D or 2-D series")
    return arr


@dataclass(frozen=True)
class GestureTemplate:
    label: str
    series: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "series", _as_series(self.series, "template series"))


def dtw_distance(a, b):
    """Classic DTW: per-step Euclidean cost, moves (1,0), (0,1), (1,1).

    Returns the unnormalised total cost and the warping path as a list of
    (i, j) index pairs from (0, 0) to (n-1, m-1).
    """
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.shape[1] != b.shape[1]:
        raise SchemaError(f"series dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    n, m = a.shape[0], b.shape[0]
    # local cost matrix in one vectorised shot
    local = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = local[i - 1, j - 1] + min(
                acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            )
    # traceback, diagonal preferred on ties
    path = []
    i, j = n, m
    while i > 0 or j > 0:
        path.append((i - 1, j - 1))
        if i == 1 and j == 1:
            break
        candidates = (
            (acc[i - 1, j - 1], i - 1, j - 1),
            (acc[i - 1, j], i - 1, j),
            (acc[i, j - 1], i, j - 1),
        )
        best = min(c for c in candidates if np.isfinite(c[0]))
        i, j = best[1], best[2]
    path.reverse()
    return float(acc[n, m]), path


class DtwClassifier(BaseEstimator, ClassifierMixin):
    """Nearest-template gesture recognition over a labelled vocabulary."""

    def fit(self, series_list, labels):
        if len(series_list) != len(labels):
            raise SchemaError("series/labels length mismatch")
        if len(series_list) == 0:
            raise InsufficientDataError("template vocabulary is empty")
        self.templates_ = [
            GestureTemplate(str(lab), s) for s, lab in zip(series_list, labels)
        ]
        return self

    def costs(self, query):
        """Per-template DTW costs, in template order."""
        return np.array([dtw_distance(t.series, query)[0] for t in self.templates_])

    def predict(self, query):
        c = self.costs(query)
        best = min(range(len(c)), key=lambda i: (c[i], self.templates_[i].label))
        return self.templates_[best].label
