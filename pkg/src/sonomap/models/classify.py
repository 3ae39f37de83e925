"""Posture classifiers with probabilistic output, and posterior-weighted
preset interpolation."""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..errors import InsufficientDataError, ParameterError, SchemaError
from ..validation import check_2d, check_paired

VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class ClassPosterior:
    labels: tuple
    probabilities: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probabilities, dtype=float).reshape(-1)
        if len(self.labels) != len(probs):
            raise SchemaError("labels/probabilities length mismatch")
        if np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > 1e-9:
            raise SchemaError("probabilities must be >= 0 and sum to 1")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "probabilities", np.clip(probs, 0.0, None))

    @property
    def argmax_label(self):
        return self.labels[int(np.argmax(self.probabilities))]


class KnnClassifier(BaseEstimator, ClassifierMixin):
    """Euclidean k-nearest-neighbour vote with posterior output.

    Vote ties break by smaller summed neighbour distance, then by label
    lexicographic order, so classification is fully deterministic.
    """

    def __init__(self, k=1):
        self.k = k

    def fit(self, X, y):
        X = check_2d(X, "X")
        y = list(y)
        check_paired(X, y)
        if not 1 <= self.k <= len(X):
            raise ParameterError(f"k={self.k} outside 1..{len(X)}")
        self.X_ = X
        self.y_ = np.asarray(y, dtype=object)
        self.classes_ = tuple(sorted(set(y)))
        return self

    def _neighbors(self, q):
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.X_.shape[1]:
            raise SchemaError(
                f"query dimension {q.shape[0]} != training dimension {self.X_.shape[1]}"
            )
        dists = np.linalg.norm(self.X_ - q, axis=1)
        order = np.lexsort((np.arange(len(dists)), dists))
        return order[: self.k], dists

    def predict_posterior(self, q):
        idx, dists = self._neighbors(q)
        votes = {label: 0 for label in self.classes_}
        summed = {label: 0.0 for label in self.classes_}
        for i in idx:
            votes[self.y_[i]] += 1
            summed[self.y_[i]] += float(dists[i])
        best = min(self.classes_, key=lambda lab: (-votes[lab], summed[lab], lab))
        probs = np.array([votes[lab] / self.k for lab in self.classes_])
        return best, ClassPosterior(self.classes_, probs)

    def predict(self, q):
        return self.predict_posterior(q)[0]


class NaiveBayesClassifier(BaseEstimator, ClassifierMixin):
    """Gaussian naive Bayes with a variance floor and uniform class priors.

    The floor keeps zero-variance dimensions (common in tiny posture
    datasets) from collapsing the likelihood.
    """

    def __init__(self, variance_floor=VARIANCE_FLOOR):
        self.variance_floor = variance_floor

    def fit(self, X, y):
        X = check_2d(X, "X")
        y = list(y)
        check_paired(X, y)
        self.classes_ = tuple(sorted(set(y)))
        labels = np.asarray(y, dtype=object)
        self.means_ = {}
        self.vars_ = {}
        for label in self.classes_:
            rows = X[labels == label]
            if len(rows) < 1:
                raise InsufficientDataError(f"class {label!r} has no examples")
            self.means_[label] = rows.mean(axis=0)
            self.vars_[label] = np.maximum(rows.var(axis=0), self.variance_floor)
        return self

    def predict_posterior(self, q):
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != len(next(iter(self.means_.values()))):
            raise SchemaError("query dimension mismatch")
        logs = []
        for label in self.classes_:
            mu, var = self.means_[label], self.vars_[label]
            ll = -0.5 * np.sum(np.log(2.0 * np.pi * var) + (q - mu) ** 2 / var)
            logs.append(ll)
        logs = np.array(logs)
        logs -= logs.max()
        probs = np.exp(logs)
        probs /= probs.sum()
        return ClassPosterior(self.classes_, probs)

    def predict(self, q):
        return self.predict_posterior(q).argmax_label


def interpolate_presets(posterior, presets):
    """Convex combination of per-class parameter vectors.

    `presets` is either a mapping label -> vector or a sequence aligned
    with posterior.labels.
    """
    if isinstance(presets, dict):
        try:
            mat = np.array([np.asarray(presets[lab], dtype=float)
                            for lab in posterior.labels])
        except KeyError as exc:
            raise SchemaError(f"no preset for class {exc.args[0]!r}") from None
    else:
        mat = np.array([np.asarray(p, dtype=float) for p in presets])
        if len(mat) != len(posterior.labels):
            raise SchemaError(
                f"{len(mat)} presets for {len(posterior.labels)} classes"
            )
    if mat.ndim != 2:
        raise SchemaError("presets must share one dimension")
    return posterior.probabilities @ mat
