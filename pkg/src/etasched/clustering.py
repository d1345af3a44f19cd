"""Seed-based k-means with chi-squared feature selection and a distance-gap
utility signal.

The estimator is initialised from labelled seed vectors (one centroid per
class), keeps per-centroid sample counts, and adapts online by folding
unlabelled samples into the nearest centroid as a running mean.  The utility
of a sample is the gap between its Manhattan distances to the two nearest
centroids: a confident assignment has a large gap, an ambiguous one a gap
near zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .errors import ValidationError

__all__ = [
    "Assignment",
    "SeededKMeans",
    "chi2_scores",
    "select_top_k",
]


@dataclass(frozen=True)
class Assignment:
    """Result of assigning one sample to a centroid.

    d_a is the distance to the nearest centroid, d_b to the second nearest;
    utility = d_b - d_a >= 0.
    """

    nearest: int
    d_a: float
    d_b: float

    @property
    def utility(self) -> float:
        return self.d_b - self.d_a


def chi2_scores(features, labels) -> np.ndarray:
    """Chi-squared feature scores from the per-class feature-sum contingency.

    For feature j: score = sum_c (O_cj - E_cj)^2 / E_cj where O_cj is the sum
    of feature j over class c and E_cj = class_proportion_c * total_j.
    A feature with total 0 scores 0.  Negative features are shifted up by
    their per-feature minimum before scoring.

    Parameters
    ----------
    features : (n_samples, n_features) array-like
    labels : (n_samples,) array-like of class ids

    Returns
    -------
    (n_features,) array of scores.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValidationError("features must be a 2-D array with >= 2 samples")
    if y.shape != (X.shape[0],):
        raise ValidationError("labels must have one entry per sample")
    classes = np.unique(y)
    if classes.size < 2:
        raise ValidationError("need >= 2 classes for chi-squared scoring")
    mins = X.min(axis=0)
    if np.any(mins < 0):
        X = X - np.minimum(mins, 0.0)
    observed = np.vstack([X[y == c].sum(axis=0) for c in classes])
    totals = observed.sum(axis=0)
    proportions = np.array([(y == c).mean() for c in classes])
    expected = np.outer(proportions, totals)
    scores = np.zeros(X.shape[1])
    nz = totals > 0
    scores[nz] = (
        np.square(observed[:, nz] - expected[:, nz]) / expected[:, nz]
    ).sum(axis=0)
    return scores


def select_top_k(scores, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties broken by lower index."""
    s = np.asarray(scores, dtype=float)
    if not 1 <= k <= s.size:
        raise ValidationError(f"k = {k} outside 1..{s.size}")
    # stable sort on negated scores keeps lower indices first among ties
    return np.argsort(-s, kind="stable")[:k]


class SeededKMeans(BaseEstimator):
    """Seeded k-means over chi-squared-selected features with L1 distances.

    Parameters
    ----------
    n_features : int or None
        Number of feature columns to keep (by chi-squared score).  None
        keeps the full feature space.

    Attributes
    ----------
    feature_indices_ : (k,) int array of selected columns
    centroids_ : (n_clusters, k) float array
    counts_ : (n_clusters,) int array, seeds included
    labels_ : (n_clusters,) array of class identifiers, one per centroid
    """

    def __init__(self, n_features: int | None = None):
        self.n_features = n_features

    # -- construction ------------------------------------------------------

    def fit(self, X, y, feature_indices=None):
        """Select features and place one centroid at each class's seed mean.

        ``feature_indices`` overrides chi-squared selection with an explicit
        column subset.
        """
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        if X.ndim != 2:
            raise ValidationError("X must be 2-D (n_samples, n_features)")
        if y.shape != (X.shape[0],):
            raise ValidationError("y must have one label per seed vector")
        classes = np.unique(y)
        if classes.size < 2:
            raise ValidationError("need seeds from >= 2 classes")
        if feature_indices is not None:
            indices = np.asarray(feature_indices, dtype=int)
            if indices.size != np.unique(indices).size:
                raise ValidationError("feature_indices must be distinct")
        elif self.n_features is None:
            indices = np.arange(X.shape[1])
        else:
            indices = select_top_k(chi2_scores(X, y), self.n_features)
        self.feature_indices_ = np.asarray(indices, dtype=int)
        centroids, counts = [], []
        for c in classes:
            members = X[y == c][:, self.feature_indices_]
            centroids.append(members.mean(axis=0))
            counts.append(members.shape[0])
        self.centroids_ = np.vstack(centroids)
        self.counts_ = np.array(counts, dtype=int)
        self.labels_ = classes
        return self

    # -- inference ---------------------------------------------------------

    def _restrict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        needed = int(self.feature_indices_.max()) + 1
        if x.size < needed:
            raise ValidationError(
                f"sample has {x.size} components, needs >= {needed}"
            )
        return x[self.feature_indices_]

    def assign(self, x) -> Assignment:
        """Distances to all centroids; nearest wins, ties to the lower index."""
        xs = self._restrict(x)
        dists = np.abs(self.centroids_ - xs).sum(axis=1)
        nearest = int(np.argmin(dists))  # argmin takes the first minimum
        d_a = float(dists[nearest])
        rest = np.delete(dists, nearest)
        d_b = float(rest.min())
        return Assignment(nearest=nearest, d_a=d_a, d_b=d_b)

    def utility(self, x) -> float:
        return self.assign(x).utility

    def predict(self, X) -> np.ndarray:
        """Class label of the nearest centroid for each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([self.labels_[self.assign(row).nearest] for row in X])

    # -- adaptation --------------------------------------------------------

    def update(self, x, assignment: Assignment | None = None) -> Assignment:
        """Fold one sample into its nearest centroid (running mean)."""
        if assignment is None:
            assignment = self.assign(x)
        xs = self._restrict(x)
        c = assignment.nearest
        self.counts_[c] += 1
        self.centroids_[c] += (xs - self.centroids_[c]) / self.counts_[c]
        return assignment

    def partial_fit(self, X, y=None):
        """Online pass over unlabelled rows; labels are ignored."""
        for row in np.atleast_2d(np.asarray(X, dtype=float)):
            self.update(row)
        return self

    # -- persistence -------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "feature_indices": self.feature_indices_.tolist(),
            "centroids": self.centroids_.tolist(),
            "counts": self.counts_.tolist(),
            "labels": self.labels_.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SeededKMeans":
        try:
            indices = np.asarray(data["feature_indices"], dtype=int)
            centroids = np.asarray(data["centroids"], dtype=float)
            counts = np.asarray(data["counts"], dtype=int)
            labels = np.asarray(data["labels"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"bad cluster-model JSON: {exc}") from exc
        if centroids.ndim != 2 or centroids.shape[0] < 2:
            raise ValidationError("model needs >= 2 centroids")
        if not (centroids.shape[0] == counts.size == labels.size):
            raise ValidationError("centroids/counts/labels lengths disagree")
        if np.any(counts < 1):
            raise ValidationError("counts must be >= 1")
        model = cls(n_features=int(indices.size))
        model.feature_indices_ = indices
        model.centroids_ = centroids
        model.counts_ = counts
        model.labels_ = labels
        return model

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2))

    @classmethod
    def load(cls, path: str | Path) -> "SeededKMeans":
        return cls.from_json_dict(json.loads(Path(path).read_text()))
