"""
Cross-Concatenation: projection of minority and majority classes into balanced 2d-dimensional sets,
and centroid-probe classification of test points.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Optional, Tuple

import numpy as np

from vbd_workbench import models
from vbd_workbench.dataset import LabeledDataset, NormalizationStats, centroid
from vbd_workbench.exceptions import ValidationError
from vbd_workbench.models import ClassifierSpec, TrainedClassifier
from vbd_workbench.utils import as_matrix, as_vector, min_cross_distance, min_within_distance

logger = logging.getLogger("vbd-workbench.crossconcat")


@dataclass(frozen=True)
class ProjectedPair:
    """Projected minority rows u_i ⌢ v_j and projected majority rows v_j ⌢ u_i."""

    projected_minority: np.ndarray = field(repr=False)
    projected_majority: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return int(self.projected_minority.shape[0])

    def to_dataset(self) -> LabeledDataset:
        """Training set with projected minority labeled 1 and projected majority labeled 0."""
        features = np.vstack([self.projected_minority, self.projected_majority])
        labels = np.concatenate([np.ones(len(self), dtype=np.int64), np.zeros(len(self), dtype=np.int64)])
        return LabeledDataset(features, labels)


@dataclass(frozen=True, eq=False)
class CCModel:
    """Base classifier fitted on a projected pair, plus the original-space class centroids."""

    base: TrainedClassifier
    minority_centroid: np.ndarray
    majority_centroid: np.ndarray
    normalization: Optional[NormalizationStats] = None

    @property
    def source_dim(self) -> int:
        return int(self.minority_centroid.shape[0])

    def prepare(self, X: np.ndarray) -> np.ndarray:
        """Map raw test vectors into the space the base classifier was fitted in."""
        return X if self.normalization is None else self.normalization.apply(X)


@dataclass(frozen=True)
class CCPrediction:
    label: int
    p_w: float
    p_z: float


@dataclass(frozen=True)
class MarginStats:
    """Cross-class and within-class minimum distances before and after projection."""

    original_min: float
    projected_min: float
    ratio: float
    original_within_minority: float
    original_within_majority: float
    projected_within_minority: float
    projected_within_majority: float


def _pair_indices(m: int, n: int, max_pairs: Optional[int]) -> Tuple[np.ndarray, np.ndarray]:
    total = m * n
    positions = np.arange(total, dtype=np.int64)
    if max_pairs is not None and total > max_pairs:
        if max_pairs < 1:
            raise ValidationError(f"max_pairs must be >= 1, got {max_pairs}")
        positions = (np.arange(max_pairs, dtype=np.int64) * total) // max_pairs
        logger.warning(f"Cross product of {total} pairs capped to {max_pairs} by stride subsampling")
    return positions // n, positions % n


def cross_concatenate(minority: Any, majority: Any, max_pairs: Optional[int] = None) -> ProjectedPair:
    """
    Project both classes into 2d dimensions.

    Pairs are enumerated outer-minority, inner-majority; both outputs hold M*N rows
    (or `max_pairs` rows taken at a fixed stride when the cap is set).
    """
    minority = as_matrix(minority, "minority")
    majority = as_matrix(majority, "majority")
    if minority.shape[1] != majority.shape[1]:
        raise ValidationError(
            f"dimension mismatch: minority has {minority.shape[1]} features, majority has {majority.shape[1]}"
        )

    i, j = _pair_indices(minority.shape[0], majority.shape[0], max_pairs)
    return ProjectedPair(
        projected_minority=np.hstack([minority[i], majority[j]]),
        projected_majority=np.hstack([majority[j], minority[i]]),
    )


def project_test(t: Any, c_u: Any, c_v: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Centroid probes w = t ⌢ c_u and z = t ⌢ c_v."""
    t = as_vector(t, "t")
    c_u = as_vector(c_u, "c_u", dim=t.shape[0])
    c_v = as_vector(c_v, "c_v", dim=t.shape[0])
    return np.concatenate([t, c_u]), np.concatenate([t, c_v])


def cc_fit(spec: ClassifierSpec, minority: Any, majority: Any, max_pairs: Optional[int] = None,
           normalization: Optional[NormalizationStats] = None) -> CCModel:
    """
    Fit a base classifier on the cross-concatenated classes.

    Args:
        spec: Base classifier spec
        minority: Minority-class vectors (original space)
        majority: Majority-class vectors (original space)
        max_pairs: Optional cap on the number of (minority, majority) pairs
        normalization: Stats `minority` and `majority` were normalized with; predictions
            apply them to raw test vectors

    Returns:
        CCModel
    """
    minority = as_matrix(minority, "minority")
    majority = as_matrix(majority, "majority")
    pair = cross_concatenate(minority, majority, max_pairs)
    training = pair.to_dataset()
    logger.info(f"Cross-Concatenation: M={minority.shape[0]}, N={majority.shape[0]} -> "
                f"{training.instance_count} projected training rows")
    base = models.fit(spec, training)
    return CCModel(base, centroid(minority), centroid(majority), normalization)


def decide(p_w: float, p_z: float) -> int:
    """0 (majority) when p_w > p_z, otherwise 1 (minority); ties go to 1."""
    return 0 if p_w > p_z else 1


def cc_predict(model: CCModel, t: Any) -> CCPrediction:
    """
    Classify one test vector by its centroid probes.

    p_w is the base model's majority-projection probability for w = t ⌢ c_u,
    p_z its minority-projection probability for z = t ⌢ c_v.
    When the model carries normalization stats, `t` is given in the raw feature space.
    """
    t = model.prepare(as_vector(t, "t", dim=model.source_dim)[None, :])[0]
    w, z = project_test(t, model.minority_centroid, model.majority_centroid)
    p_w = 1.0 - models.predict_proba(model.base, w)
    p_z = models.predict_proba(model.base, z)
    return CCPrediction(decide(p_w, p_z), p_w, p_z)


def cc_predict_batch(model: CCModel, X: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized cc_predict.

    Returns:
        (labels, p_w, p_z, scores) where scores = (p_z - p_w + 1) / 2 ranks test points
        by minority likelihood and is >= 0.5 exactly when the label is 1
    """
    X = as_matrix(X, "X")
    if X.shape[1] != model.source_dim:
        raise ValidationError(f"dimension mismatch: model expects {model.source_dim} features, got {X.shape[1]}")
    X = model.prepare(X)
    n = X.shape[0]
    W = np.hstack([X, np.tile(model.minority_centroid, (n, 1))])
    Z = np.hstack([X, np.tile(model.majority_centroid, (n, 1))])
    p_w = 1.0 - models.predict_proba(model.base, W)
    p_z = models.predict_proba(model.base, Z)
    labels = np.where(p_w > p_z, 0, 1).astype(np.int64)
    scores = (p_z - p_w + 1.0) / 2.0
    return labels, p_w, p_z, scores


def margin_stats(minority: Any, majority: Any) -> MarginStats:
    """
    Brute-force minimum distances before and after Cross-Concatenation.

    Only the cross-class ratio is expected to be sqrt(2); the within-class minima are reported as measured.
    """
    minority = as_matrix(minority, "minority")
    majority = as_matrix(majority, "majority")
    pair = cross_concatenate(minority, majority)

    original = min_cross_distance(minority, majority)
    projected = min_cross_distance(pair.projected_minority, pair.projected_majority)
    ratio = projected / original if original > 0 else float("nan")
    return MarginStats(
        original_min=original,
        projected_min=projected,
        ratio=ratio,
        original_within_minority=min_within_distance(minority),
        original_within_majority=min_within_distance(majority),
        projected_within_minority=min_within_distance(pair.projected_minority),
        projected_within_majority=min_within_distance(pair.projected_majority),
    )
