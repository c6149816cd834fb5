"""
Baseline minority oversamplers: SMOTE and random oversampling.
"""

import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial.distance import cdist

from vbd_workbench.dataset import BinarySplit, LabeledDataset
from vbd_workbench.exceptions import ValidationError
from vbd_workbench.utils import as_matrix

logger = logging.getLogger("vbd-workbench.resample")

METHODS = ("smote", "random_oversample")


@dataclass(frozen=True)
class SmoteConfig:
    k: int = 5
    n_synthetic: int = 0
    seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValidationError(f"k must be an integer >= 1, got {self.k}")
        if int(self.n_synthetic) != self.n_synthetic or self.n_synthetic < 0:
            raise ValidationError(f"n_synthetic must be an integer >= 0, got {self.n_synthetic}")


@dataclass(frozen=True)
class SmoteSample:
    """Synthetic points with the base index, neighbour index and coefficient that produced each."""

    points: np.ndarray = field(repr=False)
    base_index: np.ndarray = field(repr=False)
    neighbor_index: np.ndarray = field(repr=False)
    gap: np.ndarray = field(repr=False)


def nearest_neighbors(minority: np.ndarray, k: int) -> np.ndarray:
    """
    Indices of each point's k nearest other points (Euclidean).

    Ties are broken by lower index; a point is never its own neighbour.
    """
    distances = cdist(minority, minority)
    np.fill_diagonal(distances, np.inf)
    return np.argsort(distances, axis=1, kind="stable")[:, :k]


def smote_with_provenance(minority: Any, config: SmoteConfig) -> SmoteSample:
    """
    SMOTE interpolation x_i + gap * (x_p - x_i), gap uniform in [0, 1).

    Base points are cycled round-robin over the minority instances and x_p is drawn
    uniformly from the base point's k nearest minority neighbours.
    """
    minority = as_matrix(minority, "minority")
    n = minority.shape[0]
    if n <= config.k:
        raise ValidationError(f"SMOTE with k={config.k} needs more than {config.k} minority points, got {n}")

    neighbors = nearest_neighbors(minority, config.k)
    rng = np.random.default_rng(config.seed)
    base = np.arange(config.n_synthetic, dtype=np.int64) % n
    neighbor = neighbors[base, rng.integers(0, config.k, size=config.n_synthetic)]
    gap = rng.random(config.n_synthetic)

    points = minority[base] + gap[:, None] * (minority[neighbor] - minority[base])
    logger.debug(f"SMOTE generated {config.n_synthetic} points from {n} minority instances (k={config.k})")
    return SmoteSample(points, base, neighbor, gap)


def smote(minority: Any, config: SmoteConfig) -> np.ndarray:
    """Synthetic minority vectors (see smote_with_provenance)."""
    return smote_with_provenance(minority, config).points


def random_oversample(minority: Any, n_needed: int, seed: int) -> np.ndarray:
    """Draw `n_needed` rows uniformly with replacement from the minority set."""
    minority = as_matrix(minority, "minority")
    if n_needed < 0:
        raise ValidationError(f"n_needed must be >= 0, got {n_needed}")
    rng = np.random.default_rng(seed)
    return minority[rng.integers(0, minority.shape[0], size=n_needed)]


def balance_training_set(split: BinarySplit, method: str, seed: int, k: int = 5) -> LabeledDataset:
    """
    Oversample the minority class up to the majority count.

    SMOTE shrinks k to M - 1 when the minority class is too small for the requested k.

    Returns:
        Minority rows, then the synthetic minority rows, then majority rows, with the split's labels
    """
    if method not in METHODS:
        raise ValidationError(f"method: unknown oversampler '{method}'; expected one of {', '.join(METHODS)}")
    m, n = split.minority.shape[0], split.majority.shape[0]
    needed = n - m

    if method == "smote":
        effective_k = min(k, m - 1)
        if effective_k < 1:
            raise ValidationError(f"SMOTE needs at least 2 minority instances, got {m}")
        if effective_k < k:
            logger.warning(f"SMOTE k reduced from {k} to {effective_k} for a minority class of {m}")
        synthetic = smote(split.minority, SmoteConfig(k=effective_k, n_synthetic=needed, seed=seed))
    else:
        synthetic = random_oversample(split.minority, needed, seed)

    features = np.vstack([split.minority, synthetic, split.majority])
    labels = np.concatenate([
        np.full(m + needed, split.minority_label, dtype=np.int64),
        np.full(n, split.majority_label, dtype=np.int64),
    ])
    return LabeledDataset(features, labels)
