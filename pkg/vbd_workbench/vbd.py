"""
Virtual Big Data synthesis by instance concatenation, and its diversity measure.
"""

import logging
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.distance import pdist

from vbd_workbench.exceptions import ValidationError
from vbd_workbench.utils import as_matrix, as_vector, write_metadata_lines

logger = logging.getLogger("vbd-workbench.vbd")

# Upper bound on random keys drawn at once by synth_large
_KEY_BUDGET = 1 << 22


@dataclass(frozen=True)
class ConcatConfig:
    """Concatenation factor `c`, virtual set size `u` and RNG seed."""

    c: int = 2
    u: int = 1
    seed: int = 0

    def __post_init__(self):
        if int(self.c) != self.c or self.c < 2:
            raise ValidationError(f"c must be an integer >= 2, got {self.c}")
        if int(self.u) != self.u or self.u < 1:
            raise ValidationError(f"u must be an integer >= 1, got {self.u}")


@dataclass(frozen=True)
class VirtualDataset:
    """Concatenated vectors of dimension c * source_dim."""

    vectors: np.ndarray
    c: int
    source_dim: int

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.c * self.source_dim:
            raise ValidationError(
                f"virtual vectors must have dimension {self.c * self.source_dim}, "
                f"got shape {self.vectors.shape}"
            )

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])


@dataclass(frozen=True)
class DiversityStats:
    """Pairwise Euclidean distance summary of a vector set."""

    min: float
    max: float
    mean: float


def concat(parts: Sequence[Any]) -> np.ndarray:
    """Concatenate equal-dimension feature vectors in order."""
    if len(parts) == 0:
        raise ValidationError("concat needs at least one part")
    vectors = [as_vector(part, f"parts[{i}]") for i, part in enumerate(parts)]
    dim = vectors[0].shape[0]
    for i, vector in enumerate(vectors):
        if vector.shape[0] != dim:
            raise ValidationError(f"dimension mismatch: parts[{i}] has {vector.shape[0]} entries, expected {dim}")
    return np.concatenate(vectors)


def synth_small(data: Any) -> VirtualDataset:
    """
    Full ordered cross product u_i ⌢ u_j of the input, self-pairs included.

    Rows are enumerated outer i, inner j, so the output has n*n rows.
    """
    matrix = as_matrix(data, "data")
    n, d = matrix.shape
    vectors = np.hstack([np.repeat(matrix, n, axis=0), np.tile(matrix, (n, 1))])
    logger.debug(f"Synthesized {n * n} virtual rows from {n} instances")
    return VirtualDataset(vectors, c=2, source_dim=d)


def synth_large(data: Any, config: ConcatConfig) -> VirtualDataset:
    """
    Draw `config.u` virtual rows, each the concatenation of `config.c` distinct instances.

    Instances are sampled without replacement within a row and independently across rows.
    """
    matrix = as_matrix(data, "data")
    n, d = matrix.shape
    c, u = config.c, config.u
    if n < c:
        raise ValidationError(f"synth_large needs at least c={c} instances, got {n}")

    rng = np.random.default_rng(config.seed)
    rows_per_block = max(1, _KEY_BUDGET // n)
    picks = np.empty((u, c), dtype=np.int64)
    for start in range(0, u, rows_per_block):
        stop = min(u, start + rows_per_block)
        keys = rng.random((stop - start, n))
        # The c smallest keys select c distinct instances; sort them to get a random order
        chosen = np.argpartition(keys, c - 1, axis=1)[:, :c]
        order = np.argsort(np.take_along_axis(keys, chosen, axis=1), axis=1)
        picks[start:stop] = np.take_along_axis(chosen, order, axis=1)

    vectors = matrix[picks].reshape(u, c * d)
    logger.debug(f"Synthesized {u} virtual rows (c={c}) from {n} instances")
    return VirtualDataset(vectors, c=c, source_dim=d)


def diversity_stats(vectors: Any) -> DiversityStats:
    """Exact min, max and mean of the pairwise Euclidean distances over all unordered pairs."""
    matrix = as_matrix(vectors, "vectors")
    if matrix.shape[0] < 2:
        raise ValidationError("diversity_stats needs at least 2 rows")
    distances = pdist(matrix)
    return DiversityStats(float(distances.min()), float(distances.max()), float(distances.mean()))


def split_halves(v: Any) -> Tuple[np.ndarray, np.ndarray]:
    """Split a c=2 virtual vector into its two source-dimension halves."""
    vector = as_vector(v, "v")
    if vector.shape[0] % 2:
        raise ValidationError(f"cannot split a vector of odd dimension {vector.shape[0]}")
    half = vector.shape[0] // 2
    return vector[:half].copy(), vector[half:].copy()


def write_virtual_csv(virtual: VirtualDataset, path: str, labels: Optional[np.ndarray] = None,
                      metadata: Optional[Mapping[str, Any]] = None) -> None:
    """Write virtual vectors in the LabeledDataset CSV layout (label column optional)."""
    frame = pd.DataFrame(virtual.vectors)
    if labels is not None:
        frame["label"] = np.asarray(labels, dtype=np.int64)
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_metadata_lines(f, metadata)
        frame.to_csv(f, header=False, index=False, float_format="%.17g")
    logger.info(f"Wrote {len(virtual)} virtual rows of dimension {virtual.dimension} to {path}")
