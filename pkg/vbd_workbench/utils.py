"""
Utility functions for the VBD Workbench.
"""

import json
import zlib
from typing import Any, Dict, Mapping, Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist

from vbd_workbench.exceptions import ValidationError

TOOL_NAME = "vbd-workbench"

# Row block used when a full distance matrix would not fit in memory
DISTANCE_CHUNK = 1024


def derive_seed(seed: int, tag: str, index: int = 0) -> int:
    """
    Derive an independent sub-seed from a top-level seed.

    Args:
        seed: Top-level seed
        tag: Purpose tag (e.g. "folds", "resample", "probe")
        index: Index within the purpose (fold number, test point, ...)

    Returns:
        A 63-bit integer seed
    """
    sequence = np.random.SeedSequence([int(seed), zlib.crc32(tag.encode("utf-8")), int(index)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def as_matrix(vectors: Any, name: str = "vectors", allow_empty: bool = False) -> np.ndarray:
    """
    Convert a list of feature vectors to a finite float64 matrix.

    Args:
        vectors: Sequence of equal-length vectors or a 2-D array
        name: Name used in error messages
        allow_empty: Whether zero rows are acceptable

    Returns:
        2-D float64 array (rows = instances)
    """
    try:
        matrix = np.asarray(vectors, dtype=np.float64)
    except ValueError as e:
        raise ValidationError(f"{name}: vectors must share one dimension ({e})") from e

    if matrix.ndim == 1 and matrix.size == 0:
        matrix = matrix.reshape(0, 0)
    if matrix.ndim != 2:
        raise ValidationError(f"{name}: expected a list of vectors, got array of shape {matrix.shape}")
    if not allow_empty and matrix.shape[0] == 0:
        raise ValidationError(f"{name}: must contain at least one vector")
    if not np.all(np.isfinite(matrix)):
        raise ValidationError(f"{name}: contains non-finite values")
    return matrix


def as_vector(vector: Any, name: str = "vector", dim: Optional[int] = None) -> np.ndarray:
    """Convert a single feature vector to a 1-D float64 array, optionally checking its dimension."""
    array = np.asarray(vector, dtype=np.float64)
    if array.ndim != 1:
        raise ValidationError(f"{name}: expected a 1-D vector, got shape {array.shape}")
    if dim is not None and array.shape[0] != dim:
        raise ValidationError(f"{name}: dimension {array.shape[0]} does not match expected {dim}")
    return array


def min_cross_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Exact minimum Euclidean distance between any row of `a` and any row of `b`."""
    best = np.inf
    for start in range(0, a.shape[0], DISTANCE_CHUNK):
        block = cdist(a[start:start + DISTANCE_CHUNK], b)
        best = min(best, float(block.min()))
    return best


def min_within_distance(a: np.ndarray) -> float:
    """Exact minimum Euclidean distance between two distinct rows of `a` (inf for one row)."""
    n = a.shape[0]
    if n < 2:
        return float("inf")
    if n <= DISTANCE_CHUNK:
        return float(pdist(a).min())

    best = np.inf
    for start in range(0, n, DISTANCE_CHUNK):
        block = cdist(a[start:start + DISTANCE_CHUNK], a[start:])
        # Mask the diagonal and the lower triangle of the square part
        rows = np.arange(block.shape[0])[:, None]
        cols = np.arange(block.shape[1])[None, :]
        block = np.where(cols > rows, block, np.inf)
        best = min(best, float(block.min()))
    return best


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """
    Norm-based relative error between two gradient arrays.

    Returns 0.0 when both arrays are zero.
    """
    analytic = np.ravel(analytic)
    numeric = np.ravel(numeric)
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def params_to_json(params: Mapping[str, np.ndarray]) -> Dict[str, Dict[str, Any]]:
    """Flatten named parameter arrays into the shared JSON model schema."""
    return {
        name: {"shape": list(np.shape(value)), "values": np.ravel(value).tolist()}
        for name, value in params.items()
    }


def params_from_json(payload: Mapping[str, Mapping[str, Any]]) -> Dict[str, np.ndarray]:
    """Inverse of params_to_json."""
    params = {}
    for name, entry in payload.items():
        try:
            params[name] = np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        except (KeyError, ValueError) as e:
            raise ValidationError(f"parameters.{name}: malformed entry ({e})") from e
    return params


def tool_metadata(config: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """
    Metadata block written into every artifact.

    Args:
        config: Fully resolved configuration used for the run

    Returns:
        Dictionary with tool name, version and config
    """
    from vbd_workbench import __version__

    return {"tool": TOOL_NAME, "version": __version__, "config": dict(config or {})}


def format_metric(value: Optional[float], digits: int = 4) -> str:
    """Format a metric for console tables ("-" for missing values)."""
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return "-"
    return f"{value:.{digits}f}"


def write_metadata_lines(handle, metadata: Optional[Mapping[str, Any]]) -> None:
    """Write metadata as leading '# key: json' comment lines of a CSV file."""
    if not metadata:
        return
    for key, value in metadata.items():
        handle.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
