"""
Anomaly detection with an autoencoder trained on VBD of normal data, and the single-threshold baseline.

A test vector t is paired with u random training instances P_i. Its probe error
recon(t ⌢ P_i) is compared with the reference error recon(P_i ⌢ Q_i) of two
training instances; t is anomalous when more than w probes lose.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from vbd_workbench.autoencoder import AEArchitecture, TrainConfig, TrainReport, reconstruction_error, train_ae
from vbd_workbench.dataset import LabeledDataset, NormalizationStats
from vbd_workbench.evaluation import MetricsReport
from vbd_workbench.exceptions import ValidationError
from vbd_workbench.utils import as_matrix, as_vector, derive_seed, write_metadata_lines
from vbd_workbench.vbd import ConcatConfig, synth_large, synth_small

logger = logging.getLogger("vbd-workbench.anomaly")


@dataclass(frozen=True)
class AnomalyConfig:
    """Probe count u, count threshold w (1 <= w <= u) and the seed for the P/Q draws."""

    u: int = 20
    w: int = 12
    seed: int = 0

    def __post_init__(self):
        if int(self.u) != self.u or self.u < 1:
            raise ValidationError(f"u must be an integer >= 1, got {self.u}")
        if int(self.w) != self.w or not 1 <= self.w <= self.u:
            raise ValidationError(f"w must be an integer in [1, u={self.u}], got {self.w}")


@dataclass(frozen=True)
class AnomalyVerdict:
    count: int
    is_anomaly: bool

    @classmethod
    def from_count(cls, count: int, w: int) -> "AnomalyVerdict":
        return cls(int(count), bool(count > w))


@dataclass(frozen=True)
class ThresholdResult:
    threshold: float
    report: MetricsReport


def _probe_inputs(model, train: Any, t: Any, u: int) -> Tuple[np.ndarray, np.ndarray]:
    train = as_matrix(train, "train")
    n, d = train.shape
    t = as_vector(t, "t", dim=d)
    if model.input_dim != 2 * d:
        raise ValidationError(f"dimension mismatch: model expects {model.input_dim} features, "
                              f"probes have {2 * d}")
    if n < u:
        raise ValidationError(f"need at least u={u} training instances, got {n}")
    return train, t


def probe_errors(model, train: Any, t: Any, u: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Probe and reference reconstruction errors.

    Returns:
        (p, q) with p[i] = recon(t ⌢ P_i) and q[i] = recon(P_i ⌢ Q_i); P and Q are
        drawn independently, each without replacement
    """
    train, t = _probe_inputs(model, train, t, u)
    rng = np.random.default_rng(seed)
    P = train[rng.choice(train.shape[0], size=u, replace=False)]
    Q = train[rng.choice(train.shape[0], size=u, replace=False)]
    probes = np.hstack([np.tile(t, (u, 1)), P])
    references = np.hstack([P, Q])
    return reconstruction_error(model, probes), reconstruction_error(model, references)


def probe_count(model, train: Any, t: Any, u: int, seed: int) -> int:
    """Number of probes whose error strictly exceeds the reference error."""
    p, q = probe_errors(model, train, t, u, seed)
    return int(np.sum(p > q))


def detect(model, train: Any, t: Any, config: AnomalyConfig) -> AnomalyVerdict:
    """
    Classify one test vector.

    Args:
        model: Autoencoder trained on VBD (c=2) of the normal class
        train: Normal training vectors in the original space
        t: Test vector
        config: Probe count, threshold and seed

    Returns:
        AnomalyVerdict with is_anomaly = count > w
    """
    return AnomalyVerdict.from_count(probe_count(model, train, t, config.u, config.seed), config.w)


def detect_traditional(model, t: Any, tau: float) -> bool:
    """Anomalous when the reconstruction error strictly exceeds tau."""
    return reconstruction_error(model, as_vector(t, "t")) > tau


def score_points(model, train: Any, X: Any, config: AnomalyConfig) -> np.ndarray:
    """Probe counts for every row of X; row i gets the same count as detect(model, train, X[i], config)."""
    X = as_matrix(X, "X")
    counts = np.array([probe_count(model, train, row, config.u, config.seed) for row in X], dtype=np.int64)
    logger.debug(f"Scored {X.shape[0]} test points with u={config.u}")
    return counts


class VBDDetector:
    """Callable detector: t -> is_anomaly via probe counts."""

    def __init__(self, model, train: Any, config: AnomalyConfig):
        self.model = model
        self.train = as_matrix(train, "train")
        self.config = config

    def __call__(self, t: Any) -> bool:
        return detect(self.model, self.train, t, self.config).is_anomaly


class TraditionalDetector:
    """Callable detector: t -> reconstruction error > tau."""

    def __init__(self, model, tau: float):
        self.model = model
        self.tau = tau

    def __call__(self, t: Any) -> bool:
        return detect_traditional(self.model, t, self.tau)


def metrics_from_flags(normal_flags: Any, outlier_flags: Any) -> MetricsReport:
    """
    Detection metrics with normal instances as the positive class.

    recall = normals not flagged / normals; precision = flagged outliers / all flagged.
    """
    normal_flags = np.asarray(normal_flags, dtype=bool)
    outlier_flags = np.asarray(outlier_flags, dtype=bool)
    if normal_flags.size == 0 or outlier_flags.size == 0:
        raise ValidationError("detector evaluation needs non-empty normal and outlier sets")

    kept_normals = int(np.sum(~normal_flags))
    flagged_normals = int(np.sum(normal_flags))
    flagged_outliers = int(np.sum(outlier_flags))

    degenerate = False
    recall = kept_normals / normal_flags.size
    if flagged_normals + flagged_outliers == 0:
        precision, degenerate = 0.0, True
    else:
        precision = flagged_outliers / (flagged_normals + flagged_outliers)
    if precision + recall == 0:
        f1, degenerate = 0.0, True
    else:
        f1 = 2 * precision * recall / (precision + recall)
    return MetricsReport(precision, recall, f1, degenerate=degenerate)


def evaluate_detector(detector: Callable[[Any], bool], positives: Any, negatives: Any) -> MetricsReport:
    """
    Run a detector over normal (positive) and outlier (negative) test vectors.

    Returns:
        MetricsReport oriented as in metrics_from_flags
    """
    positives = as_matrix(positives, "positives")
    negatives = as_matrix(negatives, "negatives")
    report = metrics_from_flags([detector(row) for row in positives], [detector(row) for row in negatives])
    logger.info(f"Detector on {positives.shape[0]} normal / {negatives.shape[0]} outlier points: "
                f"precision={report.precision:.4f} recall={report.recall:.4f} f1={report.f1:.4f}")
    return report


def best_threshold(results: Sequence[ThresholdResult]) -> ThresholdResult:
    """Highest F1; the first (lowest) threshold wins ties."""
    if not results:
        raise ValidationError("no thresholds to choose from")
    return max(results, key=lambda result: result.report.f1)


def sweep_count_threshold(normal_counts: Any, outlier_counts: Any, u: int) -> List[ThresholdResult]:
    """Metrics for every integer w in [1, u] from precomputed probe counts."""
    normal_counts = np.asarray(normal_counts, dtype=np.int64)
    outlier_counts = np.asarray(outlier_counts, dtype=np.int64)
    return [
        ThresholdResult(float(w), metrics_from_flags(normal_counts > w, outlier_counts > w))
        for w in range(1, u + 1)
    ]


def sweep_tau(normal_errors: Any, outlier_errors: Any) -> List[ThresholdResult]:
    """Metrics of the single-threshold baseline for every distinct observed error as tau."""
    normal_errors = np.asarray(normal_errors, dtype=np.float64)
    outlier_errors = np.asarray(outlier_errors, dtype=np.float64)
    candidates = np.unique(np.concatenate([normal_errors, outlier_errors]))
    return [
        ThresholdResult(float(tau), metrics_from_flags(normal_errors > tau, outlier_errors > tau))
        for tau in candidates
    ]


def verdicts_frame(counts: Any, w: int, labels: Optional[Any] = None) -> pd.DataFrame:
    """Per-point verdicts with columns id, c, is_anomaly (and label when known)."""
    counts = np.asarray(counts, dtype=np.int64)
    frame = pd.DataFrame({
        "id": np.arange(counts.shape[0]),
        "c": counts,
        "is_anomaly": (counts > w).astype(np.int64),
    })
    if labels is not None:
        frame["label"] = np.asarray(labels, dtype=np.int64)
    return frame


def write_verdicts_csv(path: str, counts: Any, w: int, labels: Optional[Any] = None,
                       metadata: Optional[Mapping[str, Any]] = None) -> None:
    """Write verdicts_frame as CSV, metadata first."""
    frame = verdicts_frame(counts, w, labels)
    with open(path, "w", encoding="utf-8", newline="") as f:
        write_metadata_lines(f, metadata)
        frame.to_csv(f, index=False)
    logger.info(f"Wrote {frame.shape[0]} verdicts to {path}")


@dataclass(frozen=True, eq=False)
class DetectionRun:
    """Outcome of a full train-then-detect run on a labeled test set."""

    counts: np.ndarray
    normal_mask: np.ndarray
    config: AnomalyConfig
    vbd_report: MetricsReport
    vbd_training: TrainReport
    best_w: ThresholdResult
    tau: Optional[float] = None
    errors: Optional[np.ndarray] = None
    traditional_report: Optional[MetricsReport] = None
    best_tau: Optional[ThresholdResult] = None

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "u": self.config.u,
            "w": self.config.w,
            "seed": self.config.seed,
            "test_rows": int(self.counts.shape[0]),
            "normal_rows": int(self.normal_mask.sum()),
            "vbd": self.vbd_report.to_dict(),
            "vbd_final_val_loss": self.vbd_training.final_val_loss,
            "best_w": {"w": int(self.best_w.threshold), **self.best_w.report.to_dict()},
        }
        if self.traditional_report is not None:
            payload["traditional"] = {"tau": self.tau, **self.traditional_report.to_dict()}
            payload["best_tau"] = {"tau": self.best_tau.threshold, **self.best_tau.report.to_dict()}
        return payload


def run_detection(train: LabeledDataset, test: LabeledDataset, arch: AEArchitecture, training: TrainConfig,
                  config: AnomalyConfig, normal_label: int = 0, max_virtual: Optional[int] = None,
                  tau: Optional[float] = None, baseline_training: Optional[TrainConfig] = None) -> DetectionRun:
    """
    Train on VBD of the normal training rows and score a labeled test set.

    Args:
        train: Training data; only rows labeled `normal_label` are used
        test: Test data with normal and outlier rows
        arch: Autoencoder widths for the original data (VBD uses the doubled widths)
        training: Training config of the VBD autoencoder
        config: Probe count, threshold and seed
        normal_label: Class treated as normal
        max_virtual: Draw this many VBD rows instead of the full cross product
        tau: When given, also train an autoencoder on the original rows and apply this threshold
        baseline_training: Training config of the baseline autoencoder

    Returns:
        DetectionRun
    """
    normal_rows = train.features[train.labels == normal_label]
    if normal_rows.shape[0] < config.u:
        raise ValidationError(f"need at least u={config.u} normal training rows, got {normal_rows.shape[0]}")
    stats = NormalizationStats.fit(normal_rows)
    X = stats.apply(normal_rows)
    T = stats.apply(test.features)
    normal_mask = test.labels == normal_label

    if max_virtual is not None and X.shape[0] ** 2 > max_virtual:
        virtual = synth_large(X, ConcatConfig(c=2, u=max_virtual, seed=derive_seed(config.seed, "split")))
    else:
        virtual = synth_small(X)
    logger.info(f"Training VBD autoencoder on {len(virtual)} virtual rows")
    model, report = train_ae(virtual.vectors, arch.doubled(), training)

    counts = score_points(model, X, T, config)
    vbd_report = metrics_from_flags(counts[normal_mask] > config.w, counts[~normal_mask] > config.w)
    best_w = best_threshold(sweep_count_threshold(counts[normal_mask], counts[~normal_mask], config.u))

    if tau is None:
        return DetectionRun(counts, normal_mask, config, vbd_report, report, best_w)

    baseline, _ = train_ae(X, arch, baseline_training or TrainConfig())
    errors = reconstruction_error(baseline, T)
    traditional = metrics_from_flags(errors[normal_mask] > tau, errors[~normal_mask] > tau)
    best_tau = best_threshold(sweep_tau(errors[normal_mask], errors[~normal_mask]))
    return DetectionRun(counts, normal_mask, config, vbd_report, report, best_w, tau, errors, traditional, best_tau)
