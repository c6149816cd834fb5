"""
Cross-validated experiment harness and the stability probe.

Every fold fits normalization, oversampling or Cross-Concatenation, and the
classifier on its training rows only; the test fold is touched only for prediction.
"""

import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd

from vbd_workbench import models
from vbd_workbench.crossconcat import cc_fit, cc_predict_batch
from vbd_workbench.dataset import (LabeledDataset, NormalizationStats, fit_apply_minmax, split_binary,
                                   stratified_kfold)
from vbd_workbench.evaluation import MetricsReport, confusion, roc_auc
from vbd_workbench.exceptions import ValidationError
from vbd_workbench.models import ClassifierSpec
from vbd_workbench.resample import balance_training_set
from vbd_workbench.utils import derive_seed

logger = logging.getLogger("vbd-workbench.experiment")

METHODS = ("none", "smote", "random_oversample", "cross_concat")
METRICS = ("precision", "recall", "f1", "auc")


@dataclass(frozen=True)
class FoldResult:
    fold: int
    report: MetricsReport
    train_rows: int
    test_rows: int
    fitted_rows: int

    def to_dict(self) -> Dict[str, Any]:
        payload = {"fold": self.fold, "train_rows": self.train_rows, "test_rows": self.test_rows,
                   "fitted_rows": self.fitted_rows}
        payload.update(self.report.to_dict())
        return payload


@dataclass(frozen=True)
class ExperimentResult:
    """Per-fold metrics of one method/classifier pair under a fixed fold plan."""

    method: str
    spec: ClassifierSpec
    k: int
    seed: int
    method_seed: int
    folds: Tuple[FoldResult, ...] = field(repr=False)

    def metric_values(self, metric: str) -> List[float]:
        values = [getattr(fold.report, metric) for fold in self.folds]
        return [float(v) for v in values if v is not None]

    def aggregate(self) -> Dict[str, Dict[str, Optional[float]]]:
        """Mean and population standard deviation of every metric over the folds."""
        summary = {}
        for metric in METRICS:
            values = self.metric_values(metric)
            if values:
                summary[metric] = {"mean": float(np.mean(values)), "std": float(np.std(values))}
            else:
                summary[metric] = {"mean": None, "std": None}
        return summary

    def folds_frame(self) -> pd.DataFrame:
        columns = ["fold", "precision", "recall", "f1", "auc", "degenerate", "train_rows", "test_rows",
                   "fitted_rows"]
        return pd.DataFrame([fold.to_dict() for fold in self.folds], columns=columns)

    def to_dict(self, metadata: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
        payload = {
            "method": self.method,
            "classifier": self.spec.to_dict(),
            "k": self.k,
            "seed": self.seed,
            "method_seed": self.method_seed,
            "folds": [fold.to_dict() for fold in self.folds],
            "aggregate": self.aggregate(),
        }
        if metadata is not None:
            payload["metadata"] = dict(metadata)
        return payload

    def to_json(self, metadata: Optional[Mapping[str, Any]] = None) -> str:
        return json.dumps(self.to_dict(metadata), sort_keys=True, indent=2)


@dataclass(frozen=True)
class StabilityReport:
    """Mean metrics of each repeat and their population variance across repeats."""

    method: str
    repeats: int
    values: Dict[str, Tuple[float, ...]]
    variance: Dict[str, float]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values)
        frame.insert(0, "repeat", np.arange(self.repeats))
        return frame

    def to_dict(self) -> Dict[str, Any]:
        return {"method": self.method, "repeats": self.repeats,
                "values": {k: list(v) for k, v in self.values.items()}, "variance": dict(self.variance)}


def _fit_and_score(train: LabeledDataset, test: LabeledDataset, method: str, spec: ClassifierSpec,
                   fold_seed: int, smote_k: int, max_pairs: Optional[int],
                   normalization: Optional[NormalizationStats] = None) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Predicted labels, positive-class scores and the number of rows the classifier was fitted on.

    `train` is already normalized. `test` is raw when `normalization` is given and is mapped
    with those stats, otherwise it is used as is.
    """
    if method == "cross_concat":
        split = split_binary(train)
        model = cc_fit(spec, split.minority, split.majority, max_pairs=max_pairs, normalization=normalization)
        labels, _, _, scores = cc_predict_batch(model, test.features)
        fitted_rows = 2 * min(split.minority.shape[0] * split.majority.shape[0], max_pairs or np.inf)
        # Cross-Concatenation labels the minority 1
        if split.minority_label == 0:
            labels, scores = 1 - labels, 1.0 - scores
        return labels, scores, int(fitted_rows)

    test_features = test.features if normalization is None else normalization.apply(test.features)
    if method != "none":
        train = balance_training_set(split_binary(train), method, fold_seed, k=smote_k)
    model = models.fit(spec, train)
    scores = models.predict_proba(model, test_features)
    return (scores >= 0.5).astype(np.int64), scores, train.instance_count


def _run_fold(data: LabeledDataset, fold: int, train_index: np.ndarray, test_index: np.ndarray, method: str,
              spec: ClassifierSpec, method_seed: int, smote_k: int, max_pairs: Optional[int]) -> FoldResult:
    train, test = data.subset(train_index), data.subset(test_index)
    stats, train = fit_apply_minmax(train, train)

    predicted, scores, fitted_rows = _fit_and_score(
        train, test, method, spec, derive_seed(method_seed, "resample", fold), smote_k, max_pairs,
        normalization=stats
    )
    positives, negatives = test.class_counts()
    auc = roc_auc(test.labels, scores) if positives and negatives else None
    report = MetricsReport.from_confusion(confusion(test.labels, predicted), auc)
    logger.info(f"Fold {fold}: {method} f1={report.f1:.4f} auc={auc if auc is None else round(auc, 4)}")
    return FoldResult(fold, report, train.instance_count, test.instance_count, fitted_rows)


def run_cv_experiment(data: LabeledDataset, method: str, spec: ClassifierSpec, k: int = 10, seed: int = 0,
                      jobs: int = 1, method_seed: Optional[int] = None, smote_k: int = 5,
                      max_pairs: Optional[int] = None) -> ExperimentResult:
    """
    Stratified k-fold evaluation of a balancing method with a base classifier.

    Args:
        data: Raw (unnormalized) labeled dataset
        method: none, smote, random_oversample or cross_concat
        spec: Base classifier
        k: Number of folds
        seed: Seed of the fold plan
        jobs: Folds evaluated concurrently; results are collected in fold order
        method_seed: Seed of the oversampler (defaults to `seed`)
        smote_k: SMOTE neighbourhood size
        max_pairs: Optional cap on Cross-Concatenation pairs per fold

    Returns:
        ExperimentResult
    """
    if method not in METHODS:
        raise ValidationError(f"method: unknown method '{method}'; expected one of {', '.join(METHODS)}")
    if int(jobs) != jobs or jobs < 1:
        raise ValidationError(f"jobs must be an integer >= 1, got {jobs}")
    method_seed = seed if method_seed is None else method_seed
    plan = stratified_kfold(data, k, derive_seed(seed, "folds"))
    logger.info(f"Running {k}-fold {method} + {spec.kind} on {data.instance_count} rows (seed={seed})")

    def run(fold_triple):
        fold, train_index, test_index = fold_triple
        return _run_fold(data, fold, train_index, test_index, method, spec, method_seed, smote_k, max_pairs)

    if jobs == 1:
        folds = [run(triple) for triple in plan.folds()]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            folds = list(executor.map(run, plan.folds()))

    return ExperimentResult(method, spec, k, seed, method_seed, tuple(folds))


def stability_probe(data: LabeledDataset, method: str, spec: ClassifierSpec, repeats: int = 10,
                    base_seed: int = 0, k: int = 10, jobs: int = 1, smote_k: int = 5,
                    max_pairs: Optional[int] = None) -> StabilityReport:
    """
    Repeat an experiment with a fixed fold plan and method seeds base_seed, base_seed + 1, ...

    Variance is computed exactly, so identical repeats report 0.0.
    """
    if int(repeats) != repeats or repeats < 2:
        raise ValidationError(f"repeats must be an integer >= 2, got {repeats}")

    values: Dict[str, List[float]] = {metric: [] for metric in METRICS}
    for r in range(repeats):
        result = run_cv_experiment(data, method, spec, k=k, seed=base_seed, jobs=jobs, method_seed=base_seed + r,
                                   smote_k=smote_k, max_pairs=max_pairs)
        for metric, summary in result.aggregate().items():
            values[metric].append(summary["mean"])

    values = {metric: v for metric, v in values.items() if None not in v}
    variance = {metric: float(statistics.pvariance(v)) for metric, v in values.items()}
    logger.info(f"Stability of {method} over {repeats} repeats: f1 variance={variance.get('f1')}")
    return StabilityReport(method, repeats, {m: tuple(v) for m, v in values.items()}, variance)
