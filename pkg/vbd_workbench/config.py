"""
Configuration handling for the VBD Workbench.

Two layers: `Config` holds user settings (cache, data directory) read from
~/.vbd-workbench.yml or the environment; run configurations for the experiment,
stability and anomaly commands are JSON/YAML documents validated into frozen
dataclasses before anything runs.

Experiment / stability run config:

    dataset:
      path: haberman.csv        # relative paths resolve against the config file
      format: csv               # csv | idx
      label_column: 3           # index (negative allowed) or header name
      positive_label: "2"
      header: false
    method: cross_concat        # none | smote | random_oversample | cross_concat
    classifier: {kind: linear_svm, learning_rate: 0.1, epochs: 200}
    k: 10
    seed: 0
    method_seed: null
    smote_k: 5
    max_pairs: null
    jobs: 1
    repeats: 10                 # stability only
    output_dir: results

Anomaly run config:

    train: {path: wbc_train.csv, label_column: -1, positive_label: "4"}
    test: {path: wbc_test.csv, label_column: -1, positive_label: "4"}
    normal_label: 0             # class (after positive_label mapping) treated as normal
    architecture: wbc           # preset name or explicit widths for the original data
    training: {epochs: 3}
    u: 20
    w: 12
    seed: 0
    max_virtual: null           # draw this many VBD rows instead of the full cross product
    tau: null                   # also run the single-threshold baseline at this tau
    baseline_training: {epochs: 100}
    output_dir: results
"""

import os
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Mapping, Optional, Union

import yaml

from vbd_workbench.anomaly import AnomalyConfig
from vbd_workbench.autoencoder import AEArchitecture, TrainConfig
from vbd_workbench.dataset import LabeledDataset, load_csv, load_idx
from vbd_workbench.exceptions import ValidationError
from vbd_workbench.experiment import METHODS
from vbd_workbench.models import ClassifierSpec

logger = logging.getLogger("vbd-workbench.config")

DEFAULT_CONFIG_PATH = "~/.vbd-workbench.yml"
DEFAULT_CACHE_TTL = 86400
DEFAULT_CACHE_DIR = "~/.vbd-workbench-cache"
DEFAULT_DATA_DIR = "~/.vbd-workbench/data"

DATASET_FORMATS = ("csv", "idx")


class Config:
    """User settings for the workbench."""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize with optional path to a settings file.

        Args:
            config_path: Path to settings file (defaults to ~/.vbd-workbench.yml)
        """
        self.config_path = os.path.expanduser(config_path or DEFAULT_CONFIG_PATH)
        self.config = self._load_config()

    def _load_config(self) -> Dict[str, Any]:
        config: Dict[str, Any] = {}

        if os.path.exists(self.config_path):
            try:
                with open(self.config_path, "r", encoding="utf-8") as f:
                    config = yaml.safe_load(f) or {}
                logger.debug(f"Loaded settings from {self.config_path}")
            except (OSError, yaml.YAMLError) as e:
                logger.warning(f"Failed to load settings from {self.config_path}: {str(e)}")

        cache = dict(config.get("cache") or {})
        if "directory" not in cache:
            cache["directory"] = os.environ.get("VBD_WORKBENCH_CACHE_DIR", DEFAULT_CACHE_DIR)
        if "ttl" not in cache:
            cache["ttl"] = int(os.environ.get("VBD_WORKBENCH_CACHE_TTL", DEFAULT_CACHE_TTL))
        cache["directory"] = os.path.expanduser(cache["directory"])
        config["cache"] = cache

        if not config.get("data_dir"):
            config["data_dir"] = os.environ.get("VBD_WORKBENCH_DATA_DIR", DEFAULT_DATA_DIR)
        config["data_dir"] = os.path.expanduser(config["data_dir"])
        return config

    def get_cache_config(self) -> Dict[str, Any]:
        """
        Get cache configuration.

        Returns:
            Dictionary with 'ttl' (seconds) and 'directory'
        """
        return self.config["cache"]

    def get_data_dir(self) -> str:
        """Directory where fetched datasets are written."""
        return self.config["data_dir"]


def _require_mapping(payload: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(payload, Mapping):
        raise ValidationError(f"{path}: expected a mapping, got {type(payload).__name__}")
    return payload


def _check_keys(payload: Mapping[str, Any], allowed, path: str) -> None:
    unknown = sorted(set(payload) - set(allowed))
    if unknown:
        prefix = f"{path}." if path else ""
        raise ValidationError(f"{prefix}{unknown[0]}: unknown field")


def _int_field(payload: Mapping[str, Any], name: str, default: Optional[int], path: str,
               minimum: Optional[int] = None) -> Optional[int]:
    value = payload.get(name, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{path}{name}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{path}{name}: must be >= {minimum}, got {value}")
    return value


def _nested(path: str, builder, payload: Any):
    try:
        return builder(_require_mapping(payload, path))
    except ValidationError as e:
        message = str(e)
        if message.startswith(f"{path}"):
            raise
        raise ValidationError(f"{path}.{message}") from e
    except TypeError as e:
        raise ValidationError(f"{path}: {e}") from e


def _resolve(path: str, base_dir: str) -> str:
    path = os.path.expanduser(str(path))
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


@dataclass(frozen=True)
class DatasetSource:
    """Where a labeled dataset comes from and how to read it."""

    path: str
    format: str = "csv"
    label_column: Union[int, str] = -1
    positive_label: Any = 1
    header: bool = False
    labels_path: Optional[str] = None
    limit: int = 60000
    positive_class: int = 0

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], base_dir: str = ".") -> "DatasetSource":
        _check_keys(payload, cls.__dataclass_fields__, "")
        if "path" not in payload:
            raise ValidationError("path: required field missing")
        values = dict(payload)
        values["path"] = _resolve(values["path"], base_dir)
        if values.get("labels_path") is not None:
            values["labels_path"] = _resolve(values["labels_path"], base_dir)
        source = cls(**values)

        if source.format not in DATASET_FORMATS:
            raise ValidationError(f"format: unknown dataset format '{source.format}'; "
                                  f"expected one of {', '.join(DATASET_FORMATS)}")
        if not os.path.exists(source.path):
            raise ValidationError(f"path: file not found: {source.path}")
        if source.format == "idx":
            if source.labels_path is None:
                raise ValidationError("labels_path: required for idx datasets")
            if not os.path.exists(source.labels_path):
                raise ValidationError(f"labels_path: file not found: {source.labels_path}")
        return source

    def load(self) -> LabeledDataset:
        if self.format == "idx":
            return load_idx(self.path, self.labels_path, self.limit, positive_class=self.positive_class)
        return load_csv(self.path, self.label_column, self.positive_label, header=self.header)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved configuration of a cross-validated experiment or stability probe."""

    dataset: DatasetSource
    method: str = "cross_concat"
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    k: int = 10
    seed: int = 0
    method_seed: Optional[int] = None
    smote_k: int = 5
    max_pairs: Optional[int] = None
    jobs: int = 1
    repeats: int = 10
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], base_dir: str = ".") -> "ExperimentConfig":
        payload = _require_mapping(payload, "config")
        _check_keys(payload, cls.__dataclass_fields__, "")
        if "dataset" not in payload:
            raise ValidationError("dataset: required field missing")

        method = payload.get("method", "cross_concat")
        if method not in METHODS:
            raise ValidationError(f"method: unknown method '{method}'; expected one of {', '.join(METHODS)}")

        return cls(
            dataset=_nested("dataset", lambda p: DatasetSource.from_dict(p, base_dir), payload["dataset"]),
            method=method,
            classifier=_nested("classifier", ClassifierSpec.from_dict, payload.get("classifier", {})),
            k=_int_field(payload, "k", 10, "", minimum=2),
            seed=_int_field(payload, "seed", 0, ""),
            method_seed=_int_field(payload, "method_seed", None, ""),
            smote_k=_int_field(payload, "smote_k", 5, "", minimum=1),
            max_pairs=_int_field(payload, "max_pairs", None, "", minimum=1),
            jobs=_int_field(payload, "jobs", 1, "", minimum=1),
            repeats=_int_field(payload, "repeats", 10, "", minimum=2),
            output_dir=_resolve(payload.get("output_dir", "results"), base_dir),
        )

    def override(self, **flags: Any) -> "ExperimentConfig":
        """Apply command-line flags that were actually given."""
        changes = {name: value for name, value in flags.items() if value is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["classifier"] = self.classifier.to_dict()
        return payload


@dataclass(frozen=True)
class AnomalyRunConfig:
    """Resolved configuration of a VBD anomaly-detection run."""

    train: DatasetSource
    test: DatasetSource
    architecture: AEArchitecture
    normal_label: int = 0
    training: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=3))
    u: int = 20
    w: int = 12
    seed: int = 0
    max_virtual: Optional[int] = None
    tau: Optional[float] = None
    baseline_training: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=100))
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any], base_dir: str = ".") -> "AnomalyRunConfig":
        payload = _require_mapping(payload, "config")
        _check_keys(payload, cls.__dataclass_fields__, "")
        for required in ("train", "test", "architecture"):
            if required not in payload:
                raise ValidationError(f"{required}: required field missing")

        normal_label = payload.get("normal_label", 0)
        if normal_label not in (0, 1) or isinstance(normal_label, bool):
            raise ValidationError(f"normal_label: expected 0 or 1, got {normal_label!r}")
        tau = payload.get("tau")
        if tau is not None and (isinstance(tau, bool) or not isinstance(tau, (int, float)) or tau < 0):
            raise ValidationError(f"tau: expected a non-negative number, got {tau!r}")

        config = cls(
            train=_nested("train", lambda p: DatasetSource.from_dict(p, base_dir), payload["train"]),
            test=_nested("test", lambda p: DatasetSource.from_dict(p, base_dir), payload["test"]),
            architecture=_architecture(payload["architecture"]),
            normal_label=normal_label,
            training=_nested("training", lambda p: TrainConfig.from_dict({"epochs": 3, **p}),
                             payload.get("training", {})),
            u=_int_field(payload, "u", 20, "", minimum=1),
            w=_int_field(payload, "w", 12, "", minimum=1),
            seed=_int_field(payload, "seed", 0, ""),
            max_virtual=_int_field(payload, "max_virtual", None, "", minimum=1),
            tau=None if tau is None else float(tau),
            baseline_training=_nested("baseline_training", lambda p: TrainConfig.from_dict({"epochs": 100, **p}),
                                      payload.get("baseline_training", {})),
            output_dir=_resolve(payload.get("output_dir", "results"), base_dir),
        )
        config.anomaly_config()
        return config

    def anomaly_config(self) -> AnomalyConfig:
        return AnomalyConfig(u=self.u, w=self.w, seed=self.seed)

    def override(self, **flags: Any) -> "AnomalyRunConfig":
        changes = {name: value for name, value in flags.items() if value is not None}
        return replace(self, **changes) if changes else self

    def to_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["architecture"] = list(self.architecture.layer_sizes)
        return payload


def _architecture(value: Any) -> AEArchitecture:
    try:
        if isinstance(value, str):
            return AEArchitecture.preset(value)
        if isinstance(value, (list, tuple)):
            return AEArchitecture(tuple(value))
    except ValidationError as e:
        if str(e).startswith("architecture"):
            raise
        raise ValidationError(f"architecture: {e}") from e
    except (TypeError, ValueError) as e:
        raise ValidationError(f"architecture: {e}") from e
    raise ValidationError(f"architecture: expected a preset name or a list of widths, got {value!r}")


def read_config_file(path: str) -> Dict[str, Any]:
    """Parse a JSON or YAML run configuration."""
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ValidationError(f"{path}: not valid JSON/YAML ({e})") from e
    if payload is None:
        raise ValidationError(f"{path}: configuration is empty")
    return dict(_require_mapping(payload, "config"))


def load_experiment_config(path: str) -> ExperimentConfig:
    config = ExperimentConfig.from_dict(read_config_file(path), base_dir=os.path.dirname(os.path.abspath(path)))
    logger.debug(f"Loaded experiment config from {path}")
    return config


def load_anomaly_config(path: str) -> AnomalyRunConfig:
    config = AnomalyRunConfig.from_dict(read_config_file(path), base_dir=os.path.dirname(os.path.abspath(path)))
    logger.debug(f"Loaded anomaly config from {path}")
    return config
