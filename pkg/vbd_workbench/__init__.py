"""
VBD Workbench - Virtual Big Data synthesis, Cross-Concatenation for imbalanced
classification and VBD-based autoencoder anomaly detection.
"""

from typing import Optional

from vbd_workbench.anomaly import DetectionRun, run_detection
from vbd_workbench.cache import CacheManager
from vbd_workbench.config import AnomalyRunConfig, Config, ExperimentConfig
from vbd_workbench.dataset import LabeledDataset, load_csv
from vbd_workbench.experiment import ExperimentResult, StabilityReport, run_cv_experiment, stability_probe
from vbd_workbench.fetcher import DatasetFetcher, FetchedDataset

__version__ = "0.1.0"


class VBDWorkbench:
    """
    Entry point tying user settings, the dataset cache and the high-level runs together.
    """

    def __init__(self, config: Optional[Config] = None):
        """
        Initialize the workbench.

        Args:
            config: User settings, read from ~/.vbd-workbench.yml when omitted
        """
        self.config = config or Config()
        cache_config = self.config.get_cache_config()
        self.cache = CacheManager(cache_ttl=cache_config["ttl"], cache_dir=cache_config["directory"])
        self.fetcher = DatasetFetcher(self.cache, self.config.get_data_dir())

    def fetch_dataset(self, name: str, refresh: bool = False) -> FetchedDataset:
        """Download a registered benchmark and write its cleaned CSV; `refresh` skips the cache."""
        if refresh:
            self.cache.invalidate(name)
        return self.fetcher.fetch(name)

    def load_benchmark(self, name: str) -> LabeledDataset:
        """Fetch a benchmark (cached) and load it with its minority class as label 1."""
        fetched = self.fetch_dataset(name)
        return load_csv(fetched.path, fetched.label_column, fetched.positive_label)

    def run_experiment(self, config: ExperimentConfig) -> ExperimentResult:
        """Cross-validated run of the configured method and classifier."""
        return run_cv_experiment(config.dataset.load(), config.method, config.classifier, k=config.k,
                                 seed=config.seed, jobs=config.jobs, method_seed=config.method_seed,
                                 smote_k=config.smote_k, max_pairs=config.max_pairs)

    def run_stability(self, config: ExperimentConfig) -> StabilityReport:
        """Repeat the configured experiment with varying method seeds."""
        return stability_probe(config.dataset.load(), config.method, config.classifier, repeats=config.repeats,
                               base_seed=config.seed, k=config.k, jobs=config.jobs, smote_k=config.smote_k,
                               max_pairs=config.max_pairs)

    def run_anomaly(self, config: AnomalyRunConfig) -> DetectionRun:
        """Train on VBD of the normal class and score the configured test set."""
        return run_detection(config.train.load(), config.test.load(), config.architecture, config.training,
                             config.anomaly_config(), normal_label=config.normal_label,
                             max_virtual=config.max_virtual, tau=config.tau,
                             baseline_training=config.baseline_training)
