"""
Download and cleaning of the UCI benchmark datasets used by the experiments.
"""

import io
import os
import time
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import pandas as pd
import requests

from vbd_workbench.cache import CacheManager
from vbd_workbench.exceptions import DataFormatError, ValidationError

logger = logging.getLogger("vbd-workbench.fetcher")

UCI_BASE_URL = "https://archive.ics.uci.edu/ml/machine-learning-databases"


@dataclass(frozen=True)
class DatasetInfo:
    """Where a benchmark lives and how its raw file is laid out."""

    url: str
    label_column: int
    positive_label: str
    drop_columns: Tuple[int, ...] = ()
    header_rows: int = 0


@dataclass(frozen=True)
class FetchedDataset:
    """A cleaned CSV ready for load_csv(path, label_column, positive_label)."""

    path: str
    label_column: int
    positive_label: str


# positive_label is the minority class of each dataset
REGISTRY: Dict[str, DatasetInfo] = {
    "haberman": DatasetInfo(f"{UCI_BASE_URL}/haberman/haberman.data", label_column=3, positive_label="2"),
    "wbc": DatasetInfo(f"{UCI_BASE_URL}/breast-cancer-wisconsin/breast-cancer-wisconsin.data",
                       label_column=10, positive_label="4", drop_columns=(0,)),
    "blood": DatasetInfo(f"{UCI_BASE_URL}/blood-transfusion/transfusion.data",
                         label_column=4, positive_label="1", header_rows=1),
    "parkinsons": DatasetInfo(f"{UCI_BASE_URL}/parkinsons/parkinsons.data",
                              label_column=17, positive_label="0", drop_columns=(0,), header_rows=1),
    "ionosphere": DatasetInfo(f"{UCI_BASE_URL}/ionosphere/ionosphere.data", label_column=34, positive_label="b"),
}


def clean_dataset(text: str, info: DatasetInfo) -> pd.DataFrame:
    """
    Parse a raw UCI file into a frame with features first and the label last.

    Id/name columns are dropped and rows with '?' missing markers are removed.
    """
    frame = pd.read_csv(io.StringIO(text), header=None, dtype=str, skiprows=info.header_rows,
                        skipinitialspace=True, keep_default_na=False, skip_blank_lines=True)
    if info.label_column >= frame.shape[1]:
        raise DataFormatError(f"{info.url}: expected a label in column {info.label_column}, "
                              f"found {frame.shape[1]} columns")
    frame = frame.apply(lambda column: column.str.strip())

    missing = (frame == "?").any(axis=1)
    if missing.any():
        logger.info(f"Dropping {int(missing.sum())} rows with missing values from {info.url}")
        frame = frame[~missing]

    features = [c for c in frame.columns if c != info.label_column and c not in info.drop_columns]
    return frame[features + [info.label_column]].reset_index(drop=True)


class DatasetFetcher:
    """Downloads benchmark datasets with caching and retries."""

    def __init__(self, cache_manager: CacheManager, data_dir: str, retry_count: int = 3,
                 retry_delay: int = 2, timeout: int = 30):
        """
        Initialize the fetcher.

        Args:
            cache_manager: Instance of CacheManager for caching raw downloads
            data_dir: Directory where cleaned CSV files are written
            retry_count: Number of attempts per download
            retry_delay: Base delay between attempts in seconds (doubled each retry)
            timeout: Request timeout in seconds
        """
        self.cache = cache_manager
        self.data_dir = os.path.expanduser(data_dir)
        self.retry_count = retry_count
        self.retry_delay = retry_delay
        self.timeout = timeout

    def download(self, url: str) -> str:
        """
        GET a text resource with retry logic.

        Returns:
            Response body
        """
        for attempt in range(self.retry_count):
            try:
                response = requests.get(url, timeout=self.timeout)
                if response.status_code >= 400:
                    logger.warning(f"Download of {url} failed: {response.status_code}")
                    if attempt < self.retry_count - 1:
                        sleep_time = self.retry_delay * (2 ** attempt)
                        logger.info(f"Retrying in {sleep_time} seconds...")
                        time.sleep(sleep_time)
                        continue
                    response.raise_for_status()
                return response.text

            except requests.RequestException as e:
                if attempt < self.retry_count - 1:
                    sleep_time = self.retry_delay * (2 ** attempt)
                    logger.warning(f"Request failed with {str(e)}. Retrying in {sleep_time} seconds...")
                    time.sleep(sleep_time)
                else:
                    logger.error(f"Download of {url} failed after {self.retry_count} attempts: {str(e)}")
                    raise

        raise requests.RequestException(f"Download of {url} failed after {self.retry_count} attempts")

    def get_raw(self, name: str) -> str:
        """Raw text of a registered dataset, from cache when fresh."""
        info = _lookup(name)
        cached = self.cache.get(name, info.url)
        if cached is not None:
            return cached

        text = self.download(info.url)
        self.cache.set(name, info.url, text)
        return text

    def fetch(self, name: str) -> FetchedDataset:
        """
        Download (or reuse) a benchmark and write its cleaned CSV to the data directory.

        Returns:
            FetchedDataset describing the written file
        """
        info = _lookup(name)
        frame = clean_dataset(self.get_raw(name), info)

        os.makedirs(self.data_dir, exist_ok=True)
        path = os.path.join(self.data_dir, f"{name}.csv")
        frame.to_csv(path, header=False, index=False)
        logger.info(f"Wrote {frame.shape[0]} rows of {name} to {path}")
        return FetchedDataset(path, -1, info.positive_label)


def _lookup(name: str) -> DatasetInfo:
    if name not in REGISTRY:
        raise ValidationError(f"dataset: unknown benchmark '{name}'; expected one of {', '.join(sorted(REGISTRY))}")
    return REGISTRY[name]


def fetch(name: str, data_dir: str, cache_manager: Optional[CacheManager] = None) -> FetchedDataset:
    """Fetch a registered benchmark into `data_dir`."""
    return DatasetFetcher(cache_manager or CacheManager(), data_dir).fetch(name)
