"""
Download cache for benchmark datasets.

Each entry is the raw text of one registered dataset, stored as
`<name>-<digest>.txt` where the digest is taken from the source URL, so a
registry entry that moves to a new URL never serves the old download.
"""

import os
import re
import time
import hashlib
import logging
from typing import Optional

logger = logging.getLogger("vbd-workbench.cache")

_NAME = re.compile(r"^[A-Za-z0-9_-]+$")
_SUFFIX = ".txt"


def url_digest(url: str) -> str:
    return hashlib.sha256(url.encode("utf-8")).hexdigest()[:16]


class CacheManager:
    """File cache of raw dataset downloads keyed by registry name and source URL."""

    def __init__(self, cache_ttl: int = 86400, cache_dir: Optional[str] = None):
        """
        Initialize the cache manager.

        Args:
            cache_ttl: Seconds a download stays fresh (default: 24 hours)
            cache_dir: Directory of the cached downloads, defaults to ~/.vbd-workbench-cache
        """
        self.cache_ttl = cache_ttl
        self.cache_dir = os.path.expanduser(cache_dir or "~/.vbd-workbench-cache")
        os.makedirs(self.cache_dir, exist_ok=True)

        logger.debug(f"Dataset cache at {self.cache_dir}, TTL {cache_ttl}s")

    def path_for(self, name: str, url: str) -> str:
        if not _NAME.match(name):
            raise ValueError(f"dataset name {name!r} may only hold letters, digits, '_' and '-'")
        return os.path.join(self.cache_dir, f"{name}-{url_digest(url)}{_SUFFIX}")

    def _entries(self, name: Optional[str] = None):
        for file_name in sorted(os.listdir(self.cache_dir)):
            if not file_name.endswith(_SUFFIX):
                continue
            entry_name = file_name[:-len(_SUFFIX)].rsplit("-", 1)[0]
            if name is None or entry_name == name:
                yield entry_name, os.path.join(self.cache_dir, file_name)

    def get(self, name: str, url: str) -> Optional[str]:
        """
        Cached download of `name` from `url`.

        Returns:
            The raw text, or None when missing, expired or unreadable
        """
        path = self.path_for(name, url)
        if not os.path.exists(path):
            return None

        age = time.time() - os.path.getmtime(path)
        if age > self.cache_ttl:
            logger.debug(f"Cached {name} is {age:.0f}s old, refetching")
            return None

        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except (OSError, UnicodeDecodeError) as e:
            logger.warning(f"Error reading cached {name} at {path}: {str(e)}")
            return None
        logger.debug(f"Using cached {name} ({len(text)} characters)")
        return text

    def set(self, name: str, url: str, text: str) -> None:
        """Store the download of `name`, replacing entries fetched from other URLs."""
        path = self.path_for(name, url)
        for _, stale in self._entries(name):
            if stale != path:
                self._remove(stale)

        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            logger.debug(f"Cached {name} from {url}")
        except OSError as e:
            logger.warning(f"Error writing cached {name} to {path}: {str(e)}")

    def invalidate(self, name: str) -> bool:
        """
        Drop every cached download of one dataset.

        Returns:
            True if an entry was removed
        """
        removed = [self._remove(path) for _, path in self._entries(name)]
        if any(removed):
            logger.debug(f"Invalidated cached {name}")
        return any(removed)

    def clear(self) -> None:
        """Drop every cached download."""
        for _, path in self._entries():
            self._remove(path)
        logger.info("Cleared the dataset cache")

    def _remove(self, path: str) -> bool:
        try:
            os.remove(path)
            return True
        except OSError as e:
            logger.warning(f"Error removing cache file {path}: {str(e)}")
            return False
