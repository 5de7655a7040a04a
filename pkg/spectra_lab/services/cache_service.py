"""
Content-addressed cache of spectral data: .npz files next to the outputs,
with an in-memory store that keeps working when the directory is unwritable.
"""
import logging
import os
import tempfile
import threading
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from spectra_lab.core.models import content_hash

logger = logging.getLogger(__name__)

Arrays = Dict[str, np.ndarray]
SPOT_CHECK_TOL = 1e-12


class CacheService:
    """Arrays keyed by the SHA-256 of their assembly inputs"""

    def __init__(self, cache_dir: Optional[str] = None):
        self.cache_dir: Optional[Path] = None
        if cache_dir is not None:
            try:
                path = Path(cache_dir)
                path.mkdir(parents=True, exist_ok=True)
                probe = path / ".write_probe"
                probe.write_bytes(b"")
                probe.unlink()
                self.cache_dir = path
                logger.info(f"Spectral cache at {path}")
            except OSError as e:
                logger.warning(f"Cache directory {cache_dir} unusable: {e}. Caching in memory only.")
        self.memory: Dict[str, Arrays] = {}
        self.recipes: Dict[str, Callable[[], Arrays]] = {}
        self.hits = 0
        self.misses = 0
        self._lock = threading.Lock()

    @staticmethod
    def key(*parts: Any) -> str:
        return content_hash(list(parts))

    def _path(self, key: str) -> Optional[Path]:
        return self.cache_dir / f"{key}.npz" if self.cache_dir is not None else None

    def get(self, key: str) -> Optional[Arrays]:
        if key in self.memory:
            return self.memory[key]
        path = self._path(key)
        if path is not None and path.exists():
            try:
                with np.load(path) as data:
                    arrays = {name: np.array(data[name]) for name in data.files}
                self.memory[key] = arrays
                return arrays
            except (OSError, ValueError) as e:
                logger.error(f"Failed to read cache entry {key[:12]}: {e}")
        return None

    def put(self, key: str, arrays: Arrays) -> None:
        self.memory[key] = arrays
        path = self._path(key)
        if path is None:
            return
        try:
            # write-temp-then-rename keeps readers from seeing partial files
            fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".npz.tmp")
            with os.fdopen(fd, "wb") as handle:
                np.savez(handle, **arrays)
            os.replace(tmp, path)
        except OSError as e:
            logger.error(f"Failed to store cache entry {key[:12]}: {e}")

    def fetch(self, key: str, compute: Callable[[], Arrays]) -> Arrays:
        """Cached arrays for key, computing and storing them on a miss"""
        with self._lock:
            self.recipes[key] = compute
        arrays = self.get(key)
        if arrays is not None:
            with self._lock:
                self.hits += 1
            logger.debug(f"Cache hit {key[:12]}")
            return arrays
        with self._lock:
            self.misses += 1
        arrays = compute()
        self.put(key, arrays)
        return arrays

    def spot_check(self, rng: np.random.Generator) -> Optional[bool]:
        """
        Recompute one entry touched in this run and compare it with the cached
        copy. Returns None when nothing was touched.
        """
        keys: List[str] = sorted(self.recipes)
        if not keys:
            return None
        key = keys[int(rng.integers(len(keys)))]
        cached = self.get(key)
        fresh = self.recipes[key]()
        ok = cached is not None and set(cached) == set(fresh)
        if ok:
            for name, value in fresh.items():
                if not np.allclose(cached[name], value, rtol=SPOT_CHECK_TOL, atol=SPOT_CHECK_TOL):
                    ok = False
                    break
        if not ok:
            logger.warning(f"Cache spot-check mismatch for entry {key[:12]}")
        return ok
