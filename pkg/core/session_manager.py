"""Session management for construction artifacts of one (space, subset) pair."""

import threading
import time
from typing import Any, Dict, Optional

import numpy as np

from core.partition import Partition, build_partition
from core.quasi_balls import QuasiBallFamily, build_quasi_balls, build_tuned_family
from core.space import MetricMeasureSpace, RegularSubset, SpaceParams, estimate_doubling
from core.whitney import WhitneyCover, build_whitney

try:
    from utils.system_utils import get_memory_usage
    UTILS_AVAILABLE = True
except ImportError:
    UTILS_AVAILABLE = False


class ConstructionSession:
    """Caches doubling estimate, cover, quasi-balls and partition with thread safety.

    Downstream artifacts are dropped whenever an upstream input changes, so a
    caller can ask for the partition at any time and only the stale stages
    are rebuilt.
    """

    def __init__(self, logger=None):
        self.logger = logger
        self._lock = threading.Lock()
        self._space: Optional[MetricMeasureSpace] = None
        self._mask: Optional[np.ndarray] = None
        self._params: Optional[SpaceParams] = None
        self._cover: Optional[WhitneyCover] = None
        self._family: Optional[QuasiBallFamily] = None
        self._family_key = None
        self._partition: Optional[Partition] = None

    def set_space(self, space: MetricMeasureSpace, mask: np.ndarray) -> None:
        """Install a new space and subset, discarding every cached stage."""
        with self._lock:
            self._space = space
            self._mask = np.asarray(mask, dtype=bool).copy()
            self._invalidate_internal()

    def _invalidate_internal(self) -> None:
        self._params = None
        self._cover = None
        self._family = None
        self._family_key = None
        self._partition = None

    def _require_space(self) -> None:
        if self._space is None:
            raise RuntimeError("no space installed in the construction session")

    def _timed(self, stage: str, build):
        if UTILS_AVAILABLE:
            memory_pre = get_memory_usage()
        start_time = time.time()
        result = build()
        if self.logger:
            self.logger.debug(f"{stage} built in {time.time() - start_time:.2f} seconds")
            if UTILS_AVAILABLE:
                memory_post = get_memory_usage()
                self.logger.debug(f"{stage} memory usage: "
                                  f"{memory_pre['available_gb'] - memory_post['available_gb']:.2f} GB")
        return result

    @property
    def space(self) -> MetricMeasureSpace:
        with self._lock:
            self._require_space()
            return self._space

    @property
    def mask(self) -> np.ndarray:
        with self._lock:
            self._require_space()
            return self._mask

    def get_params(self) -> SpaceParams:
        with self._lock:
            self._require_space()
            if self._params is None:
                self._params = self._timed("doubling estimate",
                                           lambda: estimate_doubling(self._space, logger=self.logger))
            return self._params

    def get_cover(self) -> WhitneyCover:
        with self._lock:
            return self._get_cover_internal()

    def _get_cover_internal(self) -> WhitneyCover:
        self._require_space()
        if self._cover is None:
            self._cover = self._timed("Whitney cover",
                                      lambda: build_whitney(self._space, self._mask, logger=self.logger))
        return self._cover

    def set_cover(self, cover: WhitneyCover) -> None:
        """Use an externally built cover (e.g. read back from a dump)."""
        with self._lock:
            self._require_space()
            self._cover = cover
            self._family = None
            self._family_key = None
            self._partition = None

    def get_family(self, regular: RegularSubset, epsilon: Any = "auto") -> QuasiBallFamily:
        """Quasi-balls at scale regular.delta; epsilon "auto" runs the tuning loop."""
        with self._lock:
            cover = self._get_cover_internal()
            key = (float(regular.delta), epsilon if epsilon == "auto" else float(epsilon))
            if self._family is None or self._family_key != key:
                if self._family is not None and self.logger:
                    self.logger.debug("Recreating quasi-balls due to changed parameters")
                if epsilon == "auto":
                    build = lambda: build_tuned_family(self._space, self._mask, cover, regular.delta,
                                                       logger=self.logger)
                else:
                    build = lambda: build_quasi_balls(self._space, self._mask, cover, float(epsilon),
                                                      regular.delta, logger=self.logger)
                self._family = self._timed("quasi-balls", build)
                self._family_key = key
            return self._family

    def get_partition(self) -> Partition:
        with self._lock:
            cover = self._get_cover_internal()
            if self._partition is None:
                self._partition = self._timed("partition of unity",
                                              lambda: build_partition(self._space, self._mask, cover,
                                                                      logger=self.logger))
            return self._partition

    def recreate_if_needed(self, space: MetricMeasureSpace, mask: np.ndarray) -> bool:
        """Reinstall only when the space or subset changed; returns True if the cache was reset."""
        mask = np.asarray(mask, dtype=bool)
        with self._lock:
            if (self._space is space and self._mask is not None
                    and self._mask.shape == mask.shape and np.array_equal(self._mask, mask)):
                return False
            if self._space is not None and self.logger:
                self.logger.debug("Recreating construction session due to changed space or subset")
            self._space = space
            self._mask = mask.copy()
            self._invalidate_internal()
            return True

    def get_session_info(self) -> Dict[str, Any]:
        with self._lock:
            return {
                'points': None if self._space is None else self._space.n,
                'subset_size': None if self._mask is None else int(self._mask.sum()),
                'params_ready': self._params is not None,
                'cover_balls': None if self._cover is None else len(self._cover),
                'family_key': self._family_key,
                'partition_ready': self._partition is not None,
            }

    def destroy(self) -> None:
        with self._lock:
            if self._space is not None and self.logger:
                self.logger.debug("Destroying construction session")
            self._space = None
            self._mask = None
            self._invalidate_internal()
