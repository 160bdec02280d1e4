"""
Common plumbing of the experiment commands.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence

from data_manager import DataManager
from kernels import PolyBasis
from models.run_config import RunConfig

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, int, int], None]


class Experiment:
    """One CLI command: computes its rows and writes them through a DataManager."""

    name = ''

    def __init__(self, config: RunConfig, data: Optional[DataManager] = None,
                 progress_callback: Optional[ProgressCallback] = None):
        self.config = config
        self.data = data or DataManager(config.out)
        self.progress_callback = progress_callback

    def _report_progress(self, message: str, current: int = 0, total: int = 0):
        """Report progress if callback is set."""
        if self.progress_callback:
            self.progress_callback(message, current, total)

    def _map(self, function: Callable, items: Sequence, label: str) -> list:
        """Ordered map over the worker pool, reporting every finished item."""
        items = list(items)
        total = len(items)
        results = []
        if self.config.workers <= 1:
            for index, item in enumerate(items, start=1):
                results.append(function(item))
                self._report_progress(label, index, total)
            return results
        with ThreadPoolExecutor(max_workers=self.config.workers) as pool:
            for index, result in enumerate(pool.map(function, items), start=1):
                results.append(result)
                self._report_progress(label, index, total)
        return results

    @property
    def basis(self) -> PolyBasis:
        return PolyBasis(self.config.poly)

    def run(self) -> List[str]:
        """Compute and write the outputs; returns the written paths."""
        raise NotImplementedError
