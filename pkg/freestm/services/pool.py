"""
Worker pool for per-path experiment tasks.

Tasks must be pure functions of their argument. Results always come back in
task order, so any reduction done over them is independent of the thread
count and of scheduling.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from freestm.utils.logging import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def default_threads() -> int:
    return os.cpu_count() or 1


class WorkerPool:
    def __init__(self, threads: Optional[int] = None):
        self.threads = max(1, threads if threads is not None else default_threads())
        self._executor: Optional[ThreadPoolExecutor] = None

    def __enter__(self) -> "WorkerPool":
        if self.threads > 1:
            self._executor = ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="freestm")
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

    def map_ordered(self, fn: Callable[[T], R], tasks: Iterable[T]) -> List[R]:
        tasks = list(tasks)
        if self._executor is None or len(tasks) < 2:
            return [fn(task) for task in tasks]
        logger.debug(f"Dispatching {len(tasks)} tasks to {self.threads} workers")
        return list(self._executor.map(fn, tasks))


def run_ordered(fn: Callable[[T], R], tasks: Iterable[T], pool: Optional[WorkerPool] = None) -> List[R]:
    """map_ordered on `pool`, or inline when no pool is given."""
    if pool is None:
        return [fn(task) for task in tasks]
    return pool.map_ordered(fn, tasks)
