#!/usr/bin/env python3
"""
decoscatter - Centralized Worker Pool Manager
One thread pool per process for independent sector evolutions and sweep points.
Results always come back in submission order.
"""

import atexit
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from logger import log_debug, log_error, log_info

T = TypeVar('T')
R = TypeVar('R')


class WorkerPoolManager:
    """Owns the shared executor; a single worker means plain sequential execution."""

    _instance: Optional['WorkerPoolManager'] = None
    _initialized = False

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __init__(self):
        if not self._initialized:
            self._initialized = True
            self._executor: Optional[ThreadPoolExecutor] = None
            self._threads = 1
            atexit.register(self.cleanup)

    def initialize(self, threads: int = 1) -> bool:
        """Size the pool. Returns False if the request is invalid."""
        if threads < 1:
            log_error(f"Worker count must be >= 1, got {threads}")
            return False
        if self._executor is not None and threads == self._threads:
            return True
        self.cleanup()
        self._threads = threads
        if threads > 1:
            self._executor = ThreadPoolExecutor(max_workers=threads, thread_name_prefix='decoscatter')
            log_info(f"Worker pool started with {threads} threads")
        return True

    def map(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        items = list(items)
        if self._executor is None or len(items) < 2:
            return [func(item) for item in items]
        return list(self._executor.map(func, items))

    def cleanup(self):
        """Shut the executor down."""
        try:
            if self._executor is not None:
                self._executor.shutdown(wait=True)
                self._executor = None
                log_debug("Worker pool shut down")
        except Exception as e:
            log_error(f"Error during worker pool shutdown: {e}")
        self._threads = 1

    @property
    def threads(self) -> int:
        return self._threads


# Global instance
worker_pool = WorkerPoolManager()


def safe_pool_init(threads: int = 1) -> bool:
    """Safe wrapper for pool initialization."""
    return worker_pool.initialize(threads)


def safe_pool_shutdown():
    """Safe wrapper for pool cleanup."""
    worker_pool.cleanup()


def parallel_map(func: Callable[[T], R], items: Iterable[T]) -> List[R]:
    """Ordered map over the shared pool (sequential when no pool is running)."""
    return worker_pool.map(func, items)
