"""Worker pool for independent per-level and per-depth jobs."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

import psutil

from dyadic_cubes.constants import WORKERS_ENV
from dyadic_cubes.core.errors import InvalidInput

T = TypeVar("T")
R = TypeVar("R")


def worker_count(requested: int | None = None) -> int:
    """Explicit request, else $DYADIC_CUBES_WORKERS, else physical cores."""
    if requested is not None:
        if requested < 1:
            raise InvalidInput(f"workers must be >= 1, got {requested}")
        return requested
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InvalidInput(f"{WORKERS_ENV}={env!r} is not an integer") from None
        if value < 1:
            raise InvalidInput(f"{WORKERS_ENV} must be >= 1, got {value}")
        return value
    return psutil.cpu_count(logical=False) or 1


def map_ordered(fn: Callable[[T], R], items: Iterable[T], workers: int | None = None) -> list[R]:
    """``[fn(x) for x in items]`` on a thread pool; results keep input order."""
    items = list(items)
    n_jobs = worker_count(workers)
    n_jobs = n_jobs if len(items) > n_jobs else len(items)
    if n_jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, items))
