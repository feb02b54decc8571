"""Small shared helpers: thread capping and array hygiene."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

from .errors import NonFinite

THREADS_ENV = "HYPOHEAT_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def worker_count() -> int:
    """Number of worker threads grid evaluations may use.

    Controlled by the HYPOHEAT_THREADS environment variable; defaults to 1
    (serial).  Values below 1 are clamped to 1.
    """
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(n, 1)


def parallel_map(fn: Callable[[T], R], items: Sequence[T]) -> list[R]:
    """Map fn over items, in order, using at most worker_count() threads."""
    workers = min(worker_count(), max(len(items), 1))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and reject non-finite entries."""
    arr = np.atleast_2d(np.array(a, dtype=float))
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} has non-finite entries")
    return arr


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce to a 1-D float64 array and reject non-finite entries."""
    arr = np.atleast_1d(np.array(a, dtype=float)).ravel()
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} has non-finite entries")
    return arr


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)
