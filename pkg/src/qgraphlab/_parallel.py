"""Deterministic work-item parallelism.

Items are computed independently and merged in index order, so results are
identical for any worker count. Threads suffice: the heavy lifting happens
inside LAPACK calls that release the GIL.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, workers: int = 1) -> list:
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
