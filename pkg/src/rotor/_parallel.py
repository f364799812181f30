"""Order-preserving process pool map.

Every task is computed by the same code on the same inputs whichever worker
runs it, so the reduced output is bitwise independent of the worker count.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("ROTOR_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, items, threads=None, chunksize=None):
    items = list(items)
    threads = default_threads() if threads is None else int(threads)
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    if chunksize is None:
        chunksize = max(1, len(items) // (4 * threads))
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
