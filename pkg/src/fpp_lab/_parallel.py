"""Replica-level concurrency helper.

Replicas are embarrassingly parallel (each derives its own seed), so the
mapping preserves index order and the aggregated output is identical for
any thread count.  The thread cap comes from the FPP_LAB_THREADS
environment variable unless the caller overrides it.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count(override: int | None = None) -> int:
    if override is not None:
        return max(1, int(override))
    raw = os.environ.get("FPP_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_indexed(fn, n: int, threads: int | None = None) -> list:
    """[fn(0), ..., fn(n-1)], evaluated with up to `threads` workers."""
    workers = thread_count(threads)
    if workers == 1 or n <= 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))
