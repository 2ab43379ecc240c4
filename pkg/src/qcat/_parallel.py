from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count(n_items):
    """Workers for a scan of ``n_items``, capped by ``QCAT_THREADS``."""
    cap = os.environ.get("QCAT_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, n_items))


def parallel_map(fn, items):
    """Ordered map over independent runs; results never depend on scheduling."""
    items = list(items)
    n = worker_count(len(items))
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
