"""Ordered parallel map capped by the BEAMCTL_THREADS environment variable."""
import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    try:
        n = int(os.environ.get("BEAMCTL_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def pmap(fn, items):
    """Like ``list(map(fn, items))``; results keep input order regardless of threads."""
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
