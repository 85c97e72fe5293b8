"""Worker pool for independent replicates."""
import os
from concurrent.futures import ThreadPoolExecutor

from ..errors import ContractViolation


def worker_count():
    """Worker cap from ``LPL_THREADS`` (default: number of cores)."""
    raw = os.environ.get("LPL_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError as exc:
        raise ContractViolation(f"LPL_THREADS must be a positive integer, got {raw!r}") from exc
    if n < 1:
        raise ContractViolation(f"LPL_THREADS must be a positive integer, got {raw!r}")
    return n


def pmap(fn, items):
    """``[fn(x) for x in items]`` on up to ``worker_count()`` threads, in input order."""
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
