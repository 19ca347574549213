"""Chunked associative reductions with an optional thread pool.

Heavy per-image passes (covariance accumulation, cluster assignment) are
split into fixed-size chunks whose partial results are combined in chunk
order. The combination order never depends on the worker count, so results
are bit-identical whether the chunks run serially or on a pool.

The env var ``WARMUP_THREADS`` caps the pool size.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

from .errors import ConfigError

T = TypeVar("T")

# Chunk size is a format-level constant, not a tuning knob: partial sums are
# combined per chunk, so changing it would change float rounding.
CHUNK_IMAGES = 1024


def worker_count() -> int:
    """Worker cap from WARMUP_THREADS, defaulting to min(4, cpu_count)."""
    raw = os.environ.get("WARMUP_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"WARMUP_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"WARMUP_THREADS must be >= 1, got {n}")
    return n


def chunk_bounds(total: int, chunk: int = CHUNK_IMAGES) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def map_chunks(fn: Callable[[T], object], chunks: Sequence[T], threads: int | None = None) -> list:
    """Apply fn to every chunk, returning results in chunk order."""
    if threads is None:
        threads = worker_count()
    if threads <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=min(threads, len(chunks))) as pool:
        return list(pool.map(fn, chunks))
