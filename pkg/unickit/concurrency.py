"""Thread-pool helpers honoring UNIC_KIT_THREADS."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import TYPE_CHECKING, TypeVar

from tqdm import tqdm

from unickit.exceptions.local_exceptions import ConfigurationError

if TYPE_CHECKING:
    from collections.abc import Callable, Sequence

THREADS_ENV = "UNIC_KIT_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def thread_count() -> int:
    """Worker cap from the environment, else the machine's CPU count."""
    raw = os.getenv(THREADS_ENV, "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        msg = f"{THREADS_ENV} must be a positive integer, got '{raw}'"
        raise ConfigurationError(msg) from None
    if value < 1:
        msg = f"{THREADS_ENV} must be a positive integer, got '{raw}'"
        raise ConfigurationError(msg)
    return value


def map_ordered(
    fn: Callable[[T], R],
    items: Sequence[T],
    *,
    desc: str,
    threads: int | None = None,
) -> list[R]:
    """Apply `fn` to every item; results keep the input order."""
    workers = min(threads or thread_count(), max(len(items), 1))
    if workers == 1:
        return [fn(item) for item in tqdm(items, desc=desc, disable=None)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            tqdm(
                pool.map(fn, items),
                total=len(items),
                desc=desc,
                disable=None,
            ),
        )
