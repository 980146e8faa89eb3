"""Run a list of sync callables in parallel via a private asyncio loop.

Replicate work is numpy-heavy and numpy releases the GIL inside its kernels,
so `asyncio.to_thread` gives useful parallelism without a process pool. The
callers stay sync: each fan-out point calls `gather_sync([...])`, gets results
back in input order, and reduces them on the main thread.

Determinism: work is split into chunks whose boundaries never depend on the
thread count (`chunk_ranges`), every chunk derives its own seeds, and results
come back in input order. Changing `threads` changes wall time only.
"""

import asyncio
from typing import Callable, TypeVar

R = TypeVar("R")


def gather_sync(calls: list[Callable[[], R]], *, threads: int = 1) -> list[R]:
    """Run the given zero-arg callables concurrently and return results in order.

    At most `threads` calls run at once. With threads == 1 the calls run
    inline on the caller's thread. The first exception raised by a call
    propagates (asyncio.gather with return_exceptions=False).
    """
    if not calls:
        return []
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    if threads == 1:
        return [c() for c in calls]

    async def _run() -> list[R]:
        gate = asyncio.Semaphore(threads)

        async def _one(c: Callable[[], R]) -> R:
            async with gate:
                return await asyncio.to_thread(c)

        return await asyncio.gather(*(_one(c) for c in calls))

    return asyncio.run(_run())


def chunk_ranges(n: int, chunk: int) -> list[tuple[int, int]]:
    """Split range(n) into consecutive [start, stop) blocks of size `chunk`."""
    if chunk < 1:
        raise ValueError(f"chunk must be >= 1, got {chunk}")
    return [(a, min(a + chunk, n)) for a in range(0, n, chunk)]
