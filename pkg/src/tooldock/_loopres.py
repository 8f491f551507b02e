"""Per-event-loop resource cleanup.

Adapters that cache I/O resources keyed by the running loop (e.g. HTTP
sessions) register an async closer here; the executor drains the current
loop's closers when a batch finishes so short-lived loops never leak
connections.
"""

from __future__ import annotations

import asyncio
import weakref
from typing import Awaitable, Callable

_cleanups: "weakref.WeakKeyDictionary[asyncio.AbstractEventLoop, list]" = (
    weakref.WeakKeyDictionary()
)


def on_loop_close(closer: Callable[[], Awaitable[None]]) -> None:
    """Register an async closer tied to the currently running loop."""
    loop = asyncio.get_running_loop()
    _cleanups.setdefault(loop, []).append(closer)


async def close_loop_resources() -> None:
    """Run and clear every closer registered on the current loop."""
    loop = asyncio.get_running_loop()
    closers = _cleanups.pop(loop, [])
    for closer in closers:
        try:
            await closer()
        except Exception:
            pass
