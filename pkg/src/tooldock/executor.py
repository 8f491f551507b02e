"""Concurrent execution of tool-call batches.

Two modes: shared (bounded concurrency inside this process, threads for
synchronous invokers) and isolated (separate worker processes fed over a
framed pipe protocol, see ``isolated.py``). The batch API is safe to call
from synchronous code and from inside a running event loop; internally the
batch always runs on its own loop.

Per call: validation, per-attempt timeout, exponential backoff on transient
failures. Validation failures are permanent and never retried. A call whose
tool cannot be replicated into workers transparently falls back to shared
execution and its result metadata carries ``fallback: "shared"``.
"""

from __future__ import annotations

import asyncio
import atexit
import concurrent.futures
import os
import threading
import time
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Awaitable

from .errors import (
    CallTimeoutError,
    MalformedJsonError,
    SchemaViolationError,
    ToolDockError,
    ToolRaisedError,
    UnknownToolError,
    sanitize,
)
from .isolated import WorkerUnknownToolError
from .model import ExecutionMode, Tool, ToolCall, ToolCallResult
from .schema import validate_arguments

if TYPE_CHECKING:
    from .registry import ToolRegistry


def _default_shared_workers() -> int:
    return (os.cpu_count() or 1) * 4


def _default_isolated_workers() -> int:
    return os.cpu_count() or 1


@dataclass
class RetryPolicy:
    max_attempts: int = 3
    base_backoff: float = 0.1  # seconds
    multiplier: float = 2.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def backoff(self, attempt: int) -> float:
        return self.base_backoff * self.multiplier ** (attempt - 1)


@dataclass
class ExecutorConfig:
    mode: ExecutionMode = ExecutionMode.SHARED
    shared_workers: int = field(default_factory=_default_shared_workers)
    isolated_workers: int = field(default_factory=_default_isolated_workers)
    per_call_timeout: float = 30.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self):
        if self.shared_workers < 1 or self.isolated_workers < 1:
            raise ValueError("worker counts must be >= 1")
        if self.per_call_timeout <= 0:
            raise ValueError("per_call_timeout must be positive")


def run_coroutine_blocking(coro: Awaitable) -> Any:
    """Drive a coroutine to completion from synchronous code.

    Safe inside a running event loop: the coroutine then runs on a fresh
    loop in a helper thread, so the caller's loop is never re-entered.
    """
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(coro)  # type: ignore[arg-type]
    with concurrent.futures.ThreadPoolExecutor(max_workers=1) as pool:
        return pool.submit(asyncio.run, coro).result()


def jsonify_result(value: Any) -> Any:
    """Coerce a native return value to a JSON value; unknown types stringify."""
    if value is None or isinstance(value, (bool, int, float, str)):
        return value
    if isinstance(value, (list, tuple)):
        return [jsonify_result(v) for v in value]
    if isinstance(value, dict):
        return {str(k): jsonify_result(v) for k, v in value.items()}
    return str(value)


def _coerce_error(exc: BaseException) -> ToolDockError:
    if isinstance(exc, ToolDockError):
        return exc
    if isinstance(exc, asyncio.TimeoutError):
        return CallTimeoutError("tool call timed out")
    return ToolRaisedError(str(exc) or type(exc).__name__)


async def arun_single(
    tool: Tool,
    args: dict,
    *,
    timeout: float | None = None,
    pool: concurrent.futures.Executor | None = None,
) -> Any:
    """Invoke one tool with validated arguments; asynchronous twin of run_single."""
    try:
        if tool.is_async:
            value = await asyncio.wait_for(tool.invoker(args), timeout)
        else:
            loop = asyncio.get_running_loop()
            value = await asyncio.wait_for(loop.run_in_executor(pool, tool.invoker, args), timeout)
    except (ToolDockError, asyncio.TimeoutError) as exc:
        raise _coerce_error(exc) from exc
    except Exception as exc:
        raise ToolRaisedError(sanitize(str(exc) or type(exc).__name__)) from exc
    return jsonify_result(value)


def run_single(tool: Tool, args: dict, *, timeout: float | None = None) -> Any:
    """Invoke one tool with validated arguments, bridging async invokers."""
    return run_coroutine_blocking(arun_single(tool, args, timeout=timeout))


class Executor:
    """Owns the shared thread pool and the isolated worker pool, both lazy."""

    def __init__(self, config: ExecutorConfig | None = None):
        self.config = config or ExecutorConfig()
        self._threads: concurrent.futures.ThreadPoolExecutor | None = None
        self._workers = None  # isolated.WorkerPool
        self._lock = threading.Lock()
        atexit.register(self.shutdown)

    # --- pools ----------------------------------------------------------------

    def _thread_pool(self) -> concurrent.futures.ThreadPoolExecutor:
        with self._lock:
            if self._threads is None:
                # headroom for threads abandoned by per-call timeouts
                self._threads = concurrent.futures.ThreadPoolExecutor(
                    max_workers=self.config.shared_workers + 8,
                    thread_name_prefix="tooldock-invoke",
                )
            return self._threads

    def _worker_pool(self, registry: "ToolRegistry"):
        from .isolated import WorkerPool

        manifest = registry.worker_manifest()
        with self._lock:
            if self._workers is None or not self._workers.matches(manifest):
                if self._workers is not None:
                    self._workers.shutdown()
                self._workers = WorkerPool(self.config.isolated_workers, manifest)
            return self._workers

    def shutdown(self) -> None:
        with self._lock:
            if self._threads is not None:
                self._threads.shutdown(wait=False, cancel_futures=True)
                self._threads = None
            if self._workers is not None:
                self._workers.shutdown()
                self._workers = None

    # --- batch API -------------------------------------------------------------

    def _check_batch(self, calls: list[ToolCall]) -> None:
        if not calls:
            raise ValueError("calls must be non-empty")
        ids = [c.id for c in calls]
        if len(set(ids)) != len(ids):
            raise ValueError("tool call ids must be unique within a batch")

    def execute_tool_calls(
        self,
        registry: "ToolRegistry",
        calls: list[ToolCall],
        mode_override: ExecutionMode | None = None,
    ) -> list[ToolCallResult]:
        return run_coroutine_blocking(self.aexecute_tool_calls(registry, calls, mode_override))

    async def aexecute_tool_calls(
        self,
        registry: "ToolRegistry",
        calls: list[ToolCall],
        mode_override: ExecutionMode | None = None,
    ) -> list[ToolCallResult]:
        self._check_batch(calls)
        mode = mode_override or self.config.mode
        workers = self._worker_pool(registry) if mode is ExecutionMode.ISOLATED else None
        semaphore = asyncio.Semaphore(self.config.shared_workers)
        tasks = [
            self._run_call(registry, call, mode, workers, semaphore) for call in calls
        ]
        try:
            return list(await asyncio.gather(*tasks))
        finally:
            # short-lived batch loops must not leak adapter I/O resources
            from ._loopres import close_loop_resources

            await close_loop_resources()

    def _prepare(self, registry: "ToolRegistry", call: ToolCall):
        """Resolve and validate one call; returns (tool, args) or an error result."""
        try:
            tool = registry.get_tool(call.name)
        except UnknownToolError as exc:
            return ToolCallResult.failed(call.id, call.name, exc.category, str(exc))
        try:
            return tool, validate_arguments(tool, call.arguments)
        except (MalformedJsonError, SchemaViolationError) as exc:
            # validation failures are permanent and never consume retries
            return ToolCallResult.failed(call.id, call.name, "permanent", str(exc))

    def _retry_delay(self, error: ToolDockError, attempt: int) -> float:
        # an explicit Retry-After wish stretches the backoff, never shrinks it
        hinted = getattr(error, "retry_after", 0.0) or 0.0
        return max(self.config.retry.backoff(attempt), float(hinted))

    @staticmethod
    def _stamp(result: ToolCallResult, started: float) -> ToolCallResult:
        result.meta["elapsed_ms"] = round((time.perf_counter() - started) * 1000, 3)
        return result

    async def _run_call(
        self,
        registry: "ToolRegistry",
        call: ToolCall,
        mode: ExecutionMode,
        workers,
        semaphore: asyncio.Semaphore,
    ) -> ToolCallResult:
        started = time.perf_counter()
        prepared = self._prepare(registry, call)
        if isinstance(prepared, ToolCallResult):
            return self._stamp(prepared, started)
        tool, args = prepared

        meta: dict = {}
        isolated = mode is ExecutionMode.ISOLATED
        if isolated and not tool.replicable:
            meta["fallback"] = "shared"
            isolated = False

        retry = self.config.retry
        timeout = self.config.per_call_timeout
        attempt = 0
        async with semaphore:
            while True:
                attempt += 1
                try:
                    if isolated:
                        value = await workers.run(tool.name, args, timeout)
                    else:
                        value = await arun_single(
                            tool, args, timeout=timeout, pool=self._thread_pool()
                        )
                    meta["attempts"] = attempt
                    return self._stamp(
                        ToolCallResult.ok(call.id, call.name, value, meta), started
                    )
                except Exception as exc:  # per-call failures never abort siblings
                    if isolated and isinstance(exc, WorkerUnknownToolError):
                        # manifest drift: not replicable in the worker registry
                        meta["fallback"] = "shared"
                        isolated = False
                        attempt -= 1
                        continue
                    error = _coerce_error(exc)
                    if error.transient and attempt < retry.max_attempts:
                        await asyncio.sleep(self._retry_delay(error, attempt))
                        continue
                    meta["attempts"] = attempt
                    return self._stamp(
                        ToolCallResult.failed(
                            call.id, call.name, error.category, str(error), meta
                        ),
                        started,
                    )
