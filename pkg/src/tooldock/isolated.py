"""Isolated-mode worker pool and its wire protocol.

Each worker is a separate process holding a registry replica rebuilt from
the name-addressed manifest it receives at startup. Dispatch is by tool
name; no callable ever crosses the process boundary.

Wire protocol (stable contract for the test harness): every message is a
length-prefixed JSON frame, 4-byte big-endian unsigned length followed by
that many bytes of UTF-8 JSON.

    coordinator -> worker   {"manifest": {...}}                  (handshake)
    worker -> coordinator   {"ok": true, "tools": [...]}         (ready)
    coordinator -> worker   {"id": ..., "name": ..., "arguments": "<json text>"}
    worker -> coordinator   {"id": ..., "status": "ok", "value": ...}
                          | {"id": ..., "status": "error",
                             "error": {"category": ..., "message": ..., "code"?: ...}}

One request is in flight per worker at a time. A worker that exceeds the
per-call deadline or dies mid-call is killed and replaced; only its own
call fails.
"""

from __future__ import annotations

import json
import os
import queue
import select
import struct
import subprocess
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, BinaryIO

from .errors import CallTimeoutError, ToolDockError, WorkerCrashedError

_HEADER = struct.Struct(">I")
MAX_FRAME_BYTES = 64 * 1024 * 1024
STARTUP_TIMEOUT = 30.0


class RemoteCallError(ToolDockError):
    """Error result reported by a worker, carrying its original category."""

    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.transient = category == "transient"


class WorkerUnknownToolError(ToolDockError):
    """The worker's registry replica does not hold the requested tool."""


def write_frame(fp: BinaryIO, payload: dict) -> None:
    data = json.dumps(payload, separators=(",", ":")).encode("utf-8")
    fp.write(_HEADER.pack(len(data)) + data)
    fp.flush()


def read_frame(fp: BinaryIO) -> dict | None:
    """Blocking frame read; returns None on clean EOF."""
    header = fp.read(_HEADER.size)
    if not header:
        return None
    if len(header) < _HEADER.size:
        raise EOFError("truncated frame header")
    (length,) = _HEADER.unpack(header)
    if length > MAX_FRAME_BYTES:
        raise ValueError(f"frame of {length} bytes exceeds limit")
    data = b""
    while len(data) < length:
        chunk = fp.read(length - len(data))
        if not chunk:
            raise EOFError("truncated frame body")
        data += chunk
    return json.loads(data.decode("utf-8"))


class _Worker:
    """One worker subprocess plus its buffered frame reader."""

    def __init__(self, manifest: dict):
        env = dict(os.environ, TOOLDOCK_WORKER="1")
        self.proc = subprocess.Popen(
            [sys.executable, "-m", "tooldock._worker"],
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            env=env,
        )
        self._buffer = bytearray()
        self._next_id = 0
        write_frame(self.proc.stdin, {"manifest": manifest})
        ready = self._read_frame(time.monotonic() + STARTUP_TIMEOUT)
        if not ready or not ready.get("ok"):
            detail = (ready or {}).get("error", "worker produced no ready frame")
            self.kill()
            raise WorkerCrashedError(f"worker failed to start: {detail}")

    def alive(self) -> bool:
        return self.proc.poll() is None

    def kill(self) -> None:
        try:
            self.proc.kill()
        except OSError:
            pass
        self.proc.wait()

    def close(self) -> None:
        try:
            self.proc.stdin.close()
            self.proc.wait(timeout=2)
        except (OSError, subprocess.TimeoutExpired):
            self.kill()

    def _read_exact(self, n: int, deadline: float) -> bytes:
        fd = self.proc.stdout.fileno()
        while len(self._buffer) < n:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise CallTimeoutError("worker did not answer before the deadline")
            readable, _, _ = select.select([fd], [], [], remaining)
            if not readable:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                raise EOFError("worker closed its pipe")
            self._buffer.extend(chunk)
        out = bytes(self._buffer[:n])
        del self._buffer[:n]
        return out

    def _read_frame(self, deadline: float) -> dict | None:
        try:
            header = self._read_exact(_HEADER.size, deadline)
        except EOFError:
            return None
        (length,) = _HEADER.unpack(header)
        if length > MAX_FRAME_BYTES:
            raise ValueError(f"frame of {length} bytes exceeds limit")
        return json.loads(self._read_exact(length, deadline).decode("utf-8"))

    def call(self, name: str, arguments_json: str, timeout: float) -> Any:
        """Run one tool call on this worker; raises on crash or deadline."""
        self._next_id += 1
        request_id = self._next_id
        write_frame(
            self.proc.stdin, {"id": request_id, "name": name, "arguments": arguments_json}
        )
        reply = self._read_frame(time.monotonic() + timeout)
        if reply is None:
            raise EOFError("worker exited mid-call")
        if reply.get("id") != request_id:
            raise WorkerCrashedError("worker answered with a mismatched frame id")
        if reply.get("status") == "ok":
            return reply.get("value")
        error = reply.get("error") or {}
        if error.get("code") == "unknown-tool":
            raise WorkerUnknownToolError(error.get("message", name))
        raise RemoteCallError(
            error.get("category", "permanent"), error.get("message", "worker error")
        )


class WorkerPool:
    """Fixed-size pool of isolated workers sharing one registry manifest."""

    def __init__(self, size: int, manifest: dict):
        self._size = size
        self._manifest = manifest
        self._manifest_key = json.dumps(manifest, sort_keys=True)
        self._idle: queue.Queue[_Worker] = queue.Queue()
        self._all: list[_Worker] = []
        self._dispatch = ThreadPoolExecutor(max_workers=size, thread_name_prefix="tooldock-iso")
        self._lock = threading.Lock()
        self._started = False
        self._closed = False

    def matches(self, manifest: dict) -> bool:
        return json.dumps(manifest, sort_keys=True) == self._manifest_key

    def _ensure_started(self) -> None:
        with self._lock:
            if self._started or self._closed:
                return
            for _ in range(self._size):
                worker = _Worker(self._manifest)
                self._all.append(worker)
                self._idle.put(worker)
            self._started = True

    def _replace(self, worker: _Worker) -> None:
        worker.kill()
        with self._lock:
            if worker in self._all:
                self._all.remove(worker)
            if self._closed:
                return
        fresh = _Worker(self._manifest)
        with self._lock:
            self._all.append(fresh)
        self._idle.put(fresh)

    def _call_blocking(self, name: str, arguments_json: str, timeout: float) -> Any:
        self._ensure_started()
        worker = self._idle.get()
        try:
            value = worker.call(name, arguments_json, timeout)
        except CallTimeoutError:
            self._replace(worker)  # worker may be wedged mid-execution
            raise
        except (EOFError, OSError, BrokenPipeError) as exc:
            self._replace(worker)
            raise WorkerCrashedError(f"worker terminated during call: {exc}") from exc
        except ToolDockError:
            self._idle.put(worker)
            raise
        self._idle.put(worker)
        return value

    async def run(self, name: str, args: dict, timeout: float) -> Any:
        import asyncio

        loop = asyncio.get_running_loop()
        arguments_json = json.dumps(args, separators=(",", ":"))
        return await loop.run_in_executor(
            self._dispatch, self._call_blocking, name, arguments_json, timeout
        )

    def shutdown(self) -> None:
        with self._lock:
            self._closed = True
            workers = list(self._all)
            self._all.clear()
        for worker in workers:
            worker.close()
        self._dispatch.shutdown(wait=False, cancel_futures=True)
