"""Isolated-mode worker process: rebuilds a registry replica and serves calls.

Reads length-prefixed JSON frames on stdin, answers on stdout (see
``isolated.py`` for the frame contract). Text written by tools to stdout is
redirected to stderr so it cannot corrupt the frame stream.
"""

from __future__ import annotations

import os
import sys

from .errors import ToolDockError, UnknownToolError
from .executor import run_single
from .isolated import read_frame, write_frame
from .manifest import build_worker_registry
from .schema import validate_arguments


def _serve(registry, stdin, stdout) -> None:
    while True:
        frame = read_frame(stdin)
        if frame is None:
            return
        request_id = frame.get("id")
        name = frame.get("name", "")
        try:
            tool = registry.get_tool(name)
        except UnknownToolError as exc:
            write_frame(
                stdout,
                {
                    "id": request_id,
                    "status": "error",
                    "error": {
                        "code": "unknown-tool",
                        "category": "permanent",
                        "message": str(exc),
                    },
                },
            )
            continue
        try:
            args = validate_arguments(tool, frame.get("arguments", "{}"))
            value = run_single(tool, args)
        except ToolDockError as exc:
            write_frame(
                stdout,
                {
                    "id": request_id,
                    "status": "error",
                    "error": {"category": exc.category, "message": str(exc)},
                },
            )
            continue
        write_frame(stdout, {"id": request_id, "status": "ok", "value": value})


def main() -> int:
    os.environ["TOOLDOCK_WORKER"] = "1"
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    sys.stdout = sys.stderr  # keep tool prints away from the frame stream

    handshake = read_frame(stdin)
    if handshake is None:
        return 1
    try:
        registry = build_worker_registry(handshake["manifest"])
    except Exception as exc:
        write_frame(stdout, {"ok": False, "error": f"{type(exc).__name__}: {exc}"})
        return 1
    write_frame(stdout, {"ok": True, "tools": registry.list_tools()})
    _serve(registry, stdin, stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
