"""Stdio variant of the MCP calculator fixture: one JSON-RPC message per line.

Run as ``python -m tooldock.fixtures.mcp_stdio``.
"""

from __future__ import annotations

import json
import sys

from .config import FixtureConfig
from .mcp_server import _handle_request


def main() -> int:
    config = FixtureConfig()
    state: dict = {}
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError:
            continue
        response = _handle_request(config, message, state)
        if response is not None:
            sys.stdout.write(json.dumps(response, separators=(",", ":")) + "\n")
            sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
