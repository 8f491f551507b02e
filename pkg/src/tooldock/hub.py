"""Built-in replicable toolsets used by examples, tests, and benchmarks."""

from __future__ import annotations

import os
import time


class Calculator:
    """Four-function arithmetic on IEEE doubles."""

    @staticmethod
    def add(a: float, b: float) -> float:
        """Add two numbers."""
        return float(a) + float(b)

    @staticmethod
    def subtract(a: float, b: float) -> float:
        """Subtract b from a."""
        return float(a) - float(b)

    @staticmethod
    def multiply(a: float, b: float) -> float:
        """Multiply two numbers."""
        return float(a) * float(b)

    @staticmethod
    def divide(a: float, b: float) -> float:
        """Divide a by b. Fails on b = 0."""
        if float(b) == 0.0:
            raise ZeroDivisionError("division by zero")
        return float(a) / float(b)


class Diagnostics:
    """Timing and fault-injection tools for tests and benchmarks."""

    @staticmethod
    def sleep_tool(ms: int) -> int:
        """Sleep for the given number of milliseconds and return it."""
        if not 0 <= ms <= 60000:
            raise ValueError("ms must be between 0 and 60000")
        time.sleep(ms / 1000.0)
        return ms

    @staticmethod
    def kill_worker() -> None:
        """Terminate the current worker process abruptly (isolated-mode test aid).

        Refuses to run outside a worker process so a shared-mode call cannot
        take down the host.
        """
        if os.environ.get("TOOLDOCK_WORKER") != "1":
            raise RuntimeError("refusing to terminate: not running in a worker process")
        os._exit(9)


#: Toolsets addressable by short name in manifests.
HUB_TOOLSETS = {
    "calculator": Calculator,
    "diagnostics": Diagnostics,
}
