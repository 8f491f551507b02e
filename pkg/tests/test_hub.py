import json
import time

import pytest

from tooldock.executor import ExecutorConfig
from tooldock.hub import Calculator, Diagnostics, HUB_TOOLSETS
from tooldock.model import ToolCall
from tooldock.registry import ToolRegistry


class TestCalculator:
    def test_add(self):
        assert Calculator.add(2, 3) == 5

    def test_subtract(self):
        assert Calculator.subtract(5, 3) == 2

    def test_multiply(self):
        assert Calculator.multiply(4, 2.5) == 10

    def test_divide(self):
        assert Calculator.divide(7, 2) == 3.5

    def test_divide_by_zero(self):
        with pytest.raises(ZeroDivisionError) as info:
            Calculator.divide(1, 0)
        assert str(info.value) == "division by zero"

    def test_ieee_double_semantics(self):
        assert Calculator.add(0.1, 0.2) == 0.1 + 0.2


class TestDiagnostics:
    def test_sleep_returns_duration(self):
        start = time.perf_counter()
        assert Diagnostics.sleep_tool(50) == 50
        assert time.perf_counter() - start >= 0.05

    def test_zero_sleep_immediate(self):
        start = time.perf_counter()
        assert Diagnostics.sleep_tool(0) == 0
        assert time.perf_counter() - start < 0.05

    def test_sleep_bounds(self):
        with pytest.raises(ValueError):
            Diagnostics.sleep_tool(-1)
        with pytest.raises(ValueError):
            Diagnostics.sleep_tool(60001)

    def test_kill_worker_refuses_outside_workers(self):
        with pytest.raises(RuntimeError):
            Diagnostics.kill_worker()

    def test_concurrent_sleeps_overlap(self):
        registry = ToolRegistry(execution_config=ExecutorConfig(shared_workers=8))
        registry.register_from_toolset(Diagnostics, with_namespace=True)
        calls = [
            ToolCall(f"c{i}", "diagnostics.sleep_tool", json.dumps({"ms": 100}))
            for i in range(8)
        ]
        start = time.perf_counter()
        results = registry.execute_tool_calls(calls)
        wall = time.perf_counter() - start
        assert all(r.status == "ok" for r in results)
        assert wall < 0.8  # oracle: sequential would take >= 0.8 s
        registry.shutdown()


def test_catalog_names():
    assert set(HUB_TOOLSETS) == {"calculator", "diagnostics"}
    assert HUB_TOOLSETS["calculator"] is Calculator
