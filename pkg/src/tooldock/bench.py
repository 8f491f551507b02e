"""Concurrency benchmark: batches of calculator calls across tool sources.

Four scenarios (native functions, namespaced toolset, OpenAPI fixture,
MCP SSE fixture) run in shared and isolated mode. Each cell repeats the
batch and reports mean wall time, throughput, success rate, and pooled
latency percentiles.
"""

from __future__ import annotations

import json
import random
import socket
import statistics
import subprocess
import sys
import time
from dataclasses import dataclass, field

from .errors import ToolDockError
from .model import ExecutionMode, ToolCall
from .registry import ToolRegistry

SCENARIOS = ("native", "toolset", "openapi", "mcp")


class FixtureUnreachableError(ToolDockError):
    transient = True


def native_add(a: float, b: float) -> float:
    """Add two numbers."""
    return a + b


def native_subtract(a: float, b: float) -> float:
    """Subtract b from a."""
    return a - b


def native_multiply(a: float, b: float) -> float:
    """Multiply two numbers."""
    return a * b


def native_divide(a: float, b: float) -> float:
    """Divide a by b."""
    return a / b


@dataclass
class BenchReport:
    scenario: str
    mode: str
    calls: int
    wall_time_s: float
    throughput_cps: float
    success_rate: float
    p50_ms: float
    p95_ms: float
    wall_time_stddev_s: float = 0.0
    throughput_stddev_cps: float = 0.0
    repetitions: int = 1

    def __post_init__(self):
        if not 0.0 <= self.success_rate <= 1.0:
            raise ValueError("success_rate must be within [0, 1]")

    def to_row(self) -> dict:
        """The pinned CSV columns."""
        return {
            "scenario": self.scenario,
            "mode": self.mode,
            "calls": self.calls,
            "wall_time_s": round(self.wall_time_s, 6),
            "throughput_cps": round(self.throughput_cps, 3),
            "success_rate": round(self.success_rate, 6),
            "p50_ms": round(self.p50_ms, 3),
            "p95_ms": round(self.p95_ms, 3),
        }

    def to_json(self) -> dict:
        payload = self.to_row()
        payload["wall_time_stddev_s"] = round(self.wall_time_stddev_s, 6)
        payload["throughput_stddev_cps"] = round(self.throughput_stddev_cps, 3)
        payload["repetitions"] = self.repetitions
        return payload


def build_scenario_registry(
    scenario: str, *, openapi_url: str | None = None, mcp_url: str | None = None
) -> ToolRegistry:
    registry = ToolRegistry()
    if scenario == "native":
        for fn in (native_add, native_subtract, native_multiply, native_divide):
            registry.register(fn)
    elif scenario == "toolset":
        from .hub import Calculator

        registry.register_from_toolset(Calculator, with_namespace=True)
    elif scenario == "openapi":
        from .openapi import HttpClientConfig, load_openapi_spec, register_from_openapi

        if not openapi_url:
            raise FixtureUnreachableError("openapi scenario needs a fixture URL")
        try:
            spec = load_openapi_spec(openapi_url.rstrip("/") + "/openapi.json")
            client = HttpClientConfig(base_url=openapi_url)
            register_from_openapi(registry, client, spec, with_namespace=True)
        except ToolDockError as exc:
            raise FixtureUnreachableError(f"openapi fixture unreachable: {exc}") from exc
    elif scenario == "mcp":
        from .mcp import register_from_mcp

        if not mcp_url:
            raise FixtureUnreachableError("mcp scenario needs a fixture URL")
        try:
            register_from_mcp(registry, mcp_url, with_namespace=True)
        except ToolDockError as exc:
            raise FixtureUnreachableError(f"mcp fixture unreachable: {exc}") from exc
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return registry


def generate_calls(registry: ToolRegistry, count: int, seed: int = 0) -> list[ToolCall]:
    """Random arithmetic batch over the registry's tools (divide stays finite)."""
    rng = random.Random(seed)
    names = registry.list_tools()
    calls = []
    for index in range(count):
        name = rng.choice(names)
        a = round(rng.uniform(1.0, 100.0), 4)
        b = round(rng.uniform(1.0, 100.0), 4)
        calls.append(
            ToolCall(id=f"call_{index}", name=name, arguments=json.dumps({"a": a, "b": b}))
        )
    return calls


def run_scenario(
    registry: ToolRegistry,
    calls: list[ToolCall],
    mode: ExecutionMode,
    repetitions: int = 10,
    *,
    scenario: str = "",
) -> BenchReport:
    # one untimed batch warms connections, pools, and caches; it is discarded
    registry.execute_tool_calls(calls, mode_override=mode)

    walls: list[float] = []
    latencies: list[float] = []
    ok = 0
    for _ in range(repetitions):
        start = time.perf_counter()
        results = registry.execute_tool_calls(calls, mode_override=mode)
        walls.append(time.perf_counter() - start)
        ok += sum(1 for r in results if r.status == "ok")
        latencies.extend(r.meta.get("elapsed_ms", 0.0) for r in results)

    wall_mean = statistics.fmean(walls)
    wall_std = statistics.stdev(walls) if len(walls) > 1 else 0.0
    throughputs = [len(calls) / w for w in walls]
    latencies.sort()
    return BenchReport(
        scenario=scenario,
        mode=mode.value,
        calls=len(calls),
        wall_time_s=wall_mean,
        throughput_cps=len(calls) / wall_mean,
        success_rate=ok / (len(calls) * repetitions),
        p50_ms=_percentile(latencies, 0.50),
        p95_ms=_percentile(latencies, 0.95),
        wall_time_stddev_s=wall_std,
        throughput_stddev_cps=statistics.stdev(throughputs) if len(throughputs) > 1 else 0.0,
        repetitions=repetitions,
    )


def _percentile(sorted_values: list[float], q: float) -> float:
    if not sorted_values:
        return 0.0
    index = min(len(sorted_values) - 1, max(0, round(q * (len(sorted_values) - 1))))
    return sorted_values[index]


def _free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


def start_fixture_processes() -> tuple[subprocess.Popen, str, str]:
    """Run both fixtures in their own process, like the real services they model."""
    openapi_port, mcp_port = _free_port(), _free_port()
    proc = subprocess.Popen(
        [
            sys.executable, "-m", "tooldock.cli", "serve-fixtures",
            "--openapi-port", str(openapi_port), "--mcp-port", str(mcp_port),
        ],
        stdout=subprocess.PIPE,
        text=True,
    )
    ready = proc.stdout.readline()
    if "fixtures ready" not in ready:
        proc.terminate()
        raise FixtureUnreachableError("fixture process failed to start")
    return (
        proc,
        f"http://127.0.0.1:{openapi_port}",
        f"http://127.0.0.1:{mcp_port}/sse",
    )


def run_bench(
    scenarios: tuple[str, ...] = SCENARIOS,
    modes: tuple[ExecutionMode, ...] = (ExecutionMode.SHARED, ExecutionMode.ISOLATED),
    calls: int = 100,
    repetitions: int = 10,
    seed: int = 0,
    *,
    openapi_url: str | None = None,
    mcp_url: str | None = None,
    auto_fixtures: bool = False,
) -> list[BenchReport]:
    """One BenchReport per (scenario, mode) cell."""
    fixture_proc = None
    try:
        if auto_fixtures and (
            ("openapi" in scenarios and not openapi_url)
            or ("mcp" in scenarios and not mcp_url)
        ):
            fixture_proc, auto_openapi, auto_mcp = start_fixture_processes()
            openapi_url = openapi_url or auto_openapi
            mcp_url = mcp_url or auto_mcp

        reports = []
        for scenario in scenarios:
            registry = build_scenario_registry(
                scenario, openapi_url=openapi_url, mcp_url=mcp_url
            )
            batch = generate_calls(registry, calls, seed)
            try:
                for mode in modes:
                    reports.append(
                        run_scenario(registry, batch, mode, repetitions, scenario=scenario)
                    )
            finally:
                registry.shutdown()
        return reports
    finally:
        if fixture_proc is not None:
            fixture_proc.terminate()
            fixture_proc.wait()
