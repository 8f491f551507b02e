"""Command-line interface: inspect registries, render schemas, run one-shot
batches, serve the local fixtures, and benchmark concurrency.

Exit codes: 0 success, 2 bad input or manifest, 3 internal execution
failure, 4 unreachable benchmark fixture, 5 fixture port in use.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from .bench import SCENARIOS, FixtureUnreachableError, run_bench
from .errors import PortInUseError, ToolDockError
from .manifest import ManifestError, load_manifest
from .messages import convert_tool_calls, recover_tool_message
from .model import ApiFormat, ExecutionMode, canonical_json

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_INTERNAL = 3
EXIT_FIXTURE_UNREACHABLE = 4
EXIT_PORT_IN_USE = 5

DEFAULT_OPENAPI_URL = "http://127.0.0.1:8000"
DEFAULT_MCP_URL = "http://127.0.0.1:8001/sse"


def _fail(message: str, code: int) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load_registry(path: str):
    try:
        return load_manifest(path)
    except (ManifestError, ToolDockError, ValueError) as exc:
        raise SystemExit(_fail(f"manifest: {exc}", EXIT_BAD_INPUT))


def _parse_format(label: str) -> ApiFormat:
    try:
        return ApiFormat.parse(label)
    except ValueError as exc:
        raise SystemExit(_fail(str(exc), EXIT_BAD_INPUT))


def cmd_list(args) -> int:
    registry = _load_registry(args.manifest)
    for name in registry.list_tools(prefix=args.prefix, origin=args.origin):
        print(name)
    return EXIT_OK


def cmd_schema(args) -> int:
    registry = _load_registry(args.manifest)
    format = _parse_format(args.format)
    try:
        print(canonical_json(registry.get_tools_json(format)))
    except ToolDockError as exc:
        return _fail(str(exc), EXIT_BAD_INPUT)
    return EXIT_OK


def cmd_call(args) -> int:
    registry = _load_registry(args.manifest)
    try:
        if args.calls == "-":
            raw = json.load(sys.stdin)
        else:
            with open(args.calls) as fp:
                raw = json.load(fp)
        calls = convert_tool_calls(raw, ApiFormat.CHAT_COMPLETION)
    except (OSError, json.JSONDecodeError, ToolDockError, ValueError) as exc:
        return _fail(f"calls input: {exc}", EXIT_BAD_INPUT)
    if not calls:
        print("[]")
        return EXIT_OK
    format = _parse_format(args.format)
    mode = ExecutionMode.parse(args.mode) if args.mode else None
    try:
        results = registry.execute_tool_calls(calls, mode_override=mode)
        messages = recover_tool_message(results, format)
        print(canonical_json([m.to_payload() for m in messages]))
    except Exception as exc:  # per-call failures are in the payload; this is harness-level
        return _fail(f"execution harness failure: {exc}", EXIT_INTERNAL)
    finally:
        registry.shutdown()
    return EXIT_OK


def cmd_bench(args) -> int:
    scenarios = tuple(s.strip() for s in args.scenarios.split(",") if s.strip())
    unknown = [s for s in scenarios if s not in SCENARIOS]
    if unknown:
        return _fail(f"unknown scenarios {unknown}; pick from {list(SCENARIOS)}", EXIT_BAD_INPUT)
    if args.modes == "both":
        modes = (ExecutionMode.SHARED, ExecutionMode.ISOLATED)
    else:
        try:
            modes = (ExecutionMode.parse(args.modes),)
        except ValueError as exc:
            return _fail(str(exc), EXIT_BAD_INPUT)
    # explicit URLs win; otherwise auto-fixtures start their own servers,
    # and without --auto-fixtures the canonical local ports are assumed
    openapi_url = args.openapi_url or (None if args.auto_fixtures else DEFAULT_OPENAPI_URL)
    mcp_url = args.mcp_url or (None if args.auto_fixtures else DEFAULT_MCP_URL)
    try:
        reports = run_bench(
            scenarios=scenarios,
            modes=modes,
            calls=args.calls,
            repetitions=args.repetitions,
            seed=args.seed,
            openapi_url=openapi_url,
            mcp_url=mcp_url,
            auto_fixtures=args.auto_fixtures,
        )
    except FixtureUnreachableError as exc:
        return _fail(str(exc), EXIT_FIXTURE_UNREACHABLE)

    from .report import reports_to_csv, reports_to_json, write_report_dir

    if args.out == "csv":
        sys.stdout.write(reports_to_csv(reports))
    else:
        sys.stdout.write(reports_to_json(reports))
    if args.report_dir:
        written = write_report_dir(reports, args.report_dir)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_serve_fixtures(args) -> int:
    from .fixtures import FixtureConfig, serve_mcp_fixture, serve_openapi_fixture

    def config(port: int) -> FixtureConfig:
        return FixtureConfig(
            port=port,
            artificial_latency=args.latency_ms / 1000.0,
            failure_rate=args.failure_rate,
            failure_kind=args.failure_kind,
        )

    servers = []
    try:
        servers.append(serve_openapi_fixture(config(args.openapi_port)))
        servers.append(serve_mcp_fixture(config(args.mcp_port), transport=args.transport))
    except PortInUseError as exc:
        for server in servers:
            server.stop()
        return _fail(str(exc), EXIT_PORT_IN_USE)

    mcp_path = "/sse" if args.transport == "sse" else "/mcp"
    print(
        f"fixtures ready: openapi {servers[0].base_url} "
        f"mcp({args.transport}) {servers[1].base_url}{mcp_path}",
        flush=True,
    )
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        for server in servers:
            server.stop()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tooldock",
        description="Protocol-agnostic tool management for LLM function calling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list", help="print registered tool names, one per line")
    p.add_argument("--manifest", required=True)
    p.add_argument("--prefix", default=None, help="namespace prefix filter")
    p.add_argument("--origin", default=None, help="origin filter (native/toolset/openapi/mcp)")
    p.set_defaults(func=cmd_list)

    p = sub.add_parser("schema", help="print rendered tool schemas as a JSON array")
    p.add_argument("--manifest", required=True)
    p.add_argument("--format", default=ApiFormat.CHAT_COMPLETION.value)
    p.set_defaults(func=cmd_schema)

    p = sub.add_parser("call", help="execute a tool-call batch and print tool messages")
    p.add_argument("--manifest", required=True)
    p.add_argument("--calls", default="-", help="JSON file in chat-completion tool_calls shape, or - for stdin")
    p.add_argument("--mode", default=None, choices=["shared", "isolated"])
    p.add_argument("--format", default=ApiFormat.CHAT_COMPLETION.value)
    p.set_defaults(func=cmd_call)

    p = sub.add_parser("bench", help="run the concurrency benchmark")
    p.add_argument("--scenarios", default=",".join(SCENARIOS))
    p.add_argument("--calls", type=int, default=100)
    p.add_argument("--modes", default="both", help="shared, isolated, or both")
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="csv", choices=["csv", "json"])
    p.add_argument("--report-dir", default=None, help="also write bench.csv/bench.json and figures here")
    p.add_argument("--auto-fixtures", action="store_true")
    p.add_argument("--openapi-url", default=None, help=f"default {DEFAULT_OPENAPI_URL}")
    p.add_argument("--mcp-url", default=None, help=f"default {DEFAULT_MCP_URL}")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve-fixtures", help="run the OpenAPI and MCP fixtures until interrupted")
    p.add_argument("--openapi-port", type=int, default=8000)
    p.add_argument("--mcp-port", type=int, default=8001)
    p.add_argument("--transport", default="sse", choices=["sse", "streamable-http"])
    p.add_argument("--latency-ms", type=float, default=0.0)
    p.add_argument("--failure-rate", type=float, default=0.0)
    p.add_argument("--failure-kind", default="http-500",
                   choices=["http-500", "drop-connection", "rpc-error"])
    p.set_defaults(func=cmd_serve_fixtures)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
