import concurrent.futures
import json

import httpx
import pytest

from tooldock.errors import PortInUseError
from tooldock.fixtures import FixtureConfig, serve_mcp_fixture, serve_openapi_fixture
from tooldock.fixtures.openapi_server import openapi_document


def rpc(url: str, method: str, params=None, id=1):
    payload = {"jsonrpc": "2.0", "id": id, "method": method}
    if params is not None:
        payload["params"] = params
    return httpx.post(url, json=payload, timeout=5.0).json()


class TestOpenApiFixture:
    def test_add_returns_bare_five(self, openapi_server):
        response = httpx.get(openapi_server.base_url + "/add", params={"a": 2, "b": 3})
        assert response.status_code == 200
        assert response.text == "5"

    def test_float_arithmetic(self, openapi_server):
        response = httpx.get(
            openapi_server.base_url + "/multiply", params={"a": 1.5, "b": 2.0}
        )
        assert response.json() == 3.0

    def test_divide_by_zero_is_400(self, openapi_server):
        response = httpx.get(openapi_server.base_url + "/divide", params={"a": 1, "b": 0})
        assert response.status_code == 400
        assert response.json()["error"] == "division by zero"

    def test_headers_echo(self, openapi_server):
        response = httpx.get(
            openapi_server.base_url + "/headers", headers={"X-Probe": "yes"}
        )
        assert response.json()["headers"].get("X-Probe") == "yes"

    def test_full_failure_rate_forces_500(self):
        server = serve_openapi_fixture(FixtureConfig(failure_rate=1.0))
        try:
            for _ in range(5):
                response = httpx.get(server.base_url + "/add", params={"a": 1, "b": 1})
                assert response.status_code == 500
        finally:
            server.stop()

    def test_fail_first_is_scripted(self):
        server = serve_openapi_fixture(FixtureConfig(fail_first=2))
        try:
            codes = [
                httpx.get(server.base_url + "/add", params={"a": 1, "b": 1}).status_code
                for _ in range(4)
            ]
            assert codes == [500, 500, 200, 200]
        finally:
            server.stop()

    def test_port_in_use(self, openapi_server):
        with pytest.raises(PortInUseError):
            serve_openapi_fixture(FixtureConfig(port=openapi_server.port))

    def test_concurrent_connections(self, openapi_server):
        def one(i):
            return httpx.get(
                openapi_server.base_url + "/add", params={"a": i, "b": 1}, timeout=10.0
            ).json()

        with concurrent.futures.ThreadPoolExecutor(32) as pool:
            values = list(pool.map(one, range(64)))
        assert values == [i + 1 for i in range(64)]


class TestOpenApiDocument:
    """Independent structural check of the served document against the
    OpenAPI 3.1 rules that matter for this fixture (the adapter's own parser
    is deliberately not used here)."""

    def test_document_structure(self, openapi_server):
        doc = httpx.get(openapi_server.base_url + "/openapi.json").json()
        assert doc == openapi_document()

        assert isinstance(doc["openapi"], str) and doc["openapi"].startswith("3.1")
        info = doc["info"]
        assert isinstance(info["title"], str) and info["title"] == "Calculator"
        assert isinstance(info["version"], str)

        assert set(doc["paths"]) == {"/add", "/subtract", "/multiply", "/divide"}
        for path, item in doc["paths"].items():
            operation = item["get"]
            assert operation["operationId"] == path.lstrip("/")
            assert isinstance(operation["responses"], dict) and operation["responses"]
            for ref in operation["parameters"]:
                assert set(ref) == {"$ref"}
                pointer = ref["$ref"]
                assert pointer.startswith("#/")
                node = doc
                for token in pointer[2:].split("/"):
                    assert token in node
                    node = node[token]
                assert node["in"] in ("query", "path", "header", "cookie")
                assert isinstance(node["name"], str)
                assert node["schema"]["type"] in (
                    "string", "number", "integer", "boolean", "array", "object", "null",
                )
            for status, response in operation["responses"].items():
                assert status.isdigit() and "description" in response


class TestMcpFixture:
    def test_streamable_initialize_contract(self, mcp_http_server):
        url = mcp_http_server.base_url + "/mcp"
        result = rpc(url, "initialize", {"protocolVersion": "2025-03-26"})["result"]
        assert result["serverInfo"]["name"] == "calculator"
        assert result["protocolVersion"] == "2025-03-26"

    def test_tools_list_has_four(self, mcp_http_server):
        url = mcp_http_server.base_url + "/mcp"
        rpc(url, "initialize", {"protocolVersion": "2025-03-26"})
        result = rpc(url, "tools/list", id=2)["result"]
        assert len(result["tools"]) == 4

    def test_ping(self, mcp_http_server):
        url = mcp_http_server.base_url + "/mcp"
        assert rpc(url, "ping", id=3)["result"] == {}

    def test_calls_require_handshake_on_sse_sessions(self, mcp_sse_server):
        # POSTing straight to a fresh SSE session without initialize must fail;
        # exercised through the client elsewhere, checked here at the RPC level
        with httpx.stream(
            "GET", mcp_sse_server.base_url + "/sse",
            headers={"Accept": "text/event-stream"}, timeout=5.0,
        ) as stream:
            lines = stream.iter_lines()
            endpoint = None
            for line in lines:
                if line.startswith("data:"):
                    endpoint = line[5:].strip()
                    break
            post_url = mcp_sse_server.base_url + endpoint
            httpx.post(
                post_url,
                json={"jsonrpc": "2.0", "id": 1, "method": "tools/call",
                      "params": {"name": "add", "arguments": {"a": 1, "b": 1}}},
                timeout=5.0,
            )
            for line in lines:
                if line.startswith("data:"):
                    message = json.loads(line[5:].strip())
                    assert message["error"]["code"] == -32002
                    break

    def test_unknown_method(self, mcp_http_server):
        url = mcp_http_server.base_url + "/mcp"
        answer = rpc(url, "resources/list", id=9)
        assert answer["error"]["code"] == -32601

    def test_argument_validation(self, mcp_http_server):
        url = mcp_http_server.base_url + "/mcp"
        rpc(url, "initialize", {"protocolVersion": "2025-03-26"})
        answer = rpc(url, "tools/call", {"name": "add", "arguments": {"a": "x", "b": 1}}, id=4)
        assert answer["error"]["code"] == -32602

    def test_latency_knob(self):
        import time

        server = serve_mcp_fixture(
            FixtureConfig(artificial_latency=0.15), transport="streamable-http"
        )
        try:
            url = server.base_url + "/mcp"
            rpc(url, "initialize", {"protocolVersion": "2025-03-26"})
            start = time.perf_counter()
            rpc(url, "tools/call", {"name": "add", "arguments": {"a": 1, "b": 1}}, id=2)
            assert time.perf_counter() - start >= 0.15
        finally:
            server.stop()

    def test_bad_transport_rejected(self):
        with pytest.raises(ValueError):
            serve_mcp_fixture(FixtureConfig(), transport="websocket")


class TestFixtureConfig:
    def test_failure_rate_bounds(self):
        with pytest.raises(ValueError):
            FixtureConfig(failure_rate=1.5)

    def test_failure_kind_closed_set(self):
        with pytest.raises(ValueError):
            FixtureConfig(failure_kind="kaboom")


def test_fixtures_agree_with_hub(openapi_server, mcp_sse_server):
    """Shared oracle: both fixtures compute exactly what the hub computes."""
    import random

    from tooldock.hub import Calculator
    from tooldock.mcp import mcp_call_tool, mcp_connect

    rng = random.Random(99)
    session = mcp_connect(mcp_sse_server.base_url + "/sse")
    try:
        for _ in range(20):
            a, b = rng.uniform(1, 50), rng.uniform(1, 50)
            want = Calculator.add(a, b)
            via_http = httpx.get(
                openapi_server.base_url + "/add", params={"a": repr(a), "b": repr(b)}
            ).json()
            via_mcp = mcp_call_tool(session, "add", {"a": a, "b": b})
            assert via_http == want
            assert via_mcp == want
    finally:
        session.close()
