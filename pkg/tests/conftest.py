import pytest

from tooldock.fixtures import FixtureConfig, serve_mcp_fixture, serve_openapi_fixture
from tooldock.hub import Calculator
from tooldock.registry import ToolRegistry


@pytest.fixture(scope="session")
def openapi_server():
    server = serve_openapi_fixture(FixtureConfig())
    yield server
    server.stop()


@pytest.fixture(scope="session")
def mcp_sse_server():
    server = serve_mcp_fixture(FixtureConfig(), transport="sse")
    yield server
    server.stop()


@pytest.fixture(scope="session")
def mcp_http_server():
    server = serve_mcp_fixture(FixtureConfig(), transport="streamable-http")
    yield server
    server.stop()


@pytest.fixture
def calculator_registry():
    registry = ToolRegistry()
    registry.register_from_toolset(Calculator, with_namespace=True)
    yield registry
    registry.shutdown()
