"""Local fixture servers: an OpenAPI calculator service and an MCP calculator
server (SSE and streamable HTTP), with latency and failure injection."""

from .config import FixtureConfig
from .mcp_server import serve_mcp_fixture
from .openapi_server import serve_openapi_fixture

__all__ = ["FixtureConfig", "serve_mcp_fixture", "serve_openapi_fixture"]
