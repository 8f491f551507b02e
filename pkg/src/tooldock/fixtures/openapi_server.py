"""RESTful calculator fixture with a served OpenAPI 3.1 document.

Arithmetic endpoints take JSON-literal query parameters (GET /add?a=2&b=3
answers ``5``); /headers echoes request headers for auth tests.
"""

from __future__ import annotations

import json
import time
from urllib.parse import parse_qsl, urlsplit

from ..hub import Calculator
from .config import FixtureConfig, FixtureServer, QuietHandler

_OPERATIONS = {
    "add": Calculator.add,
    "subtract": Calculator.subtract,
    "multiply": Calculator.multiply,
    "divide": Calculator.divide,
}


def openapi_document() -> dict:
    """The fixture's own API description, OpenAPI 3.1 with internal refs."""
    paths = {}
    for name in _OPERATIONS:
        paths[f"/{name}"] = {
            "get": {
                "operationId": name,
                "description": f"{name.capitalize()} two numbers.",
                "parameters": [
                    {"$ref": "#/components/parameters/OperandA"},
                    {"$ref": "#/components/parameters/OperandB"},
                ],
                "responses": {
                    "200": {
                        "description": "Arithmetic result",
                        "content": {"application/json": {"schema": {"type": "number"}}},
                    }
                },
            }
        }
    return {
        "openapi": "3.1.0",
        "info": {"title": "Calculator", "version": "1.0.0"},
        "paths": paths,
        "components": {
            "parameters": {
                "OperandA": {
                    "name": "a",
                    "in": "query",
                    "required": True,
                    "schema": {"type": "number"},
                },
                "OperandB": {
                    "name": "b",
                    "in": "query",
                    "required": True,
                    "schema": {"type": "number"},
                },
            }
        },
    }


class _Handler(QuietHandler):
    def do_GET(self):
        fixture = self.server.fixture
        split = urlsplit(self.path)
        route = split.path

        if route == "/openapi.json":
            self.send_json(200, openapi_document())
            return
        if route == "/headers":
            self.send_json(200, {"headers": dict(self.headers.items())})
            return

        name = route.lstrip("/")
        if name not in _OPERATIONS:
            self.send_json(404, {"error": f"no such operation: {name}"})
            return

        kind = fixture.injected_failure()
        if kind == "drop-connection":
            self.drop_connection()
            return
        if kind is not None:  # http-500 and rpc-error both surface as 500 here
            self.send_json(500, {"error": "injected failure"})
            return
        if fixture.config.artificial_latency:
            time.sleep(fixture.config.artificial_latency)

        params = dict(parse_qsl(split.query))
        try:
            a = json.loads(params["a"])
            b = json.loads(params["b"])
        except (KeyError, json.JSONDecodeError):
            self.send_json(400, {"error": "parameters a and b must be JSON numbers"})
            return
        try:
            result = _OPERATIONS[name](a, b)
        except ZeroDivisionError as exc:
            self.send_json(400, {"error": str(exc)})
            return
        # ints stay ints so add(2, 3) answers a bare 5
        if isinstance(a, int) and isinstance(b, int) and float(result).is_integer():
            if name != "divide" or (a % b == 0):
                result = int(result)
        self.send_json(200, result)


def serve_openapi_fixture(config: FixtureConfig | None = None) -> FixtureServer:
    """Start the calculator HTTP fixture; returns the running server."""
    return FixtureServer(config or FixtureConfig(), _Handler).start()
