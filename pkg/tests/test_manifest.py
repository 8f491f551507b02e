import json

import pytest

from tooldock.manifest import (
    ManifestError,
    build_registry,
    build_worker_registry,
    load_manifest,
    resolve_ref,
)
from tooldock.model import ExecutionMode


class TestResolveRef:
    def test_resolves_class(self):
        from tooldock.hub import Calculator

        assert resolve_ref("tooldock.hub:Calculator") is Calculator

    def test_bad_module(self):
        with pytest.raises(ManifestError):
            resolve_ref("no.such.module:Thing")

    def test_bad_attribute(self):
        with pytest.raises(ManifestError):
            resolve_ref("tooldock.hub:Nothing")

    def test_malformed_ref(self):
        with pytest.raises(ManifestError):
            resolve_ref("justamodule")


class TestBuildRegistry:
    def test_hub_toolset_by_name(self):
        registry = build_registry(
            {"sources": [{"kind": "toolset", "name": "calculator", "namespace": True}]}
        )
        assert registry.list_tools() == [
            "calculator.add",
            "calculator.divide",
            "calculator.multiply",
            "calculator.subtract",
        ]

    def test_toolset_by_ref(self):
        registry = build_registry(
            {"sources": [{"kind": "toolset", "ref": "tooldock.hub:Calculator"}]}
        )
        assert "add" in registry.list_tools()

    def test_native_by_ref(self):
        registry = build_registry(
            {"sources": [{"kind": "native", "ref": "tooldock.bench:native_add"}]}
        )
        assert registry.list_tools() == ["native_add"]
        assert registry.get_invoker("native_add")({"a": 1, "b": 2}) == 3

    def test_execution_block(self):
        registry = build_registry(
            {
                "execution": {
                    "mode": "isolated",
                    "shared_workers": 5,
                    "per_call_timeout_s": 7.5,
                    "retry": {"max_attempts": 2, "base_backoff_ms": 50},
                },
                "sources": [],
            }
        )
        config = registry.execution_config
        assert config.mode is ExecutionMode.ISOLATED
        assert config.shared_workers == 5
        assert config.per_call_timeout == 7.5
        assert config.retry.max_attempts == 2
        assert config.retry.base_backoff == 0.05

    def test_custom_separator(self):
        registry = build_registry(
            {
                "separator": "_",
                "sources": [{"kind": "toolset", "name": "calculator", "namespace": True}],
            }
        )
        assert "calculator_add" in registry.list_tools()

    def test_unknown_kind(self):
        with pytest.raises(ManifestError):
            build_registry({"sources": [{"kind": "grpc"}]})

    def test_unknown_hub_toolset(self):
        with pytest.raises(ManifestError):
            build_registry({"sources": [{"kind": "toolset", "name": "mystery"}]})

    def test_missing_field(self):
        with pytest.raises(ManifestError):
            build_registry({"sources": [{"kind": "native"}]})

    def test_openapi_source(self, openapi_server):
        registry = build_registry(
            {
                "sources": [
                    {
                        "kind": "openapi",
                        "spec": openapi_server.base_url + "/openapi.json",
                        "client": {"base_url": openapi_server.base_url},
                        "namespace": "svc",
                    }
                ]
            }
        )
        assert "svc.add" in registry.list_tools()

    def test_mcp_source(self, mcp_sse_server):
        from tooldock.mcp import close_sessions

        registry = build_registry(
            {
                "sources": [
                    {
                        "kind": "mcp",
                        "transport": "sse",
                        "url": mcp_sse_server.base_url + "/sse",
                        "namespace": True,
                    }
                ]
            }
        )
        assert "calculator.add" in registry.list_tools()
        close_sessions()


class TestLoadManifest:
    def test_reads_file(self, tmp_path):
        path = tmp_path / "manifest.json"
        path.write_text(json.dumps({"sources": [{"kind": "toolset", "name": "calculator"}]}))
        registry = load_manifest(path)
        assert len(registry) == 4

    def test_missing_file(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(tmp_path / "ghost.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        with pytest.raises(ManifestError):
            load_manifest(path)


class TestWorkerManifest:
    def test_round_trip_rebuild(self, calculator_registry):
        manifest = calculator_registry.worker_manifest()
        assert manifest["separator"] == "."
        assert {t["name"] for t in manifest["tools"]} == set(calculator_registry.list_tools())
        replica = build_worker_registry(manifest)
        assert replica.list_tools() == calculator_registry.list_tools()
        assert replica.get_invoker("calculator.add")({"a": 2, "b": 3}) == 5

    def test_non_replicable_tools_excluded(self, calculator_registry):
        captured = 5

        def closure_tool(x: int) -> int:
            """Closure over local state."""
            return x + captured

        calculator_registry.register(closure_tool)
        manifest = calculator_registry.worker_manifest()
        assert "closure_tool" not in {t["name"] for t in manifest["tools"]}

    def test_manifest_is_json_serializable(self, calculator_registry):
        manifest = calculator_registry.worker_manifest()
        assert json.loads(json.dumps(manifest)) == manifest


def test_probe_sources(openapi_server, calculator_registry):
    from tooldock.openapi import HttpClientConfig, load_openapi_spec, register_from_openapi

    client = HttpClientConfig(base_url=openapi_server.base_url)
    spec = load_openapi_spec(openapi_server.base_url + "/openapi.json")
    register_from_openapi(calculator_registry, client, spec, with_namespace="svc")
    probes = calculator_registry.probe_sources()
    assert probes == {f"openapi:{openapi_server.base_url}": True}
