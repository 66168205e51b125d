import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from fediff.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def runner():
    return CliRunner()


def run_cli(runner, tmp_path, *extra):
    return runner.invoke(main, [
        "run",
        "--sketch", str(FIXTURES / "layout.svg"),
        "--prompt", "portfolio",
        "--out", str(tmp_path / "out"),
        *extra,
    ])


class TestRun:
    def test_golden_run_produces_four_versions(self, runner, tmp_path):
        result = run_cli(runner, tmp_path)
        assert result.exit_code == 0, result.output
        sessions = [p for p in (tmp_path / "out").iterdir() if p.name != ".image-cache"]
        assert len(sessions) == 1
        indexes = sorted((sessions[0] / "versions").glob("*/index.html"))
        assert [p.parent.name for p in indexes] == ["v0", "v1", "v2", "v3"]
        assert "versions: v0 v1 v2 v3" in result.output

    def test_missing_sketch_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(main, ["run", "--prompt", "x",
                                      "--out", str(tmp_path / "out")])
        assert result.exit_code == 2
        assert "--sketch" in result.output

    def test_iterations_one(self, runner, tmp_path):
        result = run_cli(runner, tmp_path, "--iterations", "1")
        assert result.exit_code == 0, result.output
        sessions = [p for p in (tmp_path / "out").iterdir() if p.name != ".image-cache"]
        versions = sorted((sessions[0] / "versions").iterdir())
        assert [p.name for p in versions] == ["v0"]

    def test_providers_file(self, runner, tmp_path):
        providers = tmp_path / "stub.toml"
        providers.write_text("providers = []\n")
        result = run_cli(runner, tmp_path, "--providers", str(providers))
        assert result.exit_code == 0, result.output

    def test_pipeline_failure_exits_one(self, runner, tmp_path, monkeypatch):
        monkeypatch.delenv("FD_LLM_API_KEY", raising=False)
        providers = tmp_path / "live.toml"
        providers.write_text(
            '[[providers]]\nprovider_id = "live"\n'
            'endpoint_url = "http://127.0.0.1:1/v1"\n'
            'credentials_env_var = "FD_LLM_API_KEY"\n'
        )
        result = run_cli(runner, tmp_path, "--providers", str(providers),
                         "--provider", "live")
        assert result.exit_code == 1
        assert result.output.startswith("error: auth_error:") or \
            "error: auth_error:" in result.output

    def test_rerun_is_byte_identical(self, runner, tmp_path):
        first = run_cli(runner, tmp_path)
        assert first.exit_code == 0
        second = run_cli(runner, tmp_path)
        assert second.exit_code == 0
        out = tmp_path / "out"
        sessions = sorted(p for p in out.iterdir() if p.name != ".image-cache")
        assert len(sessions) == 2
        for label in ("v0", "v1", "v2", "v3"):
            a = (sessions[0] / "versions" / label / "index.html").read_bytes()
            b = (sessions[1] / "versions" / label / "index.html").read_bytes()
            assert a == b


class TestServe:
    def test_serve_starts_and_answers(self, tmp_path):
        # start via the library path the command uses, on an ephemeral port
        import threading
        import urllib.request

        from fediff.images import ImageSearchConfig
        from fediff.rpc import RpcService, serve
        from fediff.store import SessionStore

        service = RpcService(
            store=SessionStore(tmp_path / "s"),
            image_config=ImageSearchConfig(cache_dir=tmp_path / "c"),
        )
        httpd = serve("127.0.0.1:0", service)
        threading.Thread(target=httpd.serve_forever, daemon=True).start()
        try:
            req = urllib.request.Request(
                f"http://127.0.0.1:{httpd.server_port}/rpc",
                data=json.dumps({"jsonrpc": "2.0", "id": 1, "method": "nope"}).encode(),
            )
            with urllib.request.urlopen(req) as resp:
                assert json.loads(resp.read())["error"]["code"] == -32601
        finally:
            httpd.shutdown()
