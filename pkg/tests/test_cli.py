import json

import pytest
from click.testing import CliRunner

from cmi.cli import main

from conftest import script_path


@pytest.fixture
def runner():
    return CliRunner()


def write_config(tmp_path, language="plantuml") -> str:
    config = {
        "llm_config": {
            "backend": "replay",
            "model": {"name": "replay"},
            "script_path": script_path("uml_rich_model.json"),
        },
        "interpreter_config": {
            "language": language,
            "output_format": "txt",
            "renderer": "builtin_fallback",
        },
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config), encoding="utf-8")
    return str(path)


class TestRenderCommand:
    def test_valid_dot_to_txt(self, runner, tmp_path):
        source = tmp_path / "model.dot"
        source.write_text("digraph {a->b}", encoding="utf-8")
        out = tmp_path / "model.txt"
        result = runner.invoke(main, [
            "render", "--lang", "graphviz", "--format", "txt",
            "--out", str(out), str(source)])
        assert result.exit_code == 0, result.output
        assert out.read_text().startswith("# graphviz fallback rendering")

    def test_validation_error_exit_1(self, runner, tmp_path):
        source = tmp_path / "bad.dot"
        source.write_text("graph G { a -> b }", encoding="utf-8")
        result = runner.invoke(main, [
            "render", "--lang", "graphviz", "--format", "txt", str(source)])
        assert result.exit_code == 1
        assert "edge_op_mismatch" in result.stderr
        assert "1:13" in result.stderr

    def test_renderer_failure_exit_2(self, runner, tmp_path):
        source = tmp_path / "model.dot"
        source.write_text("digraph {a->b}", encoding="utf-8")
        bindings = tmp_path / "bindings.json"
        bindings.write_text(json.dumps(
            {"renderers": {"graphviz_command": "no-such-binary-zz"}}))
        result = runner.invoke(main, [
            "render", "--lang", "graphviz", "--format", "svg",
            "--renderer", "external_process", "--config", str(bindings), str(source)])
        assert result.exit_code == 2

    def test_json_output(self, runner, tmp_path):
        source = tmp_path / "model.dot"
        source.write_text("digraph {a->b}", encoding="utf-8")
        result = runner.invoke(main, [
            "render", "--lang", "graphviz", "--format", "txt", "--json",
            "--out", str(tmp_path / "o.txt"), str(source)])
        assert result.exit_code == 0
        body = json.loads(result.output)
        assert body["ok"] is True and body["content_hash"]

    def test_extracts_block_from_prose(self, runner, tmp_path):
        source = tmp_path / "response.md"
        source.write_text(
            "The model:\n```dot\ndigraph {x->y}\n```\n", encoding="utf-8")
        out = tmp_path / "o.txt"
        result = runner.invoke(main, [
            "render", "--lang", "graphviz", "--format", "txt",
            "--out", str(out), str(source)])
        assert result.exit_code == 0
        assert "edge x -> y" in out.read_text()


class TestPromptCommand:
    def test_creates_conversation_and_prints_artifacts(self, runner, tmp_path):
        result = runner.invoke(main, [
            "prompt", "--root", str(tmp_path / "store"),
            "--config", write_config(tmp_path), "--json", "draw the order model"])
        assert result.exit_code == 0, result.output
        body = json.loads(result.output)
        assert body["ok"] is True
        assert len(body["artifacts"]) == 1
        assert "@startuml" in body["response"]

    def test_existing_conversation(self, runner, tmp_path):
        root = str(tmp_path / "store")
        first = json.loads(runner.invoke(main, [
            "prompt", "--root", root, "--config", write_config(tmp_path),
            "--json", "step one"]).output)
        result = runner.invoke(main, [
            "prompt", "--root", root, "--conversation", first["conversation"],
            "--json", "step two"])
        body = json.loads(result.output)
        assert body["conversation"] == first["conversation"]
        assert "Article" in body["response"]


class TestReplayCommand:
    def test_report_contains_metrics_and_diff(self, runner, tmp_path):
        out_dir = tmp_path / "replay-out"
        result = runner.invoke(main, [
            "replay", "--script", script_path("uml_rich_model.json"),
            "--out", str(out_dir)])
        assert result.exit_code == 0, result.output
        report = json.loads((out_dir / "report.json").read_text())
        assert len(report["steps"]) == 2
        step1, step2 = report["steps"]
        assert step1["blocks"][0]["metrics"]["class_count"] == 7
        assert step1["blocks"][0]["metrics"]["relationship_count"] == 6
        assert "Article" in step2["diffs"]["plantuml"]["classes"]["added"]

    def test_graphviz_script(self, runner, tmp_path):
        out_dir = tmp_path / "replay-dot"
        result = runner.invoke(main, [
            "replay", "--script", script_path("dot_penwidth.json"),
            "--out", str(out_dir), "--lang", "graphviz"])
        assert result.exit_code == 0
        report = json.loads((out_dir / "report.json").read_text())
        metrics = report["steps"][0]["blocks"][0]["metrics"]
        assert metrics["node_count"] == 5 and metrics["edge_count"] == 5
        assert "penwidth" in metrics["attribute_key_set"]


class TestCheckStore:
    def test_clean_store_exit_0(self, runner, tmp_path):
        runner.invoke(main, [
            "prompt", "--root", str(tmp_path / "store"),
            "--config", write_config(tmp_path), "--json", "draw"])
        result = runner.invoke(main, ["check-store", "--root", str(tmp_path / "store")])
        assert result.exit_code == 0
        assert "store ok" in result.output

    def test_violation_exit_1(self, runner, tmp_path):
        runner.invoke(main, [
            "prompt", "--root", str(tmp_path / "store"),
            "--config", write_config(tmp_path), "--json", "draw"])
        blobs = list((tmp_path / "store" / "artifacts").glob("*/*"))
        blobs[0].unlink()
        result = runner.invoke(main, ["check-store", "--root", str(tmp_path / "store")])
        assert result.exit_code == 1


class TestRenderers:
    def test_probe_output(self, runner):
        result = runner.invoke(main, ["renderers", "--json"])
        assert result.exit_code == 0
        entries = json.loads(result.output)
        assert any(e["renderer_id"] == "builtin_fallback" and e["available"]
                   for e in entries)
