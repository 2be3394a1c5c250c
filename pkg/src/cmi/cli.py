"""Command-line surface: serving, one-shot rendering, prompting, replay."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .blocks import Language, extract_blocks
from .dot import parse_dot
from .engine import ConversationEngine
from .errors import CmiError
from .gateway import Backend, LLMConfig, llm_config_from_dict, make_descriptor
from .metrics import metrics
from .modeldiff import diff_models
from .plantuml import parse_plantuml
from .render import (
    InterpreterConfig,
    OutputFormat,
    RendererBindings,
    RendererKind,
    interpreter_config_from_dict,
    probe_renderers,
    render,
)
from .store import DataStore

EXIT_VALIDATION = 1
EXIT_RENDER = 2


def _load_bindings(config_path: str | None) -> RendererBindings:
    if not config_path:
        return RendererBindings()
    document = json.loads(Path(config_path).read_text(encoding="utf-8"))
    return RendererBindings.from_dict(document.get("renderers", {}))


def _load_app_config(config_path: str | None) -> dict:
    if not config_path:
        return {}
    return json.loads(Path(config_path).read_text(encoding="utf-8"))


@click.group()
def main() -> None:
    """Conversational model interpreter."""


@main.command()
@click.option("--root", envvar="CMI_ROOT", required=True, help="Store root directory.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
@click.option("--config", "config_path", default=None, help="JSON config file.")
def serve(root: str, host: str, port: int, config_path: str | None) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .api import create_app

    config = _load_app_config(config_path)
    app = create_app(
        root,
        bindings=RendererBindings.from_dict(config.get("renderers", {})),
        backends=config.get("backends", []),
    )
    uvicorn.run(app, host=host, port=port)


def _detect_source(text: str, lang: Language) -> str:
    blocks = [b for b in extract_blocks(text) if b.language is lang]
    return blocks[0].raw if blocks else text


@main.command("render")
@click.option("--lang", type=click.Choice(["plantuml", "graphviz"]), required=True)
@click.option("--format", "output_format", type=click.Choice(["svg", "png", "txt"]),
              default="svg", show_default=True)
@click.option("--renderer", type=click.Choice([r.value for r in RendererKind]),
              default=None, help="Defaults to the external renderer, or the "
                                 "builtin fallback for txt output.")
@click.option("--out", "out_path", default=None, help="Artifact output path.")
@click.option("--config", "config_path", default=None, help="JSON config file.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.argument("file", type=click.Path(exists=True))
def render_command(lang: str, output_format: str, renderer: str | None,
                   out_path: str | None, config_path: str | None,
                   as_json: bool, file: str) -> None:
    """One-shot detect, validate, and render a model file."""
    language = Language(lang)
    fmt = OutputFormat(output_format)
    if renderer is None:
        kind = (RendererKind.builtin_fallback if fmt is OutputFormat.txt
                else RendererKind.external_process)
    else:
        kind = RendererKind(renderer)
    source = _detect_source(Path(file).read_text(encoding="utf-8"), language)
    model, report = (parse_dot(source) if language is Language.graphviz
                     else parse_plantuml(source))
    if model is None:
        if as_json:
            click.echo(json.dumps({"ok": False, "report": report.to_dict()}))
        else:
            click.echo(report.format(), err=True)
        sys.exit(EXIT_VALIDATION)
    config = InterpreterConfig(language=language, output_format=fmt, renderer=kind)
    try:
        artifact = render(config, source, _load_bindings(config_path))
    except CmiError as exc:
        if as_json:
            click.echo(json.dumps({"ok": False, "error": exc.code, "message": exc.message}))
        else:
            click.echo(f"render failed: {exc.message}", err=True)
        sys.exit(EXIT_RENDER)
    target = Path(out_path) if out_path else Path(file).with_suffix(f".{fmt.value}")
    target.write_bytes(artifact.data)
    if as_json:
        click.echo(json.dumps({
            "ok": True,
            "artifact": str(target),
            "content_hash": artifact.content_hash,
            "renderer_id": artifact.renderer_id,
            "warnings": [d.format() for d in report.warnings],
        }))
    else:
        for diagnostic in report.warnings:
            click.echo(diagnostic.format(), err=True)
        click.echo(str(target))


def _config_pair(config_document: dict) -> tuple[LLMConfig, InterpreterConfig]:
    llm_config = llm_config_from_dict(config_document.get("llm_config", {}))
    interpreter_config = interpreter_config_from_dict(
        config_document.get("interpreter_config", {})
    )
    return llm_config, interpreter_config


@main.command()
@click.option("--root", envvar="CMI_ROOT", required=True)
@click.option("--conversation", "conversation_id", default=None,
              help="Existing conversation id; a new one is created otherwise.")
@click.option("--config", "config_path", default=None,
              help="JSON file with llm_config/interpreter_config for a new conversation.")
@click.option("--json", "as_json", is_flag=True)
@click.argument("text")
def prompt(root: str, conversation_id: str | None, config_path: str | None,
           as_json: bool, text: str) -> None:
    """Send one prompt through the full pipeline; artifact paths printed."""
    store = DataStore(root)
    config = _load_app_config(config_path)
    engine = ConversationEngine(
        store, bindings=RendererBindings.from_dict(config.get("renderers", {}))
    )
    try:
        if conversation_id is None:
            if not config_path:
                raise click.UsageError("--config is required to create a conversation")
            llm_config, interpreter_config = _config_pair(config)
            conversation = engine.create_conversation(llm_config, interpreter_config)
            conversation_id = conversation.id
        outcome = engine.submit_prompt(conversation_id, text)
    except CmiError as exc:
        if as_json:
            click.echo(json.dumps({"ok": False, "error": exc.code, "message": exc.message}))
        else:
            click.echo(f"error [{exc.code}]: {exc.message}", err=True)
        sys.exit(1)
    artifact_paths = [
        str(store._blob_path(content_hash))
        for entry in outcome.interpreter_entries
        for content_hash in entry.artifacts
    ]
    if as_json:
        click.echo(json.dumps({
            "ok": True,
            "conversation": conversation_id,
            "response": outcome.llm_entry.text,
            "artifacts": artifact_paths,
            "warnings": outcome.warnings,
        }))
    else:
        click.echo(f"conversation: {conversation_id}")
        click.echo(outcome.llm_entry.text)
        for path in artifact_paths:
            click.echo(path)
        for warning in outcome.warnings:
            click.echo(f"warning: {warning}", err=True)


def _parse_supported(block) -> tuple:
    if block.language is Language.graphviz:
        return parse_dot(block.raw)
    return parse_plantuml(block.raw)


@main.command()
@click.option("--script", "script_path", required=True,
              type=click.Path(exists=True), help="Replay script (JSON array of strings).")
@click.option("--out", "out_dir", required=True, help="Report and store output directory.")
@click.option("--lang", type=click.Choice(["plantuml", "graphviz"]),
              default="plantuml", show_default=True,
              help="Interpreter language for rendering.")
@click.option("--json", "as_json", is_flag=True)
def replay(script_path: str, out_dir: str, lang: str, as_json: bool) -> None:
    """Run a scripted session end-to-end and write an evaluation report."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = DataStore(out / "store")
    engine = ConversationEngine(store)
    llm_config = LLMConfig(
        backend=Backend.replay,
        model=make_descriptor("replay"),
        script_path=script_path,
    )
    interpreter_config = InterpreterConfig(
        language=Language(lang),
        output_format=OutputFormat.txt,
        renderer=RendererKind.builtin_fallback,
    )
    conversation = engine.create_conversation(llm_config, interpreter_config)
    script_length = len(json.loads(Path(script_path).read_text(encoding="utf-8")))
    previous_models: dict[Language, object] = {}
    steps = []
    for step in range(script_length):
        outcome = engine.submit_prompt(conversation.id, f"step {step + 1}")
        step_report: dict = {"step": step + 1, "blocks": [], "diffs": {}}
        for block in extract_blocks(outcome.llm_entry.text):
            if block.language is Language.unknown:
                continue
            model, report = _parse_supported(block)
            block_report = {
                "language": block.language.value,
                "valid": model is not None,
                "diagnostics": report.to_dict()["diagnostics"],
                "metrics": metrics(model).to_dict() if model is not None else None,
            }
            step_report["blocks"].append(block_report)
            if model is not None:
                previous = previous_models.get(block.language)
                if previous is not None:
                    step_report["diffs"][block.language.value] = diff_models(
                        previous, model
                    ).to_dict()
                previous_models[block.language] = model
        steps.append(step_report)
    report_document = {
        "script": str(script_path),
        "conversation": conversation.id,
        "steps": steps,
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report_document, indent=2), encoding="utf-8")
    if as_json:
        click.echo(json.dumps(report_document))
    else:
        click.echo(str(report_path))


@main.command("check-store")
@click.option("--root", envvar="CMI_ROOT", required=True)
@click.option("--json", "as_json", is_flag=True)
def check_store(root: str, as_json: bool) -> None:
    """Referential-integrity scan over the store."""
    problems = DataStore(root).check_integrity()
    if as_json:
        click.echo(json.dumps({"ok": not problems, "problems": problems}))
    else:
        for problem in problems:
            click.echo(problem, err=True)
        click.echo("store ok" if not problems else f"{len(problems)} problem(s) found")
    sys.exit(0 if not problems else 1)


@main.command()
@click.option("--config", "config_path", default=None)
@click.option("--json", "as_json", is_flag=True)
def renderers(config_path: str | None, as_json: bool) -> None:
    """Probe renderer availability."""
    results = probe_renderers(_load_bindings(config_path))
    if as_json:
        click.echo(json.dumps([
            {"renderer_id": r.renderer_id, "language": r.language.value,
             "available": r.available, "version": r.version}
            for r in results
        ]))
    else:
        for r in results:
            mark = "ok" if r.available else "missing"
            suffix = f" ({r.version})" if r.version else ""
            click.echo(f"{r.renderer_id} [{r.language.value}]: {mark}{suffix}")


if __name__ == "__main__":
    main()
