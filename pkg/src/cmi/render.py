"""Rendering of validated model syntax to visual artifacts.

Bindings are declarative command/endpoint templates so new interpreters can
be added through configuration. A builtin fallback renderer produces a
deterministic plain-text summary from the parsed model, keeping the whole
pipeline operational without external binaries or network access.
"""

from __future__ import annotations

import hashlib
import os
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import httpx

from .blocks import Language
from .dot import DotGraph, parse_dot
from .errors import (
    ConfigInvalid,
    RendererUnavailable,
    RenderFailed,
    RenderTimeout,
    UnsupportedFormat,
)
from .plantuml import ClassDecl, EnumDecl, Relationship, UmlModel, parse_plantuml

# Generous default: accommodates JVM start-up for the PlantUML binding.
DEFAULT_TIMEOUT_MS = 10_000
MIN_TIMEOUT_MS = 100

# Hard bound past the configured timeout before the child is killed.
KILL_GRACE_MS = 500


class OutputFormat(str, Enum):
    svg = "svg"
    png = "png"
    txt = "txt"


class RendererKind(str, Enum):
    external_process = "external_process"
    http_renderer = "http_renderer"
    builtin_fallback = "builtin_fallback"


@dataclass(frozen=True)
class InterpreterConfig:
    language: Language
    output_format: OutputFormat = OutputFormat.svg
    layout_engine: Optional[str] = None  # graphviz only: dot, neato, fdp, ...
    renderer: RendererKind = RendererKind.external_process
    timeout_ms: int = DEFAULT_TIMEOUT_MS


def validate_interpreter_config(config: InterpreterConfig, path: str = "interpreter_config") -> None:
    if config.language not in (Language.plantuml, Language.graphviz):
        raise ConfigInvalid(f"{path}.language", "must be plantuml or graphviz")
    if config.timeout_ms < MIN_TIMEOUT_MS:
        raise ConfigInvalid(f"{path}.timeout_ms", f"must be >= {MIN_TIMEOUT_MS}")
    if config.layout_engine and config.language is not Language.graphviz:
        raise ConfigInvalid(f"{path}.layout_engine", "only valid for graphviz")


@dataclass(frozen=True)
class RenderArtifact:
    content_hash: str  # SHA-256 hex of the bytes
    format: OutputFormat
    data: bytes
    renderer_id: str
    duration_ms: int
    diagnostics: str = ""  # renderer standard-error, captured even on success


@dataclass
class RendererBindings:
    """Command/endpoint templates for the external renderer integrations."""

    graphviz_command: str = "{engine} -T{format}"
    graphviz_default_engine: str = "dot"
    plantuml_command: str = "java -jar {plantuml_jar} -pipe -t{format}"
    plantuml_jar: Optional[str] = None
    plantuml_server_url: Optional[str] = None
    # Renders for distinct blocks of one response run concurrently up to
    # this many child processes.
    render_pool_limit: int = 2

    @classmethod
    def from_dict(cls, d: dict) -> "RendererBindings":
        bindings = cls()
        for key in ("graphviz_command", "graphviz_default_engine",
                    "plantuml_command", "plantuml_jar", "plantuml_server_url",
                    "render_pool_limit"):
            if key in d:
                setattr(bindings, key, d[key])
        return bindings


def _hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


# --- fallback rendering ------------------------------------------------------

def render_fallback(model: Union[DotGraph, UmlModel]) -> RenderArtifact:
    """Deterministic plain-text summary of a parsed model.

    Header line, then sorted node/class lines, then sorted edge/relationship
    lines; identical input yields identical bytes and hash.
    """
    start = time.monotonic()
    if isinstance(model, DotGraph):
        lines = ["# graphviz fallback rendering"]
        lines.extend(sorted(f"node {name}" for name in model.node_ids()))
        lines.extend(sorted(f"edge {a} -> {b}" for a, b, _ in model.edges()))
    else:
        lines = ["# plantuml fallback rendering"]
        declarations = []
        for element in model.elements:
            if isinstance(element, ClassDecl):
                declarations.append(f"class {element.name} ({len(element.members)} members)")
            elif isinstance(element, EnumDecl):
                declarations.append(f"class {element.name} ({len(element.literals)} members)")
        lines.extend(sorted(declarations))
        lines.extend(sorted(
            f"rel {e.left} {e.kind.value} {e.right}"
            for e in model.elements if isinstance(e, Relationship)
        ))
    data = ("\n".join(lines) + "\n").encode("utf-8")
    return RenderArtifact(
        content_hash=_hash(data),
        format=OutputFormat.txt,
        data=data,
        renderer_id="builtin_fallback",
        duration_ms=int((time.monotonic() - start) * 1000),
    )


# --- external renderers ------------------------------------------------------

def _run_process(command: list[str], source: bytes, timeout_ms: int) -> tuple[bytes, str, int]:
    started = time.monotonic()
    try:
        proc = subprocess.run(
            command, input=source, capture_output=True,
            timeout=(timeout_ms + KILL_GRACE_MS) / 1000.0,
        )
    except subprocess.TimeoutExpired as exc:
        raise RenderTimeout(
            f"renderer {command[0]!r} exceeded {timeout_ms} ms and was killed"
        ) from exc
    except FileNotFoundError as exc:
        raise RendererUnavailable(f"renderer binary not found: {command[0]}") from exc
    duration_ms = int((time.monotonic() - started) * 1000)
    stderr = proc.stderr.decode("utf-8", errors="replace")
    if proc.returncode != 0:
        raise RenderFailed(
            f"renderer {command[0]!r} exited with {proc.returncode}", diagnostics=stderr
        )
    return proc.stdout, stderr, duration_ms


def _render_graphviz_process(
    config: InterpreterConfig, source: str, bindings: RendererBindings
) -> RenderArtifact:
    engine = config.layout_engine or bindings.graphviz_default_engine
    command = shlex.split(
        bindings.graphviz_command.format(engine=engine, format=config.output_format.value)
    )
    data, stderr, duration = _run_process(command, source.encode("utf-8"), config.timeout_ms)
    if not data:
        raise RenderFailed("renderer produced no output", diagnostics=stderr)
    return RenderArtifact(
        content_hash=_hash(data), format=config.output_format, data=data,
        renderer_id=f"graphviz:{engine}", duration_ms=duration, diagnostics=stderr,
    )


def _render_plantuml_process(
    config: InterpreterConfig, source: str, bindings: RendererBindings
) -> RenderArtifact:
    if not bindings.plantuml_jar:
        raise RendererUnavailable("plantuml_jar is not configured")
    command = shlex.split(
        bindings.plantuml_command.format(
            plantuml_jar=bindings.plantuml_jar, format=config.output_format.value
        )
    )
    data, stderr, duration = _run_process(command, source.encode("utf-8"), config.timeout_ms)
    if not data:
        raise RenderFailed("renderer produced no output", diagnostics=stderr)
    return RenderArtifact(
        content_hash=_hash(data), format=config.output_format, data=data,
        renderer_id="plantuml:process", duration_ms=duration, diagnostics=stderr,
    )


def _render_plantuml_http(
    config: InterpreterConfig, source: str, bindings: RendererBindings,
    transport: httpx.BaseTransport | None = None,
) -> RenderArtifact:
    if not bindings.plantuml_server_url:
        raise RendererUnavailable("plantuml_server_url is not configured")
    url = bindings.plantuml_server_url.rstrip("/") + f"/{config.output_format.value}"
    started = time.monotonic()
    try:
        with httpx.Client(transport=transport, timeout=config.timeout_ms / 1000.0) as client:
            response = client.post(url, content=source.encode("utf-8"))
    except httpx.TransportError as exc:
        raise RendererUnavailable(f"renderer endpoint unreachable: {exc}") from exc
    duration = int((time.monotonic() - started) * 1000)
    if response.status_code != 200:
        raise RenderFailed(
            f"renderer endpoint returned HTTP {response.status_code}",
            diagnostics=response.text[:500],
        )
    return RenderArtifact(
        content_hash=_hash(response.content), format=config.output_format,
        data=response.content, renderer_id="plantuml:http", duration_ms=duration,
    )


def _parse_for_fallback(language: Language, source: str) -> Union[DotGraph, UmlModel]:
    if language is Language.graphviz:
        graph, report = parse_dot(source)
        if graph is None:
            raise RenderFailed("source failed validation", diagnostics=report.format())
        return graph
    model, report = parse_plantuml(source)
    if model is None:
        raise RenderFailed("source failed validation", diagnostics=report.format())
    return model


def render(
    config: InterpreterConfig,
    source: str,
    bindings: RendererBindings | None = None,
    transport: httpx.BaseTransport | None = None,
) -> RenderArtifact:
    """Render validated source text to an artifact in the requested format.

    Callers are expected to validate first; invalid input surfaces as
    RenderFailed with the validator's diagnostics attached.
    """
    bindings = bindings or RendererBindings()
    if config.renderer is RendererKind.builtin_fallback:
        if config.output_format is not OutputFormat.txt:
            raise UnsupportedFormat(
                f"builtin fallback renders txt only, not {config.output_format.value}"
            )
        return render_fallback(_parse_for_fallback(config.language, source))
    if config.output_format is OutputFormat.txt:
        raise UnsupportedFormat("txt output requires the builtin fallback renderer")
    if config.renderer is RendererKind.http_renderer:
        if config.language is not Language.plantuml:
            raise RendererUnavailable("http renderer binding exists for plantuml only")
        return _render_plantuml_http(config, source, bindings, transport)
    if config.language is Language.graphviz:
        return _render_graphviz_process(config, source, bindings)
    return _render_plantuml_process(config, source, bindings)


# --- probing -----------------------------------------------------------------

@dataclass(frozen=True)
class ProbeResult:
    renderer_id: str
    language: Language
    available: bool
    version: Optional[str] = None


def probe_renderers(bindings: RendererBindings | None = None) -> list[ProbeResult]:
    """Check which renderer bindings are usable, without rendering anything."""
    bindings = bindings or RendererBindings()
    results: list[ProbeResult] = []

    engine = bindings.graphviz_default_engine
    binary = shutil.which(engine)
    version = None
    if binary:
        try:
            proc = subprocess.run([binary, "-V"], capture_output=True, text=True, timeout=5)
            version = (proc.stderr or proc.stdout).strip() or None
        except (subprocess.SubprocessError, OSError):
            binary = None
    results.append(ProbeResult(
        renderer_id=f"graphviz:{engine}", language=Language.graphviz,
        available=binary is not None, version=version,
    ))

    java = shutil.which("java")
    jar_ok = bool(bindings.plantuml_jar) and os.path.isfile(bindings.plantuml_jar or "")
    results.append(ProbeResult(
        renderer_id="plantuml:process", language=Language.plantuml,
        available=bool(java and jar_ok),
    ))

    http_available = False
    if bindings.plantuml_server_url:
        try:
            with httpx.Client(timeout=2.0) as client:
                client.get(bindings.plantuml_server_url)
            http_available = True
        except httpx.HTTPError:
            http_available = False
    results.append(ProbeResult(
        renderer_id="plantuml:http", language=Language.plantuml,
        available=http_available,
    ))

    results.append(ProbeResult(
        renderer_id="builtin_fallback", language=Language.graphviz, available=True))
    results.append(ProbeResult(
        renderer_id="builtin_fallback", language=Language.plantuml, available=True))
    return results


def renderer_available(config: InterpreterConfig, bindings: RendererBindings | None = None) -> bool:
    """True when the configured renderer can run for the configured language."""
    bindings = bindings or RendererBindings()
    if config.renderer is RendererKind.builtin_fallback:
        return True
    if config.renderer is RendererKind.http_renderer:
        return bool(bindings.plantuml_server_url) and config.language is Language.plantuml
    if config.language is Language.graphviz:
        return shutil.which(config.layout_engine or bindings.graphviz_default_engine) is not None
    return bool(
        shutil.which("java")
        and bindings.plantuml_jar
        and os.path.isfile(bindings.plantuml_jar)
    )


# --- config (de)serialization -------------------------------------------------

def interpreter_config_to_dict(c: InterpreterConfig) -> dict:
    d: dict = {
        "language": c.language.value,
        "output_format": c.output_format.value,
        "renderer": c.renderer.value,
        "timeout_ms": c.timeout_ms,
    }
    if c.layout_engine is not None:
        d["layout_engine"] = c.layout_engine
    return d


def interpreter_config_from_dict(d: dict, path: str = "interpreter_config") -> InterpreterConfig:
    if not isinstance(d, dict):
        raise ConfigInvalid(path, "must be an object")
    try:
        language = Language(d.get("language", ""))
    except ValueError:
        raise ConfigInvalid(f"{path}.language", f"unknown language: {d.get('language')!r}")
    try:
        output_format = OutputFormat(d.get("output_format", OutputFormat.svg.value))
    except ValueError:
        raise ConfigInvalid(f"{path}.output_format",
                            f"unknown format: {d.get('output_format')!r}")
    try:
        renderer = RendererKind(d.get("renderer", RendererKind.external_process.value))
    except ValueError:
        raise ConfigInvalid(f"{path}.renderer", f"unknown renderer: {d.get('renderer')!r}")
    try:
        timeout_ms = int(d.get("timeout_ms", DEFAULT_TIMEOUT_MS))
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{path}.timeout_ms", f"bad value: {exc}") from exc
    config = InterpreterConfig(
        language=language, output_format=output_format,
        layout_engine=d.get("layout_engine"), renderer=renderer, timeout_ms=timeout_ms,
    )
    validate_interpreter_config(config, path)
    return config
