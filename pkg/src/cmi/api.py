"""HTTP surface over the conversation engine.

JSON routes mirror the engine operations one to one; engine errors map to
a fixed (status, code) pair. Artifact bytes are served with a sniffed media
type and a restrictive content-security policy, since model-derived SVG is
untrusted input.
"""

from __future__ import annotations

import json
import queue
import threading
from typing import Optional

from fastapi import Body, FastAPI, Request
from fastapi.responses import JSONResponse, Response, StreamingResponse

from .blocks import Language, extract_blocks
from .conversation import Conversation, DialogueEntry
from .dot import parse_dot
from .engine import ConversationEngine
from .errors import CmiError, NotFound
from .gateway import llm_config_from_dict, llm_config_to_dict
from .metrics import metrics
from .modeldiff import diff_models
from .plantuml import parse_plantuml
from .render import (
    RendererBindings,
    interpreter_config_from_dict,
    interpreter_config_to_dict,
    probe_renderers,
)
from .store import DataStore

# Engine error code -> HTTP status. 4xx are caller faults, 5xx backend or
# renderer faults.
ERROR_STATUS = {
    "config_invalid": 400,
    "script_parse": 400,
    "hash_mismatch": 400,
    "unsupported_version": 400,
    "unsupported_format": 400,
    "language_mismatch": 400,
    "not_found": 404,
    "unknown_conversation": 404,
    "busy": 409,
    "prompt_too_large": 413,
    "generation_failed": 502,
    "network_error": 502,
    "auth_error": 502,
    "context_overflow": 502,
    "process_error": 502,
    "script_exhausted": 502,
    "render_failed": 502,
    "render_timeout": 502,
    "renderer_unavailable": 502,
    "backend_unavailable": 503,
    "rate_limited": 503,
    "corrupt_log": 500,
    "io_error": 500,
    "error": 500,
}

SVG_CSP = "default-src 'none'; style-src 'unsafe-inline'"


def entry_to_dict(entry: DialogueEntry) -> dict:
    d = {
        "seq": entry.seq,
        "role": entry.role.value,
        "text": entry.text,
        "artifacts": list(entry.artifacts),
        "detected_blocks": list(entry.detected_blocks),
        "timestamp": entry.timestamp,
    }
    if entry.config_change is not None:
        d["config_change"] = entry.config_change
    return d


def conversation_to_dict(conversation: Conversation) -> dict:
    return {
        "id": conversation.id,
        "created_at": conversation.created_at,
        "status": conversation.status.value,
        "system_prompt": conversation.system_prompt,
        "llm_config": llm_config_to_dict(conversation.llm_config),
        "interpreter_config": interpreter_config_to_dict(conversation.interpreter_config),
        "entries": [entry_to_dict(e) for e in conversation.entries],
        "warnings": list(conversation.load_warnings),
    }


def _sniff_media_type(data: bytes) -> str:
    if data.startswith(b"\x89PNG"):
        return "image/png"
    head = data[:512].lstrip()
    if head.startswith(b"<?xml") or head.startswith(b"<svg"):
        return "image/svg+xml"
    return "text/plain; charset=utf-8"


def _parse_block(language: Language, source: str):
    if language is Language.graphviz:
        return parse_dot(source)
    return parse_plantuml(source)


def analyze_entry(conversation: Conversation, seq: int, block_index: int = 0) -> dict:
    """Diagnostics, metrics, and diff-vs-previous for one detected block."""
    entry = next((e for e in conversation.entries if e.seq == seq), None)
    if entry is None:
        raise NotFound(f"no entry with seq {seq}")
    blocks = [b for b in extract_blocks(entry.text) if b.language is not Language.unknown]
    if block_index >= len(blocks):
        raise NotFound(f"entry {seq} has {len(blocks)} detected blocks")
    block = blocks[block_index]
    model, report = _parse_block(block.language, block.raw)
    result: dict = {
        "language": block.language.value,
        "diagnostics": report.to_dict(),
        "metrics": metrics(model).to_dict() if model is not None else None,
        "diff": None,
    }
    if model is None:
        return result
    for earlier in reversed([e for e in conversation.entries
                             if e.role.value == "llm" and e.seq < seq]):
        for candidate in extract_blocks(earlier.text):
            if candidate.language is not block.language:
                continue
            previous, _ = _parse_block(candidate.language, candidate.raw)
            if previous is not None:
                result["diff"] = diff_models(previous, model).to_dict()
                return result
    return result


def create_app(
    store_root: str,
    bindings: RendererBindings | None = None,
    backends: Optional[list[dict]] = None,
    generate_fn=None,
) -> FastAPI:
    store = DataStore(store_root)
    engine = ConversationEngine(store, bindings=bindings, generate_fn=generate_fn)
    app = FastAPI(title="cmi", docs_url=None, redoc_url=None)
    app.state.engine = engine
    app.state.store = store
    app.state.backends = backends or []

    @app.exception_handler(CmiError)
    async def handle_engine_error(request: Request, exc: CmiError) -> JSONResponse:
        status = ERROR_STATUS.get(exc.code, 500)
        body = {"code": exc.code, "message": exc.message, "http_status": status}
        if getattr(exc, "field", None):
            body["detail"] = {"field": exc.field}
        cause = getattr(exc, "cause", None)
        if cause is not None:
            body["detail"] = {"cause": getattr(cause, "code", "error")}
        return JSONResponse(status_code=status, content=body)

    @app.post("/api/conversations", status_code=201)
    def create_conversation(payload: dict = Body(...)) -> dict:
        llm_config = llm_config_from_dict(payload.get("llm_config", {}))
        interpreter_config = interpreter_config_from_dict(
            payload.get("interpreter_config", {})
        )
        conversation = engine.create_conversation(
            llm_config, interpreter_config,
            system_prompt=payload.get("system_prompt"),
        )
        return {"conversation": conversation_to_dict(conversation)}

    @app.get("/api/conversations")
    def list_conversations() -> dict:
        return {"conversations": engine.list_conversations()}

    @app.get("/api/conversations/{conversation_id}")
    def get_conversation(conversation_id: str) -> dict:
        return {"conversation": conversation_to_dict(engine.get_conversation(conversation_id))}

    def _outcome_to_dict(outcome) -> dict:
        return {
            "llm_entry": entry_to_dict(outcome.llm_entry),
            "interpreter_entries": [entry_to_dict(e) for e in outcome.interpreter_entries],
            "warnings": list(outcome.warnings),
        }

    @app.post("/api/conversations/{conversation_id}/prompts")
    def submit_prompt(conversation_id: str, request: Request,
                      payload: dict = Body(...)):
        text = payload.get("text", "")
        wants_stream = "text/event-stream" in request.headers.get("accept", "")
        if not wants_stream:
            outcome = engine.submit_prompt(conversation_id, text)
            return {"outcome": _outcome_to_dict(outcome)}

        events: queue.Queue = queue.Queue()

        def work() -> None:
            try:
                outcome = engine.submit_prompt(
                    conversation_id, text, progress=lambda s: events.put(("stage", s))
                )
                events.put(("done", _outcome_to_dict(outcome)))
            except CmiError as exc:
                events.put(("error", {"code": exc.code, "message": exc.message}))
            except Exception as exc:  # pragma: no cover - defensive
                events.put(("error", {"code": "error", "message": str(exc)}))

        threading.Thread(target=work, daemon=True).start()

        def stream():
            while True:
                kind, data = events.get()
                if kind == "stage":
                    yield f"event: stage\ndata: {json.dumps({'stage': data})}\n\n"
                    if data == "done":
                        continue
                else:
                    yield f"event: {kind}\ndata: {json.dumps(data)}\n\n"
                    return

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.patch("/api/conversations/{conversation_id}/config")
    def reconfigure(conversation_id: str, payload: dict = Body(...)) -> dict:
        new_llm = None
        new_interpreter = None
        if payload.get("llm_config") is not None:
            new_llm = llm_config_from_dict(payload["llm_config"])
        if payload.get("interpreter_config") is not None:
            new_interpreter = interpreter_config_from_dict(payload["interpreter_config"])
        conversation = engine.reconfigure(conversation_id, new_llm, new_interpreter)
        return {"conversation": conversation_to_dict(conversation)}

    @app.get("/api/conversations/{conversation_id}/analysis")
    def analysis(conversation_id: str, seq: int, block: int = 0) -> dict:
        conversation = engine.get_conversation(conversation_id)
        return {"analysis": analyze_entry(conversation, seq, block)}

    @app.get("/api/artifacts/{content_hash}")
    def get_artifact(content_hash: str) -> Response:
        data = store.get_artifact(content_hash)
        media_type = _sniff_media_type(data)
        headers = {"X-Content-Type-Options": "nosniff"}
        if media_type == "image/svg+xml":
            headers["Content-Security-Policy"] = SVG_CSP
        return Response(content=data, media_type=media_type, headers=headers)

    @app.get("/api/renderers")
    def renderers() -> dict:
        return {
            "renderers": [
                {
                    "renderer_id": p.renderer_id,
                    "language": p.language.value,
                    "available": p.available,
                    "version": p.version,
                }
                for p in probe_renderers(engine.bindings)
            ]
        }

    @app.get("/api/backends")
    def list_backends() -> dict:
        return {"backends": app.state.backends}

    return app
