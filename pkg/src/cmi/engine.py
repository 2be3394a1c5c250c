"""Conversation lifecycle and orchestration of the prompt pipeline.

One prompt flows through: persist user entry, build the context window,
generate, persist the response, detect syntax blocks, validate, render,
persist artifacts and interpreter entries. Each conversation processes at
most one prompt at a time; distinct conversations may progress concurrently.
"""

from __future__ import annotations

import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

from . import gateway
from .blocks import CodeBlock, Language, extract_blocks
from .conversation import Conversation, DialogueEntry, PromptOutcome, Role, Status, utc_now
from .dot import parse_dot
from .errors import (
    AuthError,
    BackendUnavailable,
    ConfigInvalid,
    ContextOverflow,
    ConversationBusy,
    GenerationFailed,
    NetworkError,
    ProcessError,
    PromptTooLarge,
    RateLimited,
    RendererUnavailable,
    RenderFailed,
    RenderTimeout,
    ScriptExhausted,
    ScriptParse,
    UnsupportedFormat,
)
from .gateway import (
    Backend,
    ChatMessage,
    LLMConfig,
    estimate_messages,
    llm_config_to_dict,
    load_replay_script,
    validate_config,
)
from .plantuml import parse_plantuml
from .render import (
    InterpreterConfig,
    RendererBindings,
    RendererKind,
    interpreter_config_to_dict,
    render,
    renderer_available,
    validate_interpreter_config,
)
from .report import ValidationReport
from .store import DataStore

ProgressFn = Callable[[str], None]

_GENERATION_ERRORS = (
    NetworkError, AuthError, RateLimited, ContextOverflow,
    ProcessError, ScriptExhausted, ScriptParse,
)


def _flatten_config(d: dict, prefix: str = "") -> dict:
    flat: dict = {}
    for key, value in d.items():
        path = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict):
            flat.update(_flatten_config(value, path))
        else:
            flat[path] = value
    return flat


def _change_summary(old: dict, new: dict) -> str:
    old_flat, new_flat = _flatten_config(old), _flatten_config(new)
    lines = []
    for path in sorted(old_flat.keys() | new_flat.keys()):
        before, after = old_flat.get(path), new_flat.get(path)
        if before != after:
            lines.append(f"{path}: {before!r} -> {after!r}")
    return "\n".join(lines) if lines else "configuration changed"


class ConversationEngine:
    def __init__(
        self,
        store: DataStore,
        bindings: RendererBindings | None = None,
        generate_fn: Callable | None = None,
    ):
        self.store = store
        self.bindings = bindings or RendererBindings()
        self._generate = generate_fn or gateway.generate
        self._status: dict[str, Status] = {}
        self._status_lock = threading.Lock()

    # --- lifecycle -------------------------------------------------------------

    def create_conversation(
        self,
        llm_config: LLMConfig,
        interpreter_config: InterpreterConfig,
        system_prompt: Optional[str] = None,
    ) -> Conversation:
        validate_config(llm_config)
        validate_interpreter_config(interpreter_config)
        self._check_backend_ready(llm_config)
        if interpreter_config.renderer is not RendererKind.builtin_fallback:
            if not renderer_available(interpreter_config, self.bindings):
                raise BackendUnavailable(
                    f"renderer {interpreter_config.renderer.value} for "
                    f"{interpreter_config.language.value} is not available"
                )
        conversation = Conversation(
            id=str(uuid.uuid4()),
            created_at=utc_now(),
            llm_config=llm_config,
            interpreter_config=interpreter_config,
            system_prompt=system_prompt,
        )
        self.store.create_conversation(conversation)
        return conversation

    def _check_backend_ready(self, config: LLMConfig) -> None:
        if config.backend in (Backend.remote_chat_api, Backend.remote_replicate_style):
            if not os.environ.get(config.credential_ref or ""):
                raise BackendUnavailable(
                    f"credential variable {config.credential_ref!r} is not set"
                )
        elif config.backend is Backend.replay:
            try:
                load_replay_script(config.script_path or "")
            except ScriptParse as exc:
                raise BackendUnavailable(str(exc)) from exc

    def status(self, conversation_id: str) -> Status:
        with self._status_lock:
            return self._status.get(conversation_id, Status.idle)

    def get_conversation(self, conversation_id: str) -> Conversation:
        conversation = self.store.load_conversation(conversation_id)
        conversation.status = self.status(conversation_id)
        return conversation

    def list_conversations(self) -> list[dict]:
        summaries = self.store.list_conversations()
        for summary in summaries:
            summary["status"] = self.status(summary["id"]).value
        return summaries

    # --- context assembly --------------------------------------------------------

    def build_context(self, conversation: Conversation, new_prompt: str) -> list[ChatMessage]:
        """Assemble the message window: optional system prompt, surviving
        user/llm history, then the new prompt as the final user message.

        Oldest exchanges are dropped whole (a user turn with its reply) until
        the token estimate fits ``context_window - max_response_tokens``.
        """
        budget = (conversation.llm_config.model.context_window
                  - conversation.llm_config.sampling.max_response_tokens)
        system: list[ChatMessage] = []
        if conversation.system_prompt:
            system.append(ChatMessage("system", conversation.system_prompt))
        final = ChatMessage("user", new_prompt)
        if estimate_messages(system + [final]) > budget:
            raise PromptTooLarge(
                f"prompt needs {estimate_messages(system + [final])} tokens; "
                f"budget is {budget}"
            )
        exchanges: list[list[ChatMessage]] = []
        for entry in conversation.entries:
            if entry.role is Role.user:
                exchanges.append([ChatMessage("user", entry.text)])
            elif entry.role is Role.llm:
                if exchanges and len(exchanges[-1]) == 1 and exchanges[-1][0].role == "user":
                    exchanges[-1].append(ChatMessage("assistant", entry.text))
                else:
                    exchanges.append([ChatMessage("assistant", entry.text)])
        while exchanges:
            messages = system + [m for e in exchanges for m in e] + [final]
            if estimate_messages(messages) <= budget:
                return messages
            exchanges.pop(0)
        return system + [final]

    # --- prompt pipeline ------------------------------------------------------------

    def submit_prompt(
        self, conversation_id: str, text: str, progress: ProgressFn | None = None
    ) -> PromptOutcome:
        if not text or not text.strip():
            raise ConfigInvalid("text", "prompt must be nonempty")
        conversation = self.store.load_conversation(conversation_id)
        with self._status_lock:
            if self._status.get(conversation_id, Status.idle) is not Status.idle:
                raise ConversationBusy(f"conversation {conversation_id} is busy")
            self._status[conversation_id] = Status.generating
        try:
            return self._run_prompt(conversation, text, progress or (lambda stage: None))
        finally:
            with self._status_lock:
                self._status[conversation_id] = Status.idle

    def _run_prompt(
        self, conversation: Conversation, text: str, progress: ProgressFn
    ) -> PromptOutcome:
        progress("received")
        user_entry = DialogueEntry(seq=-1, role=Role.user, text=text)
        self.store.append_entry(conversation.id, user_entry)

        context = self.build_context(conversation, text)
        replay_step = sum(1 for e in conversation.entries if e.role is Role.llm)
        try:
            result = self._generate(conversation.llm_config, context, step=replay_step)
        except _GENERATION_ERRORS as exc:
            raise GenerationFailed(f"generation failed: {exc}", cause=exc) from exc
        progress("generated")

        blocks = [b for b in extract_blocks(result.text) if b.language is not Language.unknown]
        llm_entry = DialogueEntry(
            seq=-1, role=Role.llm, text=result.text,
            detected_blocks=[b.summary() for b in blocks],
        )
        self.store.append_entry(conversation.id, llm_entry)

        with self._status_lock:
            self._status[conversation.id] = Status.interpreting

        warnings: list[str] = []
        validated: list[tuple[CodeBlock, Optional[str], Optional[ValidationReport]]] = []
        for block in blocks:
            if block.language is not conversation.interpreter_config.language:
                validated.append((block, None, None))
                continue
            if block.language is Language.graphviz:
                model, report = parse_dot(block.raw)
            else:
                model, report = parse_plantuml(block.raw)
            validated.append((block, block.raw if model is not None else None, report))
        progress("validated")

        # Valid blocks render concurrently (bounded pool); entries are still
        # appended strictly in block order.
        render_results: dict[int, object] = {}
        render_indices = [i for i, (_, source, _) in enumerate(validated)
                          if source is not None]
        if render_indices:
            workers = max(1, min(self.bindings.render_pool_limit, len(render_indices)))

            def run_render(source: str):
                return render(conversation.interpreter_config, source, self.bindings)

            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {i: pool.submit(run_render, validated[i][1])
                           for i in render_indices}
                for i, future in futures.items():
                    try:
                        render_results[i] = future.result()
                    except (RendererUnavailable, RenderTimeout, RenderFailed,
                            UnsupportedFormat) as exc:
                        render_results[i] = exc

        interpreter_entries: list[DialogueEntry] = []
        for position, (block, source, report) in enumerate(validated, start=1):
            if report is None:
                message = (
                    f"detected {block.language.value} block but interpreter is "
                    f"configured for {conversation.interpreter_config.language.value}; "
                    f"not rendered"
                )
                warnings.append(f"block {position}: {message}")
                entry = DialogueEntry(
                    seq=-1, role=Role.interpreter, text=message,
                    detected_blocks=[block.summary()],
                )
            elif source is None:
                message = (
                    f"{block.language.value} validation failed:\n{report.format()}"
                )
                warnings.append(f"block {position}: validation failed")
                entry = DialogueEntry(
                    seq=-1, role=Role.interpreter, text=message,
                    detected_blocks=[block.summary()],
                )
            else:
                result = render_results[position - 1]
                if isinstance(result, Exception):
                    message = f"rendering failed: {result}"
                    warnings.append(f"block {position}: {message}")
                    entry = DialogueEntry(
                        seq=-1, role=Role.interpreter, text=message,
                        detected_blocks=[block.summary()],
                    )
                else:
                    self.store.put_artifact(result.data)
                    entry = DialogueEntry(
                        seq=-1, role=Role.interpreter, text="",
                        artifacts=[result.content_hash],
                        detected_blocks=[block.summary()],
                    )
            self.store.append_entry(conversation.id, entry)
            interpreter_entries.append(entry)
        progress("rendered")
        progress("done")
        return PromptOutcome(
            llm_entry=llm_entry,
            interpreter_entries=interpreter_entries,
            warnings=warnings,
        )

    # --- reconfiguration ---------------------------------------------------------------

    def reconfigure(
        self,
        conversation_id: str,
        new_llm_config: Optional[LLMConfig] = None,
        new_interpreter_config: Optional[InterpreterConfig] = None,
    ) -> Conversation:
        conversation = self.store.load_conversation(conversation_id)
        with self._status_lock:
            if self._status.get(conversation_id, Status.idle) is not Status.idle:
                raise ConversationBusy(f"conversation {conversation_id} is busy")
        if new_llm_config is not None:
            validate_config(new_llm_config)
        if new_interpreter_config is not None:
            validate_interpreter_config(new_interpreter_config)
        effective_llm = new_llm_config or conversation.llm_config
        effective_interpreter = new_interpreter_config or conversation.interpreter_config
        if (effective_llm == conversation.llm_config
                and effective_interpreter == conversation.interpreter_config):
            return conversation
        old_snapshot = {
            "llm_config": llm_config_to_dict(conversation.llm_config),
            "interpreter_config": interpreter_config_to_dict(conversation.interpreter_config),
        }
        new_snapshot = {
            "llm_config": llm_config_to_dict(effective_llm),
            "interpreter_config": interpreter_config_to_dict(effective_interpreter),
        }
        entry = DialogueEntry(
            seq=-1, role=Role.config_change,
            text=_change_summary(old_snapshot, new_snapshot),
            config_change={"old": old_snapshot, "new": new_snapshot},
        )
        self.store.append_entry(conversation_id, entry)
        return self.get_conversation(conversation_id)
