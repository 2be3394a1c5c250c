"""LLM backend selection, parametrization, and execution.

Four backends share one configuration type: an OpenAI-style chat API, a
Replicate-style prediction API, a local inference runtime driven as an
external process, and a deterministic scripted replay backend used for
testing and offline reproduction of recorded dialogues.
"""

from __future__ import annotations

import json
import math
import os
import subprocess
import tempfile
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import httpx

from .errors import (
    AuthError,
    ConfigInvalid,
    ContextOverflow,
    NetworkError,
    ProcessError,
    RateLimited,
    ScriptExhausted,
    ScriptParse,
)

# Heuristic token estimator constants: ~4 bytes per token plus a fixed
# per-message overhead. Deliberately an over-approximation; never used
# for billing.
BYTES_PER_TOKEN = 4
MESSAGE_OVERHEAD_TOKENS = 4

# Single retry on transport-level failures; auth and rate-limit errors are
# surfaced to the caller untouched.
RETRY_DELAY_S = 1.0

DEFAULT_TIMEOUT_S = 60.0

# Known context windows: 4096 for Llama 2, 8192 for standard GPT-4 and
# 32768 for its extended variant.
KNOWN_CONTEXT_WINDOWS = {
    "llama-2": 4096,
    "llama-2-7b": 4096,
    "llama-2-13b": 4096,
    "llama-2-70b": 4096,
    "gpt-4": 8192,
    "gpt-4-32k": 32768,
    "gpt-3.5-turbo": 4096,
}
DEFAULT_CONTEXT_WINDOW = 4096

# Default llama.cpp-style invocation; overridable through the bindings
# config or the ``command_template`` argument.
DEFAULT_LOCAL_COMMAND = (
    "llama-cli -m {model_path} -f {prompt_file} --temp {temperature} "
    "--top-p {top_p} --top-k {top_k} -n {n_predict}"
)


class Backend(str, Enum):
    remote_chat_api = "remote_chat_api"
    remote_replicate_style = "remote_replicate_style"
    local_process = "local_process"
    replay = "replay"


class ModelFamily(str, Enum):
    gpt = "gpt"
    llama = "llama"
    other = "other"


class FinishReason(str, Enum):
    stop = "stop"
    length = "length"
    error = "error"


@dataclass(frozen=True)
class SamplingParams:
    """Token-selection hyperparameters shared by all backends."""

    temperature: float = 0.7
    top_p: float = 0.9
    top_k: int = 40
    max_response_tokens: int = 1024
    seed: Optional[int] = None

    def validate(self, path: str = "sampling") -> None:
        if self.temperature < 0:
            raise ConfigInvalid(f"{path}.temperature", "must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ConfigInvalid(f"{path}.top_p", "must be in (0, 1]")
        if self.top_k < 0:
            raise ConfigInvalid(f"{path}.top_k", "must be >= 0")
        if self.max_response_tokens < 1:
            raise ConfigInvalid(f"{path}.max_response_tokens", "must be >= 1")


@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    context_window: int = DEFAULT_CONTEXT_WINDOW
    param_count: Optional[int] = None  # billions
    family: ModelFamily = ModelFamily.other

    def validate(self, path: str = "model") -> None:
        if not self.name:
            raise ConfigInvalid(f"{path}.name", "must be nonempty")
        if self.context_window <= 0:
            raise ConfigInvalid(f"{path}.context_window", "must be > 0")


def make_descriptor(name: str) -> ModelDescriptor:
    """Build a descriptor for a known model name, with sensible defaults."""
    key = name.lower()
    window = KNOWN_CONTEXT_WINDOWS.get(key, DEFAULT_CONTEXT_WINDOW)
    if key.startswith("gpt"):
        family = ModelFamily.gpt
    elif key.startswith("llama"):
        family = ModelFamily.llama
    else:
        family = ModelFamily.other
    return ModelDescriptor(name=name, context_window=window, family=family)


@dataclass(frozen=True)
class LLMConfig:
    backend: Backend
    model: ModelDescriptor
    sampling: SamplingParams = SamplingParams()
    endpoint_url: Optional[str] = None
    credential_ref: Optional[str] = None  # env var NAME, never the secret
    local_model_path: Optional[str] = None
    script_path: Optional[str] = None


@dataclass(frozen=True)
class GenerationResult:
    text: str
    finish_reason: FinishReason = FinishReason.stop
    usage: Optional[dict] = None  # {"prompt_tokens": n, "completion_tokens": m}


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    text: str


def validate_config(config: LLMConfig, path: str = "llm_config",
                    check_files: bool = True) -> None:
    """Check field-presence rules and sampling bounds for one backend config.

    For ``local_process`` the model file must also exist on disk;
    ``check_files=False`` skips that (used when reloading stored snapshots).
    """
    config.model.validate(f"{path}.model")
    config.sampling.validate(f"{path}.sampling")
    if config.backend in (Backend.remote_chat_api, Backend.remote_replicate_style):
        if not config.endpoint_url:
            raise ConfigInvalid(f"{path}.endpoint_url", "required for remote backends")
        if not config.credential_ref:
            raise ConfigInvalid(f"{path}.credential_ref", "required for remote backends")
    elif config.backend is Backend.local_process:
        if not config.local_model_path:
            raise ConfigInvalid(f"{path}.local_model_path", "required for local_process")
        if check_files and not Path(config.local_model_path).is_file():
            raise ConfigInvalid(
                f"{path}.local_model_path", f"file not found: {config.local_model_path}"
            )
    elif config.backend is Backend.replay:
        if not config.script_path:
            raise ConfigInvalid(f"{path}.script_path", "required for replay backend")


# --- token estimation -------------------------------------------------------

def estimate_tokens(text: str, model: ModelDescriptor | None = None) -> int:
    """Deterministic per-message token estimate.

    ``ceil(byte_length / 4) + 4``: an over-approximation independent of the
    actual tokenizer, monotone in the text length.
    """
    return math.ceil(len(text.encode("utf-8")) / BYTES_PER_TOKEN) + MESSAGE_OVERHEAD_TOKENS


def estimate_messages(messages: Sequence[ChatMessage], model: ModelDescriptor | None = None) -> int:
    return sum(estimate_tokens(m.text, model) for m in messages)


# --- wire encoding ----------------------------------------------------------

def flatten_messages(messages: Sequence[ChatMessage]) -> str:
    """Flatten a chat history to a single prompt for single-prompt backends.

    User and assistant turns are delimited with "### User:" / "### Assistant:";
    a system message, when present, leads without a delimiter. Ends with an
    assistant cue so the model continues the dialogue.
    """
    parts: list[str] = []
    for m in messages:
        if m.role == "system":
            parts.append(m.text)
        elif m.role == "user":
            parts.append(f"### User:\n{m.text}")
        else:
            parts.append(f"### Assistant:\n{m.text}")
    parts.append("### Assistant:\n")
    return "\n\n".join(parts)


def encode_chat_request(
    config: LLMConfig, messages: Sequence[ChatMessage]
) -> tuple[bytes, list[str]]:
    """Encode the request payload for a remote backend.

    Returns the JSON payload bytes plus any warnings. ``top_k`` is not part
    of the chat-completions API and is omitted there with a warning; the
    Replicate-style format carries it.
    """
    warnings: list[str] = []
    s = config.sampling
    if config.backend is Backend.remote_chat_api:
        payload: dict = {
            "model": config.model.name,
            "messages": [
                {"role": m.role, "content": m.text} for m in messages
            ],
            "temperature": s.temperature,
            "top_p": s.top_p,
            "max_tokens": s.max_response_tokens,
        }
        if s.top_k:
            warnings.append("top_k unsupported by the chat-completions API; omitted")
    elif config.backend is Backend.remote_replicate_style:
        payload = {
            "input": {
                "prompt": flatten_messages(messages),
                "temperature": s.temperature,
                "top_p": s.top_p,
                "top_k": s.top_k,
                "max_new_tokens": s.max_response_tokens,
            }
        }
    else:
        raise ConfigInvalid("llm_config.backend", "not a remote backend")
    return json.dumps(payload).encode("utf-8"), warnings


# --- replay scripts ---------------------------------------------------------

@dataclass
class ReplayScript:
    """Ordered scripted responses: a JSON array of strings on disk."""

    responses: list[str]
    path: Optional[str] = None

    def __len__(self) -> int:
        return len(self.responses)


def load_replay_script(path: str | Path) -> ReplayScript:
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScriptParse(f"cannot read replay script {path}: {exc}") from exc
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ScriptParse(f"replay script {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
        raise ScriptParse(f"replay script {path} must be a JSON array of strings")
    return ReplayScript(responses=data, path=str(path))


def next_response(script: ReplayScript, step: int) -> str:
    if step < 0 or step >= len(script.responses):
        raise ScriptExhausted(
            f"replay script has {len(script.responses)} responses, step {step} requested"
        )
    return script.responses[step]


# --- generation -------------------------------------------------------------

def _auth_header(config: LLMConfig) -> str:
    secret = os.environ.get(config.credential_ref or "", "")
    return f"Bearer {secret}"


def _classify_http_error(response: httpx.Response) -> Exception:
    status = response.status_code
    if status in (401, 403):
        return AuthError(f"backend rejected credentials (HTTP {status})")
    if status == 429:
        retry_after = None
        if "retry-after" in response.headers:
            try:
                retry_after = float(response.headers["retry-after"])
            except ValueError:
                retry_after = None
        return RateLimited("backend rate limit hit (HTTP 429)", retry_after=retry_after)
    body = response.text[:500]
    if "context" in body.lower() and ("length" in body.lower() or "window" in body.lower()):
        return ContextOverflow(f"backend reported context overflow: {body}")
    return NetworkError(f"backend returned HTTP {status}: {body}")


def _post_json(
    url: str,
    payload: bytes,
    headers: dict[str, str],
    timeout: float,
    transport: httpx.BaseTransport | None,
) -> httpx.Response:
    attempts = 0
    while True:
        attempts += 1
        try:
            with httpx.Client(transport=transport, timeout=timeout) as client:
                return client.post(
                    url, content=payload,
                    headers={"Content-Type": "application/json", **headers},
                )
        except httpx.TransportError as exc:
            if attempts > 1:
                raise NetworkError(f"request to {url} failed: {exc}") from exc
            time.sleep(RETRY_DELAY_S)


def _generate_remote_chat(
    config: LLMConfig,
    messages: Sequence[ChatMessage],
    transport: httpx.BaseTransport | None,
) -> GenerationResult:
    payload, _ = encode_chat_request(config, messages)
    url = (config.endpoint_url or "").rstrip("/") + "/chat/completions"
    response = _post_json(url, payload, {"Authorization": _auth_header(config)},
                          DEFAULT_TIMEOUT_S, transport)
    if response.status_code != 200:
        raise _classify_http_error(response)
    try:
        body = response.json()
        choice = body["choices"][0]
        text = choice["message"]["content"]
    except (KeyError, IndexError, TypeError, json.JSONDecodeError) as exc:
        raise NetworkError(f"malformed chat-completion response: {exc}") from exc
    finish = FinishReason.stop
    if choice.get("finish_reason") == "length":
        finish = FinishReason.length
    usage = body.get("usage")
    return GenerationResult(text=text.rstrip(), finish_reason=finish, usage=usage)


def _generate_replicate(
    config: LLMConfig,
    messages: Sequence[ChatMessage],
    transport: httpx.BaseTransport | None,
) -> GenerationResult:
    payload, _ = encode_chat_request(config, messages)
    response = _post_json(config.endpoint_url or "", payload,
                          {"Authorization": _auth_header(config)},
                          DEFAULT_TIMEOUT_S, transport)
    if response.status_code not in (200, 201):
        raise _classify_http_error(response)
    try:
        body = response.json()
        output = body.get("output", "")
    except json.JSONDecodeError as exc:
        raise NetworkError(f"malformed prediction response: {exc}") from exc
    text = "".join(output) if isinstance(output, list) else str(output)
    return GenerationResult(text=text.rstrip(), finish_reason=FinishReason.stop)


def _generate_local(
    config: LLMConfig,
    messages: Sequence[ChatMessage],
    command_template: str | None,
) -> GenerationResult:
    template = command_template or DEFAULT_LOCAL_COMMAND
    s = config.sampling
    prompt = flatten_messages(messages)
    with tempfile.NamedTemporaryFile(
        "w", suffix=".prompt", delete=False, encoding="utf-8"
    ) as f:
        f.write(prompt)
        prompt_file = f.name
    command = template.format(
        model_path=config.local_model_path,
        prompt_file=prompt_file,
        temperature=s.temperature,
        top_p=s.top_p,
        top_k=s.top_k,
        n_predict=s.max_response_tokens,
        seed="" if s.seed is None else s.seed,
    )
    try:
        proc = subprocess.run(
            command, shell=True, capture_output=True, text=True,
            timeout=DEFAULT_TIMEOUT_S * 10,
        )
    except subprocess.TimeoutExpired as exc:
        raise ProcessError(f"local runtime timed out: {command}") from exc
    finally:
        try:
            os.unlink(prompt_file)
        except OSError:
            pass
    if proc.returncode != 0:
        raise ProcessError(
            f"local runtime exited with {proc.returncode}", stderr=proc.stderr
        )
    return GenerationResult(text=proc.stdout.rstrip(), finish_reason=FinishReason.stop)


def generate(
    config: LLMConfig,
    messages: Sequence[ChatMessage],
    *,
    step: int = 0,
    transport: httpx.BaseTransport | None = None,
    command_template: str | None = None,
) -> GenerationResult:
    """Run one inference and return the backend response verbatim.

    Only trailing whitespace is normalized. ``step`` indexes into the replay
    script and is ignored by the other backends; the replay backend depends
    on it alone, never on message content. ``transport`` lets tests inject
    an httpx mock transport.
    """
    if not messages or messages[-1].role != "user":
        raise ConfigInvalid("messages", "nonempty, last role must be user")
    if config.backend is Backend.replay:
        script = load_replay_script(config.script_path or "")
        return GenerationResult(
            text=next_response(script, step).rstrip(), finish_reason=FinishReason.stop
        )
    if config.backend is Backend.remote_chat_api:
        return _generate_remote_chat(config, messages, transport)
    if config.backend is Backend.remote_replicate_style:
        return _generate_replicate(config, messages, transport)
    return _generate_local(config, messages, command_template)


# --- config (de)serialization ------------------------------------------------

def sampling_to_dict(s: SamplingParams) -> dict:
    d = {
        "temperature": s.temperature,
        "top_p": s.top_p,
        "top_k": s.top_k,
        "max_response_tokens": s.max_response_tokens,
    }
    if s.seed is not None:
        d["seed"] = s.seed
    return d


def sampling_from_dict(d: dict, path: str = "sampling") -> SamplingParams:
    if not isinstance(d, dict):
        raise ConfigInvalid(path, "must be an object")
    defaults = SamplingParams()
    try:
        params = SamplingParams(
            temperature=float(d.get("temperature", defaults.temperature)),
            top_p=float(d.get("top_p", defaults.top_p)),
            top_k=int(d.get("top_k", defaults.top_k)),
            max_response_tokens=int(
                d.get("max_response_tokens", defaults.max_response_tokens)
            ),
            seed=d.get("seed"),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(path, f"bad value: {exc}") from exc
    params.validate(path)
    return params


def model_to_dict(m: ModelDescriptor) -> dict:
    d = {
        "name": m.name,
        "context_window": m.context_window,
        "family": m.family.value,
    }
    if m.param_count is not None:
        d["param_count"] = m.param_count
    return d


def model_from_dict(d: dict, path: str = "model") -> ModelDescriptor:
    if isinstance(d, str):
        return make_descriptor(d)
    if not isinstance(d, dict):
        raise ConfigInvalid(path, "must be an object or a model name")
    name = d.get("name", "")
    base = make_descriptor(name)
    try:
        family = ModelFamily(d["family"]) if "family" in d else base.family
    except ValueError:
        raise ConfigInvalid(f"{path}.family", f"unknown family: {d['family']}")
    model = ModelDescriptor(
        name=name,
        context_window=int(d.get("context_window", base.context_window)),
        param_count=d.get("param_count"),
        family=family,
    )
    model.validate(path)
    return model


def llm_config_to_dict(c: LLMConfig) -> dict:
    d: dict = {
        "backend": c.backend.value,
        "model": model_to_dict(c.model),
        "sampling": sampling_to_dict(c.sampling),
    }
    for key in ("endpoint_url", "credential_ref", "local_model_path", "script_path"):
        value = getattr(c, key)
        if value is not None:
            d[key] = value
    return d


def llm_config_from_dict(d: dict, path: str = "llm_config",
                         check_files: bool = True) -> LLMConfig:
    if not isinstance(d, dict):
        raise ConfigInvalid(path, "must be an object")
    try:
        backend = Backend(d.get("backend", ""))
    except ValueError:
        raise ConfigInvalid(f"{path}.backend", f"unknown backend: {d.get('backend')!r}")
    config = LLMConfig(
        backend=backend,
        model=model_from_dict(d.get("model", {}), f"{path}.model"),
        sampling=sampling_from_dict(d.get("sampling", {}), f"{path}.sampling"),
        endpoint_url=d.get("endpoint_url"),
        credential_ref=d.get("credential_ref"),
        local_model_path=d.get("local_model_path"),
        script_path=d.get("script_path"),
    )
    validate_config(config, path, check_files=check_files)
    return config
