"""Conversational model interpreter.

Chat-driven generation of PlantUML and Graphviz models: a pluggable LLM
gateway produces textual syntax, detectors and validators check it, and a
renderer pipeline turns it into artifacts persisted alongside the dialogue.
"""

from .blocks import BlockOrigin, CodeBlock, Language, classify, extract_blocks
from .conversation import Conversation, DialogueEntry, PromptOutcome, Role, Status
from .dot import DotGraph, canonicalize_dot, parse_dot
from .engine import ConversationEngine
from .gateway import (
    Backend,
    ChatMessage,
    GenerationResult,
    LLMConfig,
    ModelDescriptor,
    SamplingParams,
    encode_chat_request,
    estimate_tokens,
    generate,
    load_replay_script,
    make_descriptor,
    next_response,
    validate_config,
)
from .metrics import DotMetrics, ModelMetrics, UmlMetrics, metrics
from .modeldiff import ModelDiff, diff_models
from .plantuml import UmlModel, canonicalize_plantuml, parse_plantuml
from .render import (
    InterpreterConfig,
    OutputFormat,
    RenderArtifact,
    RendererBindings,
    RendererKind,
    probe_renderers,
    render,
    render_fallback,
)
from .report import Diagnostic, ValidationReport
from .store import DataStore

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "BlockOrigin",
    "ChatMessage",
    "CodeBlock",
    "Conversation",
    "ConversationEngine",
    "DataStore",
    "Diagnostic",
    "DialogueEntry",
    "DotGraph",
    "DotMetrics",
    "GenerationResult",
    "InterpreterConfig",
    "LLMConfig",
    "Language",
    "ModelDescriptor",
    "ModelDiff",
    "ModelMetrics",
    "OutputFormat",
    "PromptOutcome",
    "RenderArtifact",
    "RendererBindings",
    "RendererKind",
    "Role",
    "SamplingParams",
    "Status",
    "UmlMetrics",
    "UmlModel",
    "ValidationReport",
    "canonicalize_dot",
    "canonicalize_plantuml",
    "classify",
    "diff_models",
    "encode_chat_request",
    "estimate_tokens",
    "extract_blocks",
    "generate",
    "load_replay_script",
    "make_descriptor",
    "metrics",
    "next_response",
    "parse_dot",
    "parse_plantuml",
    "probe_renderers",
    "render",
    "render_fallback",
    "validate_config",
]
