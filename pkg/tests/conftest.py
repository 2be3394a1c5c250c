from __future__ import annotations

from pathlib import Path

import pytest

from cmi.blocks import Language
from cmi.engine import ConversationEngine
from cmi.gateway import Backend, LLMConfig, make_descriptor
from cmi.render import InterpreterConfig, OutputFormat, RendererKind
from cmi.store import DataStore

TESTS_DIR = Path(__file__).parent
CORPUS_DIR = TESTS_DIR / "corpus"
SCRIPTS_DIR = TESTS_DIR / "data" / "scripts"


def script_path(name: str) -> str:
    return str(SCRIPTS_DIR / name)


def replay_config(script: str) -> LLMConfig:
    return LLMConfig(
        backend=Backend.replay,
        model=make_descriptor("replay"),
        script_path=script_path(script),
    )


def fallback_interpreter(language: Language = Language.plantuml) -> InterpreterConfig:
    return InterpreterConfig(
        language=language,
        output_format=OutputFormat.txt,
        renderer=RendererKind.builtin_fallback,
    )


@pytest.fixture
def store(tmp_path) -> DataStore:
    return DataStore(tmp_path / "store")


@pytest.fixture
def engine(store) -> ConversationEngine:
    return ConversationEngine(store)


def corpus_files(language: str, validity: str) -> list[Path]:
    suffix = "*.puml" if language == "plantuml" else "*.dot"
    return sorted((CORPUS_DIR / language / validity).glob(suffix))
