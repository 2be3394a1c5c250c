"""Domain types for one modeling dialogue."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional

from .gateway import LLMConfig
from .render import InterpreterConfig


class Role(str, Enum):
    user = "user"
    llm = "llm"
    interpreter = "interpreter"
    system = "system"
    config_change = "config_change"


class Status(str, Enum):
    idle = "idle"
    generating = "generating"
    interpreting = "interpreting"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class DialogueEntry:
    seq: int
    role: Role
    text: str
    artifacts: list[str] = field(default_factory=list)  # content hashes
    detected_blocks: list[dict] = field(default_factory=list)
    timestamp: str = field(default_factory=utc_now)
    # Present only on config_change entries: {"old": {...}, "new": {...}}
    config_change: Optional[dict] = None

    def to_dict(self) -> dict:
        d = {
            "kind": "config_change" if self.role is Role.config_change else "entry",
            "seq": self.seq,
            "role": self.role.value,
            "text": self.text,
            "artifacts": list(self.artifacts),
            "detected_blocks": list(self.detected_blocks),
            "timestamp": self.timestamp,
        }
        if self.config_change is not None:
            d["old_config"] = self.config_change["old"]
            d["new_config"] = self.config_change["new"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DialogueEntry":
        config_change = None
        if "old_config" in d or "new_config" in d:
            config_change = {"old": d.get("old_config"), "new": d.get("new_config")}
        return cls(
            seq=int(d["seq"]),
            role=Role(d["role"]),
            text=d["text"],
            artifacts=list(d.get("artifacts", [])),
            detected_blocks=list(d.get("detected_blocks", [])),
            timestamp=d.get("timestamp", ""),
            config_change=config_change,
        )


@dataclass
class Conversation:
    id: str
    created_at: str
    llm_config: LLMConfig  # effective config, after any config_change entries
    interpreter_config: InterpreterConfig
    entries: list[DialogueEntry] = field(default_factory=list)
    status: Status = Status.idle
    system_prompt: Optional[str] = None
    load_warnings: list[str] = field(default_factory=list, compare=False)


@dataclass
class PromptOutcome:
    llm_entry: DialogueEntry
    interpreter_entries: list[DialogueEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
