"""Durable, append-only persistence for conversations and rendered artifacts.

Layout under one root directory:

    {root}/conversations/{id}.jsonl   one JSON record per line, append-only
    {root}/artifacts/{hh}/{hash}      content-addressed blobs (SHA-256 hex)
    {root}/index.json                 conversation summaries

Log lines carry a ``kind`` discriminator: ``created`` (the seq-0 record
holding the config snapshots), ``entry``, or ``config_change``. Existing
lines are never rewritten; a corrupt or truncated line makes the loader
return the prefix before it, with a warning.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
import threading
import uuid
from pathlib import Path
from typing import Optional

from .conversation import Conversation, DialogueEntry
from .errors import (
    CorruptLog,
    HashMismatch,
    IoError,
    NotFound,
    UnknownConversation,
    UnsupportedVersion,
)
from .gateway import llm_config_from_dict, llm_config_to_dict
from .render import interpreter_config_from_dict, interpreter_config_to_dict

ARCHIVE_VERSION = 1


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class DataStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "conversations").mkdir(parents=True, exist_ok=True)
        (self.root / "artifacts").mkdir(parents=True, exist_ok=True)
        self._index_lock = threading.Lock()
        self._log_locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    # --- paths ---------------------------------------------------------------

    def _log_path(self, conversation_id: str) -> Path:
        return self.root / "conversations" / f"{conversation_id}.jsonl"

    def _blob_path(self, content_hash: str) -> Path:
        return self.root / "artifacts" / content_hash[:2] / content_hash

    def _log_lock(self, conversation_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._log_locks.setdefault(conversation_id, threading.Lock())

    # --- low-level log access --------------------------------------------------

    def _append_record(self, conversation_id: str, record: dict) -> int:
        path = self._log_path(conversation_id)
        line = json.dumps(record, ensure_ascii=False) + "\n"
        with self._log_lock(conversation_id):
            is_creation = record.get("kind") == "created"
            if not path.exists() and not is_creation:
                raise UnknownConversation(conversation_id)
            index = self._count_lines(path) if path.exists() else 0
            try:
                with open(path, "a", encoding="utf-8") as f:
                    f.write(line)
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as exc:
                raise IoError(f"cannot append to {path}: {exc}") from exc
        self._update_index(conversation_id)
        return index

    @staticmethod
    def _count_lines(path: Path) -> int:
        with open(path, "rb") as f:
            return sum(1 for _ in f)

    def _read_records(self, conversation_id: str) -> tuple[list[dict], list[str]]:
        """All parseable records in order, plus warnings for ignored lines."""
        path = self._log_path(conversation_id)
        if not path.exists():
            raise UnknownConversation(conversation_id)
        records: list[dict] = []
        warnings: list[str] = []
        with open(path, "r", encoding="utf-8") as f:
            for line_number, line in enumerate(f, start=1):
                stripped = line.rstrip("\n")
                if not stripped:
                    continue
                try:
                    record = json.loads(stripped)
                    if not isinstance(record, dict) or "kind" not in record:
                        raise ValueError("not a log record")
                except (json.JSONDecodeError, ValueError):
                    warnings.append(
                        f"corrupt log line {line_number} in {path.name}; "
                        f"this and later lines ignored"
                    )
                    break
                records.append(record)
        return records, warnings

    # --- conversations ---------------------------------------------------------

    def create_conversation(self, conversation: Conversation) -> None:
        """Persist the creation record (sequence index 0)."""
        path = self._log_path(conversation.id)
        if path.exists():
            raise IoError(f"conversation log already exists: {conversation.id}")
        record = {
            "kind": "created",
            "seq": 0,
            "id": conversation.id,
            "created_at": conversation.created_at,
            "llm_config": llm_config_to_dict(conversation.llm_config),
            "interpreter_config": interpreter_config_to_dict(conversation.interpreter_config),
            "system_prompt": conversation.system_prompt,
        }
        self._append_record(conversation.id, record)

    def append_entry(self, conversation_id: str, entry: DialogueEntry) -> int:
        """Append one dialogue entry; returns its sequence index (= prior count).

        Every artifact reference must already resolve in the store.
        """
        for content_hash in entry.artifacts:
            if not self._blob_path(content_hash).exists():
                raise NotFound(f"artifact {content_hash} not in store")
        record = entry.to_dict()
        with self._log_lock(conversation_id):
            path = self._log_path(conversation_id)
            if not path.exists():
                raise UnknownConversation(conversation_id)
            index = self._count_lines(path)
            record["seq"] = index
            entry.seq = index
            line = json.dumps(record, ensure_ascii=False) + "\n"
            try:
                with open(path, "a", encoding="utf-8") as f:
                    f.write(line)
                    f.flush()
                    os.fsync(f.fileno())
            except OSError as exc:
                raise IoError(f"cannot append to {path}: {exc}") from exc
        self._update_index(conversation_id)
        return index

    def load_conversation(self, conversation_id: str) -> Conversation:
        records, warnings = self._read_records(conversation_id)
        if not records or records[0].get("kind") != "created":
            raise CorruptLog(
                f"conversation {conversation_id} has no creation record", line_number=1
            )
        head = records[0]
        llm_config = llm_config_from_dict(head["llm_config"], check_files=False)
        interpreter_config = interpreter_config_from_dict(head["interpreter_config"])
        entries: list[DialogueEntry] = []
        for record in records[1:]:
            entry = DialogueEntry.from_dict(record)
            entries.append(entry)
            if entry.config_change:
                new = entry.config_change.get("new") or {}
                if new.get("llm_config"):
                    llm_config = llm_config_from_dict(new["llm_config"], check_files=False)
                if new.get("interpreter_config"):
                    interpreter_config = interpreter_config_from_dict(
                        new["interpreter_config"]
                    )
        return Conversation(
            id=head["id"],
            created_at=head["created_at"],
            llm_config=llm_config,
            interpreter_config=interpreter_config,
            entries=entries,
            system_prompt=head.get("system_prompt"),
            load_warnings=warnings,
        )

    def conversation_exists(self, conversation_id: str) -> bool:
        return self._log_path(conversation_id).exists()

    def list_conversations(self) -> list[dict]:
        index_path = self.root / "index.json"
        if not index_path.exists():
            self._rebuild_index()
        try:
            index = json.loads(index_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            index = self._rebuild_index()
        summaries = list(index.get("conversations", {}).values())
        summaries.sort(key=lambda s: (s.get("created_at", ""), s.get("id", "")))
        return summaries

    def _summary(self, conversation_id: str) -> Optional[dict]:
        try:
            conversation = self.load_conversation(conversation_id)
        except (UnknownConversation, CorruptLog):
            return None
        return {
            "id": conversation.id,
            "created_at": conversation.created_at,
            "entry_count": len(conversation.entries),
            "llm_config": llm_config_to_dict(conversation.llm_config),
            "interpreter_config": interpreter_config_to_dict(conversation.interpreter_config),
        }

    def _update_index(self, conversation_id: str) -> None:
        with self._index_lock:
            index_path = self.root / "index.json"
            try:
                index = json.loads(index_path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError):
                index = {"conversations": {}}
            summary = self._summary(conversation_id)
            if summary:
                index["conversations"][conversation_id] = summary
            self._write_index(index)

    def _rebuild_index(self) -> dict:
        index = {"conversations": {}}
        for path in sorted((self.root / "conversations").glob("*.jsonl")):
            summary = self._summary(path.stem)
            if summary:
                index["conversations"][path.stem] = summary
        with self._index_lock:
            self._write_index(index)
        return index

    def _write_index(self, index: dict) -> None:
        index_path = self.root / "index.json"
        tmp_path = index_path.with_suffix(".json.tmp")
        tmp_path.write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
        os.replace(tmp_path, index_path)

    # --- artifacts ---------------------------------------------------------------

    def put_artifact(self, data: bytes) -> str:
        """Store bytes under their SHA-256; idempotent."""
        content_hash = sha256_hex(data)
        path = self._blob_path(content_hash)
        if path.exists():
            return content_hash
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp_path = path.with_name(path.name + f".tmp{os.getpid()}")
        try:
            tmp_path.write_bytes(data)
            os.replace(tmp_path, path)
        except OSError as exc:
            raise IoError(f"cannot write artifact {content_hash}: {exc}") from exc
        return content_hash

    def get_artifact(self, content_hash: str) -> bytes:
        path = self._blob_path(content_hash)
        if not path.exists():
            raise NotFound(f"artifact {content_hash} not in store")
        return path.read_bytes()

    def has_artifact(self, content_hash: str) -> bool:
        return self._blob_path(content_hash).exists()

    # --- export / import -----------------------------------------------------------

    def export_conversation(self, conversation_id: str) -> bytes:
        """Single deterministic JSON document with every referenced artifact."""
        records, _ = self._read_records(conversation_id)
        if not records or records[0].get("kind") != "created":
            raise CorruptLog(
                f"conversation {conversation_id} has no creation record", line_number=1
            )
        artifacts: dict[str, str] = {}
        for record in records[1:]:
            for content_hash in record.get("artifacts", []):
                if content_hash not in artifacts:
                    artifacts[content_hash] = base64.b64encode(
                        self.get_artifact(content_hash)
                    ).decode("ascii")
        document = {
            "version": ARCHIVE_VERSION,
            "conversation": records[0],
            "entries": records[1:],
            "artifacts": artifacts,
        }
        return json.dumps(document, sort_keys=True, separators=(",", ":")).encode("utf-8")

    def import_conversation(self, archive: bytes) -> str:
        """Verify and ingest an exported archive under a fresh id."""
        try:
            document = json.loads(archive.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptLog(f"archive is not valid JSON: {exc}", line_number=0) from exc
        if document.get("version") != ARCHIVE_VERSION:
            raise UnsupportedVersion(
                f"archive version {document.get('version')!r} not supported"
            )
        artifacts = document.get("artifacts", {})
        decoded: dict[str, bytes] = {}
        for content_hash, encoded in artifacts.items():
            data = base64.b64decode(encoded)
            if sha256_hex(data) != content_hash:
                raise HashMismatch(content_hash)
            decoded[content_hash] = data
        head = dict(document["conversation"])
        new_id = str(uuid.uuid4())
        head["id"] = new_id
        for content_hash, data in decoded.items():
            self.put_artifact(data)
        self._append_record(new_id, head)
        for record in document.get("entries", []):
            self._append_record(new_id, record)
        return new_id

    # --- integrity ------------------------------------------------------------------

    def check_integrity(self) -> list[str]:
        """Referential-integrity scan; returns human-readable problems."""
        problems: list[str] = []
        for path in sorted((self.root / "conversations").glob("*.jsonl")):
            records, warnings = self._read_records(path.stem)
            problems.extend(warnings)
            for record in records:
                for content_hash in record.get("artifacts", []):
                    if not self.has_artifact(content_hash):
                        problems.append(
                            f"{path.name}: artifact {content_hash} unresolved"
                        )
        artifact_root = self.root / "artifacts"
        for blob in sorted(artifact_root.glob("*/*")):
            if blob.name.endswith(".tmp") or not blob.is_file():
                continue
            if sha256_hex(blob.read_bytes()) != blob.name:
                problems.append(f"artifact blob {blob.name} digest mismatch")
        return problems
