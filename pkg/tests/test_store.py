import json
import random
import threading

import pytest

from cmi.conversation import Conversation, DialogueEntry, Role, utc_now
from cmi.errors import HashMismatch, NotFound, UnknownConversation, UnsupportedVersion
from cmi.store import DataStore

from conftest import fallback_interpreter, replay_config

EMPTY_SHA256 = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"


def new_conversation(identifier: str = "c-1") -> Conversation:
    return Conversation(
        id=identifier,
        created_at=utc_now(),
        llm_config=replay_config("hello.json"),
        interpreter_config=fallback_interpreter(),
    )


def user_entry(text: str = "hello") -> DialogueEntry:
    return DialogueEntry(seq=-1, role=Role.user, text=text)


class TestAppend:
    def test_first_entry_gets_index_one(self, store):
        store.create_conversation(new_conversation())
        assert store.append_entry("c-1", user_entry()) == 1

    def test_indices_are_prior_counts(self, store):
        store.create_conversation(new_conversation())
        indices = [store.append_entry("c-1", user_entry(f"m{i}")) for i in range(5)]
        assert indices == [1, 2, 3, 4, 5]

    def test_unknown_conversation(self, store):
        with pytest.raises(UnknownConversation):
            store.append_entry("ghost", user_entry())

    def test_append_after_reload_continues_sequence(self, store):
        store.create_conversation(new_conversation())
        for i in range(3):
            store.append_entry("c-1", user_entry(f"m{i}"))
        reopened = DataStore(store.root)
        assert reopened.append_entry("c-1", user_entry("after restart")) == 4
        entries = reopened.load_conversation("c-1").entries
        assert [e.seq for e in entries] == [1, 2, 3, 4]

    def test_dangling_artifact_reference_rejected(self, store):
        store.create_conversation(new_conversation())
        bad = DialogueEntry(seq=-1, role=Role.interpreter, text="",
                            artifacts=["ff" * 32])
        with pytest.raises(NotFound):
            store.append_entry("c-1", bad)

    def test_concurrent_appends_to_distinct_conversations(self, store):
        store.create_conversation(new_conversation("left"))
        store.create_conversation(new_conversation("right"))
        errors = []

        def pump(conversation_id: str) -> None:
            try:
                for i in range(50):
                    store.append_entry(conversation_id, user_entry(f"{conversation_id}-{i}"))
            except Exception as exc:  # noqa: BLE001 - collected for assertion
                errors.append(exc)

        threads = [threading.Thread(target=pump, args=(c,)) for c in ("left", "right")]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        for conversation_id in ("left", "right"):
            entries = store.load_conversation(conversation_id).entries
            assert [e.seq for e in entries] == list(range(1, 51))

    def test_append_only_existing_bytes_unchanged(self, store):
        store.create_conversation(new_conversation())
        store.append_entry("c-1", user_entry("one"))
        log_path = store.root / "conversations" / "c-1.jsonl"
        before = log_path.read_bytes()
        store.append_entry("c-1", user_entry("two"))
        after = log_path.read_bytes()
        assert after.startswith(before)


class TestArtifacts:
    def test_put_is_idempotent(self, store):
        first = store.put_artifact(b"payload")
        second = store.put_artifact(b"payload")
        assert first == second
        blobs = list((store.root / "artifacts").glob("*/*"))
        assert len(blobs) == 1

    def test_get_round_trip(self, store):
        data = b"\x00\x01binary\xff"
        assert store.get_artifact(store.put_artifact(data)) == data

    def test_empty_input_hash_constant(self, store):
        assert store.put_artifact(b"") == EMPTY_SHA256

    def test_get_unknown(self, store):
        with pytest.raises(NotFound):
            store.get_artifact("ab" * 32)


class TestLoad:
    def test_load_preserves_order(self, store):
        store.create_conversation(new_conversation())
        for i in range(5):
            store.append_entry("c-1", user_entry(f"m{i}"))
        loaded = store.load_conversation("c-1")
        assert [e.text for e in loaded.entries] == [f"m{i}" for i in range(5)]

    def test_truncated_final_line_returns_prefix(self, store):
        store.create_conversation(new_conversation())
        for i in range(4):
            store.append_entry("c-1", user_entry(f"m{i}"))
        log_path = store.root / "conversations" / "c-1.jsonl"
        with open(log_path, "a", encoding="utf-8") as f:
            f.write('{"kind": "entry", "se')  # simulated crash mid-write
        loaded = store.load_conversation("c-1")
        assert len(loaded.entries) == 4
        assert loaded.load_warnings and "corrupt" in loaded.load_warnings[0]

    def test_corrupt_middle_line_ignores_rest(self, store):
        store.create_conversation(new_conversation())
        for i in range(2):
            store.append_entry("c-1", user_entry(f"m{i}"))
        log_path = store.root / "conversations" / "c-1.jsonl"
        lines = log_path.read_text(encoding="utf-8").splitlines()
        lines[2] = "{broken json"
        lines.append(json.dumps({"kind": "entry", "seq": 3, "role": "user",
                                 "text": "after", "artifacts": [],
                                 "detected_blocks": [], "timestamp": ""}))
        log_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        loaded = store.load_conversation("c-1")
        assert [e.text for e in loaded.entries] == ["m0"]
        assert loaded.load_warnings

    def test_unknown_conversation(self, store):
        with pytest.raises(UnknownConversation):
            store.load_conversation("ghost")

    def test_list_empty_store(self, store):
        assert store.list_conversations() == []

    def test_list_summaries(self, store):
        store.create_conversation(new_conversation("a"))
        store.create_conversation(new_conversation("b"))
        store.append_entry("a", user_entry())
        summaries = {s["id"]: s for s in store.list_conversations()}
        assert summaries["a"]["entry_count"] == 1
        assert summaries["b"]["entry_count"] == 0
        assert summaries["a"]["llm_config"]["backend"] == "replay"


class TestExportImport:
    def _build(self, store) -> str:
        store.create_conversation(new_conversation("orig"))
        content_hash = store.put_artifact(b"artifact bytes")
        store.append_entry("orig", user_entry("draw"))
        store.append_entry("orig", DialogueEntry(
            seq=-1, role=Role.interpreter, text="", artifacts=[content_hash]))
        return "orig"

    def test_round_trip_byte_stable_modulo_id(self, store):
        identifier = self._build(store)
        first = store.export_conversation(identifier)
        imported = store.import_conversation(first)
        second = store.export_conversation(imported)
        doc_a, doc_b = json.loads(first), json.loads(second)
        assert doc_a["conversation"].pop("id") == identifier
        assert doc_b["conversation"].pop("id") == imported
        assert json.dumps(doc_a, sort_keys=True) == json.dumps(doc_b, sort_keys=True)

    def test_import_restores_entries_and_artifacts(self, store):
        identifier = self._build(store)
        archive = store.export_conversation(identifier)
        fresh = DataStore(store.root.parent / "fresh")
        new_id = fresh.import_conversation(archive)
        loaded = fresh.load_conversation(new_id)
        assert len(loaded.entries) == 2
        assert fresh.get_artifact(loaded.entries[1].artifacts[0]) == b"artifact bytes"

    def test_corrupted_blob_rejected(self, store):
        identifier = self._build(store)
        document = json.loads(store.export_conversation(identifier))
        bad_hash = next(iter(document["artifacts"]))
        document["artifacts"][bad_hash] = "Y29ycnVwdGVk"  # "corrupted"
        with pytest.raises(HashMismatch) as exc:
            store.import_conversation(json.dumps(document).encode())
        assert exc.value.content_hash == bad_hash

    def test_unsupported_version(self, store):
        identifier = self._build(store)
        document = json.loads(store.export_conversation(identifier))
        document["version"] = 99
        with pytest.raises(UnsupportedVersion):
            store.import_conversation(json.dumps(document).encode())


class TestIntegrity:
    def test_clean_store(self, store):
        store.create_conversation(new_conversation())
        content_hash = store.put_artifact(b"x")
        store.append_entry("c-1", DialogueEntry(
            seq=-1, role=Role.interpreter, text="", artifacts=[content_hash]))
        assert store.check_integrity() == []

    def test_missing_blob_detected(self, store):
        store.create_conversation(new_conversation())
        content_hash = store.put_artifact(b"x")
        store.append_entry("c-1", DialogueEntry(
            seq=-1, role=Role.interpreter, text="", artifacts=[content_hash]))
        (store.root / "artifacts" / content_hash[:2] / content_hash).unlink()
        problems = store.check_integrity()
        assert any(content_hash in p for p in problems)

    def test_tampered_blob_detected(self, store):
        content_hash = store.put_artifact(b"original")
        blob = store.root / "artifacts" / content_hash[:2] / content_hash
        blob.write_bytes(b"tampered")
        assert any("digest mismatch" in p for p in store.check_integrity())


class TestReloadEquivalence:
    def test_randomized_operations(self, store):
        rng = random.Random(1234)
        shadow: dict[str, list[str]] = {}
        hashes: list[str] = []
        for step in range(200):
            action = rng.random()
            if action < 0.15 or not shadow:
                identifier = f"conv-{len(shadow)}"
                store.create_conversation(new_conversation(identifier))
                shadow[identifier] = []
            elif action < 0.35:
                hashes.append(store.put_artifact(rng.randbytes(rng.randint(0, 64))))
            else:
                identifier = rng.choice(list(shadow))
                if hashes and rng.random() < 0.3:
                    entry = DialogueEntry(seq=-1, role=Role.interpreter, text="",
                                          artifacts=[rng.choice(hashes)])
                else:
                    entry = user_entry(f"text-{step}")
                store.append_entry(identifier, entry)
                shadow[identifier].append(entry.text)
        reopened = DataStore(store.root)
        for identifier, texts in shadow.items():
            loaded = reopened.load_conversation(identifier)
            assert [e.text for e in loaded.entries] == texts
            assert [e.seq for e in loaded.entries] == list(range(1, len(texts) + 1))
        assert reopened.check_integrity() == []
