"""Detection of modeling-language syntax inside free-form response text.

Three shapes are recognized: triple-backtick fenced blocks (with or without
a language tag), bare ``@startuml``/``@enduml`` regions, and bare DOT graphs
(``graph``/``digraph`` followed by a brace-balanced body). Overlapping
candidates are resolved by earliest start, then longest match.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional


class Language(str, Enum):
    plantuml = "plantuml"
    graphviz = "graphviz"
    unknown = "unknown"


class BlockOrigin(str, Enum):
    fenced_tagged = "fenced_tagged"
    fenced_untagged = "fenced_untagged"
    marker_delimited = "marker_delimited"


@dataclass
class CodeBlock:
    raw: str
    language: Language
    origin: BlockOrigin
    span: tuple[int, int]  # [start, end) character offsets in the source text
    fence_tag: Optional[str] = None
    warning: Optional[str] = None

    def summary(self) -> dict:
        d = {
            "language": self.language.value,
            "origin": self.origin.value,
            "start": self.span[0],
            "end": self.span[1],
        }
        if self.fence_tag:
            d["fence_tag"] = self.fence_tag
        return d


_FENCE_OPEN_RE = re.compile(r"^```([A-Za-z][\w+-]*)?[ \t]*$", re.MULTILINE)
_FENCE_CLOSE_RE = re.compile(r"^```[ \t]*$", re.MULTILINE)

PLANTUML_TAGS = {"plantuml", "puml"}
GRAPHVIZ_TAGS = {"dot", "graphviz"}

# Graph header: optional "strict", graph|digraph, optional id, opening brace.
_DOT_HEAD_RE = re.compile(
    r"(?:\bstrict[ \t\r\n]+)?\b(?:graph|digraph)\b"
    r"(?:[ \t\r\n]+(?:[A-Za-z_][A-Za-z0-9_]*|\"(?:[^\"\\]|\\.)*\"))?"
    r"[ \t\r\n]*\{",
    re.IGNORECASE,
)


def classify(block: CodeBlock) -> Language:
    """Assign a language by precedence: fence tag, then content markers.

    A fence tag naming a supported language wins over content; unrecognized
    tags fall through to the content heuristics. Total and deterministic.
    """
    if block.fence_tag:
        tag = block.fence_tag.lower()
        if tag in PLANTUML_TAGS:
            return Language.plantuml
        if tag in GRAPHVIZ_TAGS:
            return Language.graphviz
    if "@startuml" in block.raw:
        return Language.plantuml
    if _DOT_HEAD_RE.search(block.raw):
        return Language.graphviz
    return Language.unknown


def _balance_braces(text: str, open_index: int) -> int:
    """Return the index just past the brace matching ``text[open_index]``.

    Skips braces inside double-quoted strings. Returns -1 when unbalanced.
    """
    depth = 0
    i = open_index
    n = len(text)
    while i < n:
        c = text[i]
        if c == '"':
            i += 1
            while i < n and text[i] != '"':
                i += 2 if text[i] == "\\" else 1
            i += 1
            continue
        if c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return -1


def _find_fenced(text: str) -> list[CodeBlock]:
    blocks: list[CodeBlock] = []
    pos = 0
    while True:
        open_match = _FENCE_OPEN_RE.search(text, pos)
        if not open_match:
            break
        tag = open_match.group(1)
        body_start = open_match.end()
        if body_start < len(text) and text[body_start] == "\n":
            body_start += 1
        close_match = _FENCE_CLOSE_RE.search(text, body_start)
        if close_match:
            raw = text[body_start:close_match.start()]
            span = (open_match.start(), close_match.end())
            pos = close_match.end()
            warning = None
        else:
            raw = text[body_start:]
            span = (open_match.start(), len(text))
            pos = len(text)
            warning = "unterminated code fence"
        block = CodeBlock(
            raw=raw.rstrip("\n"),
            language=Language.unknown,
            origin=BlockOrigin.fenced_tagged if tag else BlockOrigin.fenced_untagged,
            span=span,
            fence_tag=tag,
            warning=warning,
        )
        block.language = classify(block)
        blocks.append(block)
    return blocks


def _find_marker_candidates(text: str, region_start: int, region_end: int) -> list[CodeBlock]:
    """Collect bare @startuml and DOT candidates inside one unfenced region."""
    region = text[region_start:region_end]
    candidates: list[CodeBlock] = []

    for m in re.finditer(r"@startuml\b", region):
        end_m = re.compile(r"@enduml").search(region, m.end())
        if end_m:
            start, end = m.start(), end_m.end()
            candidates.append(
                CodeBlock(
                    raw=region[start:end],
                    language=Language.plantuml,
                    origin=BlockOrigin.marker_delimited,
                    span=(region_start + start, region_start + end),
                )
            )
        else:
            candidates.append(
                CodeBlock(
                    raw=region[m.start():],
                    language=Language.unknown,
                    origin=BlockOrigin.marker_delimited,
                    span=(region_start + m.start(), region_end),
                    warning="@startuml without matching @enduml",
                )
            )

    for m in _DOT_HEAD_RE.finditer(region):
        open_index = m.end() - 1  # the regex ends at the opening brace
        end = _balance_braces(region, open_index)
        if end == -1:
            candidates.append(
                CodeBlock(
                    raw=region[m.start():],
                    language=Language.unknown,
                    origin=BlockOrigin.marker_delimited,
                    span=(region_start + m.start(), region_end),
                    warning="unbalanced braces in graph body",
                )
            )
        else:
            candidates.append(
                CodeBlock(
                    raw=region[m.start():end],
                    language=Language.graphviz,
                    origin=BlockOrigin.marker_delimited,
                    span=(region_start + m.start(), region_start + end),
                )
            )
    return candidates


def _resolve_overlaps(candidates: list[CodeBlock]) -> list[CodeBlock]:
    candidates.sort(key=lambda b: (b.span[0], -(b.span[1] - b.span[0])))
    chosen: list[CodeBlock] = []
    last_end = -1
    for c in candidates:
        if c.span[0] >= last_end:
            chosen.append(c)
            last_end = c.span[1]
    return chosen


def extract_blocks(response_text: str) -> list[CodeBlock]:
    """Find every candidate syntax block, in document order.

    Returns an empty list when nothing matches; unbalanced candidates are
    returned with ``language=unknown`` and a warning attached.
    """
    if not response_text:
        return []
    fenced = _find_fenced(response_text)
    covered = sorted(b.span for b in fenced)

    candidates: list[CodeBlock] = []
    cursor = 0
    for start, end in covered:
        if cursor < start:
            candidates.extend(_find_marker_candidates(response_text, cursor, start))
        cursor = max(cursor, end)
    if cursor < len(response_text):
        candidates.extend(
            _find_marker_candidates(response_text, cursor, len(response_text))
        )

    blocks = _resolve_overlaps(candidates + fenced)
    blocks.sort(key=lambda b: b.span[0])
    return blocks
