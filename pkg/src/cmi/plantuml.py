"""Line-oriented parser for a PlantUML class-diagram subset.

Supported between ``@startuml``/``@enduml``: class declarations (optionally
abstract, with attribute/operation members), enums, binary relationships
with quoted multiplicities and labels, and single-line notes. Unknown
directive lines (skinparam, hide, title, ...) are consumed as warnings.
Relationships naming undeclared classes create them implicitly with a
``dangling_ref`` warning.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .report import DiagCode, ValidationReport


class RelKind(str, Enum):
    inheritance = "inheritance"
    association_directed = "association_directed"
    association = "association"
    aggregation = "aggregation"
    composition = "composition"
    dependency = "dependency"


@dataclass
class Attribute:
    name: str
    visibility: str = ""  # one of + - # ~, or "" when unspecified
    type_expr: Optional[str] = None
    is_list: bool = False


@dataclass
class Operation:
    name: str
    visibility: str = ""
    params: list[str] = field(default_factory=list)
    return_type: Optional[str] = None


Member = Union[Attribute, Operation]


@dataclass
class ClassDecl:
    name: str
    abstract: bool = False
    members: list[Member] = field(default_factory=list)


@dataclass
class EnumDecl:
    name: str
    literals: list[str] = field(default_factory=list)


@dataclass
class Relationship:
    left: str
    right: str
    kind: RelKind
    left_mult: Optional[str] = None
    right_mult: Optional[str] = None
    label: Optional[str] = None


@dataclass
class Note:
    text: str
    anchor: Optional[str] = None


Element = Union[ClassDecl, EnumDecl, Relationship, Note]


@dataclass
class UmlModel:
    elements: list[Element] = field(default_factory=list)

    def classes(self) -> list[ClassDecl]:
        return [e for e in self.elements if isinstance(e, ClassDecl)]

    def enums(self) -> list[EnumDecl]:
        return [e for e in self.elements if isinstance(e, EnumDecl)]

    def relationships(self) -> list[Relationship]:
        return [e for e in self.elements if isinstance(e, Relationship)]


# Arrow spellings, longest first, normalized to a canonical orientation.
# ``swap`` means the source arrow points the other way round, so the ends
# (and multiplicities) are exchanged to reach the canonical form.
_ARROWS: list[tuple[str, RelKind, bool]] = [
    ("<|--", RelKind.inheritance, False),
    ("--|>", RelKind.inheritance, True),
    ("-->", RelKind.association_directed, False),
    ("<--", RelKind.association_directed, True),
    ("o--", RelKind.aggregation, False),
    ("--o", RelKind.aggregation, True),
    ("*--", RelKind.composition, False),
    ("--*", RelKind.composition, True),
    ("..>", RelKind.dependency, False),
    ("<..", RelKind.dependency, True),
    ("--", RelKind.association, False),
]

_CANONICAL_ARROW = {
    RelKind.inheritance: "<|--",
    RelKind.association_directed: "-->",
    RelKind.association: "--",
    RelKind.aggregation: "o--",
    RelKind.composition: "*--",
    RelKind.dependency: "..>",
}

_NAME = r'(?:"[^"]*"|[A-Za-z_][A-Za-z0-9_]*)'
_ARROW_ALTS = "|".join(re.escape(a) for a, _, _ in _ARROWS)

_ARROW_SEARCH_RE = re.compile(_ARROW_ALTS)
_REL_RE = re.compile(
    rf'^(?P<left>{_NAME})\s*(?P<lm>"[^"]*")?\s*'
    rf'(?P<arrow>{_ARROW_ALTS})\s*'
    rf'(?P<rm>"[^"]*")?\s*(?P<right>{_NAME})'
    rf'\s*(?::\s*(?P<label>.*\S))?\s*$'
)
_CLASS_RE = re.compile(
    rf'^(?P<abstract>abstract\s+)?class\s+(?P<name>{_NAME})\s*(?P<brace>\{{)?\s*$'
)
_ENUM_RE = re.compile(rf'^enum\s+(?P<name>{_NAME})\s*(?P<brace>\{{)?\s*$')
_MEMBER_RE = re.compile(
    r'^(?P<vis>[+\-#~])?\s*(?P<name>[A-Za-z_][A-Za-z0-9_]*)\s*'
    r'(?:\((?P<params>[^()]*)\))?'
    r'\s*(?::\s*(?P<type>[^:\[\]]+?)\s*(?P<list>\[\])?)?\s*$'
)
_NOTE_RE = re.compile(
    rf'^note(?:\s+(?:left|right|top|bottom))?(?:\s+of\s+(?P<anchor>{_NAME}))?'
    r'\s*:\s*(?P<text>.*\S)\s*$'
)
_LITERAL_RE = re.compile(r'^[A-Za-z_][A-Za-z0-9_]*$')


def _unquote(name: str) -> str:
    if name.startswith('"') and name.endswith('"'):
        return name[1:-1]
    return name


def _parse_member(line: str) -> Optional[Member]:
    m = _MEMBER_RE.match(line.strip())
    if not m or not m.group("name"):
        return None
    vis = m.group("vis") or ""
    name = m.group("name")
    if m.group("params") is not None:
        return_type = None
        if m.group("type"):
            return_type = m.group("type").strip() + (m.group("list") or "")
        params = [p.strip() for p in m.group("params").split(",") if p.strip()]
        return Operation(name=name, visibility=vis, params=params, return_type=return_type)
    return Attribute(
        name=name,
        visibility=vis,
        type_expr=m.group("type").strip() if m.group("type") else None,
        is_list=bool(m.group("list")),
    )


class _UmlParser:
    def __init__(self, lines: list[str], report: ValidationReport):
        self.lines = lines
        self.report = report
        self.index = 0
        self.model = UmlModel()
        self.declared: dict[str, int] = {}  # name -> declaration line

    def current_line_no(self) -> int:
        return self.index + 1

    def parse_document(self) -> None:
        n = len(self.lines)
        while self.index < n and self.lines[self.index].strip() != "@startuml":
            if self.lines[self.index].strip():
                self.report.error(self.current_line_no(), 1,
                                  "expected @startuml", DiagCode.parse)
                return
            self.index += 1
        if self.index >= n:
            self.report.error(max(n, 1), 1, "missing @startuml", DiagCode.parse)
            return
        self.index += 1
        closed = False
        while self.index < n:
            line = self.lines[self.index].strip()
            if line == "@enduml":
                closed = True
                self.index += 1
                break
            self.parse_line(line)
            self.index += 1
        if not closed:
            self.report.error(max(n, 1), 1,
                              "missing @enduml at end of input", DiagCode.parse)
            return
        while self.index < len(self.lines):
            if self.lines[self.index].strip():
                self.report.warn(self.current_line_no(), 1,
                                 "content after @enduml ignored", DiagCode.unsupported)
                break
            self.index += 1

    def parse_line(self, line: str) -> None:
        line_no = self.current_line_no()
        if not line or line.startswith("'"):
            return
        if line.startswith("@startuml"):
            self.report.error(line_no, 1, "unexpected @startuml", DiagCode.parse)
            return
        if re.match(r"^(abstract\b|class\b)", line):
            self.parse_class(line)
            return
        if line.startswith("enum"):
            self.parse_enum(line)
            return
        if line.startswith("note"):
            m = _NOTE_RE.match(line)
            if m:
                anchor = _unquote(m.group("anchor")) if m.group("anchor") else None
                self.model.elements.append(Note(text=m.group("text"), anchor=anchor))
            else:
                self.report.warn(line_no, 1, "unsupported note form ignored",
                                 DiagCode.unsupported)
            return
        if _ARROW_SEARCH_RE.search(line):
            self.parse_relationship(line)
            return
        self.report.warn(line_no, 1,
                         f"unknown directive ignored: {line.split()[0]}",
                         DiagCode.unsupported)

    def declare(self, name: str, line_no: int) -> bool:
        if name in self.declared:
            self.report.error(line_no, 1,
                              f"duplicate declaration of {name!r} "
                              f"(first declared on line {self.declared[name]})",
                              DiagCode.duplicate)
            return False
        self.declared[name] = line_no
        return True

    def parse_class(self, line: str) -> None:
        line_no = self.current_line_no()
        m = _CLASS_RE.match(line)
        if not m:
            self.report.error(line_no, 1, "malformed class declaration", DiagCode.parse)
            return
        name = _unquote(m.group("name"))
        decl = ClassDecl(name=name, abstract=bool(m.group("abstract")))
        ok = self.declare(name, line_no)
        if m.group("brace"):
            self.parse_members(decl)
        if ok:
            self.model.elements.append(decl)

    def parse_members(self, decl: ClassDecl) -> None:
        n = len(self.lines)
        while self.index + 1 < n:
            self.index += 1
            line = self.lines[self.index].strip()
            line_no = self.current_line_no()
            if line == "}":
                return
            if not line or line.startswith("'"):
                continue
            if line == "@enduml":
                self.index -= 1
                break
            member = _parse_member(line)
            if member is None:
                self.report.error(line_no, 1, f"malformed member: {line}", DiagCode.parse)
                continue
            decl.members.append(member)
        self.report.error(self.current_line_no(), 1,
                          f"missing '}}' for class {decl.name!r}", DiagCode.parse)

    def parse_enum(self, line: str) -> None:
        line_no = self.current_line_no()
        m = _ENUM_RE.match(line)
        if not m:
            self.report.error(line_no, 1, "malformed enum declaration", DiagCode.parse)
            return
        name = _unquote(m.group("name"))
        decl = EnumDecl(name=name)
        ok = self.declare(name, line_no)
        if m.group("brace"):
            n = len(self.lines)
            closed = False
            while self.index + 1 < n:
                self.index += 1
                literal_line = self.lines[self.index].strip()
                if literal_line == "}":
                    closed = True
                    break
                if not literal_line:
                    continue
                if literal_line == "@enduml":
                    self.index -= 1
                    break
                literal = literal_line.rstrip(",").strip()
                if _LITERAL_RE.match(literal):
                    decl.literals.append(literal)
                else:
                    self.report.error(self.current_line_no(), 1,
                                      f"malformed enum literal: {literal_line}",
                                      DiagCode.parse)
            if not closed:
                self.report.error(self.current_line_no(), 1,
                                  f"missing '}}' for enum {name!r}", DiagCode.parse)
        if ok:
            self.model.elements.append(decl)

    def parse_relationship(self, line: str) -> None:
        line_no = self.current_line_no()
        m = _REL_RE.match(line)
        if not m:
            self.report.error(line_no, 1,
                              f"malformed relationship: {line}", DiagCode.parse)
            return
        arrow = m.group("arrow")
        kind, swap = next((k, s) for a, k, s in _ARROWS if a == arrow)
        left, right = _unquote(m.group("left")), _unquote(m.group("right"))
        left_mult = m.group("lm")[1:-1] if m.group("lm") else None
        right_mult = m.group("rm")[1:-1] if m.group("rm") else None
        if swap:
            left, right = right, left
            left_mult, right_mult = right_mult, left_mult
        self.model.elements.append(
            Relationship(left=left, right=right, kind=kind,
                         left_mult=left_mult, right_mult=right_mult,
                         label=m.group("label"))
        )

    def resolve_references(self) -> None:
        """Materialize classes for undeclared relationship ends, in order."""
        for element in list(self.model.elements):
            if not isinstance(element, Relationship):
                continue
            for name in (element.left, element.right):
                if name not in self.declared:
                    self.declared[name] = 0
                    self.model.elements.append(ClassDecl(name=name))
                    self.report.warn(1, 1,
                                     f"relationship references undeclared class "
                                     f"{name!r}; created implicitly",
                                     DiagCode.dangling_ref)


def parse_plantuml(text: str) -> tuple[Optional[UmlModel], ValidationReport]:
    """Parse PlantUML class-diagram source; returns (model, report).

    Diagnostics live in the report and are never raised; the model is None
    when any error-severity diagnostic was recorded.
    """
    report = ValidationReport()
    parser = _UmlParser(text.splitlines(), report)
    parser.parse_document()
    parser.resolve_references()
    if not report.ok:
        return None, report
    return parser.model, report


# --- canonical printing ------------------------------------------------------

def _render_name(name: str) -> str:
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name):
        return name
    return f'"{name}"'


def _render_member(member: Member) -> str:
    if isinstance(member, Operation):
        text = f"{member.visibility}{member.name}({', '.join(member.params)})"
        if member.return_type:
            text += f": {member.return_type}"
        return text
    text = f"{member.visibility}{member.name}"
    if member.type_expr:
        text += f": {member.type_expr}"
        if member.is_list:
            text += "[]"
    return text


def canonicalize_plantuml(model: UmlModel) -> str:
    lines = ["@startuml"]
    for element in model.elements:
        if isinstance(element, ClassDecl):
            head = ("abstract " if element.abstract else "") + "class " + _render_name(element.name)
            if element.members:
                lines.append(head + " {")
                lines.extend(f"  {_render_member(m)}" for m in element.members)
                lines.append("}")
            else:
                lines.append(head)
        elif isinstance(element, EnumDecl):
            head = "enum " + _render_name(element.name)
            if element.literals:
                lines.append(head + " {")
                lines.extend(f"  {lit}" for lit in element.literals)
                lines.append("}")
            else:
                lines.append(head)
        elif isinstance(element, Relationship):
            parts = [_render_name(element.left)]
            if element.left_mult is not None:
                parts.append(f'"{element.left_mult}"')
            parts.append(_CANONICAL_ARROW[element.kind])
            if element.right_mult is not None:
                parts.append(f'"{element.right_mult}"')
            parts.append(_render_name(element.right))
            text = " ".join(parts)
            if element.label is not None:
                text += f" : {element.label}"
            lines.append(text)
        else:
            if element.anchor is not None:
                lines.append(f"note of {_render_name(element.anchor)} : {element.text}")
            else:
                lines.append(f"note : {element.text}")
    lines.append("@enduml")
    return "\n".join(lines) + "\n"
