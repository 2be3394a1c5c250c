"""Recursive-descent parser for a DOT subset, plus a canonical printer.

Supported grammar:

    graph     := ["strict"] ("graph"|"digraph") [id] "{" {stmt [";"]} "}"
    stmt      := id "=" id | attr_stmt | edge_stmt | node_stmt
    attr_stmt := ("graph"|"node"|"edge") attr_list
    node_stmt := id [attr_list]
    edge_stmt := id edgeop id {edgeop id} [attr_list]
    edgeop    := "->" | "--"
    attr_list := "[" [id "=" id {(","|";") id "=" id}] "]"

Comments: ``//``, ``/* */`` and ``#`` to end of line. Identifiers are bare
names, numerals, or double-quoted strings (quoting is recorded so the
canonical printer can reproduce it). Ports, HTML strings, and subgraphs
are rejected with ``unsupported`` diagnostics.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Union

from .report import DiagCode, MAX_ERRORS, ValidationReport

_BARE_ID_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_NUMERAL_RE = re.compile(r"-?(\.[0-9]+|[0-9]+(\.[0-9]*)?)\Z")

KEYWORDS = {"strict", "graph", "digraph", "node", "edge", "subgraph"}


@dataclass(frozen=True)
class Ident:
    """An identifier with its surface quoting preserved."""

    value: str
    quoted: bool = False


@dataclass
class NodeStmt:
    node_id: Ident
    attrs: dict[str, str] = field(default_factory=dict)


@dataclass
class EdgeStmt:
    endpoints: list[Ident]  # length >= 2
    attrs: dict[str, str] = field(default_factory=dict)


@dataclass
class AttrStmt:
    target: str  # "graph" | "node" | "edge"
    attrs: dict[str, str] = field(default_factory=dict)


@dataclass
class Assignment:
    key: str
    value: str


Statement = Union[NodeStmt, EdgeStmt, AttrStmt, Assignment]


@dataclass
class DotGraph:
    strict: bool = False
    directed: bool = True
    graph_id: Optional[Ident] = None
    statements: list[Statement] = field(default_factory=list)

    def node_ids(self) -> list[str]:
        """All node names, explicit and implicit, in first-mention order."""
        seen: dict[str, None] = {}
        for stmt in self.statements:
            if isinstance(stmt, NodeStmt):
                seen.setdefault(stmt.node_id.value)
            elif isinstance(stmt, EdgeStmt):
                for endpoint in stmt.endpoints:
                    seen.setdefault(endpoint.value)
        return list(seen)

    def edges(self) -> list[tuple[str, str, dict[str, str]]]:
        """Edges expanded from chains; chain attrs apply to every pair."""
        out = []
        for stmt in self.statements:
            if isinstance(stmt, EdgeStmt):
                for a, b in zip(stmt.endpoints, stmt.endpoints[1:]):
                    out.append((a.value, b.value, stmt.attrs))
        return out


# --- lexer -------------------------------------------------------------------

_PUNCT = {"{": "lbrace", "}": "rbrace", "[": "lbracket", "]": "rbracket",
          "=": "eq", ";": "semi", ",": "comma"}


@dataclass(frozen=True)
class _Token:
    kind: str  # punct kinds, "edgeop", "id", "number", "string", "keyword",
               # "colon", "html", "eof"
    text: str
    line: int
    col: int


def _lex(text: str, report: ValidationReport) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def advance(k: int = 1) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if i < n and text[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = text[i]
        if c in " \t\r\n":
            advance()
            continue
        if text.startswith("//", i) or c == "#":
            while i < n and text[i] != "\n":
                advance()
            continue
        if text.startswith("/*", i):
            start_line, start_col = line, col
            advance(2)
            while i < n and not text.startswith("*/", i):
                advance()
            if i >= n:
                report.error(start_line, start_col, "unterminated comment", DiagCode.lex)
            else:
                advance(2)
            continue
        if text.startswith("->", i) or text.startswith("--", i):
            tokens.append(_Token("edgeop", text[i:i + 2], line, col))
            advance(2)
            continue
        if c in _PUNCT:
            tokens.append(_Token(_PUNCT[c], c, line, col))
            advance()
            continue
        if c == '"':
            start_line, start_col = line, col
            advance()
            value_chars: list[str] = []
            while i < n and text[i] != '"':
                if text[i] == "\\" and i + 1 < n and text[i + 1] == '"':
                    value_chars.append('"')
                    advance(2)
                else:
                    value_chars.append(text[i])
                    advance()
            if i >= n:
                report.error(start_line, start_col, "unterminated string", DiagCode.lex)
            else:
                advance()
            tokens.append(_Token("string", "".join(value_chars), start_line, start_col))
            continue
        if c == ":":
            tokens.append(_Token("colon", c, line, col))
            advance()
            continue
        if c == "<":
            start_line, start_col = line, col
            depth = 0
            while i < n:
                if text[i] == "<":
                    depth += 1
                elif text[i] == ">":
                    depth -= 1
                    if depth == 0:
                        advance()
                        break
                advance()
            tokens.append(_Token("html", "<...>", start_line, start_col))
            continue
        m = re.match(r"-?(\.[0-9]+|[0-9]+(\.[0-9]*)?)", text[i:])
        if m and (c.isdigit() or c in ".-"):
            tokens.append(_Token("number", m.group(0), line, col))
            advance(len(m.group(0)))
            continue
        m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", text[i:])
        if m:
            word = m.group(0)
            kind = "keyword" if word.lower() in KEYWORDS else "id"
            tokens.append(_Token(kind, word, line, col))
            advance(len(word))
            continue
        report.error(line, col, f"unexpected character {c!r}", DiagCode.lex)
        advance()
    tokens.append(_Token("eof", "", line, col))
    return tokens


# --- parser ------------------------------------------------------------------

_ID_KINDS = ("id", "number", "string")


class _ParseAbort(Exception):
    """Internal: statement-level bail-out; never escapes parse_dot."""


class _DotParser:
    def __init__(self, tokens: list[_Token], report: ValidationReport):
        self.tokens = tokens
        self.pos = 0
        self.report = report

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        token = self.tokens[self.pos]
        if token.kind != "eof":
            self.pos += 1
        return token

    def error(self, token: _Token, message: str, code: DiagCode = DiagCode.parse) -> None:
        self.report.error(token.line, token.col, message, code)

    def expect(self, kind: str, what: str) -> _Token:
        token = self.peek()
        if token.kind != kind:
            self.error(token, f"expected {what}, found {token.text or 'end of input'!r}")
            raise _ParseAbort()
        return self.take()

    def ident(self, what: str = "identifier") -> Ident:
        token = self.peek()
        if token.kind == "string":
            self.take()
            return Ident(token.text, quoted=True)
        if token.kind in ("id", "number"):
            self.take()
            return Ident(token.text, quoted=False)
        if token.kind == "keyword":
            self.error(token, f"keyword {token.text!r} cannot be used as {what}")
            raise _ParseAbort()
        if token.kind == "html":
            self.error(token, "HTML strings are not supported", DiagCode.unsupported)
            raise _ParseAbort()
        self.error(token, f"expected {what}, found {token.text or 'end of input'!r}")
        raise _ParseAbort()

    def skip_statement(self) -> None:
        """Recover to the next statement boundary."""
        while True:
            token = self.peek()
            if token.kind in ("eof", "rbrace"):
                return
            if token.kind == "semi":
                self.take()
                return
            self.take()

    def skip_braced(self) -> None:
        depth = 0
        while True:
            token = self.take()
            if token.kind == "eof":
                return
            if token.kind == "lbrace":
                depth += 1
            elif token.kind == "rbrace":
                depth -= 1
                if depth <= 0:
                    return

    def parse_graph(self) -> DotGraph:
        graph = DotGraph()
        token = self.peek()
        if token.kind == "keyword" and token.text.lower() == "strict":
            graph.strict = True
            self.take()
            token = self.peek()
        if token.kind == "keyword" and token.text.lower() in ("graph", "digraph"):
            graph.directed = token.text.lower() == "digraph"
            self.take()
        else:
            self.error(token, f"expected 'graph' or 'digraph', found {token.text!r}")
            return graph
        if self.peek().kind in _ID_KINDS:
            graph.graph_id = self.ident("graph name")
        try:
            self.expect("lbrace", "'{'")
        except _ParseAbort:
            return graph
        self.parse_statements(graph)
        return graph

    def parse_statements(self, graph: DotGraph) -> None:
        while True:
            if len(self.report.errors) >= MAX_ERRORS:
                return
            token = self.peek()
            if token.kind == "eof":
                self.error(token, "expected '}' before end of input")
                return
            if token.kind == "rbrace":
                self.take()
                trailing = self.peek()
                if trailing.kind != "eof":
                    self.error(trailing, "unexpected text after closing '}'")
                return
            if token.kind == "semi":
                self.take()
                continue
            try:
                stmt = self.parse_statement(graph)
                if stmt is not None:
                    graph.statements.append(stmt)
            except _ParseAbort:
                self.skip_statement()

    def parse_statement(self, graph: DotGraph) -> Optional[Statement]:
        token = self.peek()
        if token.kind == "keyword":
            word = token.text.lower()
            if word in ("graph", "node", "edge"):
                self.take()
                attrs = self.parse_attr_list(required=True)
                return AttrStmt(target=word, attrs=attrs)
            if word == "subgraph":
                self.error(token, "subgraphs are not supported", DiagCode.unsupported)
                self.take()
                if self.peek().kind in _ID_KINDS:
                    self.take()
                if self.peek().kind == "lbrace":
                    self.skip_braced()
                return None
            self.error(token, f"unexpected keyword {token.text!r}")
            raise _ParseAbort()
        if token.kind == "lbrace":
            self.error(token, "anonymous subgraphs are not supported", DiagCode.unsupported)
            self.skip_braced()
            return None
        first = self.ident("node name")
        nxt = self.peek()
        if nxt.kind == "colon":
            self.error(nxt, "port syntax is not supported", DiagCode.unsupported)
            raise _ParseAbort()
        if nxt.kind == "eq":
            self.take()
            value = self.ident("attribute value")
            return Assignment(key=first.value, value=value.value)
        if nxt.kind == "edgeop":
            return self.parse_edge(graph, first)
        attrs = {}
        if nxt.kind == "lbracket":
            attrs = self.parse_attr_list(required=True)
        return NodeStmt(node_id=first, attrs=attrs)

    def parse_edge(self, graph: DotGraph, first: Ident) -> EdgeStmt:
        endpoints = [first]
        while self.peek().kind == "edgeop":
            op = self.take()
            if graph.directed and op.text == "--":
                self.error(op, "'--' is not valid in a digraph", DiagCode.edge_op_mismatch)
            elif not graph.directed and op.text == "->":
                self.error(op, "'->' is not valid in an undirected graph",
                           DiagCode.edge_op_mismatch)
            endpoints.append(self.ident("edge endpoint"))
            if self.peek().kind == "colon":
                self.error(self.peek(), "port syntax is not supported", DiagCode.unsupported)
                raise _ParseAbort()
        attrs = {}
        if self.peek().kind == "lbracket":
            attrs = self.parse_attr_list(required=True)
        return EdgeStmt(endpoints=endpoints, attrs=attrs)

    def parse_attr_list(self, required: bool) -> dict[str, str]:
        attrs: dict[str, str] = {}
        self.expect("lbracket", "'['")
        if self.peek().kind == "rbracket":
            self.take()
            return attrs
        while True:
            key_token = self.peek()
            key = self.ident("attribute name")
            self.expect("eq", "'='")
            value = self.ident("attribute value")
            if key.value in attrs:
                self.report.warn(key_token.line, key_token.col,
                                 f"duplicate attribute {key.value!r}; last value wins",
                                 DiagCode.duplicate)
            attrs[key.value] = value.value
            token = self.peek()
            if token.kind == "rbracket":
                self.take()
                return attrs
            if token.kind in ("comma", "semi"):
                self.take()
                continue
            self.error(token, f"expected ',' ';' or ']', found {token.text or 'end of input'!r}")
            raise _ParseAbort()


def parse_dot(text: str) -> tuple[Optional[DotGraph], ValidationReport]:
    """Parse DOT source; returns the graph (or None) plus the report.

    Diagnostics are always returned in the report, never raised; parsing
    recovers at statement level and stops after ten errors.
    """
    report = ValidationReport()
    tokens = _lex(text, report)
    graph = _DotParser(tokens, report).parse_graph()
    if not report.ok:
        return None, report
    return graph, report


# --- canonical printing ------------------------------------------------------

def _render_plain(value: str) -> str:
    if _BARE_ID_RE.match(value) or _NUMERAL_RE.match(value):
        return value
    return '"' + value.replace('"', '\\"') + '"'


def _render_ident(ident: Ident) -> str:
    if ident.quoted:
        return '"' + ident.value.replace('"', '\\"') + '"'
    return _render_plain(ident.value)


def _render_attrs(attrs: dict[str, str]) -> str:
    inner = ", ".join(
        f"{_render_plain(k)}={_render_plain(v)}" for k, v in sorted(attrs.items())
    )
    return f"[{inner}]"


def canonicalize_dot(graph: DotGraph) -> str:
    """Deterministic pretty-print: one statement per line, attrs sorted by key.

    Reparsing the output reproduces the AST exactly (idempotent).
    """
    header = ""
    if graph.strict:
        header += "strict "
    header += "digraph" if graph.directed else "graph"
    if graph.graph_id is not None:
        header += " " + _render_ident(graph.graph_id)
    lines = [header + " {"]
    op = " -> " if graph.directed else " -- "
    for stmt in graph.statements:
        if isinstance(stmt, NodeStmt):
            text = _render_ident(stmt.node_id)
            if stmt.attrs:
                text += " " + _render_attrs(stmt.attrs)
        elif isinstance(stmt, EdgeStmt):
            text = op.join(_render_ident(e) for e in stmt.endpoints)
            if stmt.attrs:
                text += " " + _render_attrs(stmt.attrs)
        elif isinstance(stmt, AttrStmt):
            text = f"{stmt.target} {_render_attrs(stmt.attrs)}"
        else:
            text = f"{_render_plain(stmt.key)}={_render_plain(stmt.value)}"
        lines.append(f"  {text};")
    lines.append("}")
    return "\n".join(lines) + "\n"
