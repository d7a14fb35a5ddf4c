"""AST node and diagnostic types shared by the lexer, parser, and printer.

Nodes are immutable after construction: children are stored as tuples and
attrs must not be mutated once a node is built. This makes forests safe to
share across threads and to use as dictionary keys via ``structural_key``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator


class NodeKind(Enum):
    MODULE = "Module"
    PORT_DECL = "PortDecl"
    PARAM_DECL = "ParamDecl"
    NET_DECL = "NetDecl"
    REG_DECL = "RegDecl"
    CONTINUOUS_ASSIGN = "ContinuousAssign"
    ALWAYS_BLOCK = "AlwaysBlock"
    INITIAL_BLOCK = "InitialBlock"
    IF_STMT = "IfStmt"
    CASE_STMT = "CaseStmt"
    CASE_ITEM = "CaseItem"
    FOR_LOOP = "ForLoop"
    BLOCKING_ASSIGN = "BlockingAssign"
    NONBLOCKING_ASSIGN = "NonBlockingAssign"
    BINARY_OP = "BinaryOp"
    UNARY_OP = "UnaryOp"
    TERNARY_OP = "TernaryOp"
    CONCAT = "Concat"
    REPLICATION = "Replication"
    INDEX_SELECT = "IndexSelect"
    RANGE_SELECT = "RangeSelect"
    IDENTIFIER = "Identifier"
    INT_LITERAL = "IntLiteral"
    INSTANCE = "Instance"
    PORT_CONNECTION = "PortConnection"
    GENERATE_BLOCK = "GenerateBlock"
    EVENT_CONTROL = "EventControl"
    FUNCTION_DECL = "FunctionDecl"
    SENSITIVITY_LIST = "SensitivityList"
    # Structural containers beyond the core construct set: a sequential
    # begin/end group and a function-call expression.
    SEQ_BLOCK = "SeqBlock"
    FUNC_CALL = "FuncCall"


# Expression-forming kinds; used for depth measurement and printing.
EXPR_KINDS = frozenset({
    NodeKind.BINARY_OP, NodeKind.UNARY_OP, NodeKind.TERNARY_OP,
    NodeKind.CONCAT, NodeKind.REPLICATION, NodeKind.INDEX_SELECT,
    NodeKind.RANGE_SELECT, NodeKind.IDENTIFIER, NodeKind.INT_LITERAL,
    NodeKind.FUNC_CALL,
})

_OPERATOR_ARITY = {
    NodeKind.BINARY_OP: 2,
    NodeKind.UNARY_OP: 1,
    NodeKind.TERNARY_OP: 3,
}


@dataclass(frozen=True)
class Span:
    line: int = 1
    column: int = 1
    byte_offset: int = 0
    length: int = 0

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1 or self.length < 0:
            raise ValueError(f"invalid span {self!r}")


@dataclass(frozen=True)
class AstNode:
    kind: NodeKind
    attrs: dict[str, str] = field(default_factory=dict)
    children: tuple["AstNode", ...] = ()
    span: Span = Span()

    def __post_init__(self) -> None:
        arity = _OPERATOR_ARITY.get(self.kind)
        if arity is not None and len(self.children) != arity:
            raise MalformedNodeError(self.kind, len(self.children), self.span)

    def walk(self) -> Iterator["AstNode"]:
        """Pre-order traversal of this node and all descendants."""
        yield self
        for child in self.children:
            yield from child.walk()

    def node_count(self) -> int:
        return sum(1 for _ in self.walk())

    def structural_key(self) -> tuple:
        """Hashable key capturing kind, attrs, and child structure (not spans)."""
        return (
            self.kind.value,
            tuple(sorted(self.attrs.items())),
            tuple(c.structural_key() for c in self.children),
        )

    def structural_hash(self) -> str:
        h = hashlib.sha256(repr(self.structural_key()).encode("utf-8"))
        return h.hexdigest()

    def replace(self, **changes) -> "AstNode":
        fields = {"kind": self.kind, "attrs": self.attrs,
                  "children": self.children, "span": self.span}
        fields.update(changes)
        return AstNode(**fields)


class MalformedNodeError(ValueError):
    """An operator node was built with the wrong child count."""

    def __init__(self, kind: NodeKind, got: int, span: Span):
        super().__init__(
            f"{kind.value} at line {span.line}, col {span.column} "
            f"requires {_OPERATOR_ARITY[kind]} children, got {got}"
        )
        self.kind = kind
        self.span = span


def isomorphic(a: AstNode, b: AstNode) -> bool:
    """Structural equality ignoring spans: kinds, attrs, and child order."""
    if a.kind is not b.kind or a.attrs != b.attrs:
        return False
    if len(a.children) != len(b.children):
        return False
    return all(isomorphic(x, y) for x, y in zip(a.children, b.children))


def forests_isomorphic(a: list[AstNode], b: list[AstNode]) -> bool:
    return len(a) == len(b) and all(isomorphic(x, y) for x, y in zip(a, b))


class DiagnosticKind(Enum):
    UNEXPECTED_TOKEN = "UnexpectedToken"
    UNTERMINATED_CONSTRUCT = "UnterminatedConstruct"
    UNKNOWN_DIRECTIVE = "UnknownDirective"
    ILLEGAL_CHARACTER = "IllegalCharacter"
    MISMATCHED_DELIMITER = "MismatchedDelimiter"


@dataclass(frozen=True)
class SyntaxDiagnostic:
    span: Span
    kind: DiagnosticKind
    message: str
    offending_line_text: str

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("diagnostic message must be non-empty")

    def render(self, filename: str = "<input>") -> str:
        """Bit-exact rendering: ``<file>:<line>:<col>: <kind>: <message>``."""
        return (f"{filename}:{self.span.line}:{self.span.column}: "
                f"{self.kind.value}: {self.message}")


@dataclass(frozen=True)
class SyntaxReport:
    diagnostics: tuple[SyntaxDiagnostic, ...]
    source_hash: str

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def render(self, filename: str = "<input>") -> str:
        return "\n".join(d.render(filename) for d in self.diagnostics)


def source_digest(source: str) -> str:
    return hashlib.sha256(source.encode("utf-8")).hexdigest()


def make_report(source: str, diagnostics: list[SyntaxDiagnostic]) -> SyntaxReport:
    ordered = tuple(sorted(diagnostics, key=lambda d: (d.span.line, d.span.column)))
    return SyntaxReport(diagnostics=ordered, source_hash=source_digest(source))
