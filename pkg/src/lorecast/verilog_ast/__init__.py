"""Lexer, parser, and printer for a synthesizable Verilog-2001 subset.

The parser's positioned diagnostics double as the syntax gate for the
iterative code-repair loop; the printer supports round-trip testing.
"""

from .nodes import (
    AstNode,
    DiagnosticKind,
    MalformedNodeError,
    NodeKind,
    Span,
    SyntaxDiagnostic,
    SyntaxReport,
    forests_isomorphic,
    isomorphic,
)
from .parser import check_syntax, literal_value, parse
from .printer import pretty_print, render_expr

__all__ = [
    "AstNode",
    "DiagnosticKind",
    "MalformedNodeError",
    "NodeKind",
    "Span",
    "SyntaxDiagnostic",
    "SyntaxReport",
    "check_syntax",
    "forests_isomorphic",
    "isomorphic",
    "literal_value",
    "parse",
    "pretty_print",
    "render_expr",
]
