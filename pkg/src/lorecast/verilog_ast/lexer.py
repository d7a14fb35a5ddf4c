"""Hand-written lexer for the supported Verilog-2001 subset.

Produces a token list plus lexical diagnostics (illegal characters,
unterminated comments/strings, unknown compiler directives). Lexing never
raises on bad input; the parser decides whether diagnostics are fatal.
"""

from __future__ import annotations

from .nodes import DiagnosticKind, Span, SyntaxDiagnostic
from .tokens import KEYWORDS, Token, TokenType

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789$")
_DIGITS = set("0123456789")
_BASED_DIGITS = set("0123456789abcdefABCDEFxXzZ?_")

# Longest-match table for operator/delimiter tokens.
_OPERATORS: list[tuple[str, TokenType]] = [
    ("<<<", TokenType.ASHIFT_L),
    (">>>", TokenType.ASHIFT_R),
    ("===", TokenType.CASE_EQ),
    ("!==", TokenType.CASE_NEQ),
    ("**", TokenType.POWER),
    ("<<", TokenType.LSHIFT),
    (">>", TokenType.RSHIFT),
    ("&&", TokenType.LAND),
    ("||", TokenType.LOR),
    ("==", TokenType.EQ),
    ("!=", TokenType.NEQ),
    ("<=", TokenType.LE),
    (">=", TokenType.GE),
    ("~&", TokenType.NAND_RED),
    ("~|", TokenType.NOR_RED),
    ("~^", TokenType.XNOR),
    ("^~", TokenType.XNOR),
    ("+:", TokenType.PLUS_COLON),
    ("-:", TokenType.MINUS_COLON),
    ("+", TokenType.PLUS),
    ("-", TokenType.MINUS),
    ("*", TokenType.STAR),
    ("/", TokenType.SLASH),
    ("%", TokenType.PERCENT),
    ("&", TokenType.AMP),
    ("|", TokenType.PIPE),
    ("^", TokenType.CARET),
    ("~", TokenType.TILDE),
    ("!", TokenType.BANG),
    ("<", TokenType.LT),
    (">", TokenType.GT),
    ("=", TokenType.EQUALS),
    ("?", TokenType.QUESTION),
    (":", TokenType.COLON),
    ("@", TokenType.AT),
    ("#", TokenType.HASH),
    ("(", TokenType.LPAREN),
    (")", TokenType.RPAREN),
    ("[", TokenType.LBRACKET),
    ("]", TokenType.RBRACKET),
    ("{", TokenType.LBRACE),
    ("}", TokenType.RBRACE),
    (";", TokenType.SEMICOLON),
    (",", TokenType.COMMA),
    (".", TokenType.DOT),
]


class _Cursor:
    __slots__ = ("src", "n", "i", "line", "col")

    def __init__(self, src: str):
        self.src = src
        self.n = len(src)
        self.i = 0
        self.line = 1
        self.col = 1

    def peek(self, k: int = 0) -> str:
        j = self.i + k
        return self.src[j] if j < self.n else ""

    def startswith(self, s: str) -> bool:
        return self.src.startswith(s, self.i)

    def advance(self, k: int = 1) -> None:
        for _ in range(k):
            if self.i >= self.n:
                return
            if self.src[self.i] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.i += 1


def line_text(source: str, line: int) -> str:
    """Verbatim text of a 1-based source line ('' past the end)."""
    lines = source.split("\n")
    if 1 <= line <= len(lines):
        return lines[line - 1]
    return ""


def lex(source: str) -> tuple[list[Token], list[SyntaxDiagnostic]]:
    cur = _Cursor(source)
    tokens: list[Token] = []
    diags: list[SyntaxDiagnostic] = []

    def diag(kind: DiagnosticKind, message: str, line: int, col: int,
             offset: int, length: int) -> None:
        diags.append(SyntaxDiagnostic(
            span=Span(line, col, offset, length),
            kind=kind,
            message=message,
            offending_line_text=line_text(source, line),
        ))

    def emit(tt: TokenType, start: tuple[int, int, int]) -> None:
        line, col, off = start
        tokens.append(Token(tt, source[off:cur.i], line, col, off, cur.i - off))

    while cur.i < cur.n:
        c = cur.peek()
        start = (cur.line, cur.col, cur.i)

        if c in " \t\r\n":
            cur.advance()
            continue

        if cur.startswith("//"):
            while cur.i < cur.n and cur.peek() != "\n":
                cur.advance()
            continue

        if cur.startswith("/*"):
            cur.advance(2)
            closed = False
            while cur.i < cur.n:
                if cur.startswith("*/"):
                    cur.advance(2)
                    closed = True
                    break
                cur.advance()
            if not closed:
                diag(DiagnosticKind.UNTERMINATED_CONSTRUCT,
                     "unterminated block comment", *start, 2)
            continue

        if c == '"':
            cur.advance()
            closed = False
            while cur.i < cur.n and cur.peek() != "\n":
                if cur.peek() == "\\" and cur.i + 1 < cur.n:
                    cur.advance(2)
                    continue
                if cur.peek() == '"':
                    cur.advance()
                    closed = True
                    break
                cur.advance()
            if not closed:
                diag(DiagnosticKind.UNTERMINATED_CONSTRUCT,
                     "unterminated string literal", *start, 1)
            else:
                emit(TokenType.STRING, start)
            continue

        if c == "`":
            cur.advance()
            word = ""
            while cur.peek() in _IDENT_CONT:
                word += cur.peek()
                cur.advance()
            if word == "timescale":
                # Ignored directive: consume the rest of the line.
                while cur.i < cur.n and cur.peek() != "\n":
                    cur.advance()
            else:
                diag(DiagnosticKind.UNKNOWN_DIRECTIVE,
                     f"unsupported compiler directive `{word}`",
                     *start, len(word) + 1)
                while cur.i < cur.n and cur.peek() != "\n":
                    cur.advance()
            continue

        if c == "$":
            cur.advance()
            if cur.peek() in _IDENT_START:
                while cur.peek() in _IDENT_CONT:
                    cur.advance()
                emit(TokenType.SYSTEM_IDENT, start)
            else:
                diag(DiagnosticKind.ILLEGAL_CHARACTER,
                     "stray '$' without a system identifier", *start, 1)
            continue

        if c in _IDENT_START:
            while cur.peek() in _IDENT_CONT:
                cur.advance()
            text = source[start[2]:cur.i]
            emit(KEYWORDS.get(text, TokenType.IDENT), start)
            continue

        if c in _DIGITS or (c == "'" and _starts_based_literal(cur)):
            _lex_number(cur)
            emit(TokenType.NUMBER, start)
            continue

        matched = False
        for text, tt in _OPERATORS:
            if cur.startswith(text):
                cur.advance(len(text))
                emit(tt, start)
                matched = True
                break
        if matched:
            continue

        diag(DiagnosticKind.ILLEGAL_CHARACTER,
             f"illegal character {c!r}", *start, 1)
        cur.advance()

    tokens.append(Token(TokenType.EOF, "", cur.line, cur.col, cur.i, 0))
    return tokens, diags


def _is_base_char(c: str) -> bool:
    return c.lower() in ("b", "o", "d", "h")


def _starts_based_literal(cur: _Cursor) -> bool:
    nxt = cur.peek(1)
    if _is_base_char(nxt):
        return True
    return nxt.lower() == "s" and _is_base_char(cur.peek(2))


def _lex_number(cur: _Cursor) -> None:
    # Optional size digits.
    while cur.peek() in _DIGITS or cur.peek() == "_":
        cur.advance()
    if cur.peek() == "'":
        cur.advance()
        if cur.peek().lower() == "s":
            cur.advance()
        if _is_base_char(cur.peek()):
            cur.advance()
        while cur.peek() in _BASED_DIGITS:
            cur.advance()
