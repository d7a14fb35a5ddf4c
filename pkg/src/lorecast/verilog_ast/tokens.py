"""Token stream definitions for the Verilog-2001 subset lexer."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum, auto


class TokenType(Enum):
    # Literals
    NUMBER = auto()         # 42, 8'hFF, 4'b10xz, 'd3
    STRING = auto()         # "text"
    IDENT = auto()          # my_signal
    SYSTEM_IDENT = auto()   # $signed, $display

    # Keywords
    MODULE = auto()
    ENDMODULE = auto()
    INPUT = auto()
    OUTPUT = auto()
    INOUT = auto()
    WIRE = auto()
    REG = auto()
    INTEGER = auto()
    GENVAR = auto()
    PARAMETER = auto()
    LOCALPARAM = auto()
    ASSIGN = auto()
    ALWAYS = auto()
    INITIAL = auto()
    BEGIN = auto()
    END = auto()
    IF = auto()
    ELSE = auto()
    CASE = auto()
    CASEX = auto()
    CASEZ = auto()
    ENDCASE = auto()
    DEFAULT = auto()
    FOR = auto()
    GENERATE = auto()
    ENDGENERATE = auto()
    FUNCTION = auto()
    ENDFUNCTION = auto()
    POSEDGE = auto()
    NEGEDGE = auto()
    OR_KW = auto()          # 'or' inside sensitivity lists
    SIGNED = auto()

    # Operators (multi-character first during matching)
    POWER = auto()          # **
    LSHIFT = auto()         # <<
    RSHIFT = auto()         # >>
    ASHIFT_L = auto()       # <<<
    ASHIFT_R = auto()       # >>>
    LAND = auto()           # &&
    LOR = auto()            # ||
    CASE_EQ = auto()        # ===
    CASE_NEQ = auto()       # !==
    EQ = auto()             # ==
    NEQ = auto()            # !=
    LE = auto()             # <= (also non-blocking assign)
    GE = auto()             # >=
    NAND_RED = auto()       # ~&
    NOR_RED = auto()        # ~|
    XNOR = auto()           # ~^ or ^~
    PLUS_COLON = auto()     # +:
    MINUS_COLON = auto()    # -:

    PLUS = auto()
    MINUS = auto()
    STAR = auto()
    SLASH = auto()
    PERCENT = auto()
    AMP = auto()
    PIPE = auto()
    CARET = auto()
    TILDE = auto()
    BANG = auto()
    LT = auto()
    GT = auto()
    EQUALS = auto()         # = (blocking assign / defaults)
    QUESTION = auto()
    COLON = auto()
    AT = auto()
    HASH = auto()

    # Delimiters
    LPAREN = auto()
    RPAREN = auto()
    LBRACKET = auto()
    RBRACKET = auto()
    LBRACE = auto()
    RBRACE = auto()
    SEMICOLON = auto()
    COMMA = auto()
    DOT = auto()

    EOF = auto()


@dataclass(frozen=True)
class Token:
    type: TokenType
    value: str
    line: int       # 1-based
    col: int        # 1-based
    offset: int     # byte offset into the source
    length: int

    def __repr__(self) -> str:
        return f"Token({self.type.name}, {self.value!r}, L{self.line}:{self.col})"


KEYWORDS: dict[str, TokenType] = {
    "module": TokenType.MODULE,
    "endmodule": TokenType.ENDMODULE,
    "input": TokenType.INPUT,
    "output": TokenType.OUTPUT,
    "inout": TokenType.INOUT,
    "wire": TokenType.WIRE,
    "reg": TokenType.REG,
    "integer": TokenType.INTEGER,
    "genvar": TokenType.GENVAR,
    "parameter": TokenType.PARAMETER,
    "localparam": TokenType.LOCALPARAM,
    "assign": TokenType.ASSIGN,
    "always": TokenType.ALWAYS,
    "initial": TokenType.INITIAL,
    "begin": TokenType.BEGIN,
    "end": TokenType.END,
    "if": TokenType.IF,
    "else": TokenType.ELSE,
    "case": TokenType.CASE,
    "casex": TokenType.CASEX,
    "casez": TokenType.CASEZ,
    "endcase": TokenType.ENDCASE,
    "default": TokenType.DEFAULT,
    "for": TokenType.FOR,
    "generate": TokenType.GENERATE,
    "endgenerate": TokenType.ENDGENERATE,
    "function": TokenType.FUNCTION,
    "endfunction": TokenType.ENDFUNCTION,
    "posedge": TokenType.POSEDGE,
    "negedge": TokenType.NEGEDGE,
    "or": TokenType.OR_KW,
    "signed": TokenType.SIGNED,
}

# Verilog-1364 reserved words we recognize only to reject with a clear
# message; anything here used in source is outside the supported subset.
UNSUPPORTED_KEYWORDS = frozenset({
    "specify", "endspecify", "primitive", "endprimitive", "table", "endtable",
    "task", "endtask", "fork", "join", "while", "repeat", "forever", "wait",
    "deassign", "force", "release", "disable", "event", "real", "realtime",
    "time", "tri", "tri0", "tri1", "triand", "trior", "trireg", "wand", "wor",
    "supply0", "supply1", "scalared", "vectored", "defparam",
})
