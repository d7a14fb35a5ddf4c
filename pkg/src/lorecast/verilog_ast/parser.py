"""Recursive-descent parser for the supported Verilog-2001 subset.

Error handling is diagnostic-driven: grammar violations are recorded as
positioned diagnostics and parsing resumes at the next statement boundary
(``;``, ``end``, ``endmodule``), so one pass can report several independent
errors. Nothing in this module raises on malformed source text.

Supported constructs: module declarations (ANSI and non-ANSI headers),
port/net/reg/integer/genvar/parameter declarations, continuous assigns,
always/initial blocks, if/case(x/z)/for statements, blocking and
non-blocking assignments, module instantiation, generate regions, function
declarations, and the full synthesizable expression grammar (including
concatenation, replication, bit/part selects, and reduction operators).
"""

from __future__ import annotations

from .lexer import lex, line_text
from .nodes import (
    AstNode,
    DiagnosticKind,
    NodeKind,
    Span,
    SyntaxDiagnostic,
    SyntaxReport,
    make_report,
)
from .tokens import Token, TokenType, UNSUPPORTED_KEYWORDS

_MAX_DIAGNOSTICS = 100

_DIRECTION_TOKENS = {
    TokenType.INPUT: "in",
    TokenType.OUTPUT: "out",
    TokenType.INOUT: "inout",
}

_ITEM_SYNC = frozenset({
    TokenType.SEMICOLON, TokenType.END, TokenType.ENDCASE,
    TokenType.ENDMODULE, TokenType.ENDFUNCTION, TokenType.ENDGENERATE,
    TokenType.EOF,
})

# Binary operator precedence tiers, weakest first. Each tier maps token
# type to the operator symbol stored in the node attrs.
_BINARY_TIERS: list[dict[TokenType, str]] = [
    {TokenType.LOR: "||"},
    {TokenType.LAND: "&&"},
    {TokenType.PIPE: "|"},
    {TokenType.CARET: "^", TokenType.XNOR: "~^"},
    {TokenType.AMP: "&"},
    {TokenType.EQ: "==", TokenType.NEQ: "!=",
     TokenType.CASE_EQ: "===", TokenType.CASE_NEQ: "!=="},
    {TokenType.LT: "<", TokenType.LE: "<=", TokenType.GT: ">",
     TokenType.GE: ">="},
    {TokenType.LSHIFT: "<<", TokenType.RSHIFT: ">>",
     TokenType.ASHIFT_L: "<<<", TokenType.ASHIFT_R: ">>>"},
    {TokenType.PLUS: "+", TokenType.MINUS: "-"},
    {TokenType.STAR: "*", TokenType.SLASH: "/", TokenType.PERCENT: "%"},
    {TokenType.POWER: "**"},
]

_UNARY_OPS = {
    TokenType.BANG: "!",
    TokenType.TILDE: "~",
    TokenType.PLUS: "+",
    TokenType.MINUS: "-",
    TokenType.AMP: "&",
    TokenType.PIPE: "|",
    TokenType.CARET: "^",
    TokenType.NAND_RED: "~&",
    TokenType.NOR_RED: "~|",
    TokenType.XNOR: "~^",
}


class _Resync(Exception):
    """Internal signal: a diagnostic was recorded; skip to a sync point."""


class _Parser:
    def __init__(self, source: str, tokens: list[Token]):
        self.source = source
        self.tokens = tokens
        self.pos = 0
        self.diagnostics: list[SyntaxDiagnostic] = []

    # -- token navigation --------------------------------------------------

    def cur(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        j = min(self.pos + k, len(self.tokens) - 1)
        return self.tokens[j]

    def at(self, *types: TokenType) -> bool:
        return self.cur().type in types

    def eat(self) -> Token:
        tok = self.cur()
        if tok.type is not TokenType.EOF:
            self.pos += 1
        return tok

    def eat_if(self, tt: TokenType) -> Token | None:
        if self.cur().type is tt:
            return self.eat()
        return None

    def expect(self, tt: TokenType, what: str) -> Token:
        if self.cur().type is tt:
            return self.eat()
        message = f"expected {what} before {self._describe(self.cur())}"
        if tt is TokenType.SEMICOLON and self.pos > 0:
            # Anchor missing-semicolon reports right after the previous
            # token: that is where the semicolon belongs, and it keeps the
            # reported line on the statement that is actually incomplete.
            prev = self.tokens[self.pos - 1]
            self.record_at(DiagnosticKind.UNEXPECTED_TOKEN, message,
                           Span(prev.line, prev.col + max(prev.length, 1),
                                prev.offset + prev.length, 0))
            raise _Resync()
        self.error(DiagnosticKind.UNEXPECTED_TOKEN, message)
        raise AssertionError("unreachable")

    def expect_closing(self, tt: TokenType, text: str, open_tok: Token) -> Token:
        if self.cur().type is tt:
            return self.eat()
        self.error(
            DiagnosticKind.MISMATCHED_DELIMITER,
            f"expected '{text}' to close '{open_tok.value}' opened at "
            f"line {open_tok.line}, col {open_tok.col}; "
            f"found {self._describe(self.cur())}")
        raise AssertionError("unreachable")

    @staticmethod
    def _describe(tok: Token) -> str:
        if tok.type is TokenType.EOF:
            return "end of input"
        return f"'{tok.value}'"

    # -- diagnostics ---------------------------------------------------------

    def error(self, kind: DiagnosticKind, message: str,
              tok: Token | None = None) -> None:
        tok = tok or self.cur()
        self.record(kind, message, tok)
        raise _Resync()

    def record(self, kind: DiagnosticKind, message: str, tok: Token) -> None:
        length = tok.length if tok.type is not TokenType.EOF else 0
        self.record_at(kind, message, Span(tok.line, tok.col, tok.offset,
                                           length))

    def record_at(self, kind: DiagnosticKind, message: str, span: Span) -> None:
        if len(self.diagnostics) >= _MAX_DIAGNOSTICS:
            return
        self.diagnostics.append(SyntaxDiagnostic(
            span=span,
            kind=kind,
            message=message,
            offending_line_text=line_text(self.source, span.line),
        ))

    def span_of(self, tok: Token) -> Span:
        return Span(tok.line, tok.col, tok.offset, max(tok.length, 0))

    def resync(self, extra: frozenset = frozenset()) -> None:
        """Panic-mode recovery: skip to a statement/item boundary."""
        sync = _ITEM_SYNC | extra
        while not self.at(*sync):
            self.eat()
        self.eat_if(TokenType.SEMICOLON)

    def check_unsupported(self) -> None:
        tok = self.cur()
        if tok.type is TokenType.IDENT and tok.value in UNSUPPORTED_KEYWORDS:
            self.error(
                DiagnosticKind.UNEXPECTED_TOKEN,
                f"'{tok.value}' is outside the supported Verilog subset")

    # -- top level ----------------------------------------------------------

    def parse_source(self) -> list[AstNode]:
        forest: list[AstNode] = []
        while not self.at(TokenType.EOF):
            if self.at(TokenType.MODULE):
                mod = self.parse_module()
                if mod is not None:
                    forest.append(mod)
            else:
                self.record(
                    DiagnosticKind.UNEXPECTED_TOKEN,
                    f"expected 'module' at top level, "
                    f"found {self._describe(self.cur())}",
                    self.cur())
                # Skip ahead to the next plausible module start.
                self.eat()
                while not self.at(TokenType.MODULE, TokenType.EOF):
                    self.eat()
        return forest

    # -- module -------------------------------------------------------------

    def parse_module(self) -> AstNode | None:
        kw = self.eat()  # 'module'
        attrs: dict[str, str] = {}
        children: list[AstNode] = []
        try:
            name = self.expect(TokenType.IDENT, "module name")
            attrs["name"] = name.value
            if self.at(TokenType.HASH):
                self.eat()
                children.extend(self.parse_param_header())
            if self.at(TokenType.LPAREN):
                open_tok = self.eat()
                header_ports, port_order = self.parse_port_header(open_tok)
                children.extend(header_ports)
                if header_ports:
                    attrs["ansi"] = "1"
                elif port_order:
                    attrs["ports"] = ",".join(port_order)
                else:
                    attrs["paren"] = "1"
            self.expect(TokenType.SEMICOLON, "';' after module header")
        except _Resync:
            self.resync()

        while not self.at(TokenType.ENDMODULE):
            if self.at(TokenType.EOF):
                last = self.tokens[self.pos - 1] if self.pos else kw
                self.record(
                    DiagnosticKind.UNTERMINATED_CONSTRUCT,
                    f"unterminated module '{attrs.get('name', '?')}': "
                    f"missing 'endmodule'",
                    last)
                break
            item_start = self.pos
            try:
                children.extend(self.parse_module_item())
            except _Resync:
                self.resync()
            if self.pos == item_start:  # guarantee progress
                self.eat()
        self.eat_if(TokenType.ENDMODULE)
        return AstNode(NodeKind.MODULE, attrs, tuple(children), self.span_of(kw))

    def parse_param_header(self) -> list[AstNode]:
        open_tok = self.expect(TokenType.LPAREN, "'(' after '#'")
        params: list[AstNode] = []
        if not self.at(TokenType.RPAREN):
            while True:
                self.eat_if(TokenType.PARAMETER)
                params.append(self.parse_one_param({}))
                if not self.eat_if(TokenType.COMMA):
                    break
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        return params

    def parse_port_header(self, open_tok: Token) -> tuple[list[AstNode], list[str]]:
        """ANSI header -> PortDecl list; non-ANSI header -> name list."""
        decls: list[AstNode] = []
        order: list[str] = []
        if self.at(TokenType.RPAREN):
            self.eat()
            return decls, order
        if self.at(TokenType.IDENT):  # non-ANSI: bare identifier list
            while True:
                order.append(self.expect(TokenType.IDENT, "port name").value)
                if not self.eat_if(TokenType.COMMA):
                    break
            self.expect_closing(TokenType.RPAREN, ")", open_tok)
            return decls, order
        direction = None
        common: dict[str, str] = {}
        while True:
            if self.at(*_DIRECTION_TOKENS):
                tok = self.eat()
                direction = _DIRECTION_TOKENS[tok.type]
                common = {"direction": direction}
                if self.eat_if(TokenType.REG):
                    common["reg"] = "1"
                else:
                    self.eat_if(TokenType.WIRE)
                if self.eat_if(TokenType.SIGNED):
                    common["signed"] = "1"
                if self.at(TokenType.LBRACKET):
                    msb, lsb = self.parse_range()
                    common["msb"], common["lsb"] = msb, lsb
            elif direction is None:
                self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                           "expected port direction before "
                           f"{self._describe(self.cur())}")
            name = self.expect(TokenType.IDENT, "port name")
            decls.append(AstNode(NodeKind.PORT_DECL,
                                 {**common, "name": name.value},
                                 (), self.span_of(name)))
            if not self.eat_if(TokenType.COMMA):
                break
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        return decls, order

    # -- module items ---------------------------------------------------------

    def parse_module_item(self) -> list[AstNode]:
        self.check_unsupported()
        t = self.cur().type
        if t in _DIRECTION_TOKENS:
            return self.parse_port_decl_stmt()
        if t is TokenType.WIRE:
            return self.parse_net_decl()
        if t is TokenType.REG:
            return self.parse_reg_decl()
        if t is TokenType.INTEGER:
            return self.parse_simple_var_decl("integer")
        if t is TokenType.GENVAR:
            return self.parse_simple_var_decl("genvar")
        if t in (TokenType.PARAMETER, TokenType.LOCALPARAM):
            return self.parse_param_decl_stmt()
        if t is TokenType.ASSIGN:
            return self.parse_continuous_assign()
        if t is TokenType.ALWAYS:
            return [self.parse_always()]
        if t is TokenType.INITIAL:
            return [self.parse_initial()]
        if t is TokenType.FUNCTION:
            return [self.parse_function()]
        if t is TokenType.GENERATE:
            return [self.parse_generate_region()]
        if t is TokenType.IDENT:
            return [self.parse_instance()]
        if t is TokenType.SEMICOLON:  # stray null item
            self.eat()
            return []
        if t is TokenType.SYSTEM_IDENT:
            self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                       f"system task '{self.cur().value}' is not supported "
                       f"at module level")
        if t is TokenType.HASH:
            self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                       "delay controls ('#') are not supported")
        self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                   f"unexpected {self._describe(self.cur())} in module body")
        raise AssertionError("unreachable")

    def parse_range(self) -> tuple[str, str]:
        """``[msb:lsb]`` -> canonical expression texts."""
        from .printer import render_expr
        open_tok = self.expect(TokenType.LBRACKET, "'['")
        msb = self.parse_expression()
        self.expect(TokenType.COLON, "':' in range")
        lsb = self.parse_expression()
        self.expect_closing(TokenType.RBRACKET, "]", open_tok)
        return render_expr(msb), render_expr(lsb)

    def parse_port_decl_stmt(self) -> list[AstNode]:
        tok = self.eat()
        attrs: dict[str, str] = {"direction": _DIRECTION_TOKENS[tok.type]}
        if self.eat_if(TokenType.REG):
            attrs["reg"] = "1"
        else:
            self.eat_if(TokenType.WIRE)
        if self.eat_if(TokenType.SIGNED):
            attrs["signed"] = "1"
        if self.at(TokenType.LBRACKET):
            attrs["msb"], attrs["lsb"] = self.parse_range()
        decls = []
        while True:
            name = self.expect(TokenType.IDENT, "port name")
            decls.append(AstNode(NodeKind.PORT_DECL,
                                 {**attrs, "name": name.value},
                                 (), self.span_of(name)))
            if not self.eat_if(TokenType.COMMA):
                break
        self.expect(TokenType.SEMICOLON, "';' after port declaration")
        return decls

    def _decl_common(self) -> dict[str, str]:
        attrs: dict[str, str] = {}
        if self.eat_if(TokenType.SIGNED):
            attrs["signed"] = "1"
        if self.at(TokenType.LBRACKET):
            attrs["msb"], attrs["lsb"] = self.parse_range()
        return attrs

    def parse_net_decl(self) -> list[AstNode]:
        self.eat()  # 'wire'
        common = self._decl_common()
        items: list[AstNode] = []
        while True:
            name = self.expect(TokenType.IDENT, "net name")
            attrs = {**common, "name": name.value}
            if self.at(TokenType.LBRACKET):
                attrs["array_msb"], attrs["array_lsb"] = self.parse_range()
            items.append(AstNode(NodeKind.NET_DECL, attrs, (),
                                 self.span_of(name)))
            if self.eat_if(TokenType.EQUALS):
                # Net declaration assignment: decl + implicit continuous assign.
                rhs = self.parse_expression()
                lhs = AstNode(NodeKind.IDENTIFIER, {"name": name.value}, (),
                              self.span_of(name))
                items.append(AstNode(NodeKind.CONTINUOUS_ASSIGN, {},
                                     (lhs, rhs), self.span_of(name)))
            if not self.eat_if(TokenType.COMMA):
                break
        self.expect(TokenType.SEMICOLON, "';' after net declaration")
        return items

    def parse_reg_decl(self) -> list[AstNode]:
        self.eat()  # 'reg'
        common = self._decl_common()
        items: list[AstNode] = []
        while True:
            name = self.expect(TokenType.IDENT, "register name")
            attrs = {**common, "name": name.value}
            children: tuple[AstNode, ...] = ()
            if self.at(TokenType.LBRACKET):
                attrs["array_msb"], attrs["array_lsb"] = self.parse_range()
            elif self.eat_if(TokenType.EQUALS):
                children = (self.parse_expression(),)
            items.append(AstNode(NodeKind.REG_DECL, attrs, children,
                                 self.span_of(name)))
            if not self.eat_if(TokenType.COMMA):
                break
        self.expect(TokenType.SEMICOLON, "';' after reg declaration")
        return items

    def parse_simple_var_decl(self, var_kind: str) -> list[AstNode]:
        self.eat()  # 'integer' / 'genvar'
        items = []
        while True:
            name = self.expect(TokenType.IDENT, f"{var_kind} name")
            items.append(AstNode(NodeKind.REG_DECL,
                                 {"name": name.value, "var": var_kind},
                                 (), self.span_of(name)))
            if not self.eat_if(TokenType.COMMA):
                break
        self.expect(TokenType.SEMICOLON, f"';' after {var_kind} declaration")
        return items

    def parse_one_param(self, extra: dict[str, str]) -> AstNode:
        attrs = dict(extra)
        if self.at(TokenType.LBRACKET):
            attrs["msb"], attrs["lsb"] = self.parse_range()
        name = self.expect(TokenType.IDENT, "parameter name")
        attrs["name"] = name.value
        self.expect(TokenType.EQUALS, "'=' in parameter declaration")
        value = self.parse_expression()
        return AstNode(NodeKind.PARAM_DECL, attrs, (value,), self.span_of(name))

    def parse_param_decl_stmt(self) -> list[AstNode]:
        tok = self.eat()
        extra = {"local": "1"} if tok.type is TokenType.LOCALPARAM else {}
        items = []
        while True:
            items.append(self.parse_one_param(dict(extra)))
            if not self.eat_if(TokenType.COMMA):
                break
        self.expect(TokenType.SEMICOLON, "';' after parameter declaration")
        return items

    def parse_continuous_assign(self) -> list[AstNode]:
        kw = self.eat()  # 'assign'
        items = []
        while True:
            lhs = self.parse_lvalue()
            self.expect(TokenType.EQUALS, "'=' in continuous assignment")
            rhs = self.parse_expression()
            items.append(AstNode(NodeKind.CONTINUOUS_ASSIGN, {}, (lhs, rhs),
                                 self.span_of(kw)))
            if not self.eat_if(TokenType.COMMA):
                break
        self.expect(TokenType.SEMICOLON, "';' after continuous assignment")
        return items

    # -- procedural blocks -----------------------------------------------------

    def parse_always(self) -> AstNode:
        kw = self.eat()
        if not self.at(TokenType.AT):
            self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                       "always block requires an event control "
                       "('@(...)' or '@*')")
        event = self.parse_event_control()
        body = self.parse_statement()
        return AstNode(NodeKind.ALWAYS_BLOCK, {}, (event, body),
                       self.span_of(kw))

    def parse_initial(self) -> AstNode:
        kw = self.eat()
        body = self.parse_statement()
        return AstNode(NodeKind.INITIAL_BLOCK, {}, (body,), self.span_of(kw))

    def parse_event_control(self) -> AstNode:
        at_tok = self.eat()  # '@'
        if self.eat_if(TokenType.STAR):
            sens = AstNode(NodeKind.SENSITIVITY_LIST, {"wildcard": "1"}, (),
                           self.span_of(at_tok))
            return AstNode(NodeKind.EVENT_CONTROL, {}, (sens,),
                           self.span_of(at_tok))
        if self.at(TokenType.IDENT):
            name = self.eat()
            item = AstNode(NodeKind.IDENTIFIER, {"name": name.value}, (),
                           self.span_of(name))
            sens = AstNode(NodeKind.SENSITIVITY_LIST, {}, (item,),
                           self.span_of(name))
            return AstNode(NodeKind.EVENT_CONTROL, {}, (sens,),
                           self.span_of(at_tok))
        open_tok = self.expect(TokenType.LPAREN, "'(' after '@'")
        if self.eat_if(TokenType.STAR):
            self.expect_closing(TokenType.RPAREN, ")", open_tok)
            sens = AstNode(NodeKind.SENSITIVITY_LIST, {"wildcard": "1"}, (),
                           self.span_of(at_tok))
            return AstNode(NodeKind.EVENT_CONTROL, {}, (sens,),
                           self.span_of(at_tok))
        items: list[AstNode] = []
        while True:
            items.append(self.parse_sensitivity_item())
            if not (self.eat_if(TokenType.OR_KW) or self.eat_if(TokenType.COMMA)):
                break
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        sens = AstNode(NodeKind.SENSITIVITY_LIST, {}, tuple(items),
                       self.span_of(at_tok))
        return AstNode(NodeKind.EVENT_CONTROL, {}, (sens,), self.span_of(at_tok))

    def parse_sensitivity_item(self) -> AstNode:
        if self.at(TokenType.POSEDGE, TokenType.NEGEDGE):
            tok = self.eat()
            edge = "posedge" if tok.type is TokenType.POSEDGE else "negedge"
            expr = self.parse_expression()
            return AstNode(NodeKind.UNARY_OP, {"op": edge}, (expr,),
                           self.span_of(tok))
        return self.parse_expression()

    # -- statements -------------------------------------------------------------

    def parse_statement(self) -> AstNode:
        self.check_unsupported()
        t = self.cur().type
        if t is TokenType.BEGIN:
            return self.parse_seq_block(self.parse_statement)
        if t is TokenType.IF:
            return self.parse_if()
        if t in (TokenType.CASE, TokenType.CASEX, TokenType.CASEZ):
            return self.parse_case()
        if t is TokenType.FOR:
            return self.parse_for(self.parse_statement)
        if t in (TokenType.IDENT, TokenType.LBRACE):
            return self.parse_assignment_stmt()
        if t is TokenType.SYSTEM_IDENT:
            self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                       f"system task '{self.cur().value}' is not supported")
        if t is TokenType.HASH:
            self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                       "delay controls ('#') are not supported")
        if t is TokenType.AT:
            self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                       "event controls are only supported on always blocks")
        self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                   f"expected a statement, found {self._describe(self.cur())}")
        raise AssertionError("unreachable")

    def parse_seq_block(self, item_parser) -> AstNode:
        kw = self.eat()  # 'begin'
        attrs: dict[str, str] = {}
        if self.eat_if(TokenType.COLON):
            attrs["name"] = self.expect(TokenType.IDENT, "block name").value
        stmts: list[AstNode] = []
        while not self.at(TokenType.END):
            if self.at(TokenType.EOF, TokenType.ENDMODULE):
                self.error(DiagnosticKind.UNTERMINATED_CONSTRUCT,
                           "unterminated begin/end block: missing 'end'",
                           self.tokens[self.pos - 1])
            start = self.pos
            try:
                result = item_parser()
                if isinstance(result, list):
                    stmts.extend(result)
                else:
                    stmts.append(result)
            except _Resync:
                self.resync()
            if self.pos == start:
                self.eat()
        self.eat_if(TokenType.END)
        return AstNode(NodeKind.SEQ_BLOCK, attrs, tuple(stmts), self.span_of(kw))

    def parse_if(self) -> AstNode:
        kw = self.eat()
        open_tok = self.expect(TokenType.LPAREN, "'(' after 'if'")
        cond = self.parse_expression()
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        then_branch = self.parse_statement()
        children = [cond, then_branch]
        if self.eat_if(TokenType.ELSE):
            children.append(self.parse_statement())
        return AstNode(NodeKind.IF_STMT, {}, tuple(children), self.span_of(kw))

    def parse_case(self) -> AstNode:
        kw = self.eat()
        variant = kw.value  # case / casex / casez
        open_tok = self.expect(TokenType.LPAREN, f"'(' after '{variant}'")
        subject = self.parse_expression()
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        items: list[AstNode] = [subject]
        while not self.at(TokenType.ENDCASE):
            if self.at(TokenType.EOF, TokenType.ENDMODULE):
                self.error(DiagnosticKind.UNTERMINATED_CONSTRUCT,
                           f"unterminated {variant} statement: "
                           f"missing 'endcase'",
                           self.tokens[self.pos - 1])
            start = self.pos
            try:
                items.append(self.parse_case_item())
            except _Resync:
                self.resync()
            if self.pos == start:
                self.eat()
        self.eat_if(TokenType.ENDCASE)
        attrs = {} if variant == "case" else {"variant": variant}
        return AstNode(NodeKind.CASE_STMT, attrs, tuple(items), self.span_of(kw))

    def parse_case_item(self) -> AstNode:
        tok = self.cur()
        if self.eat_if(TokenType.DEFAULT):
            self.eat_if(TokenType.COLON)
            body = self.parse_statement()
            return AstNode(NodeKind.CASE_ITEM, {"default": "1"}, (body,),
                           self.span_of(tok))
        labels = [self.parse_expression()]
        while self.eat_if(TokenType.COMMA):
            labels.append(self.parse_expression())
        self.expect(TokenType.COLON, "':' after case label")
        body = self.parse_statement()
        return AstNode(NodeKind.CASE_ITEM, {}, tuple(labels + [body]),
                       self.span_of(tok))

    def parse_for(self, body_parser) -> AstNode:
        kw = self.eat()
        open_tok = self.expect(TokenType.LPAREN, "'(' after 'for'")
        init = self.parse_plain_assign()
        self.expect(TokenType.SEMICOLON, "';' after for-loop initializer")
        cond = self.parse_expression()
        self.expect(TokenType.SEMICOLON, "';' after for-loop condition")
        step = self.parse_plain_assign()
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        body = body_parser()
        return AstNode(NodeKind.FOR_LOOP, {}, (init, cond, step, body),
                       self.span_of(kw))

    def parse_plain_assign(self) -> AstNode:
        lhs = self.parse_lvalue()
        tok = self.cur()
        self.expect(TokenType.EQUALS, "'=' in assignment")
        rhs = self.parse_expression()
        return AstNode(NodeKind.BLOCKING_ASSIGN, {}, (lhs, rhs),
                       self.span_of(tok))

    def parse_assignment_stmt(self) -> AstNode:
        lhs = self.parse_lvalue()
        tok = self.cur()
        if self.eat_if(TokenType.LE):
            kind = NodeKind.NONBLOCKING_ASSIGN
        elif self.eat_if(TokenType.EQUALS):
            kind = NodeKind.BLOCKING_ASSIGN
        else:
            self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                       f"expected '=' or '<=' before "
                       f"{self._describe(self.cur())}")
            raise AssertionError("unreachable")
        rhs = self.parse_expression()
        self.expect(TokenType.SEMICOLON, "';' after assignment")
        return AstNode(kind, {}, (lhs, rhs), self.span_of(tok))

    # -- instances ---------------------------------------------------------------

    def parse_instance(self) -> AstNode:
        mod_name = self.eat()
        attrs = {"module": mod_name.value}
        children: list[AstNode] = []
        if self.eat_if(TokenType.HASH):
            open_tok = self.expect(TokenType.LPAREN, "'(' after '#'")
            children.extend(self.parse_connection_list(open_tok, param=True))
        inst_name = self.expect(TokenType.IDENT, "instance name")
        attrs["name"] = inst_name.value
        open_tok = self.expect(TokenType.LPAREN, "'(' before port connections")
        children.extend(self.parse_connection_list(open_tok, param=False))
        self.expect(TokenType.SEMICOLON, "';' after instantiation")
        return AstNode(NodeKind.INSTANCE, attrs, tuple(children),
                       self.span_of(mod_name))

    def parse_connection_list(self, open_tok: Token, param: bool) -> list[AstNode]:
        conns: list[AstNode] = []
        extra = {"param": "1"} if param else {}
        if self.at(TokenType.RPAREN):
            self.eat()
            return conns
        while True:
            tok = self.cur()
            if self.eat_if(TokenType.DOT):
                port = self.expect(TokenType.IDENT, "connection name")
                paren = self.expect(TokenType.LPAREN,
                                    "'(' after connection name")
                kids: tuple[AstNode, ...] = ()
                if not self.at(TokenType.RPAREN):
                    kids = (self.parse_expression(),)
                self.expect_closing(TokenType.RPAREN, ")", paren)
                conns.append(AstNode(NodeKind.PORT_CONNECTION,
                                     {**extra, "port": port.value},
                                     kids, self.span_of(tok)))
            else:
                expr = self.parse_expression()
                conns.append(AstNode(NodeKind.PORT_CONNECTION,
                                     {**extra, "port": ""},
                                     (expr,), self.span_of(tok)))
            if not self.eat_if(TokenType.COMMA):
                break
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        return conns

    # -- generate regions -----------------------------------------------------------

    def parse_generate_region(self) -> AstNode:
        kw = self.eat()
        items: list[AstNode] = []
        while not self.at(TokenType.ENDGENERATE):
            if self.at(TokenType.EOF, TokenType.ENDMODULE):
                self.error(DiagnosticKind.UNTERMINATED_CONSTRUCT,
                           "unterminated generate region: "
                           "missing 'endgenerate'",
                           self.tokens[self.pos - 1])
            start = self.pos
            try:
                items.extend(self.parse_generate_item())
            except _Resync:
                self.resync()
            if self.pos == start:
                self.eat()
        self.eat_if(TokenType.ENDGENERATE)
        return AstNode(NodeKind.GENERATE_BLOCK, {}, tuple(items),
                       self.span_of(kw))

    def parse_generate_item(self) -> list[AstNode]:
        t = self.cur().type
        if t is TokenType.FOR:
            return [self.parse_for(self.parse_generate_body)]
        if t is TokenType.IF:
            return [self.parse_generate_if()]
        if t is TokenType.BEGIN:
            return [self.parse_generate_body()]
        return self.parse_module_item()

    def parse_generate_body(self) -> AstNode:
        if self.at(TokenType.BEGIN):
            return self.parse_seq_block(self.parse_generate_item)
        items = self.parse_generate_item()
        if len(items) == 1:
            return items[0]
        return AstNode(NodeKind.SEQ_BLOCK, {}, tuple(items),
                       items[0].span if items else Span())

    def parse_generate_if(self) -> AstNode:
        kw = self.eat()
        open_tok = self.expect(TokenType.LPAREN, "'(' after 'if'")
        cond = self.parse_expression()
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        then_branch = self.parse_generate_body()
        children = [cond, then_branch]
        if self.eat_if(TokenType.ELSE):
            children.append(self.parse_generate_body())
        return AstNode(NodeKind.IF_STMT, {}, tuple(children), self.span_of(kw))

    # -- functions ----------------------------------------------------------------

    def parse_function(self) -> AstNode:
        kw = self.eat()
        attrs: dict[str, str] = {}
        if self.eat_if(TokenType.INTEGER):
            attrs["ret"] = "integer"
        elif self.at(TokenType.LBRACKET):
            attrs["msb"], attrs["lsb"] = self.parse_range()
        name = self.expect(TokenType.IDENT, "function name")
        attrs["name"] = name.value
        self.expect(TokenType.SEMICOLON, "';' after function name")
        children: list[AstNode] = []
        while self.at(TokenType.INPUT, TokenType.REG, TokenType.INTEGER):
            try:
                if self.at(TokenType.INPUT):
                    children.extend(self.parse_port_decl_stmt())
                elif self.at(TokenType.REG):
                    children.extend(self.parse_reg_decl())
                else:
                    children.extend(self.parse_simple_var_decl("integer"))
            except _Resync:
                self.resync()
        try:
            children.append(self.parse_statement())
        except _Resync:
            self.resync()
        if not self.eat_if(TokenType.ENDFUNCTION):
            self.record(DiagnosticKind.UNTERMINATED_CONSTRUCT,
                        f"unterminated function '{attrs['name']}': "
                        f"missing 'endfunction'",
                        self.tokens[self.pos - 1] if self.pos else kw)
        return AstNode(NodeKind.FUNCTION_DECL, attrs, tuple(children),
                       self.span_of(kw))

    # -- expressions ----------------------------------------------------------------

    def parse_lvalue(self) -> AstNode:
        if self.at(TokenType.LBRACE):
            return self.parse_concat()
        name = self.expect(TokenType.IDENT, "an assignable signal name")
        node = AstNode(NodeKind.IDENTIFIER, {"name": name.value}, (),
                       self.span_of(name))
        return self.parse_selects(node)

    def parse_expression(self) -> AstNode:
        return self.parse_ternary()

    def parse_ternary(self) -> AstNode:
        cond = self.parse_binary(0)
        if self.at(TokenType.QUESTION):
            tok = self.eat()
            then_e = self.parse_expression()
            self.expect(TokenType.COLON, "':' in conditional expression")
            else_e = self.parse_expression()
            return AstNode(NodeKind.TERNARY_OP, {}, (cond, then_e, else_e),
                           self.span_of(tok))
        return cond

    def parse_binary(self, tier: int) -> AstNode:
        if tier >= len(_BINARY_TIERS):
            return self.parse_unary()
        ops = _BINARY_TIERS[tier]
        left = self.parse_binary(tier + 1)
        while self.cur().type in ops:
            tok = self.eat()
            right = self.parse_binary(tier + 1)
            left = AstNode(NodeKind.BINARY_OP, {"op": ops[tok.type]},
                           (left, right), self.span_of(tok))
        return left

    def parse_unary(self) -> AstNode:
        t = self.cur().type
        if t in _UNARY_OPS:
            tok = self.eat()
            operand = self.parse_unary()
            return AstNode(NodeKind.UNARY_OP, {"op": _UNARY_OPS[tok.type]},
                           (operand,), self.span_of(tok))
        return self.parse_primary()

    def parse_primary(self) -> AstNode:
        self.check_unsupported()
        tok = self.cur()
        if tok.type is TokenType.NUMBER:
            self.eat()
            return AstNode(NodeKind.INT_LITERAL, _literal_attrs(tok.value),
                           (), self.span_of(tok))
        if tok.type is TokenType.IDENT:
            self.eat()
            node = AstNode(NodeKind.IDENTIFIER, {"name": tok.value}, (),
                           self.span_of(tok))
            if self.at(TokenType.LPAREN):
                return self.parse_call(tok.value, tok, system=False)
            return self.parse_selects(node)
        if tok.type is TokenType.SYSTEM_IDENT:
            self.eat()
            if self.at(TokenType.LPAREN):
                return self.parse_call(tok.value, tok, system=True)
            self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                       f"system identifier '{tok.value}' is only supported "
                       f"as a call", tok)
        if tok.type is TokenType.LPAREN:
            open_tok = self.eat()
            inner = self.parse_expression()
            self.expect_closing(TokenType.RPAREN, ")", open_tok)
            return inner
        if tok.type is TokenType.LBRACE:
            return self.parse_concat()
        self.error(DiagnosticKind.UNEXPECTED_TOKEN,
                   f"expected an expression, found {self._describe(tok)}")
        raise AssertionError("unreachable")

    def parse_call(self, name: str, name_tok: Token, system: bool) -> AstNode:
        open_tok = self.eat()  # '('
        args: list[AstNode] = []
        if not self.at(TokenType.RPAREN):
            while True:
                args.append(self.parse_expression())
                if not self.eat_if(TokenType.COMMA):
                    break
        self.expect_closing(TokenType.RPAREN, ")", open_tok)
        attrs = {"name": name}
        if system:
            attrs["system"] = "1"
        return AstNode(NodeKind.FUNC_CALL, attrs, tuple(args),
                       self.span_of(name_tok))

    def parse_selects(self, base: AstNode) -> AstNode:
        while self.at(TokenType.LBRACKET):
            open_tok = self.eat()
            first = self.parse_expression()
            if self.eat_if(TokenType.COLON):
                second = self.parse_expression()
                self.expect_closing(TokenType.RBRACKET, "]", open_tok)
                base = AstNode(NodeKind.RANGE_SELECT, {},
                               (base, first, second), self.span_of(open_tok))
            elif self.at(TokenType.PLUS_COLON, TokenType.MINUS_COLON):
                mode = self.eat().value
                second = self.parse_expression()
                self.expect_closing(TokenType.RBRACKET, "]", open_tok)
                base = AstNode(NodeKind.RANGE_SELECT, {"mode": mode},
                               (base, first, second), self.span_of(open_tok))
            else:
                self.expect_closing(TokenType.RBRACKET, "]", open_tok)
                base = AstNode(NodeKind.INDEX_SELECT, {}, (base, first),
                               self.span_of(open_tok))
        return base

    def parse_concat(self) -> AstNode:
        open_tok = self.eat()  # '{'
        first = self.parse_expression()
        if self.at(TokenType.LBRACE):
            # Replication: {count{item, ...}}
            inner_tok = self.eat()
            items = [self.parse_expression()]
            while self.eat_if(TokenType.COMMA):
                items.append(self.parse_expression())
            self.expect_closing(TokenType.RBRACE, "}", inner_tok)
            self.expect_closing(TokenType.RBRACE, "}", open_tok)
            return AstNode(NodeKind.REPLICATION, {},
                           tuple([first] + items), self.span_of(open_tok))
        items = [first]
        while self.eat_if(TokenType.COMMA):
            items.append(self.parse_expression())
        self.expect_closing(TokenType.RBRACE, "}", open_tok)
        return AstNode(NodeKind.CONCAT, {}, tuple(items),
                       self.span_of(open_tok))


def _literal_attrs(text: str) -> dict[str, str]:
    """Decompose a number literal into canonical width/base/digit parts."""
    text = text.replace("_", "")
    if "'" not in text:
        return {"width": "", "base": "", "digits": text}
    size, rest = text.split("'", 1)
    attrs = {"width": size}
    if rest and rest[0].lower() == "s":
        attrs["signed"] = "1"
        rest = rest[1:]
    attrs["base"] = rest[0].lower() if rest else "d"
    attrs["digits"] = rest[1:].lower() if len(rest) > 1 else "0"
    return attrs


def literal_value(node: AstNode) -> int | None:
    """Integer value of an IntLiteral node; None when it contains x/z/?."""
    digits = node.attrs.get("digits", "")
    base = {"b": 2, "o": 8, "d": 10, "h": 16, "": 10}[node.attrs.get("base", "")]
    if any(ch in "xz?" for ch in digits):
        return None
    try:
        return int(digits, base)
    except ValueError:
        return None


def parse_expression_text(text: str) -> AstNode | None:
    """Parse a standalone expression (e.g. a stored width), None on error."""
    tokens, lex_diags = lex(text)
    parser = _Parser(text, tokens)
    try:
        expr = parser.parse_expression()
    except _Resync:
        return None
    if lex_diags or parser.diagnostics or not parser.at(TokenType.EOF):
        return None
    return expr


def parse(source: str) -> list[AstNode] | SyntaxReport:
    """Parse Verilog text into a design forest, or report why it failed.

    Returns one Module node per ``module`` on success (an empty source
    yields an empty forest). On any lexical or grammar violation, returns a
    SyntaxReport whose diagnostics are sorted by source position.
    """
    tokens, lex_diags = lex(source)
    parser = _Parser(source, tokens)
    forest = parser.parse_source()
    diagnostics = lex_diags + parser.diagnostics
    if diagnostics:
        return make_report(source, diagnostics)
    return forest


def check_syntax(source: str) -> SyntaxReport:
    """Syntax gate: ok iff parse(source) succeeds, with identical diagnostics."""
    result = parse(source)
    if isinstance(result, SyntaxReport):
        return result
    return make_report(source, [])
