"""Canonical Verilog renderer for parsed forests.

The output is normalized (canonical spacing, ``or``-separated sensitivity
lists, minimal parentheses) but structure-preserving: re-parsing the
printed text yields a forest isomorphic to the input for any forest the
parser itself produced.
"""

from __future__ import annotations

from .nodes import AstNode, MalformedNodeError, NodeKind

_INDENT = "  "

# Binding strength for minimal-parenthesis rendering; mirrors the parser's
# precedence tiers (weakest binds lowest).
_PRECEDENCE = {
    "||": 1, "&&": 2, "|": 3, "^": 4, "~^": 4, "&": 5,
    "==": 6, "!=": 6, "===": 6, "!==": 6,
    "<": 7, "<=": 7, ">": 7, ">=": 7,
    "<<": 8, ">>": 8, "<<<": 8, ">>>": 8,
    "+": 9, "-": 9,
    "*": 10, "/": 10, "%": 10,
    "**": 11,
}
_UNARY_PRECEDENCE = 12
_PRIMARY_PRECEDENCE = 13


def _check_arity(node: AstNode) -> None:
    expected = {NodeKind.BINARY_OP: 2, NodeKind.UNARY_OP: 1,
                NodeKind.TERNARY_OP: 3}.get(node.kind)
    if expected is not None and len(node.children) != expected:
        raise MalformedNodeError(node.kind, len(node.children), node.span)


def _prec(node: AstNode) -> int:
    if node.kind is NodeKind.BINARY_OP:
        return _PRECEDENCE[node.attrs["op"]]
    if node.kind is NodeKind.UNARY_OP:
        return _UNARY_PRECEDENCE
    if node.kind is NodeKind.TERNARY_OP:
        return 0
    return _PRIMARY_PRECEDENCE


def render_expr(node: AstNode) -> str:
    """Minimal-parenthesis canonical text of an expression subtree."""
    _check_arity(node)
    kind = node.kind
    if kind is NodeKind.IDENTIFIER:
        return node.attrs["name"]
    if kind is NodeKind.INT_LITERAL:
        return _render_literal(node)
    if kind is NodeKind.BINARY_OP:
        op = node.attrs["op"]
        p = _PRECEDENCE[op]
        left, right = node.children
        lt = render_expr(left)
        rt = render_expr(right)
        if _prec(left) < p:
            lt = f"({lt})"
        if _prec(right) <= p:
            rt = f"({rt})"
        return f"{lt} {op} {rt}"
    if kind is NodeKind.UNARY_OP:
        op = node.attrs["op"]
        (operand,) = node.children
        if op in ("posedge", "negedge"):  # sensitivity-list edge marker
            return f"{op} {render_expr(operand)}"
        text = render_expr(operand)
        if _prec(operand) < _UNARY_PRECEDENCE or operand.kind is NodeKind.UNARY_OP:
            text = f"({text})"
        return f"{op}{text}"
    if kind is NodeKind.TERNARY_OP:
        cond, then_e, else_e = node.children
        ct = render_expr(cond)
        if cond.kind is NodeKind.TERNARY_OP:
            ct = f"({ct})"
        return f"{ct} ? {render_expr(then_e)} : {render_expr(else_e)}"
    if kind is NodeKind.CONCAT:
        return "{" + ", ".join(render_expr(c) for c in node.children) + "}"
    if kind is NodeKind.REPLICATION:
        count = render_expr(node.children[0])
        items = ", ".join(render_expr(c) for c in node.children[1:])
        return "{" + count + "{" + items + "}}"
    if kind is NodeKind.INDEX_SELECT:
        base, idx = node.children
        return f"{render_expr(base)}[{render_expr(idx)}]"
    if kind is NodeKind.RANGE_SELECT:
        base, first, second = node.children
        sep = node.attrs.get("mode", ":")
        return (f"{render_expr(base)}[{render_expr(first)}"
                f"{sep}{render_expr(second)}]")
    if kind is NodeKind.FUNC_CALL:
        args = ", ".join(render_expr(c) for c in node.children)
        return f"{node.attrs['name']}({args})"
    raise ValueError(
        f"cannot render node kind {kind.value} as an expression "
        f"(line {node.span.line}, col {node.span.column})")


def _render_literal(node: AstNode) -> str:
    base = node.attrs.get("base", "")
    if not base:
        return node.attrs["digits"]
    width = node.attrs.get("width", "")
    signed = "s" if node.attrs.get("signed") else ""
    return f"{width}'{signed}{base}{node.attrs['digits']}"


def _range_text(attrs: dict[str, str], msb_key: str = "msb",
                lsb_key: str = "lsb") -> str:
    if msb_key in attrs:
        return f"[{attrs[msb_key]}:{attrs[lsb_key]}]"
    return ""


def _decl_text(node: AstNode) -> str:
    """Declaration text without the trailing semicolon."""
    attrs = node.attrs
    if node.kind is NodeKind.PORT_DECL:
        parts = [{"in": "input", "out": "output",
                  "inout": "inout"}[attrs["direction"]]]
        if attrs.get("reg"):
            parts.append("reg")
        if attrs.get("signed"):
            parts.append("signed")
        rng = _range_text(attrs)
        if rng:
            parts.append(rng)
        parts.append(attrs["name"])
        return " ".join(parts)
    if node.kind is NodeKind.NET_DECL:
        parts = ["wire"]
        if attrs.get("signed"):
            parts.append("signed")
        rng = _range_text(attrs)
        if rng:
            parts.append(rng)
        name = attrs["name"] + _range_text(attrs, "array_msb", "array_lsb")
        parts.append(name)
        return " ".join(parts)
    if node.kind is NodeKind.REG_DECL:
        var = attrs.get("var")
        if var:
            return f"{var} {attrs['name']}"
        parts = ["reg"]
        if attrs.get("signed"):
            parts.append("signed")
        rng = _range_text(attrs)
        if rng:
            parts.append(rng)
        name = attrs["name"] + _range_text(attrs, "array_msb", "array_lsb")
        parts.append(name)
        text = " ".join(parts)
        if node.children:
            text += f" = {render_expr(node.children[0])}"
        return text
    if node.kind is NodeKind.PARAM_DECL:
        kw = "localparam" if attrs.get("local") else "parameter"
        rng = _range_text(attrs)
        rng = f" {rng}" if rng else ""
        return (f"{kw}{rng} {attrs['name']} = "
                f"{render_expr(node.children[0])}")
    raise ValueError(f"not a declaration: {node.kind.value}")


class _Printer:
    def __init__(self) -> None:
        self.lines: list[str] = []

    def line(self, depth: int, text: str) -> None:
        self.lines.append(_INDENT * depth + text)

    # -- modules --

    def print_module(self, node: AstNode) -> None:
        attrs = node.attrs
        children = list(node.children)
        header_params: list[AstNode] = []
        header_ports: list[AstNode] = []
        idx = 0
        if attrs.get("ansi"):
            while idx < len(children) and children[idx].kind is NodeKind.PARAM_DECL:
                header_params.append(children[idx])
                idx += 1
            while idx < len(children) and children[idx].kind is NodeKind.PORT_DECL:
                header_ports.append(children[idx])
                idx += 1
        body = children[idx:]

        header = f"module {attrs['name']}"
        if header_params:
            inner = ", ".join(
                f"parameter {p.attrs['name']} = {render_expr(p.children[0])}"
                for p in header_params)
            header += f" #({inner})"
        if header_ports:
            inner = ", ".join(_decl_text(p) for p in header_ports)
            header += f" ({inner})"
        elif attrs.get("ports"):
            header += f" ({attrs['ports'].replace(',', ', ')})"
        elif attrs.get("paren"):
            header += " ()"
        self.line(0, header + ";")
        for item in body:
            self.print_item(item, 1)
        self.line(0, "endmodule")

    # -- module items --

    def print_item(self, node: AstNode, depth: int) -> None:
        kind = node.kind
        if kind in (NodeKind.PORT_DECL, NodeKind.NET_DECL, NodeKind.REG_DECL,
                    NodeKind.PARAM_DECL):
            self.line(depth, _decl_text(node) + ";")
        elif kind is NodeKind.CONTINUOUS_ASSIGN:
            lhs, rhs = node.children
            self.line(depth, f"assign {render_expr(lhs)} = {render_expr(rhs)};")
        elif kind is NodeKind.ALWAYS_BLOCK:
            event, body = node.children
            self.print_body(f"always {self._event_text(event)}", body, depth)
        elif kind is NodeKind.INITIAL_BLOCK:
            (body,) = node.children
            self.print_body("initial", body, depth)
        elif kind is NodeKind.INSTANCE:
            self.print_instance(node, depth)
        elif kind is NodeKind.GENERATE_BLOCK:
            self.line(depth, "generate")
            for item in node.children:
                self.print_item(item, depth + 1)
            self.line(depth, "endgenerate")
        elif kind is NodeKind.FUNCTION_DECL:
            self.print_function(node, depth)
        else:
            # Statements can appear directly inside generate bodies.
            self.print_stmt(node, depth)

    def _event_text(self, event: AstNode) -> str:
        (sens,) = event.children
        if sens.attrs.get("wildcard"):
            return "@(*)"
        items = " or ".join(render_expr(c) for c in sens.children)
        return f"@({items})"

    def print_body(self, prefix: str, body: AstNode, depth: int) -> None:
        if body.kind is NodeKind.SEQ_BLOCK:
            suffix = f" : {body.attrs['name']}" if body.attrs.get("name") else ""
            self.line(depth, f"{prefix} begin{suffix}")
            for stmt in body.children:
                self.print_stmt(stmt, depth + 1)
            self.line(depth, "end")
        else:
            self.line(depth, prefix)
            self.print_stmt(body, depth + 1)

    # -- statements --

    def print_stmt(self, node: AstNode, depth: int) -> None:
        kind = node.kind
        if kind is NodeKind.SEQ_BLOCK:
            suffix = f" : {node.attrs['name']}" if node.attrs.get("name") else ""
            self.line(depth, f"begin{suffix}")
            for stmt in node.children:
                self.print_stmt(stmt, depth + 1)
            self.line(depth, "end")
        elif kind is NodeKind.IF_STMT:
            self.print_if(node, depth)
        elif kind is NodeKind.CASE_STMT:
            variant = node.attrs.get("variant", "case")
            subject = node.children[0]
            self.line(depth, f"{variant} ({render_expr(subject)})")
            for item in node.children[1:]:
                self.print_case_item(item, depth + 1)
            self.line(depth, "endcase")
        elif kind is NodeKind.FOR_LOOP:
            init, cond, step, body = node.children
            head = (f"for ({self._assign_text(init)}; {render_expr(cond)}; "
                    f"{self._assign_text(step)})")
            self.print_body(head, body, depth)
        elif kind is NodeKind.BLOCKING_ASSIGN:
            self.line(depth, self._assign_text(node) + ";")
        elif kind is NodeKind.NONBLOCKING_ASSIGN:
            lhs, rhs = node.children
            self.line(depth, f"{render_expr(lhs)} <= {render_expr(rhs)};")
        elif kind in (NodeKind.PORT_DECL, NodeKind.NET_DECL, NodeKind.REG_DECL,
                      NodeKind.PARAM_DECL, NodeKind.CONTINUOUS_ASSIGN,
                      NodeKind.INSTANCE, NodeKind.ALWAYS_BLOCK,
                      NodeKind.INITIAL_BLOCK, NodeKind.GENERATE_BLOCK,
                      NodeKind.FUNCTION_DECL):
            self.print_item(node, depth)
        else:
            raise ValueError(
                f"cannot render node kind {kind.value} as a statement "
                f"(line {node.span.line}, col {node.span.column})")

    @staticmethod
    def _assign_text(node: AstNode) -> str:
        lhs, rhs = node.children
        return f"{render_expr(lhs)} = {render_expr(rhs)}"

    def print_if(self, node: AstNode, depth: int) -> None:
        cond = node.children[0]
        then_branch = node.children[1]
        else_branch = node.children[2] if len(node.children) > 2 else None
        # Guard the dangling-else case for hand-built trees: a bare inner
        # if-without-else under an outer else must be wrapped to keep the
        # else bound to this node on re-parse.
        needs_wrap = (else_branch is not None
                      and then_branch.kind is NodeKind.IF_STMT
                      and len(then_branch.children) == 2)
        head = f"if ({render_expr(cond)})"
        if needs_wrap:
            self.line(depth, f"{head} begin")
            self.print_stmt(then_branch, depth + 1)
            self.line(depth, "end")
        else:
            self.print_body(head, then_branch, depth)
        if else_branch is not None:
            self.print_body("else", else_branch, depth)

    def print_case_item(self, node: AstNode, depth: int) -> None:
        body = node.children[-1]
        if node.attrs.get("default"):
            self.print_body("default:", body, depth)
        else:
            labels = ", ".join(render_expr(c) for c in node.children[:-1])
            self.print_body(f"{labels}:", body, depth)

    def print_instance(self, node: AstNode, depth: int) -> None:
        params = [c for c in node.children if c.attrs.get("param")]
        ports = [c for c in node.children if not c.attrs.get("param")]
        text = node.attrs["module"]
        if params:
            text += f" #({self._conn_text(params)})"
        text += f" {node.attrs['name']} ({self._conn_text(ports)});"
        self.line(depth, text)

    @staticmethod
    def _conn_text(conns: list[AstNode]) -> str:
        parts = []
        for conn in conns:
            port = conn.attrs.get("port", "")
            expr = render_expr(conn.children[0]) if conn.children else ""
            parts.append(f".{port}({expr})" if port else expr)
        return ", ".join(parts)

    def print_function(self, node: AstNode, depth: int) -> None:
        attrs = node.attrs
        if attrs.get("ret") == "integer":
            head = f"function integer {attrs['name']};"
        else:
            rng = _range_text(attrs)
            rng = f" {rng}" if rng else ""
            head = f"function{rng} {attrs['name']};"
        self.line(depth, head)
        decls = node.children[:-1]
        body = node.children[-1] if node.children else None
        for decl in decls:
            self.line(depth + 1, _decl_text(decl) + ";")
        if body is not None:
            self.print_stmt(body, depth + 1)
        self.line(depth, "endfunction")


def pretty_print(forest: list[AstNode]) -> str:
    """Render a design forest back to Verilog text.

    Raises MalformedNodeError (or ValueError for non-renderable kinds) when
    a node violates the arity invariants.
    """
    printer = _Printer()
    for i, module in enumerate(forest):
        if module.kind is not NodeKind.MODULE:
            raise ValueError(
                f"forest roots must be Module nodes, got {module.kind.value}")
        if i:
            printer.lines.append("")
        printer.print_module(module)
    return "\n".join(printer.lines) + ("\n" if printer.lines else "")
