"""Fixed-schema numeric features from Verilog ASTs, plus structural
similarity via subtree match rate.

The feature schema groups operators into synthesis cost classes (an adder
and a multiplier are different beasts on silicon) and totals declared bits
rather than declarations, since bit counts track area and power. Widths
are constant-folded through module parameters where possible; widths that
cannot be resolved count as a single bit and are reported by
``nonconstant_width_names``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from collections import Counter
from dataclasses import dataclass, field

from .verilog_ast import AstNode, NodeKind
from .verilog_ast.lexer import lex
from .verilog_ast.parser import literal_value, parse_expression_text
from .verilog_ast.tokens import TokenType

SCHEMA_VERSION = 1

CONSTRUCT_FEATURE_NAMES: tuple[str, ...] = (
    "module_count",
    "port_bit_total",
    "reg_bit_total",
    "wire_bit_total",
    "always_block_count",
    "seq_always_count",
    "comb_always_count",
    "continuous_assign_count",
    "blocking_assign_count",
    "nonblocking_assign_count",
    "if_count",
    "case_count",
    "case_item_total",
    "for_loop_count",
    "instance_count",
    "mux_ternary_count",
    "op_add_sub_count",
    "op_mul_count",
    "op_div_mod_count",
    "op_shift_count",
    "op_compare_count",
    "op_bitwise_count",
    "op_reduction_count",
    "op_logical_count",
    "concat_count",
    "max_expr_depth",
    "total_node_count",
)

EDA_FEATURE_NAMES: tuple[str, ...] = (
    "clock_period_ns",
    "target_utilization",
    "effort_low",
    "effort_medium",
    "effort_high",
)

FEATURE_NAMES: tuple[str, ...] = CONSTRUCT_FEATURE_NAMES + EDA_FEATURE_NAMES

EFFORT_LEVELS = ("low", "medium", "high")

_BINARY_OP_CLASS = {
    "+": "op_add_sub_count", "-": "op_add_sub_count",
    "*": "op_mul_count", "**": "op_mul_count",
    "/": "op_div_mod_count", "%": "op_div_mod_count",
    "<<": "op_shift_count", ">>": "op_shift_count",
    "<<<": "op_shift_count", ">>>": "op_shift_count",
    "==": "op_compare_count", "!=": "op_compare_count",
    "===": "op_compare_count", "!==": "op_compare_count",
    "<": "op_compare_count", "<=": "op_compare_count",
    ">": "op_compare_count", ">=": "op_compare_count",
    "&": "op_bitwise_count", "|": "op_bitwise_count",
    "^": "op_bitwise_count", "~^": "op_bitwise_count",
    "&&": "op_logical_count", "||": "op_logical_count",
}

_UNARY_OP_CLASS = {
    "+": "op_add_sub_count", "-": "op_add_sub_count",
    "~": "op_bitwise_count",
    "!": "op_logical_count",
    "&": "op_reduction_count", "|": "op_reduction_count",
    "^": "op_reduction_count", "~&": "op_reduction_count",
    "~|": "op_reduction_count", "~^": "op_reduction_count",
    # posedge/negedge markers are sensitivity metadata, not operators.
}

_EXPR_KINDS = frozenset({
    NodeKind.BINARY_OP, NodeKind.UNARY_OP, NodeKind.TERNARY_OP,
    NodeKind.CONCAT, NodeKind.REPLICATION, NodeKind.INDEX_SELECT,
    NodeKind.RANGE_SELECT, NodeKind.IDENTIFIER, NodeKind.INT_LITERAL,
    NodeKind.FUNC_CALL,
})


@dataclass(frozen=True)
class EdaParams:
    """Synthesis-knob inputs attached to every feature vector."""

    clock_period_ns: float
    target_utilization: float = 0.7
    effort: str = "medium"

    def __post_init__(self) -> None:
        if not self.clock_period_ns > 0:
            raise ValueError("clock_period_ns must be > 0")
        if not 0 < self.target_utilization <= 1:
            raise ValueError("target_utilization must be in (0, 1]")
        if self.effort not in EFFORT_LEVELS:
            raise ValueError(f"effort must be one of {EFFORT_LEVELS}")

    def as_values(self) -> tuple[float, ...]:
        one_hot = tuple(1.0 if self.effort == lvl else 0.0
                        for lvl in EFFORT_LEVELS)
        return (float(self.clock_period_ns),
                float(self.target_utilization)) + one_hot


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {self.schema_version}")
        if len(self.values) != len(FEATURE_NAMES):
            raise ValueError(
                f"expected {len(FEATURE_NAMES)} values, got {len(self.values)}")
        for name, v in zip(FEATURE_NAMES, self.values):
            if not (v >= 0 and v == v and v != float("inf")):
                raise ValueError(f"feature {name} must be finite and >= 0")

    def __getitem__(self, name: str) -> float:
        return self.values[FEATURE_NAMES.index(name)]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "features": {n: v for n, v in zip(FEATURE_NAMES, self.values)},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FeatureVector":
        feats = doc["features"]
        missing = [n for n in FEATURE_NAMES if n not in feats]
        if missing:
            raise ValueError(f"missing features: {missing}")
        return cls(values=tuple(float(feats[n]) for n in FEATURE_NAMES),
                   schema_version=int(doc["schema_version"]))

    @staticmethod
    def csv_header() -> list[str]:
        return ["schema_version", *FEATURE_NAMES]

    def to_csv_row(self) -> list[str]:
        return [str(self.schema_version)] + [_num_text(v) for v in self.values]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(self.csv_header())
        writer.writerow(self.to_csv_row())
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _num_text(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def schema_digest() -> str:
    """Digest of the schema names; model files embed it for safety checks."""
    payload = f"v{SCHEMA_VERSION}:" + ",".join(FEATURE_NAMES)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


# -- constant folding of width expressions -----------------------------------

def _param_env(module: AstNode) -> dict[str, AstNode]:
    env: dict[str, AstNode] = {}
    for node in module.walk():
        if node.kind is NodeKind.PARAM_DECL and node.children:
            env.setdefault(node.attrs["name"], node.children[0])
    return env


def _fold_expr(node: AstNode, env: dict[str, AstNode],
               seen: frozenset[str] = frozenset()) -> int | None:
    kind = node.kind
    if kind is NodeKind.INT_LITERAL:
        return literal_value(node)
    if kind is NodeKind.IDENTIFIER:
        name = node.attrs["name"]
        if name in env and name not in seen:
            return _fold_expr(env[name], env, seen | {name})
        return None
    if kind is NodeKind.UNARY_OP:
        inner = _fold_expr(node.children[0], env, seen)
        if inner is None:
            return None
        op = node.attrs["op"]
        if op == "-":
            return -inner
        if op == "+":
            return inner
        return None
    if kind is NodeKind.BINARY_OP:
        left = _fold_expr(node.children[0], env, seen)
        right = _fold_expr(node.children[1], env, seen)
        if left is None or right is None:
            return None
        op = node.attrs["op"]
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            return left // right if right != 0 else None
        return None
    return None


def fold_width_text(text: str, env: dict[str, AstNode]) -> int | None:
    expr = parse_expression_text(text)
    if expr is None:
        return None
    return _fold_expr(expr, env)


def _dimension_bits(attrs: dict[str, str], env: dict[str, AstNode],
                    msb_key: str, lsb_key: str) -> tuple[int, bool]:
    """(bit count, folded ok). Unresolvable widths count as 1 bit."""
    if msb_key not in attrs:
        return 1, True
    msb = fold_width_text(attrs[msb_key], env)
    lsb = fold_width_text(attrs[lsb_key], env)
    if msb is None or lsb is None:
        return 1, False
    return abs(msb - lsb) + 1, True


def declared_bits(node: AstNode, env: dict[str, AstNode]) -> tuple[int, bool]:
    """Total storage bits of a declaration: width times array words."""
    width, ok_w = _dimension_bits(node.attrs, env, "msb", "lsb")
    words, ok_a = _dimension_bits(node.attrs, env, "array_msb", "array_lsb")
    return width * words, ok_w and ok_a


def nonconstant_width_names(forest: list[AstNode]) -> list[str]:
    """Declared names whose width did not fold to a constant."""
    flagged = []
    for module in forest:
        env = _param_env(module)
        for node in module.walk():
            if node.kind in (NodeKind.PORT_DECL, NodeKind.NET_DECL,
                             NodeKind.REG_DECL):
                _, ok = declared_bits(node, env)
                if not ok:
                    flagged.append(node.attrs["name"])
    return flagged


# -- feature extraction --------------------------------------------------------

def _depth_scan(node: AstNode) -> tuple[int, int]:
    """(deepest expression found in subtree, expr depth of node itself)."""
    best = 0
    child_depths = []
    for child in node.children:
        b, d = _depth_scan(child)
        best = max(best, b)
        child_depths.append(d)
    if node.kind in _EXPR_KINDS:
        mine = 1 + max((d for c, d in zip(node.children, child_depths)
                        if c.kind in _EXPR_KINDS), default=0)
        return max(best, mine), mine
    return best, 0


def _is_edge_sensitive(always: AstNode) -> bool:
    event = always.children[0]
    sens = event.children[0]
    return any(c.kind is NodeKind.UNARY_OP
               and c.attrs.get("op") in ("posedge", "negedge")
               for c in sens.children)


def extract_features(forest: list[AstNode], eda: EdaParams) -> FeatureVector:
    """Count schema constructs over the forest and append the EDA knobs."""
    counts: Counter[str] = Counter()
    max_depth = 0
    total = 0

    for module in forest:
        env = _param_env(module)
        counts["module_count"] += 1
        for node in module.walk():
            total += 1
            kind = node.kind
            if kind is NodeKind.PORT_DECL:
                bits, _ = declared_bits(node, env)
                counts["port_bit_total"] += bits
                if node.attrs.get("reg"):
                    counts["reg_bit_total"] += bits
            elif kind is NodeKind.REG_DECL:
                var = node.attrs.get("var")
                if var == "integer":
                    counts["reg_bit_total"] += 32
                elif var != "genvar":
                    bits, _ = declared_bits(node, env)
                    counts["reg_bit_total"] += bits
            elif kind is NodeKind.NET_DECL:
                bits, _ = declared_bits(node, env)
                counts["wire_bit_total"] += bits
            elif kind is NodeKind.ALWAYS_BLOCK:
                counts["always_block_count"] += 1
                if _is_edge_sensitive(node):
                    counts["seq_always_count"] += 1
                else:
                    counts["comb_always_count"] += 1
            elif kind is NodeKind.CONTINUOUS_ASSIGN:
                counts["continuous_assign_count"] += 1
            elif kind is NodeKind.BLOCKING_ASSIGN:
                counts["blocking_assign_count"] += 1
            elif kind is NodeKind.NONBLOCKING_ASSIGN:
                counts["nonblocking_assign_count"] += 1
            elif kind is NodeKind.IF_STMT:
                counts["if_count"] += 1
            elif kind is NodeKind.CASE_STMT:
                counts["case_count"] += 1
            elif kind is NodeKind.CASE_ITEM:
                counts["case_item_total"] += 1
            elif kind is NodeKind.FOR_LOOP:
                counts["for_loop_count"] += 1
            elif kind is NodeKind.INSTANCE:
                counts["instance_count"] += 1
            elif kind is NodeKind.TERNARY_OP:
                counts["mux_ternary_count"] += 1
            elif kind is NodeKind.BINARY_OP:
                cls = _BINARY_OP_CLASS.get(node.attrs["op"])
                if cls:
                    counts[cls] += 1
            elif kind is NodeKind.UNARY_OP:
                cls = _UNARY_OP_CLASS.get(node.attrs["op"])
                if cls:
                    counts[cls] += 1
            elif kind in (NodeKind.CONCAT, NodeKind.REPLICATION):
                counts["concat_count"] += 1

        module_depth, _ = _depth_scan(module)
        max_depth = max(max_depth, module_depth)

    counts["max_expr_depth"] = max_depth
    counts["total_node_count"] = total

    values = tuple(float(counts[name]) for name in CONSTRUCT_FEATURE_NAMES)
    return FeatureVector(values=values + eda.as_values())


# -- identifier normalization ----------------------------------------------------

# Attribute keys holding user identifiers, visited in this order per node.
_IDENT_ATTR_KEYS = {
    NodeKind.MODULE: ("name",),
    NodeKind.PORT_DECL: ("name",),
    NodeKind.NET_DECL: ("name",),
    NodeKind.REG_DECL: ("name",),
    NodeKind.PARAM_DECL: ("name",),
    NodeKind.IDENTIFIER: ("name",),
    NodeKind.INSTANCE: ("module", "name"),
    NodeKind.PORT_CONNECTION: ("port",),
    NodeKind.SEQ_BLOCK: ("name",),
    NodeKind.FUNCTION_DECL: ("name",),
}

_WIDTH_ATTR_KEYS = ("msb", "lsb", "array_msb", "array_lsb")


def _rename_in_expr_text(text: str, rename) -> str:
    """Apply the rename map to identifier tokens inside a width expression."""
    tokens, _ = lex(text)
    pieces = []
    last = 0
    for tok in tokens:
        if tok.type is TokenType.IDENT:
            pieces.append(text[last:tok.offset])
            pieces.append(rename(tok.value))
            last = tok.offset + tok.length
    pieces.append(text[last:])
    return "".join(pieces)


def normalize_identifiers(forest: list[AstNode]) -> list[AstNode]:
    """Alpha-rename identifiers to v0, v1, ... in first-occurrence order.

    The mapping is shared across the whole forest, so repeated names map to
    the same canonical name everywhere; re-applying is idempotent.
    """
    mapping: dict[str, str] = {}

    def rename(name: str) -> str:
        if name not in mapping:
            mapping[name] = f"v{len(mapping)}"
        return mapping[name]

    def visit(node: AstNode) -> AstNode:
        attrs = dict(node.attrs)
        if node.kind is NodeKind.FUNC_CALL and attrs.get("system"):
            pass  # $signed and friends are language builtins
        else:
            for key in _IDENT_ATTR_KEYS.get(node.kind, ()):
                if attrs.get(key):
                    attrs[key] = rename(attrs[key])
            if node.kind is NodeKind.FUNC_CALL:
                attrs["name"] = rename(attrs["name"])
            if node.kind is NodeKind.MODULE and attrs.get("ports"):
                attrs["ports"] = ",".join(
                    rename(p) for p in attrs["ports"].split(","))
        for key in _WIDTH_ATTR_KEYS:
            if key in attrs:
                attrs[key] = _rename_in_expr_text(attrs[key], rename)
        children = tuple(visit(c) for c in node.children)
        return AstNode(node.kind, attrs, children, node.span)

    return [visit(root) for root in forest]


# -- subtree match rate -------------------------------------------------------------

@dataclass(frozen=True)
class SubtreeMatchConfig:
    min_subtree_nodes: int = 2
    normalize_identifiers: bool = True

    def __post_init__(self) -> None:
        if self.min_subtree_nodes < 1:
            raise ValueError("min_subtree_nodes must be >= 1")


def subtree_hashes(forest: list[AstNode]) -> list[tuple[str, int]]:
    """(structural digest, node count) for every subtree in the forest."""
    digests: dict[int, str] = {}
    sizes: dict[int, int] = {}

    def visit(node: AstNode) -> tuple[str, int]:
        key = id(node)
        if key in digests:
            return digests[key], sizes[key]
        child_parts = []
        size = 1
        for child in node.children:
            d, s = visit(child)
            child_parts.append(d)
            size += s
        payload = repr((node.kind.value, tuple(sorted(node.attrs.items())),
                        tuple(child_parts)))
        digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
        digests[key] = digest
        sizes[key] = size
        return digest, size

    out: list[tuple[str, int]] = []
    for root in forest:
        for node in root.walk():
            out.append(visit(node))
    return out


def subtree_match_rate(reference: list[AstNode], candidate: list[AstNode],
                       cfg: SubtreeMatchConfig = SubtreeMatchConfig()) -> float:
    """Percentage of the reference's qualifying subtrees whose structure
    also occurs in the candidate, matched with multiplicity."""
    if cfg.normalize_identifiers:
        reference = normalize_identifiers(reference)
        candidate = normalize_identifiers(candidate)

    ref_all = subtree_hashes(reference)
    cand_all = subtree_hashes(candidate)
    min_nodes = cfg.min_subtree_nodes

    ref_qualifying = Counter(d for d, size in ref_all if size >= min_nodes)
    cand_counts = Counter(d for d, _ in cand_all)

    denominator = sum(ref_qualifying.values())
    if denominator == 0:
        cand_qualifying = sum(1 for _, size in cand_all if size >= min_nodes)
        return 100.0 if cand_qualifying == 0 else 0.0

    matched = sum(min(count, cand_counts[d])
                  for d, count in ref_qualifying.items())
    return 100.0 * matched / denominator
