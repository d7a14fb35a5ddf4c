"""Prompt construction for the two-phase code generation loop.

Builds the structured first prompt (interface contract, behavior,
pseudocode-first instruction, output format rules) from a design spec,
builds regulated feedback prompts that quote syntax diagnostics with their
offending lines, and extracts Verilog from free-form model responses.

Templates are plain-text assets with ``{{field}}`` placeholders, shipped
with the package and overridable through a template directory, so prompt
wording stays reproducible per template version.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .verilog_ast import SyntaxReport

FEEDBACK_DIAGNOSTIC_CAP = 5

CORRECTION_INSTRUCTION = (
    "Fix every reported error and reply with the complete corrected module "
    "in a single fenced ```verilog code block. Output the whole module, "
    "not a diff or a fragment, and keep the module name and port list "
    "unchanged."
)

_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_$]*$")
_VERILOG_KEYWORDS = frozenset({
    "module", "endmodule", "input", "output", "inout", "wire", "reg",
    "assign", "always", "begin", "end", "if", "else", "case", "endcase",
    "for", "parameter", "localparam", "initial", "function", "endfunction",
    "generate", "endgenerate", "posedge", "negedge", "integer", "genvar",
    "signed", "default", "or",
})

_DIRECTIONS = ("in", "out", "inout")
_DIRECTION_ALIASES = {"input": "in", "output": "out"}


class DesignSpecError(ValueError):
    pass


class DuplicatePortError(DesignSpecError):
    pass


class TemplateError(ValueError):
    pass


def _check_identifier(name: str, what: str) -> str:
    if not _IDENT_RE.match(name) or name in _VERILOG_KEYWORDS:
        raise DesignSpecError(f"{what} {name!r} is not a legal Verilog "
                              f"identifier")
    return name


@dataclass(frozen=True)
class PortSpec:
    name: str
    direction: str
    width_bits: int = 1

    def __post_init__(self) -> None:
        _check_identifier(self.name, "port name")
        if self.direction not in _DIRECTIONS:
            raise DesignSpecError(
                f"port {self.name!r}: direction must be one of "
                f"{_DIRECTIONS}, got {self.direction!r}")
        if self.width_bits < 1:
            raise DesignSpecError(
                f"port {self.name!r}: width_bits must be >= 1")


@dataclass(frozen=True)
class ClockSpec:
    name: str
    edge: str = "pos"

    def __post_init__(self) -> None:
        _check_identifier(self.name, "clock name")
        if self.edge not in ("pos", "neg"):
            raise DesignSpecError("clock edge must be 'pos' or 'neg'")


@dataclass(frozen=True)
class ResetSpec:
    name: str
    active: str = "high"
    sync: bool = True

    def __post_init__(self) -> None:
        _check_identifier(self.name, "reset name")
        if self.active not in ("high", "low"):
            raise DesignSpecError("reset active must be 'high' or 'low'")


@dataclass(frozen=True)
class DesignSpec:
    """Structured natural-language description of one hardware block."""

    module_name: str
    ports: tuple[PortSpec, ...]
    behavior: str
    clock: ClockSpec | None = None
    reset: ResetSpec | None = None
    constraints: str = ""
    pseudocode_hints: str = ""

    def __post_init__(self) -> None:
        _check_identifier(self.module_name, "module name")
        seen = set()
        for port in self.ports:
            if port.name in seen:
                raise DuplicatePortError(f"duplicate port {port.name!r}")
            seen.add(port.name)
        if self.clock is not None and self.clock.name not in seen:
            raise DesignSpecError(
                f"clock {self.clock.name!r} is not among the ports")
        if not self.behavior.strip():
            raise DesignSpecError("behavior description must be non-empty")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "DesignSpec":
        try:
            ports = tuple(
                PortSpec(
                    name=p["name"],
                    direction=_DIRECTION_ALIASES.get(p["direction"],
                                                     p["direction"]),
                    width_bits=int(p.get("width_bits", 1)),
                )
                for p in doc["ports"])
            clock = None
            if doc.get("clock"):
                clock = ClockSpec(name=doc["clock"]["name"],
                                  edge=doc["clock"].get("edge", "pos"))
            reset = None
            if doc.get("reset"):
                reset = ResetSpec(name=doc["reset"]["name"],
                                  active=doc["reset"].get("active", "high"),
                                  sync=bool(doc["reset"].get("sync", True)))
            return cls(
                module_name=doc["module_name"],
                ports=ports,
                behavior=doc["behavior"],
                clock=clock,
                reset=reset,
                constraints=doc.get("constraints", "") or "",
                pseudocode_hints=doc.get("pseudocode_hints", "") or "",
            )
        except KeyError as exc:
            raise DesignSpecError(f"design spec is missing field {exc}") from None

    @classmethod
    def from_json_file(cls, path: str) -> "DesignSpec":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def to_json_dict(self) -> dict:
        doc: dict = {
            "module_name": self.module_name,
            "ports": [{"name": p.name, "direction": p.direction,
                       "width_bits": p.width_bits} for p in self.ports],
            "behavior": self.behavior,
        }
        if self.clock:
            doc["clock"] = {"name": self.clock.name, "edge": self.clock.edge}
        if self.reset:
            doc["reset"] = {"name": self.reset.name,
                            "active": self.reset.active,
                            "sync": self.reset.sync}
        if self.constraints:
            doc["constraints"] = self.constraints
        if self.pseudocode_hints:
            doc["pseudocode_hints"] = self.pseudocode_hints
        return doc

    def digest(self) -> str:
        payload = json.dumps(self.to_json_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


# -- templates ------------------------------------------------------------

REPIC_SECTION_ORDER = (
    "role_preamble",
    "interface_contract",
    "functional_description",
    "pseudocode_first_instruction",
    "output_format_rules",
)

_BLOCK_RE = re.compile(r"^\[\[(version|section):\s*([^\]]+?)\s*\]\]$",
                       re.MULTILINE)


def _parse_template(text: str, path: str) -> tuple[int, dict[str, str]]:
    marks = list(_BLOCK_RE.finditer(text))
    if not marks or marks[0].group(1) != "version":
        raise TemplateError(f"{path}: template must start with a "
                            f"[[version: N]] line")
    version = int(marks[0].group(2))
    sections: dict[str, str] = {}
    for i, mark in enumerate(marks[1:], start=1):
        if mark.group(1) != "section":
            raise TemplateError(f"{path}: unexpected {mark.group(0)!r}")
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        sections[mark.group(2)] = text[mark.end():end].strip("\n")
    return version, sections


@dataclass(frozen=True)
class TemplateSet:
    version: int
    repic_sections: dict[str, str]
    feedback_text: str

    @classmethod
    def load(cls, template_dir: str | None = None) -> "TemplateSet":
        if template_dir is not None:
            repic_text = Path(template_dir, "repic.txt").read_text()
            feedback_text = Path(template_dir, "feedback.txt").read_text()
        else:
            base = resources.files("lorecast") / "templates"
            repic_text = (base / "repic.txt").read_text()
            feedback_text = (base / "feedback.txt").read_text()
        version, sections = _parse_template(repic_text, "repic.txt")
        if tuple(sections) != REPIC_SECTION_ORDER:
            raise TemplateError(
                f"repic.txt must define exactly the sections "
                f"{REPIC_SECTION_ORDER} in order, got {tuple(sections)}")
        fb_version, fb_sections = _parse_template(feedback_text, "feedback.txt")
        if tuple(fb_sections) != ("feedback",) or fb_version != version:
            raise TemplateError("feedback.txt must define one 'feedback' "
                                "section with a matching version")
        return cls(version=version, repic_sections=sections,
                   feedback_text=fb_sections["feedback"])


def _substitute(template: str, fields: dict[str, str], where: str) -> str:
    def repl(match: re.Match) -> str:
        key = match.group(1)
        if key not in fields:
            raise TemplateError(f"{where}: no value for placeholder "
                                f"{{{{{key}}}}}")
        return fields[key]

    rendered = re.sub(r"\{\{(\w+)\}\}", repl, template)
    if "{{" in rendered:
        raise TemplateError(f"{where}: unresolved placeholder remains")
    return rendered


# -- prompt construction ------------------------------------------------------

@dataclass(frozen=True)
class RepicPrompt:
    sections: dict[str, str]
    rendered_text: str
    template_version: int


@dataclass(frozen=True)
class FeedbackPrompt:
    prior_code: str
    error_digest: tuple[str, ...]
    correction_instruction: str
    attempt_index: int
    rendered_text: str


def _port_table(spec: DesignSpec) -> str:
    rows = []
    for p in spec.ports:
        rows.append(f"  - {p.name}: direction={p.direction}, "
                    f"width={p.width_bits} bit"
                    + ("s" if p.width_bits != 1 else ""))
    return "\n".join(rows)


def build_repic(spec: DesignSpec,
                templates: TemplateSet | None = None) -> RepicPrompt:
    """Render the structured first prompt for a design spec.

    Rendering is deterministic: the same spec and template set always
    produce byte-identical text.
    """
    templates = templates or TemplateSet.load()
    clock_block = ""
    if spec.clock:
        clock_block = (f"\nClock: {spec.clock.name}, "
                       f"active edge: {spec.clock.edge}")
    reset_block = ""
    if spec.reset:
        sync_text = "synchronous" if spec.reset.sync else "asynchronous"
        reset_block = (f"\nReset: {spec.reset.name}, "
                       f"active: {spec.reset.active}, {sync_text}")
    constraints_block = ""
    if spec.constraints:
        constraints_block = f"\n\nConstraints:\n{spec.constraints}"
    hints_block = ""
    if spec.pseudocode_hints:
        hints_block = f"\nPseudocode hints:\n{spec.pseudocode_hints}"

    fields = {
        "module_name": spec.module_name,
        "port_table": _port_table(spec),
        "clock_block": clock_block,
        "reset_block": reset_block,
        "behavior": spec.behavior,
        "constraints_block": constraints_block,
        "hints_block": hints_block,
    }
    sections = {
        name: _substitute(body, fields, f"repic.txt section {name}")
        for name, body in templates.repic_sections.items()
    }
    rendered = "\n\n".join(sections[name] for name in REPIC_SECTION_ORDER)
    return RepicPrompt(sections=sections, rendered_text=rendered,
                       template_version=templates.version)


def render_diagnostic_entry(diag) -> str:
    return (f"line {diag.span.line}, col {diag.span.column}: "
            f"{diag.kind.value}: {diag.message}\n"
            f"    > {diag.offending_line_text}")


def build_feedback(prior_code: str, report: SyntaxReport, attempt_index: int,
                   templates: TemplateSet | None = None) -> FeedbackPrompt:
    """Render the regulated feedback prompt for one repair attempt.

    Quotes at most FEEDBACK_DIAGNOSTIC_CAP diagnostics (the first in source
    order) together with their offending source lines and the full prior
    code, and demands a complete corrected module rather than a diff.
    """
    if report.ok:
        raise ValueError("cannot build feedback from an ok syntax report")
    if attempt_index < 1:
        raise ValueError("attempt_index must be >= 1")
    templates = templates or TemplateSet.load()

    digest = tuple(render_diagnostic_entry(d)
                   for d in report.diagnostics[:FEEDBACK_DIAGNOSTIC_CAP])
    fields = {
        "attempt_index": str(attempt_index),
        "error_digest": "\n".join(digest),
        "prior_code": prior_code,
        "correction_instruction": CORRECTION_INSTRUCTION,
    }
    rendered = _substitute(templates.feedback_text, fields, "feedback.txt")
    return FeedbackPrompt(
        prior_code=prior_code,
        error_digest=digest,
        correction_instruction=CORRECTION_INSTRUCTION,
        attempt_index=attempt_index,
        rendered_text=rendered,
    )


# -- response handling ---------------------------------------------------------

_FENCE_RE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)
_VERILOG_TAGS = frozenset({"verilog", "systemverilog", "v", "sv"})


def extract_code(response: str) -> str | None:
    """Pull Verilog source out of a model response.

    Returns the last fenced block whose tag is verilog-like or whose body
    mentions ``module``; with no usable fence, falls back to the span from
    the first ``module`` to the last ``endmodule``. None when neither rule
    applies.
    """
    candidates = []
    for match in _FENCE_RE.finditer(response):
        tag = match.group(1).strip().lower()
        body = match.group(2)
        if tag in _VERILOG_TAGS or re.search(r"\bmodule\b", body):
            candidates.append(body)
    if candidates:
        return candidates[-1].strip("\n")

    start = re.search(r"\bmodule\b", response)
    if start:
        end = None
        for end in re.finditer(r"\bendmodule\b", response):
            pass
        if end and end.end() > start.start():
            return response[start.start():end.end()]
    return None
