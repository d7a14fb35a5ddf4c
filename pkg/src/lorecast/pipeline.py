"""End-to-end orchestration: regulated prompting with bounded syntax-repair
iteration (Phase I), then AST features and tree-ensemble prediction
(Phase II), with a fully recorded session for every run.

The repair loop sends at most ``max_iterations`` requests (default 10;
gains rarely appear beyond that). A response with no extractable code is
fed back with a synthesized "no code block found" diagnostic and still
consumes an attempt. Code that fails the syntax gate is never forecast:
the caller gets a refusal carrying the whole session instead.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from enum import Enum

from . import __version__
from .ast_features import EdaParams, FeatureVector, extract_features
from .llm_client import LlmError, LlmRequest, TerminalLlmError
from .predictor import Forecast, TrainedModel, predict
from .promptgen import (
    DesignSpec,
    TemplateSet,
    build_feedback,
    build_repic,
    extract_code,
)
from .verilog_ast import (
    DiagnosticKind,
    Span,
    SyntaxDiagnostic,
    SyntaxReport,
    check_syntax,
    parse,
)
from .verilog_ast.nodes import make_report

DEFAULT_MAX_ITERATIONS = 10
PREDICTOR_VERSION = f"lorecast-{__version__}"


class Outcome(Enum):
    SYNTAX_OK = "SyntaxOk"
    MAX_ITERATIONS_EXHAUSTED = "MaxIterationsExhausted"
    NO_CODE_EXTRACTED = "NoCodeExtracted"
    BACKEND_FAILED = "BackendFailed"


@dataclass(frozen=True)
class Attempt:
    index: int
    prompt_kind: str  # "repic" | "feedback"
    prompt_text: str
    response_text: str
    extracted_code: str | None
    syntax_report: SyntaxReport | None
    wall_ms: int

    def __post_init__(self) -> None:
        if self.index == 0 and self.prompt_kind != "repic":
            raise ValueError("attempt 0 must use the repic prompt")
        if self.index >= 1 and self.prompt_kind not in ("repic", "feedback"):
            raise ValueError(f"bad prompt_kind {self.prompt_kind!r}")

    def to_json_dict(self) -> dict:
        report = None
        if self.syntax_report is not None:
            report = {
                "ok": self.syntax_report.ok,
                "source_hash": self.syntax_report.source_hash,
                "diagnostics": [
                    {"line": d.span.line, "column": d.span.column,
                     "kind": d.kind.value, "message": d.message,
                     "offending_line_text": d.offending_line_text}
                    for d in self.syntax_report.diagnostics
                ],
            }
        return {
            "index": self.index,
            "prompt_kind": self.prompt_kind,
            "prompt_text": self.prompt_text,
            "response_text": self.response_text,
            "extracted_code": self.extracted_code,
            "syntax_report": report,
            "wall_ms": self.wall_ms,
        }


@dataclass(frozen=True)
class GenerationSession:
    spec_digest: str
    attempts: tuple[Attempt, ...]
    outcome: Outcome
    final_code: str | None
    max_iterations: int

    def __post_init__(self) -> None:
        if len(self.attempts) > self.max_iterations:
            raise ValueError("attempts exceed max_iterations")
        if self.outcome is Outcome.SYNTAX_OK:
            if self.final_code is None:
                raise ValueError("SyntaxOk session requires final_code")

    def to_json_dict(self) -> dict:
        return {
            "spec_digest": self.spec_digest,
            "outcome": self.outcome.value,
            "final_code": self.final_code,
            "max_iterations": self.max_iterations,
            "attempts": [a.to_json_dict() for a in self.attempts],
        }


@dataclass(frozen=True)
class ForecastResult:
    forecast: Forecast
    session: GenerationSession
    features: FeatureVector
    eda: EdaParams
    model_id_used: str
    predictor_version: str = PREDICTOR_VERSION

    def to_json_dict(self) -> dict:
        return {
            "forecast": self.forecast.to_json_dict(),
            "features": self.features.to_json_dict(),
            "eda": {"clock_period_ns": self.eda.clock_period_ns,
                    "target_utilization": self.eda.target_utilization,
                    "effort": self.eda.effort},
            "model_id_used": self.model_id_used,
            "predictor_version": self.predictor_version,
            "session": self.session.to_json_dict(),
        }


@dataclass(frozen=True)
class Refusal:
    session: GenerationSession
    reason: str

    def to_json_dict(self) -> dict:
        return {
            "refused": True,
            "reason": self.reason,
            "session": self.session.to_json_dict(),
        }


class ForecastRefusedError(Exception):
    """Phase II refused to run because the code failed the syntax gate."""

    def __init__(self, refusal: Refusal):
        super().__init__(refusal.reason)
        self.refusal = refusal
        self.session = refusal.session


# JSON Schema for the ForecastResult document emitted by the CLI.
FORECAST_RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["forecast", "features", "eda", "model_id_used",
                 "predictor_version", "session"],
    "properties": {
        "forecast": {
            "type": "object",
            "required": ["power_uW", "tns_ns"],
            "properties": {
                "power_uW": {"type": "number", "minimum": 0},
                "tns_ns": {"type": "number", "minimum": 0},
            },
        },
        "features": {
            "type": "object",
            "required": ["schema_version", "features"],
            "properties": {
                "schema_version": {"type": "integer"},
                "features": {"type": "object"},
            },
        },
        "eda": {
            "type": "object",
            "required": ["clock_period_ns", "target_utilization", "effort"],
            "properties": {
                "clock_period_ns": {"type": "number", "exclusiveMinimum": 0},
                "target_utilization": {"type": "number",
                                       "exclusiveMinimum": 0, "maximum": 1},
                "effort": {"enum": ["low", "medium", "high"]},
            },
        },
        "model_id_used": {"type": "string"},
        "predictor_version": {"type": "string"},
        "session": {
            "type": "object",
            "required": ["spec_digest", "outcome", "max_iterations",
                         "attempts"],
            "properties": {
                "spec_digest": {"type": "string"},
                "outcome": {"enum": [o.value for o in Outcome]},
                "max_iterations": {"type": "integer", "minimum": 1},
                "attempts": {"type": "array"},
                "final_code": {"type": ["string", "null"]},
            },
        },
    },
}


def _no_code_report(response_text: str) -> SyntaxReport:
    first_line = response_text.split("\n", 1)[0]
    diag = SyntaxDiagnostic(
        span=Span(1, 1, 0, 0),
        kind=DiagnosticKind.UNEXPECTED_TOKEN,
        message="no Verilog code block found in the response",
        offending_line_text=first_line,
    )
    return make_report(response_text, [diag])


def generate_with_ipref(spec: DesignSpec, backend,
                        max_iterations: int = DEFAULT_MAX_ITERATIONS,
                        templates: TemplateSet | None = None,
                        model_id: str = "",
                        session_log: "SessionWriter | None" = None,
                        ) -> GenerationSession:
    """Phase I: structured prompt, then bounded regulated-feedback repair.

    Attempt 0 uses the structured first prompt; every later attempt feeds
    back the latest code (or raw response when no code was extractable)
    with its diagnostics. The loop stops at the first syntax-clean attempt
    or after ``max_iterations`` attempts.
    """
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    templates = templates or TemplateSet.load()
    spec_digest = spec.digest()
    if session_log:
        session_log.write_header(spec_digest, max_iterations)

    attempts: list[Attempt] = []
    outcome = Outcome.MAX_ITERATIONS_EXHAUSTED
    final_code: str | None = None
    feed_text = ""       # code (or raw response) quoted by the next feedback
    last_report: SyntaxReport | None = None

    def finish(sess_outcome: Outcome) -> GenerationSession:
        session = GenerationSession(
            spec_digest=spec_digest,
            attempts=tuple(attempts),
            outcome=sess_outcome,
            final_code=final_code,
            max_iterations=max_iterations,
        )
        if session_log:
            session_log.write_outcome(session)
        return session

    for index in range(max_iterations):
        if index == 0:
            prompt_kind = "repic"
            prompt_text = build_repic(spec, templates).rendered_text
        else:
            prompt_kind = "feedback"
            assert last_report is not None
            prompt_text = build_feedback(feed_text, last_report, index,
                                         templates).rendered_text
        request = LlmRequest(prompt_text=prompt_text, model_id=model_id,
                             request_tag=f"{spec_digest[:12]}#{index}")
        try:
            response = backend.complete(request)
        except LlmError:
            return finish(Outcome.BACKEND_FAILED)

        code = extract_code(response.text)
        if code is None:
            report = _no_code_report(response.text)
            feed_text = response.text
        else:
            report = check_syntax(code)
            feed_text = code
            final_code = code
        attempt = Attempt(
            index=index,
            prompt_kind=prompt_kind,
            prompt_text=prompt_text,
            response_text=response.text,
            extracted_code=code,
            syntax_report=report,
            wall_ms=response.latency_ms,
        )
        attempts.append(attempt)
        if session_log:
            session_log.write_attempt(attempt)
        if report.ok:
            return finish(Outcome.SYNTAX_OK)
        last_report = report

    if final_code is None:
        outcome = Outcome.NO_CODE_EXTRACTED
    return finish(outcome)


def _code_only_session(code: str) -> GenerationSession:
    report = check_syntax(code)
    digest = hashlib.sha256(code.encode("utf-8")).hexdigest()
    attempt = Attempt(index=0, prompt_kind="repic", prompt_text="",
                      response_text="", extracted_code=code,
                      syntax_report=report, wall_ms=0)
    outcome = Outcome.SYNTAX_OK if report.ok else Outcome.MAX_ITERATIONS_EXHAUSTED
    return GenerationSession(
        spec_digest=digest,
        attempts=(attempt,),
        outcome=outcome,
        final_code=code,
        max_iterations=1,
    )


def forecast(source: DesignSpec | str, model: TrainedModel, eda: EdaParams,
             backend=None, max_iterations: int = DEFAULT_MAX_ITERATIONS,
             templates: TemplateSet | None = None, model_id: str = "",
             session_log: "SessionWriter | None" = None) -> ForecastResult:
    """Full flow: code from a spec (or given directly), features, forecast.

    Raises ForecastRefusedError when the final code is not syntax-clean;
    the refusal carries the session so callers can inspect every attempt.
    """
    if isinstance(source, DesignSpec):
        if backend is None:
            raise ValueError("a backend is required to forecast from a spec")
        session = generate_with_ipref(source, backend, max_iterations,
                                      templates, model_id, session_log)
        used_model_id = model_id or getattr(backend, "backend_id", "")
    else:
        session = _code_only_session(source)
        used_model_id = model_id
    return forecast_from_session(session, model, eda, used_model_id)


def forecast_from_session(session: GenerationSession, model: TrainedModel,
                          eda: EdaParams, model_id: str = "") -> ForecastResult:
    if session.outcome is not Outcome.SYNTAX_OK or session.final_code is None:
        raise ForecastRefusedError(Refusal(
            session=session,
            reason=f"no syntax-clean code to forecast "
                   f"(outcome: {session.outcome.value})"))
    forest = parse(session.final_code)
    if isinstance(forest, SyntaxReport):  # unreachable for SyntaxOk sessions
        raise ForecastRefusedError(Refusal(
            session=session, reason="final code failed to re-parse"))
    features = extract_features(forest, eda)
    result = predict(model, features)
    return ForecastResult(
        forecast=result,
        session=session,
        features=features,
        eda=eda,
        model_id_used=model_id,
    )


def batch_forecast(specs: list[DesignSpec], model: TrainedModel,
                   eda: EdaParams, backend_factory,
                   max_iterations: int = DEFAULT_MAX_ITERATIONS,
                   templates: TemplateSet | None = None,
                   model_id: str = "",
                   ) -> tuple[list[ForecastResult | Refusal], float]:
    """Run independent sessions over many specs, preserving input order.

    ``backend_factory`` is called with the design index to obtain that
    design's backend (pass ``lambda _: shared_backend`` to share one).
    Per-design failures are isolated as Refusal entries; the second return
    value is the aggregate syntax correctness rate.
    """
    from . import metrics

    if not specs:
        raise ValueError("batch_forecast requires a non-empty spec list")
    templates = templates or TemplateSet.load()
    results: list[ForecastResult | Refusal] = []
    ok_flags: list[bool] = []
    for i, spec in enumerate(specs):
        backend = backend_factory(i)
        session = generate_with_ipref(spec, backend, max_iterations,
                                      templates, model_id)
        ok_flags.append(session.outcome is Outcome.SYNTAX_OK)
        try:
            results.append(forecast_from_session(session, model, eda,
                                                 model_id))
        except ForecastRefusedError as exc:
            results.append(exc.refusal)
    return results, metrics.syntax_rate(ok_flags)


class SessionWriter:
    """Append-only JSONL session log: header, one line per attempt, outcome.

    A crash mid-session leaves the header and completed attempts on disk.
    """

    def __init__(self, path: str):
        self.path = path
        self._fh = open(path, "a")

    def _write(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def write_header(self, spec_digest: str, max_iterations: int) -> None:
        self._write({"record": "header", "spec_digest": spec_digest,
                     "max_iterations": max_iterations})

    def write_attempt(self, attempt: Attempt) -> None:
        self._write({"record": "attempt", **attempt.to_json_dict()})

    def write_outcome(self, session: GenerationSession) -> None:
        self._write({"record": "outcome", "outcome": session.outcome.value,
                     "final_code": session.final_code})

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "SessionWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def load_session(path: str) -> GenerationSession:
    """Rebuild a session from a JSONL log written by SessionWriter."""
    header = None
    attempts: list[Attempt] = []
    outcome_record = None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            kind = record.get("record")
            if kind == "header":
                header = record
            elif kind == "attempt":
                report = None
                if record["syntax_report"] is not None:
                    raw = record["syntax_report"]
                    diags = tuple(
                        SyntaxDiagnostic(
                            span=Span(d["line"], d["column"], 0, 0),
                            kind=DiagnosticKind(d["kind"]),
                            message=d["message"],
                            offending_line_text=d["offending_line_text"],
                        ) for d in raw["diagnostics"])
                    report = SyntaxReport(diagnostics=diags,
                                          source_hash=raw["source_hash"])
                attempts.append(Attempt(
                    index=record["index"],
                    prompt_kind=record["prompt_kind"],
                    prompt_text=record["prompt_text"],
                    response_text=record["response_text"],
                    extracted_code=record["extracted_code"],
                    syntax_report=report,
                    wall_ms=record["wall_ms"],
                ))
            elif kind == "outcome":
                outcome_record = record
    if header is None:
        raise ValueError(f"{path}: missing session header record")
    if outcome_record is None:
        raise ValueError(f"{path}: session log has no outcome record "
                         f"(interrupted session)")
    return GenerationSession(
        spec_digest=header["spec_digest"],
        attempts=tuple(attempts),
        outcome=Outcome(outcome_record["outcome"]),
        final_code=outcome_record["final_code"],
        max_iterations=header["max_iterations"],
    )
