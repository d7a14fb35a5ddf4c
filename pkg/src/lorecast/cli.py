"""Command-line interface.

Subcommands: generate, check, features, train, forecast, eval, match-rate.
Results go to stdout (exactly one JSON document under --format json);
all error and progress text goes to stderr. Exit codes: 0 success,
1 domain failure (syntax refusal, undefined metric), 2 usage or config
error, 3 backend failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import __version__, metrics
from .ast_features import (
    EdaParams,
    FeatureVector,
    extract_features,
    nonconstant_width_names,
    SubtreeMatchConfig,
    subtree_match_rate,
)
from .config import CliConfig, ConfigError, resolve_config
from .llm_client import (
    HttpBackend,
    LlmError,
    ReplayBackend,
    ReplayScript,
    RetryingBackend,
    RetryPolicy,
)
from .metrics import EvalSet, UndefinedMetricError
from .pipeline import (
    ForecastRefusedError,
    Outcome,
    SessionWriter,
    forecast as run_forecast,
    forecast_from_session,
    generate_with_ipref,
)
from .predictor import (
    Dataset,
    PredictorError,
    TrainConfig,
    load_model,
    save_model,
    train,
)
from .promptgen import DesignSpec, DesignSpecError, TemplateSet
from .verilog_ast import SyntaxReport, check_syntax, parse

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_BACKEND = 3


def _err(message: str) -> None:
    print(f"lorecast: {message}", file=sys.stderr)


def _emit_json(doc) -> None:
    print(json.dumps(doc, indent=2, sort_keys=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorecast",
        description="Layout-aware power/TNS forecasts from natural-language "
                    "hardware descriptions.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    parser.add_argument("--config", metavar="PATH",
                        help="JSON config file")
    parser.add_argument("--format", choices=["json", "csv", "text"],
                        default=None, help="output format")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate",
                       help="generate Verilog from a design spec")
    p.add_argument("spec", help="design spec JSON file")
    p.add_argument("--replay", metavar="FILE",
                   help="replay script instead of a live backend")
    p.add_argument("--endpoint-url", dest="endpoint_url")
    p.add_argument("--model-id", dest="model_id")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("-o", "--output", help="output .v path")
    p.add_argument("--session-dir", dest="session_dir")

    p = sub.add_parser("check", help="syntax-check a Verilog file")
    p.add_argument("file")

    p = sub.add_parser("features",
                       help="extract the feature vector from a Verilog file")
    p.add_argument("file")
    _add_eda_flags(p)

    p = sub.add_parser("train",
                       help="train power/TNS models from a dataset CSV")
    p.add_argument("data", help="dataset CSV")
    p.add_argument("-o", "--output", required=True, help="model output path")
    p.add_argument("--trees", type=int, default=200)
    p.add_argument("--depth", type=int, default=6)
    p.add_argument("--learning-rate", type=float, default=0.05)
    p.add_argument("--min-leaf-rows", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("forecast",
                       help="forecast power/TNS from a spec or Verilog file")
    p.add_argument("source", help="design spec .json or Verilog .v file")
    p.add_argument("-m", "--model", dest="model_path")
    p.add_argument("--replay", action="append", metavar="FILE",
                   help="replay script (repeat per design with --batch)")
    p.add_argument("--endpoint-url", dest="endpoint_url")
    p.add_argument("--model-id", dest="model_id")
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--batch", action="store_true",
                   help="treat the source as a JSON array of design specs")
    _add_eda_flags(p)

    p = sub.add_parser("eval",
                       help="compare forecast and truth CSVs")
    p.add_argument("forecasts", help="forecast CSV")
    p.add_argument("truth", help="ground-truth CSV")
    p.add_argument("--residuals", metavar="OUT.csv",
                   help="write per-design residuals CSV")
    p.add_argument("--plot", metavar="OUT.png",
                   help="render forecast-vs-truth scatter panels")

    p = sub.add_parser("match-rate",
                       help="subtree match rate between two Verilog files")
    p.add_argument("reference")
    p.add_argument("candidate")
    p.add_argument("--min-nodes", type=int, default=2)
    p.add_argument("--no-normalize", action="store_true",
                   help="compare without identifier normalization")

    return parser


def _add_eda_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--clock", dest="clock_period_ns", type=float,
                   help="clock period in ns (required unless configured)")
    p.add_argument("--utilization", dest="target_utilization", type=float)
    p.add_argument("--effort", choices=["low", "medium", "high"])


def _config_from_args(args) -> CliConfig:
    cli_overrides = {
        key: getattr(args, key)
        for key in ("endpoint_url", "model_id", "max_iterations",
                    "clock_period_ns", "target_utilization", "effort",
                    "model_path", "session_dir")
        if getattr(args, key, None) is not None
    }
    if args.format is not None:
        cli_overrides["output_format"] = args.format
    return resolve_config(cli_overrides, args.config)


def _eda_from_config(cfg: CliConfig) -> EdaParams:
    if cfg.clock_period_ns is None:
        raise ConfigError("a clock period is required: pass --clock or set "
                          "eda.clock_period_ns in the config file")
    return EdaParams(clock_period_ns=cfg.clock_period_ns,
                     target_utilization=cfg.target_utilization,
                     effort=cfg.effort)


def _report_doc(report: SyntaxReport, filename: str) -> dict:
    return {
        "ok": report.ok,
        "file": filename,
        "diagnostics": [
            {"line": d.span.line, "column": d.span.column,
             "kind": d.kind.value, "message": d.message,
             "rendered": d.render(filename)}
            for d in report.diagnostics
        ],
    }


def _make_backend(cfg: CliConfig, replay_file: str | None):
    if replay_file:
        return ReplayBackend(ReplayScript.from_file(replay_file))
    if not cfg.backend.endpoint_url:
        raise ConfigError("no backend configured: pass --replay, "
                          "--endpoint-url, or set backend.endpoint_url")
    http = HttpBackend(endpoint_url=cfg.backend.endpoint_url,
                       model_id=cfg.backend.model_id,
                       timeout_s=cfg.backend.timeout_s)
    policy = RetryPolicy(max_attempts=cfg.backend.max_attempts)
    return RetryingBackend(http, policy)


def _session_log_path(session_dir: str, digest: str) -> str:
    os.makedirs(session_dir, exist_ok=True)
    base = os.path.join(session_dir, f"session-{digest[:12]}")
    path = base + ".jsonl"
    serial = 0
    while os.path.exists(path):
        serial += 1
        path = f"{base}-{serial}.jsonl"
    return path


# -- subcommands ----------------------------------------------------------

def cmd_generate(args, cfg: CliConfig) -> int:
    spec = DesignSpec.from_json_file(args.spec)
    backend = _make_backend(cfg, args.replay)
    templates = TemplateSet.load(cfg.template_dir)
    log_path = _session_log_path(cfg.session_dir, spec.digest())
    with SessionWriter(log_path) as log:
        session = generate_with_ipref(
            spec, backend, max_iterations=cfg.max_iterations,
            templates=templates, model_id=cfg.backend.model_id,
            session_log=log)

    code_path = None
    if session.final_code is not None:
        code_path = args.output or f"{spec.module_name}.v"
        with open(code_path, "w") as fh:
            fh.write(session.final_code)
            if not session.final_code.endswith("\n"):
                fh.write("\n")

    doc = {
        "module": spec.module_name,
        "outcome": session.outcome.value,
        "attempts": len(session.attempts),
        "code_path": code_path,
        "session_path": log_path,
    }
    if cfg.output_format == "text":
        print(f"{spec.module_name}: {session.outcome.value} after "
              f"{len(session.attempts)} attempt(s)")
        if code_path:
            print(f"code written to {code_path}")
        print(f"session log: {log_path}")
    else:
        _emit_json(doc)
    if session.outcome is Outcome.SYNTAX_OK:
        return EXIT_OK
    if session.outcome is Outcome.BACKEND_FAILED:
        return EXIT_BACKEND
    return EXIT_DOMAIN


def cmd_check(args, cfg: CliConfig) -> int:
    source = _read_text(args.file)
    report = check_syntax(source)
    if cfg.output_format == "json":
        _emit_json(_report_doc(report, args.file))
    else:
        for d in report.diagnostics:
            print(d.render(args.file))
    return EXIT_OK if report.ok else EXIT_DOMAIN


def cmd_features(args, cfg: CliConfig) -> int:
    eda = _eda_from_config(cfg)
    source = _read_text(args.file)
    forest = parse(source)
    if isinstance(forest, SyntaxReport):
        if cfg.output_format == "json":
            _emit_json(_report_doc(forest, args.file))
        else:
            for d in forest.diagnostics:
                print(d.render(args.file), file=sys.stderr)
        _err(f"{args.file}: cannot extract features from code with "
             f"syntax errors")
        return EXIT_DOMAIN
    fv = extract_features(forest, eda)
    for name in nonconstant_width_names(forest):
        _err(f"warning: width of '{name}' is not a constant; counted as "
             f"1 bit")
    if cfg.output_format == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(FeatureVector.csv_header())
        writer.writerow(fv.to_csv_row())
    elif cfg.output_format == "text":
        for name, value in zip(FeatureVector.csv_header(),
                               [fv.schema_version, *fv.values]):
            print(f"{name} {value}")
    else:
        _emit_json(fv.to_json_dict())
    return EXIT_OK


def cmd_train(args, cfg: CliConfig) -> int:
    data = Dataset.from_csv(args.data)
    train_cfg = TrainConfig(
        n_trees=args.trees,
        max_depth=args.depth,
        learning_rate=args.learning_rate,
        min_leaf_rows=args.min_leaf_rows,
        seed=args.seed,
    )
    model = train(data, train_cfg)
    save_model(model, args.output)
    doc = {"rows": len(data), "trees_per_target": args.trees,
           "model_path": args.output}
    if cfg.output_format == "text":
        print(f"trained on {len(data)} rows -> {args.output}")
    else:
        _emit_json(doc)
    return EXIT_OK


def cmd_forecast(args, cfg: CliConfig) -> int:
    if not cfg.model_path and not args.model_path:
        raise ConfigError("a trained model is required: pass -m/--model or "
                          "set model_path in the config file")
    model = load_model(args.model_path or cfg.model_path)
    eda = _eda_from_config(cfg)
    templates = TemplateSet.load(cfg.template_dir)

    if args.batch:
        return _forecast_batch(args, cfg, model, eda, templates)

    replay = args.replay[0] if args.replay else None
    try:
        if args.source.endswith(".json"):
            spec = DesignSpec.from_json_file(args.source)
            backend = _make_backend(cfg, replay)
            result = run_forecast(spec, model, eda, backend,
                                  max_iterations=cfg.max_iterations,
                                  templates=templates,
                                  model_id=cfg.backend.model_id)
        else:
            result = run_forecast(_read_text(args.source), model, eda)
    except ForecastRefusedError as exc:
        _emit_json(exc.refusal.to_json_dict())
        if exc.session.outcome is Outcome.BACKEND_FAILED:
            return EXIT_BACKEND
        return EXIT_DOMAIN

    if cfg.output_format == "text":
        f = result.forecast
        print(f"power_uW {f.power_uW:.3f}")
        print(f"tns_ns {f.tns_ns:.6f}")
    else:
        _emit_json(result.to_json_dict())
    return EXIT_OK


def _forecast_batch(args, cfg: CliConfig, model, eda,
                    templates: TemplateSet) -> int:
    from .pipeline import batch_forecast

    with open(args.source) as fh:
        docs = json.load(fh)
    if not isinstance(docs, list) or not docs:
        raise ConfigError("--batch expects a non-empty JSON array of "
                          "design specs")
    specs = [DesignSpec.from_json_dict(d) for d in docs]
    replays = args.replay or []
    if replays and len(replays) != len(specs):
        raise ConfigError(f"--batch with --replay needs one script per "
                          f"design ({len(specs)} designs, "
                          f"{len(replays)} scripts)")

    def backend_factory(i: int):
        return _make_backend(cfg, replays[i] if replays else None)

    results, rho = batch_forecast(specs, model, eda, backend_factory,
                                  max_iterations=cfg.max_iterations,
                                  templates=templates,
                                  model_id=cfg.backend.model_id)
    doc = {
        "syntax_rate": rho,
        "results": [r.to_json_dict() for r in results],
    }
    if cfg.output_format == "text":
        print(f"syntax rate: {rho:.3f} over {len(specs)} designs")
    else:
        _emit_json(doc)
    return EXIT_OK


def _read_table(path: str) -> tuple[list[str] | None, dict[str, list[float]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise UndefinedMetricError(f"{path}: empty CSV")
    header, body = rows[0], [r for r in rows[1:] if r]
    labels = None
    columns: dict[str, list[float]] = {}
    label_idx = header.index("design") if "design" in header else None
    if label_idx is not None:
        labels = [row[label_idx] for row in body]
    for j, name in enumerate(header):
        if j == label_idx:
            continue
        try:
            columns[name] = [float(row[j]) for row in body]
        except ValueError as exc:
            raise PredictorError(f"{path}: non-numeric value in column "
                                 f"{name!r}: {exc}") from None
    return labels, columns


def cmd_eval(args, cfg: CliConfig) -> int:
    f_labels, f_cols = _read_table(args.forecasts)
    t_labels, t_cols = _read_table(args.truth)
    shared = [name for name in f_cols if name in t_cols]
    if not shared:
        raise UndefinedMetricError(
            "the two CSVs share no numeric columns to evaluate")

    # Align forecast rows to the truth's design order when both carry
    # design labels; otherwise rows must already correspond.
    if f_labels is not None and t_labels is not None:
        index = {name: i for i, name in enumerate(f_labels)}
        missing = [name for name in t_labels if name not in index]
        if missing:
            raise UndefinedMetricError(
                f"designs missing from {args.forecasts}: {missing}")
        order = [index[name] for name in t_labels]
        f_cols = {name: [col[i] for i in order]
                  for name, col in f_cols.items()}

    per_target: dict[str, EvalSet] = {}
    reports = {}
    for name in shared:
        if len(f_cols[name]) != len(t_cols[name]):
            raise UndefinedMetricError(
                f"column {name!r}: {len(f_cols[name])} forecasts vs "
                f"{len(t_cols[name])} truths")
        eval_set = EvalSet.from_columns(f_cols[name], t_cols[name],
                                        label=name)
        per_target[name] = eval_set
        reports[name] = metrics.report(eval_set)

    labels = t_labels or [str(i) for i in
                          range(len(next(iter(per_target.values())).pairs))]
    if args.residuals:
        from .report import write_residuals_csv
        write_residuals_csv(args.residuals, labels, per_target)
    if args.plot:
        from .report import render_eval_figure
        render_eval_figure(args.plot, per_target, reports)

    doc = {
        "n": reports[shared[0]].n,
        "targets": {name: reports[name].to_json_dict() for name in shared},
    }
    if cfg.output_format == "text":
        for name in shared:
            rep = reports[name]
            print(f"{name}: APME={rep.apme_percent:.2f}% "
                  f"NRMSE={rep.nrmse_percent:.2f}% r2={rep.r2:.4f} "
                  f"(n={rep.n})")
    elif cfg.output_format == "csv":
        writer = csv.writer(sys.stdout)
        writer.writerow(["target", "apme_percent", "nrmse_percent", "r2", "n"])
        for name in shared:
            rep = reports[name]
            writer.writerow([name, f"{rep.apme_percent:.2f}",
                             f"{rep.nrmse_percent:.2f}", f"{rep.r2:.4f}",
                             rep.n])
    else:
        _emit_json(doc)
    return EXIT_OK


def cmd_match_rate(args, cfg: CliConfig) -> int:
    forests = []
    for path in (args.reference, args.candidate):
        result = parse(_read_text(path))
        if isinstance(result, SyntaxReport):
            _emit_json(_report_doc(result, path))
            _err(f"{path}: cannot compute match rate on code with "
                 f"syntax errors")
            return EXIT_DOMAIN
        forests.append(result)
    smr_cfg = SubtreeMatchConfig(
        min_subtree_nodes=args.min_nodes,
        normalize_identifiers=not args.no_normalize,
    )
    rate = subtree_match_rate(forests[0], forests[1], smr_cfg)
    if cfg.output_format == "text":
        print(f"{rate:.1f}")
    else:
        _emit_json({"match_rate_percent": round(rate, 2),
                    "reference": args.reference,
                    "candidate": args.candidate,
                    "min_subtree_nodes": smr_cfg.min_subtree_nodes,
                    "normalize_identifiers": smr_cfg.normalize_identifiers})
    return EXIT_OK


def _read_text(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


_COMMANDS = {
    "generate": cmd_generate,
    "check": cmd_check,
    "features": cmd_features,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "eval": cmd_eval,
    "match-rate": cmd_match_rate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except FileNotFoundError as exc:
        _err(f"file not found: {exc.filename}")
        return EXIT_USAGE
    except (UndefinedMetricError, PredictorError, DesignSpecError) as exc:
        _err(str(exc))
        return EXIT_DOMAIN
    except LlmError as exc:
        _err(str(exc))
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
