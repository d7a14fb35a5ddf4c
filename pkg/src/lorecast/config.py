"""CLI configuration with layered precedence.

Every knob resolves as: command-line flag > environment variable >
config-file entry > built-in default. The config file is a single JSON
document; environment variables are all prefixed LORECAST_ (the API key
itself, LORECAST_API_KEY, is read by the HTTP backend).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class BackendConfig:
    endpoint_url: str = ""
    model_id: str = ""
    timeout_s: float = 120.0
    max_attempts: int = 3


@dataclass(frozen=True)
class CliConfig:
    backend: BackendConfig = field(default_factory=BackendConfig)
    max_iterations: int = 10
    clock_period_ns: float | None = None
    target_utilization: float = 0.7
    effort: str = "medium"
    model_path: str = ""
    template_dir: str | None = None
    session_dir: str = "sessions"
    output_format: str = "json"

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.output_format not in ("json", "csv", "text"):
            raise ConfigError(
                f"output_format must be json, csv, or text, "
                f"got {self.output_format!r}")


def _load_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return doc


def _pick(cli_value, env_name: str, file_value, default, convert,
          env: dict) -> object:
    if cli_value is not None:
        return cli_value
    if env_name in env and env[env_name] != "":
        try:
            return convert(env[env_name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {env_name}: {exc}") from None
    if file_value is not None:
        try:
            return convert(file_value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config-file value: {exc}") from None
    return default


def resolve_config(cli: dict | None = None, config_path: str | None = None,
                   env: dict | None = None) -> CliConfig:
    """Merge CLI flags, environment, config file, and defaults."""
    cli = cli or {}
    env = os.environ if env is None else env
    doc = _load_file(config_path)
    backend_doc = doc.get("backend", {}) or {}
    eda_doc = doc.get("eda", {}) or {}

    def pick(key, env_suffix, file_value, default, convert=str):
        return _pick(cli.get(key), f"LORECAST_{env_suffix}", file_value,
                     default, convert, env)

    backend = BackendConfig(
        endpoint_url=pick("endpoint_url", "ENDPOINT_URL",
                          backend_doc.get("endpoint_url"), ""),
        model_id=pick("model_id", "MODEL_ID", backend_doc.get("model_id"), ""),
        timeout_s=pick("timeout_s", "TIMEOUT_S", backend_doc.get("timeout_s"),
                       120.0, float),
        max_attempts=pick("max_attempts", "MAX_ATTEMPTS",
                          backend_doc.get("max_attempts"), 3, int),
    )
    try:
        return CliConfig(
            backend=backend,
            max_iterations=pick("max_iterations", "MAX_ITERATIONS",
                                doc.get("max_iterations"), 10, int),
            clock_period_ns=pick("clock_period_ns", "CLOCK_PERIOD_NS",
                                 eda_doc.get("clock_period_ns"), None, float),
            target_utilization=pick("target_utilization",
                                    "TARGET_UTILIZATION",
                                    eda_doc.get("target_utilization"),
                                    0.7, float),
            effort=pick("effort", "EFFORT", eda_doc.get("effort"), "medium"),
            model_path=pick("model_path", "MODEL_PATH",
                            doc.get("model_path"), ""),
            template_dir=pick("template_dir", "TEMPLATE_DIR",
                              doc.get("template_dir"), None),
            session_dir=pick("session_dir", "SESSION_DIR",
                             doc.get("session_dir"), "sessions"),
            output_format=pick("output_format", "OUTPUT_FORMAT",
                               doc.get("output_format"), "json"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
