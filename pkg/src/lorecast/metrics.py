"""Forecast-accuracy metrics: mean-level percentage error, normalized RMSE,
R², syntax correctness rate, and the rate-discounted conditional scores.

The percentage error here compares the *mean* forecast against the *mean*
ground truth rather than averaging per-design ratios; individual truths of
zero are fine, a zero truth mean is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class UndefinedMetricError(ValueError):
    """The metric is mathematically undefined for this input."""


@dataclass(frozen=True)
class EvalSet:
    pairs: tuple[tuple[float, float], ...]  # (forecast, truth)
    label: str = ""

    def __post_init__(self) -> None:
        for f, t in self.pairs:
            if not (math.isfinite(f) and math.isfinite(t)):
                raise ValueError(f"non-finite value in eval set {self.label!r}")

    @classmethod
    def from_columns(cls, forecasts, truths, label: str = "") -> "EvalSet":
        forecasts = list(forecasts)
        truths = list(truths)
        if len(forecasts) != len(truths):
            raise ValueError(
                f"length mismatch: {len(forecasts)} forecasts vs "
                f"{len(truths)} truths")
        return cls(pairs=tuple(zip(map(float, forecasts), map(float, truths))),
                   label=label)

    @property
    def n(self) -> int:
        return len(self.pairs)

    def mean_forecast(self) -> float:
        return sum(f for f, _ in self.pairs) / self.n

    def mean_truth(self) -> float:
        return sum(t for _, t in self.pairs) / self.n


@dataclass(frozen=True)
class MetricsReport:
    apme_percent: float
    nrmse_percent: float
    r2: float
    n: int
    mean_forecast: float
    mean_truth: float

    def to_json_dict(self, decimals: int = 2) -> dict:
        return {
            "apme_percent": round(self.apme_percent, decimals),
            "nrmse_percent": round(self.nrmse_percent, decimals),
            "r2": round(self.r2, 4),
            "n": self.n,
            "mean_forecast": self.mean_forecast,
            "mean_truth": self.mean_truth,
        }


def _require_nonempty(eval_set: EvalSet) -> None:
    if eval_set.n == 0:
        raise UndefinedMetricError("metric undefined on an empty eval set")


def apme(eval_set: EvalSet) -> float:
    """Absolute percentage error between mean forecast and mean truth."""
    _require_nonempty(eval_set)
    mean_truth = eval_set.mean_truth()
    if mean_truth == 0:
        raise UndefinedMetricError(
            "mean ground truth is zero; mean-level percentage error "
            "is undefined")
    return abs(eval_set.mean_forecast() - mean_truth) / mean_truth * 100.0


def nrmse(eval_set: EvalSet) -> float:
    """Root-mean-square error normalized by the ground-truth mean."""
    _require_nonempty(eval_set)
    mean_truth = eval_set.mean_truth()
    if mean_truth == 0:
        raise UndefinedMetricError(
            "mean ground truth is zero; normalized RMSE is undefined")
    mse = sum((t - f) ** 2 for f, t in eval_set.pairs) / eval_set.n
    return math.sqrt(mse) / mean_truth * 100.0


def r_squared(eval_set: EvalSet) -> float:
    """Coefficient of determination about the truth mean."""
    if eval_set.n < 2:
        raise UndefinedMetricError("r_squared needs at least 2 pairs")
    mean_truth = eval_set.mean_truth()
    ss_tot = sum((t - mean_truth) ** 2 for _, t in eval_set.pairs)
    if ss_tot == 0:
        raise UndefinedMetricError(
            "ground truth has zero variance; r_squared is undefined")
    ss_res = sum((t - f) ** 2 for f, t in eval_set.pairs)
    return 1.0 - ss_res / ss_tot


def report(eval_set: EvalSet) -> MetricsReport:
    return MetricsReport(
        apme_percent=apme(eval_set),
        nrmse_percent=nrmse(eval_set),
        r2=r_squared(eval_set),
        n=eval_set.n,
        mean_forecast=eval_set.mean_forecast(),
        mean_truth=eval_set.mean_truth(),
    )


def syntax_rate(outcomes: list[bool]) -> float:
    """Fraction of designs whose generated code passed the syntax gate."""
    if not outcomes:
        raise UndefinedMetricError("syntax rate undefined on an empty list")
    return sum(1 for ok in outcomes if ok) / len(outcomes)


def _check_fraction(name: str, value: float) -> None:
    if not 0 <= value <= 1:
        raise ValueError(f"{name} must be in [0, 1], got {value}")


def conditional_accuracy(rho: float, error_fraction: float) -> float:
    """Accuracy over the syntax-correct subset discounted by the rate:
    rho * (1 - E) * 100, with E the subset's mean-level error fraction."""
    _check_fraction("rho", rho)
    _check_fraction("error_fraction", error_fraction)
    return rho * (1.0 - error_fraction) * 100.0


def conditional_error(rho: float, error_fraction: float) -> float:
    return 100.0 - conditional_accuracy(rho, error_fraction)


def binary_correct(attempt_results: list[bool]) -> bool:
    """Strict correctness: true only when every attempt was correct."""
    if not attempt_results:
        raise UndefinedMetricError(
            "binary correctness undefined on an empty list")
    return all(attempt_results)
