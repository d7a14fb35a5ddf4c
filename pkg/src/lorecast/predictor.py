"""Gradient-boosted regression trees for power and |TNS| forecasting.

Self-contained and deterministic: greedy squared-error split selection
over sorted unique feature values with midpoint thresholds, ties broken by
lowest feature index then lowest threshold, and no subsampling unless
explicitly configured. The same dataset and config always produce byte-
identical model files.

Power is trained on a log1p-transformed target by default because observed
magnitudes span five orders of magnitude; raw squared loss would let the
largest designs drown out the small ones.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from random import Random

import numpy as np

from . import metrics
from .ast_features import FEATURE_NAMES, SCHEMA_VERSION, FeatureVector, schema_digest

MODEL_FORMAT_VERSION = 1
MODEL_KIND = "lorecast-model"
MODEL_SUFFIX = ".lcmodel.json"

POWER_TARGET = "power_uW"
TNS_TARGET = "tns_ns"
TARGET_NAMES = (POWER_TARGET, TNS_TARGET)

_TRANSFORMS = {
    "identity": (lambda y: y, lambda y: y),
    "log1p": (math.log1p, math.expm1),
}


class PredictorError(ValueError):
    pass


class EmptyDatasetError(PredictorError):
    pass


class SchemaMismatchError(PredictorError):
    pass


class InvalidTargetError(PredictorError):
    pass


class ModelFormatError(PredictorError):
    """The model file is corrupt or not a model document at all."""


class ModelVersionError(PredictorError):
    """The model file uses an unsupported format version."""


@dataclass(frozen=True)
class Dataset:
    rows: tuple[tuple[FeatureVector, float, float], ...]
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        for fv, power, tns in self.rows:
            if fv.schema_version != self.schema_version:
                raise SchemaMismatchError(
                    f"row schema_version {fv.schema_version} != dataset "
                    f"schema_version {self.schema_version}")
            if not (math.isfinite(power) and math.isfinite(tns)):
                raise InvalidTargetError("targets must be finite")
            if power < 0 or tns < 0:
                raise InvalidTargetError(
                    "targets must be non-negative (TNS is stored as |TNS|)")

    def __len__(self) -> int:
        return len(self.rows)

    @staticmethod
    def csv_header() -> list[str]:
        return [*FEATURE_NAMES, POWER_TARGET, TNS_TARGET]

    @classmethod
    def from_rows(cls, rows) -> "Dataset":
        # TNS magnitudes are stored as absolute values.
        fixed = tuple((fv, float(p), abs(float(t))) for fv, p, t in rows)
        return cls(rows=fixed)

    @classmethod
    def from_csv(cls, path: str) -> "Dataset":
        import csv as _csv
        with open(path, newline="") as fh:
            reader = _csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise EmptyDatasetError(f"{path}: empty dataset file") from None
            if header != cls.csv_header():
                raise SchemaMismatchError(
                    f"{path}: header does not match feature schema "
                    f"v{SCHEMA_VERSION}")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise PredictorError(
                        f"{path}:{lineno}: expected {len(header)} columns, "
                        f"got {len(row)}")
                vals = [float(x) for x in row]
                fv = FeatureVector(values=tuple(vals[:len(FEATURE_NAMES)]))
                rows.append((fv, vals[-2], vals[-1]))
        if not rows:
            raise EmptyDatasetError(f"{path}: dataset has no rows")
        return cls.from_rows(rows)

    def to_csv(self, path: str) -> None:
        import csv as _csv
        with open(path, "w", newline="") as fh:
            writer = _csv.writer(fh)
            writer.writerow(self.csv_header())
            for fv, power, tns in self.rows:
                writer.writerow([repr(v) for v in fv.values]
                                + [repr(power), repr(tns)])

    def matrix(self) -> np.ndarray:
        return np.array([fv.values for fv, _, _ in self.rows], dtype=np.float64)

    def targets(self, name: str) -> np.ndarray:
        idx = {POWER_TARGET: 1, TNS_TARGET: 2}[name]
        return np.array([row[idx] for row in self.rows], dtype=np.float64)


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 200
    max_depth: int = 6
    learning_rate: float = 0.05
    min_leaf_rows: int = 2
    seed: int = 0
    power_transform: str = "log1p"
    tns_transform: str = "identity"
    row_subsample: float = 1.0
    feature_subsample: float = 1.0

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf_rows < 1:
            raise ValueError("n_trees, max_depth, min_leaf_rows must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        for name in (self.power_transform, self.tns_transform):
            if name not in _TRANSFORMS:
                raise ValueError(f"unknown target transform {name!r}")
        for frac in (self.row_subsample, self.feature_subsample):
            if not 0 < frac <= 1:
                raise ValueError("subsample fractions must be in (0, 1]")


@dataclass(frozen=True)
class RegressionTree:
    """Flat binary tree: internal nodes carry a feature test and child
    indices; leaves carry the fitted residual mean."""

    nodes: tuple[dict, ...]

    def predict_one(self, values) -> float:
        node = self.nodes[0]
        while "value" not in node:
            # Tie rule: value < threshold goes left, equal goes right.
            if values[node["feature_index"]] < node["threshold"]:
                node = self.nodes[node["left"]]
            else:
                node = self.nodes[node["right"]]
        return node["value"]

    def validate(self, n_features: int) -> None:
        for node in self.nodes:
            if "value" in node:
                if not math.isfinite(node["value"]):
                    raise ModelFormatError("non-finite leaf value")
            else:
                if not 0 <= node["feature_index"] < n_features:
                    raise ModelFormatError(
                        f"feature_index {node['feature_index']} out of range")
                if not math.isfinite(node["threshold"]):
                    raise ModelFormatError("non-finite split threshold")
                for key in ("left", "right"):
                    if not 0 <= node[key] < len(self.nodes):
                        raise ModelFormatError("child index out of range")


@dataclass(frozen=True)
class TargetEnsemble:
    trees: tuple[RegressionTree, ...]
    base_score: float
    transform: str

    def raw_prediction(self, values, learning_rate: float,
                       first_k: int | None = None) -> float:
        trees = self.trees if first_k is None else self.trees[:first_k]
        acc = self.base_score
        for tree in trees:
            acc += learning_rate * tree.predict_one(values)
        return acc


@dataclass(frozen=True)
class TrainedModel:
    power_ensemble: TargetEnsemble
    tns_ensemble: TargetEnsemble
    learning_rate: float
    schema_version: int
    train_seed: int
    metadata: dict = field(default_factory=dict)

    def ensemble(self, target: str) -> TargetEnsemble:
        return {POWER_TARGET: self.power_ensemble,
                TNS_TARGET: self.tns_ensemble}[target]


@dataclass(frozen=True)
class Forecast:
    power_uW: float
    tns_ns: float

    def __post_init__(self) -> None:
        if self.power_uW < 0 or self.tns_ns < 0:
            raise ValueError("forecasts are clamped non-negative")

    def to_json_dict(self) -> dict:
        return {"power_uW": self.power_uW, "tns_ns": self.tns_ns}


# -- training ---------------------------------------------------------------

def _best_split(x: np.ndarray, y: np.ndarray, feature_ids: np.ndarray,
                min_leaf: int) -> tuple[int, float] | None:
    """Best (feature, midpoint threshold) by squared-error gain.

    Score maximized is sum_left^2/n_left + sum_right^2/n_right; a split is
    kept only when it strictly beats the unsplit score. Ties resolve to the
    lowest feature index, then the lowest threshold, which makes training
    independent of dict/hash ordering.
    """
    n = len(y)
    if n < 2 * min_leaf:
        return None
    total = float(y.sum())
    parent_score = total * total / n

    best_gain = 0.0
    best: tuple[int, float] | None = None

    for f in feature_ids:
        col = x[:, f]
        order = np.argsort(col, kind="stable")
        sv = col[order]
        sy = y[order]
        csum = np.cumsum(sy)
        left_n = np.arange(1, n)
        right_n = n - left_n
        left_sum = csum[:-1]
        right_sum = total - left_sum
        score = left_sum * left_sum / left_n + right_sum * right_sum / right_n
        valid = (sv[:-1] < sv[1:]) & (left_n >= min_leaf) & (right_n >= min_leaf)
        if not valid.any():
            continue
        gains = np.where(valid, score - parent_score, -np.inf)
        i = int(np.argmax(gains))  # first max -> lowest threshold
        gain = float(gains[i])
        if gain > best_gain:
            threshold = (float(sv[i]) + float(sv[i + 1])) / 2.0
            if threshold > float(sv[i]):  # guard midpoint rounding collapse
                best_gain = gain
                best = (int(f), threshold)
    return best


def _fit_tree(x: np.ndarray, y: np.ndarray, cfg: TrainConfig,
              feature_ids: np.ndarray) -> RegressionTree:
    nodes: list[dict] = []

    def build(indices: np.ndarray, depth: int) -> int:
        node_id = len(nodes)
        nodes.append({})
        sub_y = y[indices]
        split = None
        if depth < cfg.max_depth and not np.all(sub_y == sub_y[0]):
            split = _best_split(x[indices], sub_y, feature_ids,
                               cfg.min_leaf_rows)
        if split is None:
            nodes[node_id] = {"value": float(sub_y.mean())}
            return node_id
        f, threshold = split
        mask = x[indices, f] < threshold
        left_id = build(indices[mask], depth + 1)
        right_id = build(indices[~mask], depth + 1)
        nodes[node_id] = {"feature_index": f, "threshold": threshold,
                          "left": left_id, "right": right_id}
        return node_id

    build(np.arange(len(y)), 0)
    return RegressionTree(nodes=tuple(nodes))


def _train_target(x: np.ndarray, raw_y: np.ndarray, transform: str,
                  cfg: TrainConfig) -> TargetEnsemble:
    fwd, _ = _TRANSFORMS[transform]
    y = np.array([fwd(v) for v in raw_y], dtype=np.float64)
    base = float(y.mean())
    current = np.full(len(y), base, dtype=np.float64)
    trees: list[RegressionTree] = []
    rng = Random(cfg.seed)
    n, d = x.shape

    for _ in range(cfg.n_trees):
        if cfg.row_subsample < 1.0:
            k = max(1, int(round(cfg.row_subsample * n)))
            row_ids = np.array(sorted(rng.sample(range(n), k)))
        else:
            row_ids = np.arange(n)
        if cfg.feature_subsample < 1.0:
            k = max(1, int(round(cfg.feature_subsample * d)))
            feature_ids = np.array(sorted(rng.sample(range(d), k)))
        else:
            feature_ids = np.arange(d)

        residual = y - current
        tree = _fit_tree(x[row_ids], residual[row_ids], cfg, feature_ids)
        trees.append(tree)
        update = np.array([tree.predict_one(row) for row in x])
        current = current + cfg.learning_rate * update

    return TargetEnsemble(trees=tuple(trees), base_score=base,
                          transform=transform)


def train(data: Dataset, cfg: TrainConfig = TrainConfig(),
          trained_at: str | None = None) -> TrainedModel:
    """Fit both target ensembles. Deterministic given (data, cfg); pass
    ``trained_at`` only if you want a timestamp embedded in the model file
    (it is otherwise omitted to keep model bytes reproducible)."""
    if len(data) == 0:
        raise EmptyDatasetError("cannot train on an empty dataset")
    if data.schema_version != SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"dataset schema_version {data.schema_version} != "
            f"supported {SCHEMA_VERSION}")
    x = data.matrix()
    metadata = {"row_count": len(data), "trained_at": trained_at}
    return TrainedModel(
        power_ensemble=_train_target(x, data.targets(POWER_TARGET),
                                     cfg.power_transform, cfg),
        tns_ensemble=_train_target(x, data.targets(TNS_TARGET),
                                   cfg.tns_transform, cfg),
        learning_rate=cfg.learning_rate,
        schema_version=data.schema_version,
        train_seed=cfg.seed,
        metadata=metadata,
    )


# -- prediction ------------------------------------------------------------------

def predict(model: TrainedModel, fv: FeatureVector) -> Forecast:
    if fv.schema_version != model.schema_version:
        raise SchemaMismatchError(
            f"feature schema_version {fv.schema_version} != model "
            f"schema_version {model.schema_version}")
    out = {}
    for target in TARGET_NAMES:
        ens = model.ensemble(target)
        raw = ens.raw_prediction(fv.values, model.learning_rate)
        _, inv = _TRANSFORMS[ens.transform]
        out[target] = max(0.0, inv(raw))
    return Forecast(power_uW=out[POWER_TARGET], tns_ns=out[TNS_TARGET])


def evaluate(model: TrainedModel, data: Dataset) -> dict[str, metrics.MetricsReport]:
    """APME / NRMSE / R² per target over a labelled dataset."""
    if len(data) == 0:
        raise EmptyDatasetError("cannot evaluate on an empty dataset")
    forecasts = [predict(model, fv) for fv, _, _ in data.rows]
    out = {}
    for target in TARGET_NAMES:
        pred = [getattr(f, target) for f in forecasts]
        truth = data.targets(target)
        out[target] = metrics.report(
            metrics.EvalSet.from_columns(pred, truth, label=target))
    return out


# -- serialization -----------------------------------------------------------------

def model_to_document(model: TrainedModel) -> dict:
    def ensemble_doc(ens: TargetEnsemble) -> dict:
        return {
            "transform": ens.transform,
            "base_score": ens.base_score,
            "trees": [{"nodes": list(t.nodes)} for t in ens.trees],
        }

    return {
        "kind": MODEL_KIND,
        "format_version": MODEL_FORMAT_VERSION,
        "schema_version": model.schema_version,
        "schema_digest": schema_digest(),
        "learning_rate": model.learning_rate,
        "train_seed": model.train_seed,
        "metadata": model.metadata,
        "targets": {
            POWER_TARGET: ensemble_doc(model.power_ensemble),
            TNS_TARGET: ensemble_doc(model.tns_ensemble),
        },
    }


def save_model(model: TrainedModel, path: str) -> None:
    doc = model_to_document(model)
    text = json.dumps(doc, sort_keys=True, indent=1)
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text + "\n")
    os.replace(tmp, path)


def model_from_document(doc: dict) -> TrainedModel:
    try:
        kind = doc["kind"]
        version = doc["format_version"]
    except (TypeError, KeyError) as exc:
        raise ModelFormatError(f"not a model document: missing {exc}") from None
    if kind != MODEL_KIND:
        raise ModelFormatError(f"unexpected document kind {kind!r}")
    if version != MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"model format version {version} is not supported "
            f"(expected {MODEL_FORMAT_VERSION})")
    if doc.get("schema_digest") != schema_digest():
        raise SchemaMismatchError(
            "model was trained against a different feature schema "
            f"(digest {doc.get('schema_digest')!r})")

    def ensemble_from(target: str) -> TargetEnsemble:
        try:
            sub = doc["targets"][target]
            trees = tuple(RegressionTree(nodes=tuple(t["nodes"]))
                          for t in sub["trees"])
            ens = TargetEnsemble(trees=trees,
                                 base_score=float(sub["base_score"]),
                                 transform=sub["transform"])
        except (TypeError, KeyError, ValueError) as exc:
            raise ModelFormatError(f"corrupt ensemble for {target}: {exc}") from None
        if not ens.trees:
            raise ModelFormatError(f"empty ensemble for {target}")
        if ens.transform not in _TRANSFORMS:
            raise ModelFormatError(f"unknown transform {ens.transform!r}")
        for tree in ens.trees:
            tree.validate(len(FEATURE_NAMES))
        return ens

    try:
        return TrainedModel(
            power_ensemble=ensemble_from(POWER_TARGET),
            tns_ensemble=ensemble_from(TNS_TARGET),
            learning_rate=float(doc["learning_rate"]),
            schema_version=int(doc["schema_version"]),
            train_seed=int(doc["train_seed"]),
            metadata=dict(doc.get("metadata") or {}),
        )
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, PredictorError):
            raise
        raise ModelFormatError(f"corrupt model document: {exc}") from None


def load_model(path: str) -> TrainedModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: corrupt model file: {exc}") from None
    return model_from_document(doc)
