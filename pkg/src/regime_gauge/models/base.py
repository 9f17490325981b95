from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..datasets import DataError, Standardizer, TabularDataset, fit_standardizer


class Rung(str, Enum):
    EXPERT_LR = "expert_lr"
    EXTENDED_LR = "extended_lr"
    GBM = "gbm"
    SHALLOW_MLP = "shallow_mlp"
    DEEP_MLP = "deep_mlp"

    @property
    def family(self) -> str:
        return {"expert_lr": "logistic", "extended_lr": "logistic", "gbm": "gbm"}.get(self.value, "mlp")


# Defaults per rung.  MLP optimiser settings are ours; the ladder shapes are fixed.
DEFAULT_HYPERPARAMS: dict[Rung, dict[str, Any]] = {
    Rung.EXPERT_LR: {"l2": 0.0, "tol": 1e-6, "max_iter": 10000},
    Rung.EXTENDED_LR: {"l2": 0.0, "tol": 1e-6, "max_iter": 10000},
    Rung.GBM: {"estimators": 200, "depth": 3, "lr": 0.1},
    Rung.SHALLOW_MLP: {"layers": [32], "l2": 1e-4, "lr": 1e-3, "epochs": 100, "batch": 256},
    Rung.DEEP_MLP: {"layers": [128, 64], "l2": 1e-4, "lr": 1e-3, "epochs": 100, "batch": 256},
}


@dataclass(frozen=True)
class ModelSpec:
    rung: Rung
    feature_subset: tuple[str, ...] | None = None
    hyperparams: dict[str, Any] = field(default_factory=dict)
    seed: int = 42

    def __post_init__(self) -> None:
        rung = Rung(self.rung)
        object.__setattr__(self, "rung", rung)
        merged = {**DEFAULT_HYPERPARAMS[rung], **self.hyperparams}
        object.__setattr__(self, "hyperparams", merged)
        if self.feature_subset is not None:
            subset = tuple(self.feature_subset)
            if not subset:
                raise ValueError("feature_subset must be non-empty when given")
            object.__setattr__(self, "feature_subset", subset)

    def to_dict(self) -> dict[str, Any]:
        return {
            "rung": self.rung.value,
            "feature_subset": list(self.feature_subset) if self.feature_subset is not None else None,
            "hyperparams": self.hyperparams,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> ModelSpec:
        return cls(Rung(doc["rung"]), doc.get("feature_subset"), dict(doc.get("hyperparams", {})), int(doc.get("seed", 42)))


@dataclass(frozen=True)
class FittedModel:
    """A trained rung.  ``params`` layout depends on the family:

    * logistic: ``{"coef": [...], "intercept": b}``
    * mlp: ``{"weights": [W1, ...], "biases": [b1, ...]}``
    * gbm: ``{"init": F0, "lr": eta, "trees": [tree, ...]}``
    """

    spec: ModelSpec
    params: dict[str, Any]
    standardizer: Standardizer
    training_env: str
    feature_names: tuple[str, ...]
    columns: tuple[int, ...]
    diagnostics: dict[str, Any] = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": "regime-gauge-model@1",
            "spec": self.spec.to_dict(),
            "params": _to_jsonable(self.params),
            "standardizer": self.standardizer.to_dict(),
            "training_env": self.training_env,
            "feature_names": list(self.feature_names),
            "columns": list(self.columns),
            "diagnostics": _to_jsonable(self.diagnostics),
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> FittedModel:
        if doc.get("format") != "regime-gauge-model@1":
            raise ValueError("not a regime-gauge model document")
        spec = ModelSpec.from_dict(doc["spec"])
        params = doc["params"]
        if spec.rung.family == "logistic":
            params = {"coef": np.asarray(params["coef"], dtype=float), "intercept": float(params["intercept"])}
        elif spec.rung.family == "mlp":
            params = {
                "weights": [np.asarray(w, dtype=float) for w in params["weights"]],
                "biases": [np.asarray(b, dtype=float) for b in params["biases"]],
            }
        return cls(
            spec,
            params,
            Standardizer.from_dict(doc["standardizer"]),
            doc["training_env"],
            tuple(doc["feature_names"]),
            tuple(doc["columns"]),
            doc.get("diagnostics", {}),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> FittedModel:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _to_jsonable(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def prepare_training(
    data: TabularDataset, env: str, feature_subset: Sequence[str] | None
) -> tuple[Standardizer, tuple[int, ...], np.ndarray, np.ndarray]:
    if env not in data.environments:
        raise DataError(f"training environment {env!r} has no rows")
    std = fit_standardizer(data, env)
    cols = tuple(data.column_indices(feature_subset)) if feature_subset is not None else tuple(range(len(data.feature_names)))
    if not cols:
        raise DataError("no feature columns selected")
    m = data.mask(env)
    X = std.transform(data.features[m])[:, cols]
    return std, cols, X, data.labels[m].astype(float)


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
