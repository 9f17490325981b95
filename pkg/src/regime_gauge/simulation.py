"""Simulation drivers on the shifting generator: capacity sweeps and CST runs."""

from __future__ import annotations

from dataclasses import replace
from typing import Any, Sequence

import numpy as np

from .datasets import SimConfig, TabularDataset, generate_shifting
from .evaluation import DEFAULT_DELTA, cst, shift_report
from .models import Rung, predict_proba, train_logistic, train_mlp

FIG2_COLUMNS = ("capacity", "repetition", "id_accuracy", "ood_accuracy", "robust_accuracy")


def _accuracy(model, data: TabularDataset) -> float:
    return float(np.mean((predict_proba(model, data) > 0.5) == (data.labels == 1)))


def fig2_point(config: SimConfig, capacity: int, repetition: int) -> dict[str, Any]:
    """Logistic regression on the invariant block plus ``capacity`` spurious features.

    In-distribution accuracy is measured on the training sample itself and
    robust accuracy is the lower of the two.
    """
    train, ood = generate_shifting(config, capacity, repetition)
    model = train_logistic(train, "A")
    id_acc = _accuracy(model, train)
    ood_acc = _accuracy(model, ood)
    return {
        "capacity": capacity,
        "repetition": repetition,
        "id_accuracy": id_acc,
        "ood_accuracy": ood_acc,
        "robust_accuracy": min(id_acc, ood_acc),
    }


def fig2_sweep(config: SimConfig, capacities: Sequence[int]) -> list[dict[str, Any]]:
    return [fig2_point(config, m, r) for m in capacities for r in range(config.repetitions)]


def mean_robust(rows: Sequence[dict[str, Any]], capacity: int) -> float:
    vals = [r["robust_accuracy"] for r in rows if r["capacity"] == capacity]
    if not vals:
        raise ValueError(f"no rows at capacity {capacity}")
    return float(np.mean(vals))


def cst_benchmark(
    config: SimConfig,
    repetition: int = 0,
    delta: float = DEFAULT_DELTA,
    capacity: int | None = None,
    challenger_layers: Sequence[int] = (128, 64),
    seed: int | None = None,
) -> dict[str, Any]:
    """Expert LR on the invariant features against an MLP on every feature.

    Both are trained on environment A and scored on A and C of one
    repetition; the CST decision and both degradations are returned.
    """
    m = config.max_spurious if capacity is None else capacity
    train, ood = generate_shifting(config, m, repetition)
    data = TabularDataset.concat([train, ood])
    expert = list(train.feature_names[: config.n_invariant])
    model_seed = config.seed if seed is None else seed
    base = train_logistic(data, "A", expert, seed=model_seed, rung=Rung.EXPERT_LR)
    rung = Rung.SHALLOW_MLP if len(challenger_layers) == 1 else Rung.DEEP_MLP
    chal = train_mlp(data, "A", challenger_layers, seed=model_seed, rung=rung)
    decision = cst(shift_report(base, data), shift_report(chal, data), delta)
    return {
        "repetition": repetition,
        "baseline_delta": decision.baseline.delta,
        "challenger_delta": decision.challenger.delta,
        "margin": decision.margin,
        "decision": decision.decision.value,
        "cst": decision,
    }


def cst_sweep(config: SimConfig, delta: float = DEFAULT_DELTA, **kw: Any) -> list[dict[str, Any]]:
    return [cst_benchmark(config, r, delta, **kw) for r in range(config.repetitions)]


def with_rho(config: SimConfig, rho: float) -> SimConfig:
    return replace(config, rho=rho)
