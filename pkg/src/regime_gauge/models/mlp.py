"""ReLU multilayer perceptron with a sigmoid output, trained with Adam."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .._rng import make_rng
from ..datasets import TabularDataset
from .base import FittedModel, ModelSpec, Rung, prepare_training, sigmoid

_STREAM_INIT = 0
_STREAM_SHUFFLE = 1


class DivergenceError(RuntimeError):
    pass


def init_params(sizes: Sequence[int], rng: np.random.Generator) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """He-uniform weights ``U(-sqrt(6/fan_in), +sqrt(6/fan_in))`` and zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward_logits(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], X: np.ndarray) -> np.ndarray:
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        h = np.maximum(h @ W + b, 0.0)
    return (h @ weights[-1] + biases[-1])[:, 0]


def loss_and_grads(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Mean binary cross-entropy plus ``l2/2 * sum |W|^2`` and its exact gradients."""
    acts = [X]
    pre = []
    h = X
    for W, b in zip(weights[:-1], biases[:-1]):
        z = h @ W + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    with np.errstate(over="ignore", invalid="ignore"):
        logit = (h @ weights[-1] + biases[-1])[:, 0]
    n = y.size
    # overflow here surfaces as a non-finite loss, which callers check
    with np.errstate(over="ignore", invalid="ignore"):
        loss = float(np.mean(np.logaddexp(0.0, logit) - y * logit))
        loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W in weights)

    delta = ((sigmoid(logit) - y) / n)[:, None]
    gW: list[np.ndarray] = [None] * len(weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(biases)  # type: ignore[list-item]
    for layer in range(len(weights) - 1, -1, -1):
        gW[layer] = acts[layer].T @ delta + l2 * weights[layer]
        gb[layer] = delta.sum(axis=0)
        if layer:
            delta = (delta @ weights[layer].T) * (pre[layer - 1] > 0)
    return loss, gW, gb


def train_mlp(
    data: TabularDataset,
    env: str = "A",
    layers: Sequence[int] = (32,),
    l2: float = 1e-4,
    lr: float = 1e-3,
    epochs: int = 100,
    batch: int = 256,
    seed: int = 42,
    rung: Rung | str | None = None,
    feature_subset: Sequence[str] | None = None,
    betas: tuple[float, float] = (0.9, 0.999),
) -> FittedModel:
    """Mini-batch Adam on cross-entropy with L2 on the weights.

    Initialisation and per-epoch shuffling draw from independent streams
    keyed on ``seed``, so a given configuration always yields identical
    parameters.  ``diagnostics["train_loss"]`` is the full-data objective
    after the last epoch.
    """
    layers = [int(u) for u in layers]
    if not layers or any(u < 1 for u in layers):
        raise ValueError("layers must be a non-empty list of positive widths")
    if epochs < 0 or batch < 1 or lr <= 0 or l2 < 0:
        raise ValueError("need epochs >= 0, batch >= 1, lr > 0, l2 >= 0")
    if rung is None:
        rung = Rung.SHALLOW_MLP if len(layers) == 1 else Rung.DEEP_MLP
    hp = {"layers": layers, "l2": l2, "lr": lr, "epochs": epochs, "batch": batch}
    spec = ModelSpec(Rung(rung), feature_subset, hp, seed)
    if spec.rung.family != "mlp":
        raise ValueError(f"rung {spec.rung.value} is not an MLP rung")

    std, cols, X, y = prepare_training(data, env, spec.feature_subset)
    n, p = X.shape
    weights, biases = init_params([p, *layers, 1], make_rng(seed, _STREAM_INIT))
    shuffle_rng = make_rng(seed, _STREAM_SHUFFLE)

    b1, b2 = betas
    params = weights + biases
    m1 = [np.zeros_like(a) for a in params]
    m2 = [np.zeros_like(a) for a in params]
    step = 0
    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, gW, gb = loss_and_grads(weights, biases, X[idx], y[idx], l2)
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch}; lower the learning rate (lr={lr})"
                )
            step += 1
            c1, c2 = 1.0 - b1**step, 1.0 - b2**step
            for i, g in enumerate(gW + gb):
                m1[i] = b1 * m1[i] + (1.0 - b1) * g
                m2[i] = b2 * m2[i] + (1.0 - b2) * g * g
                params[i] -= lr * (m1[i] / c1) / (np.sqrt(m2[i] / c2) + 1e-8)

    final_loss, _, _ = loss_and_grads(weights, biases, X, y, l2)
    if not math.isfinite(final_loss):
        raise DivergenceError(f"non-finite training loss after training; lower the learning rate (lr={lr})")
    diag = {"train_loss": final_loss, "steps": step, "optimizer": "adam"}
    return FittedModel(spec, {"weights": weights, "biases": biases}, std, env, data.feature_names, cols, diag)
