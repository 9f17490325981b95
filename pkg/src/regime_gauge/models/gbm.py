"""Logistic-loss gradient boosting over depth-limited regression trees.

Trees are stored as flat node arrays (``feature``, ``threshold``, ``left``,
``right``, ``value``); a leaf has ``feature == -1``.  Rows go left when
``x[feature] <= threshold``.
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np

from ..datasets import DataError, TabularDataset
from .base import FittedModel, ModelSpec, Rung, prepare_training, sigmoid

_MIN_GAIN = 1e-12


def _best_split(rows: np.ndarray, xv: np.ndarray, r: np.ndarray) -> tuple[int, int, float] | None:
    """Variance-reduction split of one node.

    ``rows`` holds the node's row indices sorted by each feature (one row of
    the matrix per feature) and ``xv`` the matching feature values.
    Candidates are laid out feature-major with ascending thresholds, so the
    first maximum is the lowest feature index and then the lowest threshold.
    Returns ``(feature, position, gain)``; the split falls between sorted
    positions ``position`` and ``position + 1``.
    """
    count = rows.shape[1]
    if count < 2:
        return None
    rv = r[rows]
    left_sum = np.cumsum(rv, axis=1)[:, :-1]
    total = left_sum[0, -1] + rv[0, -1]
    n_left = np.arange(1, count, dtype=float)
    gain = left_sum**2 / n_left + (total - left_sum) ** 2 / (count - n_left) - total**2 / count
    gain[xv[:, 1:] <= xv[:, :-1]] = -np.inf  # no threshold between equal values
    f, pos = divmod(int(np.argmax(gain)), count - 1)
    best = float(gain[f, pos])
    if not best > _MIN_GAIN:
        return None
    return f, pos, best


def fit_tree(Xs: np.ndarray, r: np.ndarray, depth: int, order: np.ndarray | None = None) -> dict[str, list]:
    """Regression tree on residuals ``r`` with mean-value leaves.

    ``order`` is the column-wise ``argsort`` of ``Xs``; pass it in to reuse it
    across boosting rounds.
    """
    if order is None:
        order = np.argsort(Xs, axis=0, kind="stable")
    tree: dict[str, list] = {"feature": [], "threshold": [], "left": [], "right": [], "value": []}

    def grow(rows: np.ndarray, xv: np.ndarray, level: int) -> int:
        node = len(tree["feature"])
        for key, init in (("feature", -1), ("threshold", 0.0), ("left", -1), ("right", -1)):
            tree[key].append(init)
        tree["value"].append(float(r[rows[0]].mean()))
        split = _best_split(rows, xv, r) if level < depth else None
        if split is None:
            return node
        f, pos, _ = split
        thr = 0.5 * (xv[f, pos] + xv[f, pos + 1])
        go_left = np.zeros(Xs.shape[0], dtype=bool)
        go_left[rows[f, : pos + 1]] = True
        sel = go_left[rows]
        n_left = pos + 1
        p = rows.shape[0]
        tree["feature"][node] = f
        tree["threshold"][node] = float(thr)
        tree["left"][node] = grow(rows[sel].reshape(p, n_left), xv[sel].reshape(p, n_left), level + 1)
        tree["right"][node] = grow(rows[~sel].reshape(p, -1), xv[~sel].reshape(p, -1), level + 1)
        return node

    rows0 = np.ascontiguousarray(order.T)
    grow(rows0, np.take_along_axis(Xs.T, rows0, axis=1), 0)
    return tree


def tree_predict(tree: dict[str, Any], Xs: np.ndarray) -> np.ndarray:
    feature = np.asarray(tree["feature"], dtype=int)
    threshold = np.asarray(tree["threshold"], dtype=float)
    left = np.asarray(tree["left"], dtype=int)
    right = np.asarray(tree["right"], dtype=int)
    value = np.asarray(tree["value"], dtype=float)
    node = np.zeros(Xs.shape[0], dtype=int)
    rows = np.arange(Xs.shape[0])
    while True:
        f = feature[node]
        active = f >= 0
        if not active.any():
            return value[node]
        a = rows[active]
        goes_left = Xs[a, f[active]] <= threshold[node[active]]
        node[a] = np.where(goes_left, left[node[a]], right[node[a]])


def gbm_logit(params: dict[str, Any], Xs: np.ndarray) -> np.ndarray:
    F = np.full(Xs.shape[0], float(params["init"]))
    for tree in params["trees"]:
        F += params["lr"] * tree_predict(tree, Xs)
    return F


def _log_loss(y: np.ndarray, F: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, F) - y * F))


def train_gbm(
    data: TabularDataset,
    env: str = "A",
    estimators: int = 200,
    depth: int = 3,
    lr: float = 0.1,
    seed: int = 42,
    feature_subset=None,
) -> FittedModel:
    """Boost ``estimators`` trees of depth ``depth`` on the logistic-loss gradient.

    Each tree fits the residual ``y - p`` and its leaves hold the mean
    residual, which is a descent step on every leaf for ``lr <= 8``; the
    per-round training loss is therefore non-increasing and is recorded in
    ``diagnostics["loss_path"]``.  Training is deterministic; ``seed`` is
    kept only for interface symmetry.
    """
    if estimators < 0 or depth < 1 or not lr > 0:
        raise ValueError("need estimators >= 0, depth >= 1 and lr > 0")
    spec = ModelSpec(Rung.GBM, feature_subset, {"estimators": estimators, "depth": depth, "lr": lr}, seed)
    std, cols, X, y = prepare_training(data, env, spec.feature_subset)
    pos = float(y.mean())
    if pos in (0.0, 1.0):
        raise DataError("gradient boosting needs both classes in the training labels")
    init = math.log(pos / (1.0 - pos))
    order = np.argsort(X, axis=0, kind="stable")
    F = np.full(y.size, init)
    trees = []
    losses = [_log_loss(y, F)]
    for _ in range(estimators):
        tree = fit_tree(X, y - sigmoid(F), depth, order)
        F += lr * tree_predict(tree, X)
        trees.append(tree)
        losses.append(_log_loss(y, F))
    params = {"init": init, "lr": lr, "trees": trees}
    diag = {"train_loss": losses[-1], "loss_path": losses}
    return FittedModel(spec, params, std, env, data.feature_names, cols, diag)
