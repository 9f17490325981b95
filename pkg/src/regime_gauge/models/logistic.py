from __future__ import annotations

from typing import Sequence

import numpy as np

from ..datasets import TabularDataset
from .base import FittedModel, ModelSpec, Rung, prepare_training, sigmoid


def _loss_and_grad(Xb: np.ndarray, y: np.ndarray, w: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    z = Xb @ w
    # log(1 + e^z) - y z, evaluated stably
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * np.dot(w[1:], w[1:]))
    g = Xb.T @ (sigmoid(z) - y) / y.size
    g[1:] += l2 * w[1:]
    return loss, g


def fit_logistic_arrays(
    X: np.ndarray,
    y: np.ndarray,
    l2: float = 0.0,
    tol: float = 1e-6,
    max_iter: int = 10000,
) -> tuple[np.ndarray, float, dict]:
    """Full-batch gradient descent on the mean log-loss plus ``l2/2 * |w|^2``.

    The intercept is not penalised.  The step is ``1 / L`` with ``L`` the
    Lipschitz constant of the gradient, so the loss decreases monotonically.
    Returns ``(coef, intercept, diagnostics)``.
    """
    if l2 < 0:
        raise ValueError("l2 must be non-negative")
    n, p = X.shape
    Xb = np.hstack([np.ones((n, 1)), X])
    lipschitz = np.linalg.eigvalsh(Xb.T @ Xb / n)[-1] / 4.0 + l2
    step = 1.0 / lipschitz
    w = np.zeros(p + 1)
    loss, g = _loss_and_grad(Xb, y, w, l2)
    gnorm = float(np.linalg.norm(g))
    it = 0
    while gnorm > tol and it < max_iter:
        w -= step * g
        loss, g = _loss_and_grad(Xb, y, w, l2)
        gnorm = float(np.linalg.norm(g))
        it += 1
    diag = {"converged": gnorm <= tol, "iterations": it, "grad_norm": gnorm, "train_loss": loss}
    return w[1:].copy(), float(w[0]), diag


def train_logistic(
    data: TabularDataset,
    env: str = "A",
    feature_subset: Sequence[str] | None = None,
    l2: float = 0.0,
    seed: int = 42,
    rung: Rung | str = Rung.EXPERT_LR,
    tol: float = 1e-6,
    max_iter: int = 10000,
) -> FittedModel:
    """Fit logistic regression on the ``env`` rows of ``data``.

    Features are standardised with statistics from ``env`` alone.  Gradient
    descent starts from zero and involves no randomness; ``seed`` is recorded
    for a uniform interface.  Under perfect separation with ``l2 = 0`` the
    fit reports ``converged = False`` and returns the last iterate.
    """
    spec = ModelSpec(Rung(rung), feature_subset, {"l2": l2, "tol": tol, "max_iter": max_iter}, seed)
    if spec.rung.family != "logistic":
        raise ValueError(f"rung {spec.rung.value} is not a logistic rung")
    std, cols, X, y = prepare_training(data, env, spec.feature_subset)
    coef, intercept, diag = fit_logistic_arrays(X, y, l2, tol, max_iter)
    return FittedModel(spec, {"coef": coef, "intercept": intercept}, std, env, data.feature_names, cols, diag)

