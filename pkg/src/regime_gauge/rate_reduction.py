"""Rate-reduction objective, its l1-penalised variant, and analytic gradients.

Coding rates use the class-weighted form::

    R(Z)   = logdet(I + d/(n eps) Z Z^T)
    R_c(Z) = sum_k (n_k / n) logdet(I + d/(n_k eps) Z_k Z_k^T)
    dR     = R(Z) - R_c(Z)

With the ``n_k / n`` weights ``dR >= 0`` for every partition, by concavity
of ``logdet``.  Log-determinants come from symmetric eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Any, Sequence

import numpy as np

from .datasets import SimConfig, TabularDataset, generate_shifting


@dataclass(frozen=True)
class Representation:
    """``Z`` is features x samples; ``labels`` assigns each column a class."""

    Z: np.ndarray
    labels: np.ndarray
    epsilon: float = 0.5
    lam: float = 0.0

    def __post_init__(self) -> None:
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape[1] == 0:
            raise ValueError("Z must be a non-empty d x n matrix")
        if not np.all(np.isfinite(Z)):
            raise ValueError("Z contains non-finite entries")
        labels = np.asarray(self.labels)
        if labels.shape != (Z.shape[1],):
            raise ValueError("need exactly one class label per column of Z")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "labels", labels)

    @property
    def d(self) -> int:
        return self.Z.shape[0]

    @property
    def n(self) -> int:
        return self.Z.shape[1]

    def classes(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.labels == c) for c in np.unique(self.labels)]


def _logdet_term(Z: np.ndarray, alpha: float) -> float:
    """``logdet(I + alpha Z Z^T)`` via eigenvalues of the smaller Gram matrix."""
    G = Z @ Z.T if Z.shape[0] <= Z.shape[1] else Z.T @ Z
    lam = np.clip(np.linalg.eigvalsh(G), 0.0, None)
    return float(np.sum(np.log1p(alpha * lam)))


def _inv_times(Z: np.ndarray, alpha: float) -> np.ndarray:
    """``(I + alpha Z Z^T)^{-1} Z`` from one symmetric eigendecomposition."""
    w, V = np.linalg.eigh(Z @ Z.T)
    w = 1.0 + alpha * np.clip(w, 0.0, None)
    if not np.all(np.isfinite(w)):
        raise np.linalg.LinAlgError("non-finite spectrum in rate-reduction gradient")
    return V @ ((V.T @ Z) / w[:, None])


def rate_reduction(rep: Representation) -> float:
    d, n, eps = rep.d, rep.n, rep.epsilon
    total = _logdet_term(rep.Z, d / (n * eps))
    parts = 0.0
    for idx in rep.classes():
        nk = idx.size
        parts += (nk / n) * _logdet_term(rep.Z[:, idx], d / (nk * eps))
    return total - parts


def sparse_rr_loss(rep: Representation) -> float:
    """``dR(Z) - lam * |Z|_1``, to be maximised."""
    return rate_reduction(rep) - rep.lam * float(np.abs(rep.Z).sum())


def rr_gradient(rep: Representation) -> np.ndarray:
    d, n, eps = rep.d, rep.n, rep.epsilon
    coef = 2.0 * d / (n * eps)
    grad = coef * _inv_times(rep.Z, d / (n * eps))
    for idx in rep.classes():
        # (n_k/n) * 2d/(n_k eps) collapses to the same leading coefficient
        grad[:, idx] -= coef * _inv_times(rep.Z[:, idx], d / (idx.size * eps))
    return grad


ACTIVE_THRESHOLD = 1e-3


def active_count(gains: np.ndarray, threshold: float = ACTIVE_THRESHOLD) -> int:
    top = float(np.max(np.abs(gains))) if gains.size else 0.0
    if top == 0.0:
        return 0
    return int(np.sum(np.abs(gains) > threshold * top))


@dataclass(frozen=True)
class GainFit:
    gains: np.ndarray
    objective: float
    steps: int


def fit_gains(
    X: np.ndarray,
    labels: np.ndarray,
    lam: float,
    epsilon: float = 10.0,
    step: float = 1.0,
    steps: int = 200,
) -> GainFit:
    """Projected ascent on the sparse rate-reduction loss over ``Z = diag(g) X^T``.

    ``g`` lives in ``[0, 1]^p`` and starts at ones; a constant row of ones is
    appended to ``Z`` and left ungated.  ``lam`` is a per-sample
    weight: the penalty is ``(lam / n) * |Z|_1``, which keeps its balance
    against ``dR`` independent of the sample count.  Each iteration takes a
    gradient step on ``dR`` and on the penalty, then clips.
    """
    n, p = X.shape
    # ungated, unpenalised constant row: with it class mean offsets change the
    # uncentred class moments, which the coding rates otherwise cannot see
    Xt = np.vstack([X.T, np.ones(n)])
    col_l1 = np.abs(Xt[:p]).sum(axis=1)
    lam_raw = lam / n
    g = np.ones(p + 1)
    for _ in range(steps):
        rep = Representation(g[:, None] * Xt, labels, epsilon)
        grad_g = np.einsum("ij,ij->i", rr_gradient(rep), Xt)[:p]
        g[:p] = np.clip(g[:p] + step * grad_g - step * lam_raw * col_l1, 0.0, 1.0)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("gain iteration diverged")
    Z = g[:p, None] * Xt[:p]
    objective = rate_reduction(Representation(g[:, None] * Xt, labels, epsilon)) - lam_raw * float(np.abs(Z).sum())
    return GainFit(g[:p].copy(), objective, steps)


# strong spurious signal and a small panel keep the demo quick and its trend visible
DEMO_CONFIG = SimConfig(spurious_strength=1.0, n_per_env=500, max_spurious=16)


def _pooled(train: TabularDataset, ood: TabularDataset) -> tuple[np.ndarray, np.ndarray]:
    X = np.vstack([train.features, ood.features])
    y = np.concatenate([train.labels, ood.labels])
    sd = X.std(axis=0)
    return (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0), y


def regime_adaptivity_demo(
    rho_values: Sequence[float],
    config: SimConfig = DEMO_CONFIG,
    lam: float = 0.02,
    epsilon: float = 10.0,
    step: float = 1.0,
    steps: int = 200,
    capacity: int | None = None,
) -> list[dict[str, Any]]:
    """Active feature directions left by sparse rate reduction, per stability level.

    For each ``rho`` and repetition, environments A and C of the shifting
    generator are pooled and a per-feature gain map is fitted with
    :func:`fit_gains`.  Rows report the mean and sample s.d. of the active
    count across repetitions.  A repetition that fails is recorded in the
    row's ``errors`` and the row is still emitted.
    """
    m = config.max_spurious if capacity is None else capacity
    rows = []
    for rho in rho_values:
        cfg = replace(config, rho=float(rho))
        counts: list[int] = []
        errors: list[str] = []
        for rep in range(cfg.repetitions):
            try:
                X, y = _pooled(*generate_shifting(cfg, m, rep))
                counts.append(active_count(fit_gains(X, y, lam, epsilon, step, steps).gains))
            except (FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
                errors.append(f"repetition {rep}: {exc}")
        mean = float(np.mean(counts)) if counts else math.nan
        sd = float(np.std(counts, ddof=1)) if len(counts) > 1 else 0.0 if counts else math.nan
        rows.append(
            {
                "rho": float(rho),
                "active_directions_mean": mean,
                "active_directions_sd": sd,
                "n_features": config.n_invariant + m,
                "repetitions": len(counts),
                "errors": errors,
            }
        )
    return rows
