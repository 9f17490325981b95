"""Effective-dimensionality estimators.

Covers an expert domain prior (an upper bound), covariance-spectrum counts
(PCA variance threshold and participation ratio), the TwoNN manifold
estimator and a learning-curve plateau.  :func:`consensus` reduces any mix
of them to one conservative integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree


class DeffMethod(str, Enum):
    DOMAIN_PRIOR = "DomainPrior"
    PCA_THRESHOLD = "PcaThreshold"
    PARTICIPATION_RATIO = "ParticipationRatio"
    TWONN = "TwoNN"
    LEARNING_CURVE = "LearningCurve"
    CONSENSUS = "Consensus"


@dataclass(frozen=True)
class DeffEstimate:
    method: DeffMethod
    value: float
    detail: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        method = DeffMethod(self.method)
        object.__setattr__(self, "method", method)
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError(f"D_eff estimate must be positive and finite, got {self.value}")
        integral = (DeffMethod.DOMAIN_PRIOR, DeffMethod.PCA_THRESHOLD, DeffMethod.CONSENSUS)
        if method in integral and float(self.value) != int(self.value):
            raise ValueError(f"{method.value} estimates are integers, got {self.value}")

    def to_dict(self) -> dict[str, Any]:
        return {"method": self.method.value, "value": self.value, "detail": self.detail}


def domain_prior(n_guideline_variables: int, source: str = "") -> DeffEstimate:
    """Upper bound from the number of expert-validated guideline variables."""
    if int(n_guideline_variables) != n_guideline_variables or n_guideline_variables < 1:
        raise ValueError("domain prior must be a positive integer")
    return DeffEstimate(DeffMethod.DOMAIN_PRIOR, int(n_guideline_variables), {"source": source, "bound": "upper"})


class Spectrum:
    """Non-increasing, non-negative covariance eigenvalues."""

    def __init__(self, eigenvalues: Iterable[float]):
        lam = np.asarray(list(eigenvalues), dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("spectrum needs at least one eigenvalue")
        if not np.all(np.isfinite(lam)):
            raise ValueError("spectrum contains non-finite values")
        if np.any(lam < 0):
            raise ValueError("eigenvalues must be non-negative")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted non-increasing")
        self.eigenvalues = lam

    @classmethod
    def from_data(cls, X: np.ndarray) -> Spectrum:
        """Covariance spectrum of mean-centred data, population (1/n) normalisation."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 2:
            raise ValueError("need a 2-D array with at least two rows")
        Xc = X - X.mean(axis=0)
        cov = Xc.T @ Xc / X.shape[0]
        lam = np.linalg.eigvalsh(cov)[::-1]
        # eigvalsh can return tiny negatives for rank-deficient covariances
        return cls(np.clip(lam, 0.0, None))

    def __len__(self) -> int:
        return self.eigenvalues.size

    def __repr__(self) -> str:
        return f"Spectrum({self.eigenvalues.tolist()})"


def _as_spectrum(spec: Spectrum | Sequence[float]) -> Spectrum:
    return spec if isinstance(spec, Spectrum) else Spectrum(spec)


def _check_nondegenerate(lam: np.ndarray) -> float:
    total = float(lam.sum())
    if total <= 0:
        raise ValueError("degenerate spectrum: all eigenvalues are zero")
    return total


def pca_threshold(spec: Spectrum | Sequence[float], variance_fraction: float = 0.95) -> DeffEstimate:
    """Smallest k whose leading k eigenvalues explain ``variance_fraction`` of the total."""
    if not 0 < variance_fraction < 1:
        raise ValueError("variance_fraction must lie strictly between 0 and 1")
    lam = _as_spectrum(spec).eigenvalues
    total = _check_nondegenerate(lam)
    cum = 0.0
    for k, value in enumerate(lam, start=1):
        cum += value
        if cum / total >= variance_fraction:
            break
    return DeffEstimate(
        DeffMethod.PCA_THRESHOLD,
        k,
        {"variance_fraction": variance_fraction, "explained": cum / total, "n_components": int(lam.size)},
    )


def participation_ratio(spec: Spectrum | Sequence[float]) -> DeffEstimate:
    lam = _as_spectrum(spec).eigenvalues
    _check_nondegenerate(lam)
    # rescale by the largest eigenvalue first: keeps the ratio exact under scaling
    scaled = lam / lam[0]
    value = float(scaled.sum() ** 2 / np.dot(scaled, scaled))
    return DeffEstimate(DeffMethod.PARTICIPATION_RATIO, value, {"n_nonzero": int(np.count_nonzero(lam))})


TWONN_DISCARD_FRACTION = 0.10
TWONN_MIN_POINTS = 10
TWONN_MAX_TIED_FRACTION = 0.5


def twonn(points: np.ndarray, discard_fraction: float = TWONN_DISCARD_FRACTION) -> DeffEstimate:
    """Two-nearest-neighbour intrinsic dimension.

    For every point the ratio ``mu = r2 / r1`` of its second- to first-nearest
    neighbour distance follows a Pareto law with exponent equal to the
    intrinsic dimension.  The largest ``discard_fraction`` of ratios are
    treated as right-censored at the largest retained ratio, and the
    dimension is the censored maximum-likelihood estimate::

        d = k / (sum_{i<=k} log mu_(i) + (n - k) * log mu_(k))

    Censoring (rather than dropping) the tail keeps the estimator unbiased:
    dropping the top 10% alone inflates the estimate by roughly a third.

    Raises ``ValueError`` on fewer than 10 distinct points, or when most
    points have exactly tied first and second neighbours (lattice-like data
    where the ratio distribution carries no dimensional information).
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError("points must be a 2-D array (n_points, n_features)")
    n_input = X.shape[0]
    X = np.unique(X, axis=0)
    n = X.shape[0]
    if n < TWONN_MIN_POINTS:
        raise ValueError(f"insufficient points: {n} distinct (need >= {TWONN_MIN_POINTS})")
    if not 0 <= discard_fraction < 1:
        raise ValueError("discard_fraction must lie in [0, 1)")

    dist, _ = cKDTree(X).query(X, k=3)
    r1, r2 = dist[:, 1], dist[:, 2]
    mu = np.sort(r2 / r1)
    # equal spacing rarely yields bit-identical distances; compare with a tolerance
    tied = float(np.mean(mu - 1.0 <= 1e-9))
    if tied > TWONN_MAX_TIED_FRACTION:
        raise ValueError(
            f"degenerate neighbour ratios: {tied:.0%} of points have tied first and "
            "second neighbours (lattice-like data)"
        )
    k = n - int(math.floor(discard_fraction * n))
    log_mu = np.log(mu)
    denom = math.fsum(log_mu[:k]) + (n - k) * log_mu[k - 1]
    if denom <= 0:
        raise ValueError("degenerate neighbour ratios: all retained ratios equal 1")
    d = k / denom
    return DeffEstimate(
        DeffMethod.TWONN,
        float(d),
        {
            "estimator": "censored maximum likelihood",
            "discard_fraction": discard_fraction,
            "n_points": n,
            "n_duplicates_removed": n_input - n,
            "n_retained": k,
            "tied_fraction": tied,
        },
    )


def learning_curve_elbow(
    curve: Sequence[tuple[float, float]],
    c: float = 10.0,
    rel_tol: float = 0.01,
) -> DeffEstimate:
    """D_eff from the plateau of a learning curve.

    ``curve`` holds ``(N, metric)`` pairs with larger metric = better.  The
    plateau ``N*`` is the first sample size whose improvement per doubling to
    the next point is at most ``rel_tol`` times the total improvement over the
    curve (max minus first).  Returns ``N* / c``.
    """
    if not 10 <= c <= 100:
        raise ValueError("c must lie in [10, 100]")
    if len(curve) < 4:
        raise ValueError("learning curve needs at least 4 points")
    ns = np.array([float(p[0]) for p in curve])
    ms = np.array([float(p[1]) for p in curve])
    if np.any(ns <= 0) or np.any(np.diff(ns) <= 0):
        raise ValueError("sample sizes must be positive and strictly increasing")
    total = float(ms.max() - ms[0])
    tol = rel_tol * max(total, 0.0)
    per_doubling = np.diff(ms) / np.log2(ns[1:] / ns[:-1])
    hits = np.flatnonzero(per_doubling <= tol)
    if hits.size == 0:
        raise ValueError("no plateau: improvement per doubling never fell below tolerance")
    n_star = float(ns[hits[0]])
    return DeffEstimate(
        DeffMethod.LEARNING_CURVE,
        n_star / c,
        {"n_star": n_star, "c": c, "rel_tol": rel_tol, "total_improvement": total},
    )


def consensus(estimates: Sequence[DeffEstimate]) -> DeffEstimate:
    """Ceiling of the median, capped by the tightest domain prior."""
    if not estimates:
        raise ValueError("consensus needs at least one estimate")
    values = [float(e.value) for e in estimates]
    value = int(math.ceil(float(np.median(values)) - 1e-12))
    priors = [int(e.value) for e in estimates if e.method is DeffMethod.DOMAIN_PRIOR]
    capped = False
    if priors and value > min(priors):
        value, capped = min(priors), True
    return DeffEstimate(
        DeffMethod.CONSENSUS,
        max(value, 1),
        {
            "inputs": [e.to_dict() for e in estimates],
            "median": float(np.median(values)),
            "capped_by_prior": capped,
        },
    )


def estimate_from_data(
    X: np.ndarray,
    methods: Sequence[str] = ("pca", "pr", "twonn"),
    prior: int | None = None,
    variance_fraction: float = 0.95,
) -> dict[str, Any]:
    """Run the requested data-driven estimators and their consensus.

    Failing estimators are reported under ``errors``; consensus uses the rest.
    """
    X = np.asarray(X, dtype=float)
    runners = {
        "pca": lambda: pca_threshold(Spectrum.from_data(X), variance_fraction),
        "pr": lambda: participation_ratio(Spectrum.from_data(X)),
        "twonn": lambda: twonn(X),
    }
    unknown = [m for m in methods if m not in runners]
    if unknown:
        raise ValueError(f"unknown D_eff methods: {', '.join(unknown)}")
    estimates: list[DeffEstimate] = []
    errors: dict[str, str] = {}
    for m in methods:
        try:
            estimates.append(runners[m]())
        except ValueError as exc:
            errors[m] = str(exc)
    if prior is not None:
        estimates.append(domain_prior(prior))
    out: dict[str, Any] = {"estimates": [e.to_dict() for e in estimates], "errors": errors}
    out["consensus"] = consensus(estimates).to_dict() if estimates else None
    return out
