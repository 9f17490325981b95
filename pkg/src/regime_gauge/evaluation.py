"""Shift evaluation: AUROC, robust AUROC, degradation, CST and the firewall gate."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np
from scipy.stats import rankdata

from ._rng import make_rng
from .datasets import ENVIRONMENTS, TabularDataset
from .models import FittedModel, ModelSpec, predict_proba

DEFAULT_DELTA = 0.05
SHIFTED_ENV = "C"
DELTA_NOTE = "delta defaults to 0.05 AUROC, a materiality threshold rather than a fitted value; override with --delta"
BOOTSTRAP_RESAMPLES = 2000


class AurocUndefined(ValueError):
    pass


def auroc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUROC with average ranks, so ties count one half."""
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise AurocUndefined("AUROC undefined: labels contain a single class")
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def bootstrap_ci(
    scores: np.ndarray,
    labels: np.ndarray,
    resamples: int = BOOTSTRAP_RESAMPLES,
    seed: int = 42,
    confidence: float = 0.95,
) -> tuple[float, float]:
    """Percentile interval; resamples that lose a class are skipped."""
    rng = make_rng(seed)
    n = labels.size
    stats = []
    for _ in range(resamples):
        idx = rng.integers(0, n, n)
        try:
            stats.append(auroc(scores[idx], labels[idx]))
        except AurocUndefined:
            continue
    if not stats:
        raise AurocUndefined("AUROC undefined in every bootstrap resample")
    alpha = (1.0 - confidence) / 2.0
    lo, hi = np.quantile(stats, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


@dataclass(frozen=True)
class ShiftReport:
    per_env_auroc: dict[str, float]
    model: ModelSpec | None = None
    excluded: tuple[str, ...] = ()
    ci: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.per_env_auroc:
            raise ValueError("shift report needs at least one environment with an AUROC")
        ordered = {e: float(self.per_env_auroc[e]) for e in ENVIRONMENTS if e in self.per_env_auroc}
        if len(ordered) != len(self.per_env_auroc):
            raise ValueError(f"environments must be among {ENVIRONMENTS}")
        object.__setattr__(self, "per_env_auroc", ordered)

    @property
    def robust_auroc(self) -> float:
        return min(self.per_env_auroc.values())

    @property
    def delta(self) -> float | None:
        """AUROC_A - AUROC_C, or ``None`` when either is absent."""
        if "A" in self.per_env_auroc and "C" in self.per_env_auroc:
            return self.per_env_auroc["A"] - self.per_env_auroc["C"]
        return None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "per_env_auroc": dict(self.per_env_auroc),
            "robust_auroc": self.robust_auroc,
            "delta": self.delta,
            "excluded_envs": list(self.excluded),
        }
        if self.model is not None:
            out["model"] = self.model.to_dict()
        if self.ci:
            out["auroc_ci95"] = {k: list(v) for k, v in self.ci.items()}
        return out


def shift_report(
    model: FittedModel,
    data: TabularDataset,
    bootstrap: bool = False,
    seed: int = 42,
) -> ShiftReport:
    """Evaluate a frozen model on every environment present in ``data``."""
    probs = predict_proba(model, data)
    per_env: dict[str, float] = {}
    excluded: list[str] = []
    ci: dict[str, tuple[float, float]] = {}
    for env in data.environments:
        m = data.mask(env)
        try:
            per_env[env] = auroc(probs[m], data.labels[m])
        except AurocUndefined:
            warnings.warn(f"environment {env} has a single label class; excluded from robust AUROC", stacklevel=2)
            excluded.append(env)
            continue
        if bootstrap:
            ci[env] = bootstrap_ci(probs[m], data.labels[m], seed=seed)
    return ShiftReport(per_env, model.spec, tuple(excluded), ci)


class Decision(str, Enum):
    ADOPT_COMPLEXITY = "AdoptComplexity"
    DEFAULT_TO_SIMPLICITY = "DefaultToSimplicity"


@dataclass(frozen=True)
class CstDecision:
    baseline: ShiftReport
    challenger: ShiftReport
    delta_threshold: float
    decision: Decision
    margin: float
    robust_margin: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "decision": self.decision.value,
            "margin": self.margin,
            "margin_env": SHIFTED_ENV,
            "robust_margin": self.robust_margin,
            "delta_threshold": self.delta_threshold,
            "delta_note": DELTA_NOTE,
            "slope_advantage": degradation_slope_advantage(self.baseline, self.challenger),
            "baseline": self.baseline.to_dict(),
            "challenger": self.challenger.to_dict(),
        }


def cst(baseline: ShiftReport, challenger: ShiftReport, delta: float = DEFAULT_DELTA) -> CstDecision:
    """Adopt the challenger only if it beats the baseline on env C by more than ``delta``."""
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if set(baseline.per_env_auroc) != set(challenger.per_env_auroc):
        raise ValueError(
            f"reports cover different environments: {sorted(baseline.per_env_auroc)} "
            f"vs {sorted(challenger.per_env_auroc)}"
        )
    if SHIFTED_ENV not in baseline.per_env_auroc:
        raise ValueError(f"CST needs the shifted environment {SHIFTED_ENV}")
    margin = challenger.per_env_auroc[SHIFTED_ENV] - baseline.per_env_auroc[SHIFTED_ENV]
    decision = Decision.ADOPT_COMPLEXITY if margin > delta else Decision.DEFAULT_TO_SIMPLICITY
    return CstDecision(baseline, challenger, delta, decision, margin, challenger.robust_auroc - baseline.robust_auroc)


class Gate(str, Enum):
    PASS = "Pass"
    HALT = "Halt"


@dataclass(frozen=True)
class FirewallResult:
    gates: tuple[Gate, ...]
    theta: float

    @property
    def halt_rate(self) -> float:
        return sum(g is Gate.HALT for g in self.gates) / len(self.gates) if self.gates else 0.0


def firewall_gate(gatekeeper: Sequence[float], challenger: Sequence[float], theta: float) -> FirewallResult:
    g = np.asarray(gatekeeper, dtype=float)
    c = np.asarray(challenger, dtype=float)
    if g.shape != c.shape:
        raise ValueError(f"length mismatch: {g.size} gatekeeper vs {c.size} challenger probabilities")
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    halts = np.abs(c - g) > theta
    return FirewallResult(tuple(Gate.HALT if h else Gate.PASS for h in halts), theta)


def degradation_slope_advantage(simple: ShiftReport | float, complex_: ShiftReport | float) -> float:
    """``delta_complex - delta_simple``; positive means the simple model degrades less."""
    ds = simple.delta if isinstance(simple, ShiftReport) else float(simple)
    dc = complex_.delta if isinstance(complex_, ShiftReport) else float(complex_)
    if ds is None or dc is None:
        raise ValueError("both reports need AUROC on environments A and C")
    return dc - ds
