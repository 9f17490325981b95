"""Five-indicator Regime Index scorecard.

A scorecard holds one score per indicator (0, 0.5 or 1).  The summed total
maps onto three tiers; the temporal instability gate keeps any domain with
documented drift out of the Stable tier.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping

# Evidence thresholds used when filling a card by hand.  Not evaluated here.
TEMPORAL_DELTA_AUROC = 0.05
TEMPORAL_WINDOW_YEARS = (2, 5)
DATA_POVERTY_RATIO = 100.0
DATA_ABUNDANCE_RATIO = 1000.0
GROUND_TRUTH_KAPPA = 0.8

ALLOWED_SCORES = (0.0, 0.5, 1.0)


class IndicatorKind(str, Enum):
    TEMPORAL_STABILITY = "TemporalStability"
    CONTEXT_INVARIANCE = "ContextInvariance"
    DATA_TO_COMPLEXITY = "DataToComplexity"
    GROUND_TRUTH = "GroundTruth"
    CAUSAL_PRIORS = "CausalPriors"


# Box ordering: indicator 1 .. 5.
INDICATOR_ORDER = tuple(IndicatorKind)


class Tier(str, Enum):
    STABLE = "Stable"
    BORDERLINE = "Borderline"
    SHIFTING = "Shifting"

    @property
    def rank(self) -> int:
        return _TIER_RANK[self]


_TIER_RANK = {Tier.STABLE: 0, Tier.BORDERLINE: 1, Tier.SHIFTING: 2}


class Recommendation(str, Enum):
    COMPRESSION_MANDATORY = "CompressionMandatory"
    RUN_CST = "RunCST"
    COMPLEXITY_VIABLE = "ComplexityViable"


class ScorecardError(ValueError):
    pass


@dataclass(frozen=True)
class Indicator:
    kind: IndicatorKind
    score: float
    note: str = ""

    def __post_init__(self) -> None:
        kind = IndicatorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if isinstance(self.score, bool) or not isinstance(self.score, (int, float)):
            raise ScorecardError(f"{kind.value}: score must be a number, got {self.score!r}")
        score = float(self.score)
        if score not in ALLOWED_SCORES:
            raise ScorecardError(f"{kind.value}: score must be one of 0, 0.5, 1 (got {self.score!r})")
        object.__setattr__(self, "score", score)
        if score == 0.5 and not self.note.strip():
            raise ScorecardError(f"{kind.value}: a half-score must carry a documented note")


@dataclass(frozen=True)
class Scorecard:
    indicators: tuple[Indicator, ...]
    domain_name: str = ""

    def __post_init__(self) -> None:
        inds = tuple(self.indicators)
        kinds = [i.kind for i in inds]
        dupes = sorted({k.value for k in kinds if kinds.count(k) > 1})
        if dupes:
            raise ScorecardError(f"duplicate indicators: {', '.join(dupes)}")
        missing = [k.value for k in INDICATOR_ORDER if k not in kinds]
        if missing:
            raise ScorecardError(f"missing indicators: {', '.join(missing)}")
        # canonical order keeps equality and serialisation stable
        by_kind = {i.kind: i for i in inds}
        object.__setattr__(self, "indicators", tuple(by_kind[k] for k in INDICATOR_ORDER))

    @classmethod
    def from_scores(
        cls,
        scores: Iterable[float],
        domain_name: str = "",
        notes: Mapping[IndicatorKind, str] | None = None,
    ) -> Scorecard:
        """Build a card from five scores in indicator order 1..5.

        Half-scores without an explicit note get a placeholder note so that
        programmatic enumeration remains possible; real scoring records should
        pass ``notes``.
        """
        scores = list(scores)
        if len(scores) != len(INDICATOR_ORDER):
            raise ScorecardError(f"expected 5 scores, got {len(scores)}")
        notes = dict(notes or {})
        inds = []
        for kind, s in zip(INDICATOR_ORDER, scores):
            note = notes.get(kind, "")
            if float(s) == 0.5 and not note:
                note = "attenuated (half-score)"
            inds.append(Indicator(kind, s, note))
        return cls(tuple(inds), domain_name)

    def score(self, kind: IndicatorKind) -> float:
        return next(i.score for i in self.indicators if i.kind == IndicatorKind(kind))

    def to_dict(self) -> dict[str, Any]:
        return {
            "domain": self.domain_name,
            "indicators": [
                {"kind": i.kind.value, "score": i.score, "note": i.note} for i in self.indicators
            ],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> Scorecard:
        try:
            raw = doc["indicators"]
        except (KeyError, TypeError):
            raise ScorecardError("scorecard document needs an 'indicators' list") from None
        inds = []
        for entry in raw:
            try:
                kind = IndicatorKind(entry["kind"])
            except (KeyError, ValueError):
                raise ScorecardError(f"unknown indicator kind in {entry!r}") from None
            inds.append(Indicator(kind, entry.get("score"), entry.get("note", "") or ""))
        return cls(tuple(inds), str(doc.get("domain", "")))

    @classmethod
    def load(cls, path: str | Path) -> Scorecard:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class RegimeTier:
    tier: Tier
    total: float
    gated: bool = False
    raw_tier: Tier | None = None


def score_total(card: Scorecard) -> float:
    return float(sum(i.score for i in card.indicators))


def tier_for_total(total: float) -> Tier:
    # closed bands: 0-1 Stable, 1.5-2.5 Borderline, 3-5 Shifting
    if total <= 1.0:
        return Tier.STABLE
    if total <= 2.5:
        return Tier.BORDERLINE
    return Tier.SHIFTING


def classify(card: Scorecard, strict_gate: bool = True) -> RegimeTier:
    """Tier a scorecard, applying the temporal instability gate.

    With ``strict_gate`` (the default) any positive temporal-stability score,
    including 0.5, blocks the Stable tier.  With ``strict_gate=False`` only a
    full score of 1 triggers the gate.
    """
    total = score_total(card)
    raw = tier_for_total(total)
    temporal = card.score(IndicatorKind.TEMPORAL_STABILITY)
    triggered = temporal > 0 if strict_gate else temporal >= 1
    if raw is Tier.STABLE and triggered:
        return RegimeTier(Tier.BORDERLINE, total, gated=True, raw_tier=raw)
    return RegimeTier(raw, total, gated=False, raw_tier=raw)


_RECOMMENDATION = {
    Tier.SHIFTING: Recommendation.COMPRESSION_MANDATORY,
    Tier.BORDERLINE: Recommendation.RUN_CST,
    Tier.STABLE: Recommendation.COMPLEXITY_VIABLE,
}

RECOMMENDATION_TEXT = {
    Recommendation.COMPRESSION_MANDATORY: (
        "Compression Mandatory: prioritize epistemic compression; high-capacity "
        "black boxes are deleterious in this regime."
    ),
    Recommendation.RUN_CST: (
        "Borderline: conduct a Compression Superiority Test; do not deploy complex "
        "models without direct shift-robustness evidence."
    ),
    Recommendation.COMPLEXITY_VIABLE: (
        "Complexity Viable: prioritize complexity; scale model capacity and data."
    ),
}


def recommend(tier: RegimeTier | Tier) -> Recommendation:
    t = tier.tier if isinstance(tier, RegimeTier) else Tier(tier)
    return _RECOMMENDATION[t]


def score_card_summary(card: Scorecard, strict_gate: bool = True) -> dict[str, Any]:
    result = classify(card, strict_gate=strict_gate)
    rec = recommend(result)
    return {
        "domain": card.domain_name,
        "total": result.total,
        "tier": result.tier.value,
        "gated": result.gated,
        "recommendation": rec.value,
        "recommendation_text": RECOMMENDATION_TEXT[rec],
    }
