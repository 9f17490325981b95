"""Concordance statistics for validating the Regime Index against outcomes."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from statistics import NormalDist
from typing import Any, Iterable, Sequence

from .regime_index import Tier, tier_for_total

WINNERS = ("Simple", "Complex")


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need trials >= 1 and 0 <= successes <= trials")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    z = NormalDist().inv_cdf(0.5 + confidence / 2.0)
    p = successes / trials
    z2n = z * z / trials
    centre = (p + z2n / 2.0) / (1.0 + z2n)
    half = z * math.sqrt(p * (1.0 - p) / trials + z2n / (4.0 * trials)) / (1.0 + z2n)
    # the interval touches 0 (or 1) exactly when s = 0 (or s = n); pin those
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def _binom_pmf(k: int, n: int, p0: Fraction) -> Fraction:
    return math.comb(n, k) * p0**k * (1 - p0) ** (n - k)


def binomial_two_sided(successes: int, trials: int, p0: float = 0.5) -> float:
    """Exact doubled-smaller-tail p-value, capped at 1.

    Tail sums are accumulated as exact fractions, so 13 of 15 at 0.5 gives
    exactly 242/32768.
    """
    if trials < 1 or not 0 <= successes <= trials:
        raise ValueError("need trials >= 1 and 0 <= successes <= trials")
    if not 0 < p0 < 1:
        raise ValueError("p0 must lie in (0, 1)")
    q = Fraction(p0)
    lower = sum(_binom_pmf(k, trials, q) for k in range(0, successes + 1))
    upper = sum(_binom_pmf(k, trials, q) for k in range(successes, trials + 1))
    return float(min(Fraction(1), 2 * min(lower, upper)))


def cohens_h(p1: float, p2: float) -> float:
    for p in (p1, p2):
        if not 0 <= p <= 1:
            raise ValueError("proportions must lie in [0, 1]")
    return abs(2.0 * math.asin(math.sqrt(p1)) - 2.0 * math.asin(math.sqrt(p2)))


@dataclass(frozen=True)
class ConcordanceResult:
    successes: int
    trials: int
    proportion: float
    wilson_low: float
    wilson_high: float
    p_two_sided: float
    cohens_h: float

    @classmethod
    def from_counts(cls, successes: int, trials: int, confidence: float = 0.95, p0: float = 0.5) -> ConcordanceResult:
        lo, hi = wilson_interval(successes, trials, confidence)
        p = successes / trials
        return cls(successes, trials, p, lo, hi, binomial_two_sided(successes, trials, p0), cohens_h(p, p0))

    def to_dict(self) -> dict[str, Any]:
        return {
            "successes": self.successes,
            "trials": self.trials,
            "proportion": self.proportion,
            "wilson_low": self.wilson_low,
            "wilson_high": self.wilson_high,
            "p_two_sided": self.p_two_sided,
            "cohens_h": self.cohens_h,
        }


@dataclass(frozen=True)
class SynthesisRow:
    domain: str
    ri_tier: Tier
    winner: str
    ri_score: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "ri_tier", Tier(self.ri_tier))
        if self.winner not in WINNERS:
            raise ValueError(f"winner must be one of {WINNERS}, got {self.winner!r}")

    @property
    def concordant(self) -> bool | None:
        if self.ri_tier is Tier.BORDERLINE:
            return None
        return (self.ri_tier is Tier.SHIFTING) == (self.winner == "Simple")


@dataclass(frozen=True)
class ConcordanceTable:
    overall: ConcordanceResult
    per_regime: dict[str, tuple[int, int]]
    excluded: tuple[str, ...] = ()
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.overall.to_dict(),
            "per_regime": {k: {"concordant": s, "total": n} for k, (s, n) in self.per_regime.items()},
            "excluded_borderline": list(self.excluded),
            "notes": list(self.notes),
        }


def concordance_table(rows: Iterable[SynthesisRow | tuple[str, str, str]], confidence: float = 0.95) -> ConcordanceTable:
    """Concordance of tier against winner; Borderline rows are set aside."""
    parsed = [r if isinstance(r, SynthesisRow) else SynthesisRow(r[0], Tier(r[1]), r[2]) for r in rows]
    if not parsed:
        raise ValueError("concordance table needs at least one row")
    per: dict[str, list[int]] = {Tier.SHIFTING.value: [0, 0], Tier.STABLE.value: [0, 0]}
    excluded = []
    for row in parsed:
        c = row.concordant
        if c is None:
            excluded.append(row.domain)
            continue
        bucket = per[row.ri_tier.value]
        bucket[0] += int(c)
        bucket[1] += 1
    trials = sum(n for _, n in per.values())
    if trials == 0:
        raise ValueError("every row is Borderline; concordance undefined")
    successes = sum(s for s, _ in per.values())
    notes = (f"{len(excluded)} Borderline row(s) excluded from concordance",) if excluded else ()
    return ConcordanceTable(
        ConcordanceResult.from_counts(successes, trials, confidence),
        {k: (s, n) for k, (s, n) in per.items()},
        tuple(excluded),
        notes,
    )


def retier(score: float, shifting_threshold: float = 3.0, stable_max: float = 1.0) -> Tier:
    """Tier from a total under an alternative Shifting cut-point."""
    if score >= shifting_threshold:
        return Tier.SHIFTING
    if score <= stable_max:
        return Tier.STABLE
    return Tier.BORDERLINE


def sensitivity(rows: Sequence[SynthesisRow], thresholds: Sequence[float] = (2.0, 3.0)) -> dict[float, ConcordanceTable]:
    out = {}
    for t in thresholds:
        if any(r.ri_score is None for r in rows):
            raise ValueError("re-tiering needs an RI score on every row")
        moved = [SynthesisRow(r.domain, retier(r.ri_score, t), r.winner, r.ri_score) for r in rows]
        out[t] = concordance_table(moved)
    return out


# (domain, RI total, winner) for the fifteen reference domains
_REFERENCE = (
    ("ICU Mortality", 4, "Simple"),
    ("30-Day Readmission", 3, "Simple"),
    ("Sepsis Prediction", 3, "Simple"),
    ("Credit Default", 3, "Simple"),
    ("Recidivism", 3, "Simple"),
    ("Income Prediction", 3, "Complex"),
    ("Stock Return Prediction", 3, "Simple"),
    ("Gene Expression (Cancer)", 3, "Simple"),
    ("Macroeconomic Forecasting", 3, "Simple"),
    ("Protein Structure", 0, "Complex"),
    ("Weather Forecasting", 0, "Complex"),
    ("ImageNet Classification", 0, "Complex"),
    ("Board Games", 0, "Complex"),
    ("Machine Translation", 1, "Complex"),
    ("Psychiatric Deterioration", 3, "Complex"),
)


def reference_rows() -> list[SynthesisRow]:
    return [SynthesisRow(d, tier_for_total(s), w, float(s)) for d, s, w in _REFERENCE]


FIXTURE_COLUMNS = ("domain", "ri_score", "ri_tier", "winner")


def rows_to_records(rows: Sequence[SynthesisRow]) -> list[dict[str, Any]]:
    return [
        {"domain": r.domain, "ri_score": r.ri_score, "ri_tier": r.ri_tier.value, "winner": r.winner} for r in rows
    ]


def load_table(path: str | Path) -> list[SynthesisRow]:
    """Read rows from a CSV with ``domain``, ``winner`` and ``ri_tier`` or ``ri_score``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        rows = []
        for i, rec in enumerate(reader, start=2):
            try:
                score = float(rec["ri_score"]) if rec.get("ri_score") not in (None, "") else None
                tier_text = rec.get("ri_tier") or ""
                if tier_text:
                    tier = Tier(tier_text)
                elif score is not None:
                    tier = tier_for_total(score)
                else:
                    raise ValueError("needs ri_tier or ri_score")
                rows.append(SynthesisRow(rec["domain"], tier, rec["winner"], score))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"row {i}: {exc}") from exc
    return rows
