"""Viability gap geometry and the horizon-data constraint.

The viability boundary is an illustrative sigmoid in signal stability; it is
a diagnostic geometry, not a calibrated estimator, and every report built on
it carries :data:`BOUNDARY_CAVEAT`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Sequence

from .regime_index import (
    DATA_ABUNDANCE_RATIO,
    DATA_POVERTY_RATIO,
    Indicator,
    IndicatorKind,
)

BOUNDARY_CAVEAT = (
    "B(rho) is an illustrative boundary for geometric intuition; it is not a "
    "calibrated or statistically estimated law."
)
ZONE_HALF_WIDTH = 0.25
FORBIDDEN_ZONE_LOG_RATIO = 2.0


@dataclass(frozen=True)
class BoundaryParams:
    b_min: float = 2.8
    amplitude: float = 3.0
    steepness: float = 10.0
    midpoint: float = 0.45

    def __post_init__(self) -> None:
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if self.steepness <= 0:
            raise ValueError("steepness must be positive")
        if not 0 < self.midpoint < 1:
            raise ValueError("midpoint must lie in (0, 1)")


class Zone(str, Enum):
    STABLE_SURPLUS = "StableSurplus"
    TRANSITION_ZONE = "TransitionZone"
    STRUCTURAL_DEFICIT = "StructuralDeficit"


@dataclass(frozen=True)
class ViabilityInput:
    rho: float
    n: int
    d_eff: float
    tau_half: float | None = None
    accrual: float | None = None

    def __post_init__(self) -> None:
        _check_rho(self.rho)
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ValueError(f"N must be a positive integer, got {self.n!r}")
        if not self.d_eff > 0:
            raise ValueError(f"d_eff must be positive, got {self.d_eff!r}")
        for name in ("tau_half", "accrual"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive when given, got {v!r}")


@dataclass(frozen=True)
class GapResult:
    gap: float
    zone: Zone
    boundary_value: float
    log_ratio: float
    n_viable: float | None = None
    forbidden_zone: bool | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "V": self.gap,
            "zone": self.zone.value,
            "boundary": self.boundary_value,
            "log10_n_over_deff": self.log_ratio,
        }
        if self.n_viable is not None:
            out["n_viable"] = self.n_viable
            out["forbidden_zone"] = self.forbidden_zone
        out["caveat"] = BOUNDARY_CAVEAT
        return out


def _check_rho(rho: float) -> None:
    if not (isinstance(rho, (int, float)) and 0.0 <= rho <= 1.0):
        raise ValueError(f"rho must lie in [0, 1], got {rho!r}")


def boundary(rho: float, params: BoundaryParams = BoundaryParams()) -> float:
    _check_rho(rho)
    return params.b_min + params.amplitude / (1.0 + math.exp(params.steepness * (rho - params.midpoint)))


def zone_for_gap(gap: float, half_width: float = ZONE_HALF_WIDTH) -> Zone:
    if gap > half_width:
        return Zone.STABLE_SURPLUS
    if gap < -half_width:
        return Zone.STRUCTURAL_DEFICIT
    return Zone.TRANSITION_ZONE


def horizon_constraint(tau_half: float, accrual: float) -> float:
    """Viable stable sample size ``tau_half * accrual``."""
    if not (tau_half > 0 and accrual > 0):
        raise ValueError("tau_half and accrual must both be positive")
    return tau_half * accrual


def viability_gap(
    inp: ViabilityInput,
    params: BoundaryParams = BoundaryParams(),
    half_width: float = ZONE_HALF_WIDTH,
) -> GapResult:
    log_ratio = math.log10(inp.n / inp.d_eff)
    b = boundary(inp.rho, params)
    gap = log_ratio - b
    n_viable = forbidden = None
    if inp.tau_half is not None and inp.accrual is not None:
        n_viable = horizon_constraint(inp.tau_half, inp.accrual)
        forbidden = math.log10(n_viable / inp.d_eff) < FORBIDDEN_ZONE_LOG_RATIO
    return GapResult(gap, zone_for_gap(gap, half_width), b, log_ratio, n_viable, forbidden)


@dataclass(frozen=True)
class HalfLife:
    """Crossing time of the half-advantage line; ``inf`` when not yet observed."""

    tau_half: float
    observed: bool


def estimate_half_life(series: Sequence[tuple[float, float]], baseline: float) -> HalfLife:
    if len(series) < 2:
        raise ValueError("need at least two (time, performance) points")
    ts = [float(t) for t, _ in series]
    ps = [float(p) for _, p in series]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise ValueError("times must be strictly increasing")
    advantage0 = ps[0] - baseline
    if advantage0 <= 0:
        raise ValueError("no advantage to halve: initial performance does not exceed baseline")
    target = 0.5 * advantage0
    # absorbs rounding in differences like 0.65 - 0.5 versus (0.8 - 0.5) / 2
    slack = 1e-12 * advantage0
    for i in range(1, len(ts)):
        adv = ps[i] - baseline
        if adv <= target + slack:
            if adv >= target - slack:
                return HalfLife(ts[i], True)
            prev = ps[i - 1] - baseline
            frac = (prev - target) / (prev - adv)
            return HalfLife(ts[i - 1] + frac * (ts[i] - ts[i - 1]), True)
    return HalfLife(math.inf, False)


@dataclass
class PhaseTable:
    rows: list[dict[str, Any]] = field(default_factory=list)
    errors: list[dict[str, Any]] = field(default_factory=list)

    COLUMNS = ("name", "rho", "log10_n_over_deff", "boundary", "V", "zone")


def phase_points(
    domains: Iterable[tuple[str, float, float, float]],
    params: BoundaryParams = BoundaryParams(),
    half_width: float = ZONE_HALF_WIDTH,
) -> PhaseTable:
    """Rows for an external phase-diagram plot; invalid rows land in ``errors``.

    ``N`` is accepted as a real here because phase placements are usually
    approximate.
    """
    table = PhaseTable()
    for idx, row in enumerate(domains):
        try:
            name, rho, n, d_eff = row
            rho, n, d_eff = float(rho), float(n), float(d_eff)
            _check_rho(rho)
            if not (n > 0 and d_eff > 0):
                raise ValueError("N and d_eff must be positive")
            log_ratio = math.log10(n / d_eff)
            b = boundary(rho, params)
            gap = log_ratio - b
        except (ValueError, TypeError) as exc:
            table.errors.append({"index": idx, "row": list(row) if isinstance(row, (list, tuple)) else row, "error": str(exc)})
            continue
        table.rows.append(
            {
                "name": str(name),
                "rho": rho,
                "log10_n_over_deff": log_ratio,
                "boundary": b,
                "V": gap,
                "zone": zone_for_gap(gap, half_width).value,
            }
        )
    return table


def score_data_to_complexity(n: float, d_eff_values: Sequence[float]) -> Indicator:
    """Fill indicator 3 from N and one or more D_eff estimates.

    All ratios below 100 score 1, all above 1000 score 0.  Estimates that
    straddle a threshold, or ratios inside the 100-1000 transition band,
    score 0.5 with the ratios recorded in the note.
    """
    if not d_eff_values:
        raise ValueError("need at least one D_eff value")
    ratios = [n / d for d in d_eff_values]
    shown = ", ".join(f"{r:.4g}" for r in ratios)
    if all(r < DATA_POVERTY_RATIO for r in ratios):
        return Indicator(IndicatorKind.DATA_TO_COMPLEXITY, 1, f"N/D_eff = {shown} < 100")
    if all(r > DATA_ABUNDANCE_RATIO for r in ratios):
        return Indicator(IndicatorKind.DATA_TO_COMPLEXITY, 0, f"N/D_eff = {shown} > 1000")
    return Indicator(
        IndicatorKind.DATA_TO_COMPLEXITY,
        0.5,
        f"N/D_eff = {shown}: transition band or estimates straddle a threshold",
    )
