"""Merge outputs of the individual subcommands into one diagnostic report."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Mapping

from .regime_index import RECOMMENDATION_TEXT, Recommendation, Tier
from .viability import BOUNDARY_CAVEAT


class ReportError(ValueError):
    pass


CST_ADOPTED = "complexity adopted via CST"
CST_DECLINED = "simplicity retained via CST"

_KINDS = {"ri score": "regime_index", "deff estimate": "deff", "gap": "viability", "cst run": "cst"}


def _kind(doc: Mapping[str, Any]) -> str:
    try:
        return _KINDS[doc["command"]]
    except KeyError:
        raise ReportError(f"unsupported document: command {doc.get('command')!r}") from None


def _domain(doc: Mapping[str, Any]) -> str | None:
    result = doc.get("result") or {}
    name = result.get("domain") if isinstance(result, dict) else None
    name = name or (doc.get("config") or {}).get("domain")
    return name or None


def final_recommendation(tier: Tier, cst_decision: str | None) -> dict[str, str]:
    if tier is Tier.SHIFTING:
        rec = Recommendation.COMPRESSION_MANDATORY
        return {"recommendation": "Compression Mandatory", "detail": RECOMMENDATION_TEXT[rec]}
    if tier is Tier.STABLE:
        rec = Recommendation.COMPLEXITY_VIABLE
        return {"recommendation": "Complexity Viable", "detail": RECOMMENDATION_TEXT[rec]}
    if cst_decision == "AdoptComplexity":
        return {"recommendation": CST_ADOPTED, "detail": "Borderline tier; the challenger cleared the CST margin."}
    if cst_decision == "DefaultToSimplicity":
        return {"recommendation": CST_DECLINED, "detail": "Borderline tier; the challenger did not clear the CST margin."}
    return {"recommendation": "Run CST", "detail": RECOMMENDATION_TEXT[Recommendation.RUN_CST]}


def report_bundle(docs: Iterable[Mapping[str, Any]]) -> dict[str, Any]:
    """One report from ``ri score``, ``deff estimate``, ``gap`` and ``cst run`` outputs.

    A Regime Index result is required; the others are optional.  All
    documents that name a domain must name the same one.
    """
    sections: dict[str, Any] = {}
    domains: set[str] = set()
    for doc in docs:
        kind = _kind(doc)
        if kind in sections:
            raise ReportError(f"more than one {kind} document supplied")
        sections[kind] = doc["result"]
        name = _domain(doc)
        if name:
            domains.add(name)
    if len(domains) > 1:
        raise ReportError(f"conflicting domain names: {', '.join(sorted(domains))}")
    if "regime_index" not in sections:
        raise ReportError("a Regime Index result (ri score) is required")

    ri = sections["regime_index"]
    tier = Tier(ri["tier"])
    cst = sections.get("cst")
    out: dict[str, Any] = {
        "domain": domains.pop() if domains else None,
        "regime_index": {k: ri[k] for k in ("total", "tier", "gated")},
        **final_recommendation(tier, cst["decision"] if cst else None),
    }
    if "deff" in sections and sections["deff"].get("consensus"):
        out["d_eff_consensus"] = sections["deff"]["consensus"]["value"]
    if "viability" in sections:
        gap = sections["viability"]
        out["viability"] = {k: gap[k] for k in ("V", "zone", "boundary", "n_viable", "forbidden_zone") if k in gap}
        out["caveat"] = BOUNDARY_CAVEAT
    if cst:
        out["cst"] = {k: cst[k] for k in ("decision", "margin", "robust_margin", "delta_threshold")}
    return out


def load_documents(paths: Iterable[str | Path]) -> list[dict[str, Any]]:
    docs = []
    for p in paths:
        try:
            docs.append(json.loads(Path(p).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise ReportError(f"{p}: {exc}") from exc
    return docs
