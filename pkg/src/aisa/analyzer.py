"""Dynamic impact scoring and remediation prioritization.

The impact score is a weighted linear blend of five context factors:
severity, asset criticality, live exploit activity, dependency centrality,
and exposure. Prioritization groups findings by catalog priority band
(risk band for pure anomalies) and orders by impact score within a group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from aisa.scanner import Finding, FindingQueue, Lifecycle, RiskBand
from aisa.simenv.environment import Environment
from aisa.simenv.model import AssetState, Exposure

EXPOSURE_FACTOR = {
    Exposure.INTERNET_FACING: 1.0,
    Exposure.INTERNAL_ONLY: 0.5,
    Exposure.AIR_GAPPED: 0.1,
}

_BAND_GROUP = {"High": 0, "MediumHigh": 1, "MediumLow": 2}
_RISK_GROUP = {RiskBand.HIGH: 0, RiskBand.MEDIUM: 1, RiskBand.LOW: 2}


class AssetGone(Exception):
    def __init__(self, asset_id: str):
        super().__init__(f"asset {asset_id} is gone or down")
        self.asset_id = asset_id


class ConfigInvalid(Exception):
    pass


@dataclass
class ScoringConfig:
    w_cvss: float = 0.30
    w_crit: float = 0.25
    w_exploit: float = 0.20
    w_central: float = 0.15
    w_expo: float = 0.10
    exploit_intel: frozenset[str] = frozenset()

    def __post_init__(self):
        weights = (self.w_cvss, self.w_crit, self.w_exploit, self.w_central, self.w_expo)
        if any(w < 0 for w in weights):
            raise ConfigInvalid("scoring weights must be non-negative")
        if abs(sum(weights) - 1.0) > 1e-9:
            raise ConfigInvalid(f"scoring weights must sum to 1.0, got {sum(weights)}")
        self.exploit_intel = frozenset(self.exploit_intel)

    @classmethod
    def from_dict(cls, raw: dict) -> "ScoringConfig":
        weights = raw.get("weights", {})
        return cls(
            w_cvss=float(weights.get("cvss", 0.30)),
            w_crit=float(weights.get("criticality", 0.25)),
            w_exploit=float(weights.get("exploit", 0.20)),
            w_central=float(weights.get("centrality", 0.15)),
            w_expo=float(weights.get("exposure", 0.10)),
            exploit_intel=frozenset(raw.get("exploit_intel", [])),
        )


def round2(value: float) -> float:
    # Snap float error at 1e-9 first so exact decimal halves round half-up.
    snapped = round(value * 1e9) / 1e7
    return math.floor(snapped + 0.5) / 100


def impact_score(finding: Finding, env: Environment, cfg: ScoringConfig) -> float:
    """Score a finding in [0, 1]; advances lifecycle to Analyzed on first
    scoring. The severity term uses the engine-computed CVSS for catalog
    findings and min(anomaly z / 10, 1) for pure anomalies."""
    asset = env.assets.get(finding.asset_id)
    if asset is None or asset.state is AssetState.DOWN:
        raise AssetGone(finding.asset_id)
    if finding.catalog_entry_id is not None:
        entry = env.catalog.get(finding.catalog_entry_id)
        severity_term = entry.computed_score.value / 10.0
        exploited = entry.cve_id in cfg.exploit_intel
    else:
        severity_term = min(finding.anomaly_score / 10.0, 1.0)
        exploited = False
    score = (
        cfg.w_cvss * severity_term
        + cfg.w_crit * asset.criticality
        + cfg.w_exploit * (1.0 if exploited else 0.0)
        + cfg.w_central * env.centrality(finding.asset_id)
        + cfg.w_expo * EXPOSURE_FACTOR[asset.exposure]
    )
    score = min(max(score, 0.0), 1.0)
    finding.impact_score = score
    if finding.lifecycle in (Lifecycle.DETECTED, Lifecycle.QUEUED):
        if finding.lifecycle is Lifecycle.DETECTED:
            finding.advance(Lifecycle.QUEUED)
        finding.advance(Lifecycle.ANALYZED)
    return score


def _priority_group(finding: Finding, env: Environment) -> int:
    if finding.catalog_entry_id is not None:
        return _BAND_GROUP[env.catalog.get(finding.catalog_entry_id).priority_band]
    return _RISK_GROUP.get(finding.risk_band, 2)


def _cvss_key(finding: Finding, env: Environment) -> float:
    if finding.catalog_entry_id is not None:
        return env.catalog.get(finding.catalog_entry_id).computed_score.value
    return min(finding.anomaly_score, 10.0)


def prioritize(findings: list[Finding], env: Environment) -> list[Finding]:
    """Total order: priority group, then impact score descending, ties broken
    by higher computed CVSS, earlier detection, then lexicographic ids."""
    return sorted(
        findings,
        key=lambda f: (
            _priority_group(f, env),
            -(f.impact_score if f.impact_score is not None else 0.0),
            -_cvss_key(f, env),
            f.detected_tick,
            f.cve_id or "",
            f.finding_id,
        ),
    )


@dataclass
class ReportEntry:
    rank: int
    finding_id: str
    asset_id: str
    cve_id: str | None
    impact_score: float
    cvss_score: str
    risk_band: str
    lifecycle: str

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "finding_id": self.finding_id,
            "asset_id": self.asset_id,
            "cve_id": self.cve_id,
            "impact_score": self.impact_score,
            "cvss_score": self.cvss_score,
            "risk_band": self.risk_band,
            "lifecycle": self.lifecycle,
        }


@dataclass
class VulnerabilityReport:
    generated_tick: int
    entries: list[ReportEntry] = field(default_factory=list)
    band_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "generated_tick": self.generated_tick,
            "entries": [e.to_dict() for e in self.entries],
            "band_counts": self.band_counts,
        }


def build_report(queue: FindingQueue, env: Environment, cfg: ScoringConfig) -> VulnerabilityReport:
    """Rank still-open analyzed findings into a report; ranks are 1..n."""
    candidates = [f for f in queue.active() if f.impact_score is not None]
    ordered = prioritize(candidates, env)
    report = VulnerabilityReport(generated_tick=env.clock)
    for rank, finding in enumerate(ordered, start=1):
        band = finding.risk_band.value if finding.risk_band else "Medium"
        report.entries.append(
            ReportEntry(
                rank=rank,
                finding_id=finding.finding_id,
                asset_id=finding.asset_id,
                cve_id=finding.cve_id,
                impact_score=round2(finding.impact_score),
                cvss_score=f"{_cvss_key(finding, env):.1f}",
                risk_band=band,
                lifecycle=finding.lifecycle.value,
            )
        )
        report.band_counts[band] = report.band_counts.get(band, 0) + 1
    return report
