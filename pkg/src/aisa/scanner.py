"""Telemetry scanner: signature and anomaly detection, triage, containment.

Detection is statistical (per-feature z-scores over exponentially weighted
baselines) plus inventory signature matching against the catalog. The model
is updated only after detection so an attack cannot immediately fold itself
into its own baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from aisa.simenv.catalog import Catalog, CatalogEntry
from aisa.simenv.environment import Environment
from aisa.simenv.model import (
    ALERT_ONLY,
    Asset,
    AssetState,
    Exposure,
    RemediationActionKind,
    TelemetryBatch,
    TelemetryRecord,
)

_VAR_FLOOR = 1e-9


class RiskBand(Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


class Lifecycle(Enum):
    DETECTED = "Detected"
    QUEUED = "Queued"
    ANALYZED = "Analyzed"
    PLANNED = "Planned"
    AWAITING_APPROVAL = "AwaitingApproval"
    REMEDIATING = "Remediating"
    RESOLVED = "Resolved"
    FAILED = "Failed"
    REJECTED = "Rejected"


_ORDER = [
    Lifecycle.DETECTED,
    Lifecycle.QUEUED,
    Lifecycle.ANALYZED,
    Lifecycle.PLANNED,
    Lifecycle.AWAITING_APPROVAL,
    Lifecycle.REMEDIATING,
    Lifecycle.RESOLVED,
]

TERMINAL = (Lifecycle.RESOLVED, Lifecycle.FAILED, Lifecycle.REJECTED)


class IllegalTransition(Exception):
    def __init__(self, current: Lifecycle, target: Lifecycle):
        super().__init__(f"cannot move finding from {current.value} to {target.value}")
        self.current = current
        self.target = target


@dataclass
class Finding:
    finding_id: str
    asset_id: str
    catalog_entry_id: str | None
    cve_id: str | None
    detected_tick: int
    anomaly_score: float
    feature: str | None = None
    risk_band: RiskBand | None = None
    impact_score: float | None = None
    lifecycle: Lifecycle = Lifecycle.DETECTED
    containment: dict | None = None
    last_seen_tick: int = 0
    merged_count: int = 0

    def __post_init__(self):
        if self.last_seen_tick == 0:
            self.last_seen_tick = self.detected_tick

    def advance(self, target: Lifecycle) -> None:
        """Move the lifecycle forward; Rejected only from AwaitingApproval,
        Failed only from Remediating."""
        if target is Lifecycle.REJECTED:
            if self.lifecycle is not Lifecycle.AWAITING_APPROVAL:
                raise IllegalTransition(self.lifecycle, target)
        elif target is Lifecycle.FAILED:
            if self.lifecycle is not Lifecycle.REMEDIATING:
                raise IllegalTransition(self.lifecycle, target)
        else:
            if self.lifecycle in TERMINAL:
                raise IllegalTransition(self.lifecycle, target)
            if _ORDER.index(target) <= _ORDER.index(self.lifecycle):
                raise IllegalTransition(self.lifecycle, target)
        self.lifecycle = target

    @property
    def active(self) -> bool:
        return self.lifecycle not in TERMINAL


@dataclass
class BaselineModel:
    """Per (asset, feature) running mean/variance via exponentially weighted
    updates. No anomaly may be raised during warmup."""

    decay: float = 0.05
    warmup_ticks: int = 50
    z_threshold: float = 4.0
    ticks_observed: int = 0
    stats: dict[tuple[str, str], tuple[float, float]] = field(default_factory=dict)

    def zscore(self, asset_id: str, feature: str, value: float) -> float | None:
        key = (asset_id, feature)
        if key not in self.stats:
            return None
        mean, var = self.stats[key]
        return abs(value - mean) / math.sqrt(max(var, _VAR_FLOOR))

    def in_warmup(self) -> bool:
        return self.ticks_observed < self.warmup_ticks

    def update(self, batch: TelemetryBatch) -> None:
        for record in batch.records:
            if record.state == "Isolated":
                continue  # freeze the baseline while an asset is quarantined
            for feature, value in record.features.items():
                key = (record.asset_id, feature)
                if key not in self.stats:
                    self.stats[key] = (value, 0.0)
                    continue
                mean, var = self.stats[key]
                delta = value - mean
                mean += self.decay * delta
                var = (1.0 - self.decay) * (var + self.decay * delta * delta)
                self.stats[key] = (mean, var)
        self.ticks_observed += 1


class Scanner:
    def __init__(self, catalog: Catalog, model: BaselineModel | None = None):
        self.catalog = catalog
        self.model = model if model is not None else BaselineModel()
        self._counter = 0

    def _next_id(self, tick: int, asset_id: str, label: str) -> str:
        self._counter += 1
        return f"f-{tick:06d}-{asset_id}-{label}-{self._counter:04d}"

    def detect(self, batch: TelemetryBatch) -> list[Finding]:
        """Pure detection pass: no model mutation, safe to call repeatedly."""
        findings: list[Finding] = []
        for record in batch.records:
            findings.extend(self._signature_pass(batch.tick, record))
            if not self.model.in_warmup():
                findings.extend(self._anomaly_pass(batch.tick, record))
        return findings

    def update_and_detect(self, batch: TelemetryBatch) -> list[Finding]:
        findings = self.detect(batch)
        self.model.update(batch)
        return findings

    def _signature_pass(self, tick: int, record: TelemetryRecord) -> list[Finding]:
        findings = []
        for entry in self.catalog.entries():
            hint = entry.detection
            if hint.inventory_fact == "firmware_below":
                if _version_lt(record.firmware_version, hint.inventory_value):
                    findings.append(self._catalog_finding(tick, record.asset_id, entry))
            elif hint.inventory_fact == "config_flag":
                if hint.inventory_value in record.config_flags:
                    findings.append(self._catalog_finding(tick, record.asset_id, entry))
        return findings

    def _catalog_finding(self, tick: int, asset_id: str, entry: CatalogEntry) -> Finding:
        return Finding(
            finding_id=self._next_id(tick, asset_id, entry.entry_id),
            asset_id=asset_id,
            catalog_entry_id=entry.entry_id,
            cve_id=entry.cve_id,
            detected_tick=tick,
            anomaly_score=0.0,
        )

    def _anomaly_pass(self, tick: int, record: TelemetryRecord) -> list[Finding]:
        # Quarantined assets legitimately emit no traffic; alarming on that
        # would be self-inflicted noise.
        if record.state == "Isolated":
            return []
        # Group offending features by the catalog entry they are attributed
        # to; unattributed features collapse into one pure-anomaly finding.
        peaks: dict[str | None, tuple[float, str]] = {}
        for feature, value in record.features.items():
            z = self.model.zscore(record.asset_id, feature, value)
            if z is None or z < self.model.z_threshold:
                continue
            entry = self.catalog.entry_for_anomaly_feature(feature)
            key = entry.entry_id if entry else None
            if key not in peaks or z > peaks[key][0]:
                peaks[key] = (z, feature)
        findings = []
        for entry_id in sorted(peaks, key=lambda k: (k is None, k or "")):
            z, feature = peaks[entry_id]
            entry = self.catalog.get(entry_id) if entry_id else None
            findings.append(
                Finding(
                    finding_id=self._next_id(tick, record.asset_id, entry_id or "anomaly"),
                    asset_id=record.asset_id,
                    catalog_entry_id=entry_id,
                    cve_id=entry.cve_id if entry else None,
                    detected_tick=tick,
                    anomaly_score=z,
                    feature=feature,
                )
            )
        return findings

    def classify_risk(self, finding: Finding, asset: Asset) -> RiskBand:
        entry = (
            self.catalog.get(finding.catalog_entry_id) if finding.catalog_entry_id else None
        )
        band = entry.priority_band if entry else None
        if band == "High":
            return RiskBand.HIGH
        if finding.anomaly_score >= 6.0 and asset.criticality >= 0.8:
            return RiskBand.HIGH
        if asset.exposure is Exposure.INTERNET_FACING and band == "MediumHigh":
            return RiskBand.HIGH
        if finding.anomaly_score < 2.0 and entry is None and asset.criticality < 0.3:
            return RiskBand.LOW
        return RiskBand.MEDIUM


def _version_lt(version: str, bound: str | None) -> bool:
    # Product-line signature: only firmware in the same version family as the
    # advisory bound (same leading component) can match.
    if bound is None:
        return False
    v_parts, b_parts = version.split("."), bound.split(".")
    if v_parts[0] != b_parts[0]:
        return False
    return _version_key(version) < _version_key(bound)


def _version_key(version: str):
    parts = []
    for part in version.split("."):
        if part.isdigit():
            parts.append((0, int(part), ""))
        else:
            parts.append((1, 0, part))
    return tuple(parts)


def instant_containment(finding: Finding, env: Environment) -> dict | None:
    """Immediate preventive action by risk band. High isolates the asset
    (idempotent), Medium restricts legacy-protocol services, Low alerts only.
    Returns the containment record, or None when already contained."""
    if finding.risk_band is RiskBand.HIGH:
        asset = env.asset(finding.asset_id)
        if asset.state is AssetState.ISOLATED:
            return None
        outcome = env.apply_action(finding.asset_id, RemediationActionKind.ISOLATE_SEGMENT)
        record = {
            "kind": "isolate",
            "action": RemediationActionKind.ISOLATE_SEGMENT.value,
            "tick": env.clock,
            "success": outcome.success,
            "side_effects": outcome.side_effects,
        }
    elif finding.risk_band is RiskBand.MEDIUM:
        disabled = env.disable_legacy_services(finding.asset_id)
        record = {
            "kind": "restrict",
            "action": "RestrictLegacyServices",
            "tick": env.clock,
            "disabled_services": disabled,
        }
    else:
        record = {"kind": "alert", "action": ALERT_ONLY, "tick": env.clock}
    finding.containment = record
    return record


class FindingQueue:
    """Centralized finding queue with (asset, catalog entry) dedup merging."""

    def __init__(self):
        self.findings: dict[str, Finding] = {}
        self._order: list[str] = []

    def __len__(self) -> int:
        return len(self.findings)

    def __iter__(self):
        return (self.findings[fid] for fid in self._order)

    def get(self, finding_id: str) -> Finding | None:
        return self.findings.get(finding_id)

    def active(self) -> list[Finding]:
        return [f for f in self if f.active]

    def enqueue(self, finding: Finding) -> tuple[Finding, bool]:
        """Add a finding, merging duplicates of a still-open (asset, entry)
        pair. Returns (canonical finding, merged?)."""
        for existing in self:
            if (
                existing.active
                and existing.asset_id == finding.asset_id
                and existing.catalog_entry_id == finding.catalog_entry_id
            ):
                existing.last_seen_tick = max(existing.last_seen_tick, finding.detected_tick)
                existing.anomaly_score = max(existing.anomaly_score, finding.anomaly_score)
                existing.merged_count += 1
                return existing, True
        if finding.lifecycle is Lifecycle.DETECTED:
            finding.advance(Lifecycle.QUEUED)
        self.findings[finding.finding_id] = finding
        self._order.append(finding.finding_id)
        return finding, False
