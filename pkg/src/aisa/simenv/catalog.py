"""Threat/vulnerability catalog: load, score, and lint the bundled table."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from aisa import cvss
from aisa.simenv.model import RemediationActionKind, UnknownCatalogEntry


@dataclass(frozen=True)
class DetectionHint:
    # Inventory signature: fact kind ("firmware_below" | "config_flag") plus
    # the value to match. Optional anomaly_feature names the telemetry feature
    # whose spikes are attributed to this entry.
    inventory_fact: str | None
    inventory_value: str | None
    anomaly_feature: str | None


@dataclass(frozen=True)
class CatalogEntry:
    entry_id: str
    name: str
    priority_band: str  # High | MediumHigh | MediumLow, as printed
    impact_score_declared: float
    attack_vector_text: str
    cve_id: str
    cvss_vector: cvss.CvssVector
    declared_score: str
    computed_score: cvss.Score
    detection: DetectionHint
    remediation: tuple[RemediationActionKind, ...]
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class LintWarning:
    entry_id: str
    declared: str
    computed: str

    def __str__(self) -> str:
        return (
            f"catalog entry {self.entry_id}: declared base score {self.declared} "
            f"differs from computed {self.computed}"
        )


PRIORITY_BANDS = ("High", "MediumHigh", "MediumLow")


class Catalog:
    def __init__(self, entries: list[CatalogEntry]):
        self._by_id = {e.entry_id: e for e in entries}
        self._by_cve = {e.cve_id: e for e in entries}
        self._by_anomaly_feature = {}
        for e in entries:
            feat = e.detection.anomaly_feature
            if feat is not None:
                # Contested features get no attribution.
                self._by_anomaly_feature[feat] = (
                    None if feat in self._by_anomaly_feature else e
                )

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, entry_id: str) -> bool:
        return entry_id in self._by_id

    def entries(self) -> list[CatalogEntry]:
        return sorted(self._by_id.values(), key=lambda e: e.entry_id)

    def get(self, entry_id: str) -> CatalogEntry:
        try:
            return self._by_id[entry_id]
        except KeyError:
            raise UnknownCatalogEntry(entry_id) from None

    def by_cve(self, cve_id: str) -> CatalogEntry | None:
        return self._by_cve.get(cve_id)

    def entry_for_anomaly_feature(self, feature: str) -> CatalogEntry | None:
        return self._by_anomaly_feature.get(feature)

    def lint(self) -> list[LintWarning]:
        """Declared-vs-computed score discrepancies, sorted by entry id."""
        warnings = []
        for e in self.entries():
            if str(e.computed_score) != e.declared_score:
                warnings.append(
                    LintWarning(e.entry_id, e.declared_score, str(e.computed_score))
                )
        return warnings


def _parse_entry(raw: dict) -> CatalogEntry:
    vector = cvss.parse_vector(raw["cvss_vector"])
    detection = raw.get("detection", {})
    inventory = detection.get("inventory") or {}
    return CatalogEntry(
        entry_id=raw["entry_id"],
        name=raw["name"],
        priority_band=raw["priority_band"],
        impact_score_declared=float(raw["impact_score_declared"]),
        attack_vector_text=raw.get("attack_vector_text", ""),
        cve_id=raw["cve_id"],
        cvss_vector=vector,
        declared_score=str(raw["declared_score"]),
        computed_score=cvss.base_score(vector),
        detection=DetectionHint(
            inventory_fact=inventory.get("fact"),
            inventory_value=inventory.get("value"),
            anomaly_feature=detection.get("anomaly_feature"),
        ),
        remediation=tuple(RemediationActionKind(a) for a in raw["remediation"]),
        params=dict(raw.get("params", {})),
    )


def load_catalog(path: str | Path | None = None, overrides: list[dict] | None = None) -> Catalog:
    """Load the bundled catalog (or a file at `path`), applying per-entry
    overrides from a scenario document."""
    if path is None:
        text = resources.files("aisa.data").joinpath("catalog_table1.yaml").read_text()
    else:
        text = Path(path).read_text()
    raw_entries = {e["entry_id"]: e for e in yaml.safe_load(text)["entries"]}
    for override in overrides or []:
        entry_id = override["entry_id"]
        if entry_id not in raw_entries:
            raise UnknownCatalogEntry(entry_id)
        merged = dict(raw_entries[entry_id])
        merged.update(override)
        raw_entries[entry_id] = merged
    return Catalog([_parse_entry(raw) for raw in raw_entries.values()])
