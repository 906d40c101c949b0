"""Deterministic simulated critical-infrastructure range.

Hosts the asset topology, telemetry generation, the threat catalog, attack
progression, and remediation action effects. Serves both as the training
environment for the remediation policy and as the live target the pipeline
defends.
"""

from aisa.simenv.catalog import Catalog, CatalogEntry, load_catalog
from aisa.simenv.environment import Environment
from aisa.simenv.model import (
    ActionInapplicable,
    ActionOutcome,
    Asset,
    AssetClass,
    AssetState,
    AttackInstance,
    AttackKind,
    CycleInDependencies,
    Exposure,
    InvariantViolation,
    RemediationActionKind,
    Service,
    TelemetryBatch,
    TelemetryRecord,
    UnknownAsset,
    UnknownCatalogEntry,
)
from aisa.simenv.scenario import load_scenario_doc, load_topology

__all__ = [
    "ActionInapplicable",
    "ActionOutcome",
    "Asset",
    "AssetClass",
    "AssetState",
    "AttackInstance",
    "AttackKind",
    "Catalog",
    "CatalogEntry",
    "CycleInDependencies",
    "Environment",
    "Exposure",
    "InvariantViolation",
    "RemediationActionKind",
    "Service",
    "TelemetryBatch",
    "TelemetryRecord",
    "UnknownAsset",
    "UnknownCatalogEntry",
    "load_catalog",
    "load_scenario_doc",
    "load_topology",
]
