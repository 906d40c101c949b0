"""Scenario document loading and topology validation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from aisa.simenv.catalog import LintWarning, load_catalog
from aisa.simenv.environment import EffectTable, Environment
from aisa.simenv.model import (
    Asset,
    AssetClass,
    AttackKind,
    CycleInDependencies,
    Exposure,
    InvariantViolation,
    ProtocolSecurity,
    Service,
    UnknownAsset,
)

logger = logging.getLogger(__name__)


@dataclass
class ScheduledInjection:
    tick: int
    kind: str  # "vuln" | "attack"
    asset_id: str
    entry_id: str
    attack_kind: AttackKind | None = None


@dataclass
class ScenarioDoc:
    name: str
    seed: int
    assets: list[Asset]
    dependencies: list[tuple[str, str]]
    catalog_overrides: list[dict]
    attack_schedule: list[ScheduledInjection]
    effect_overrides: dict
    scanner: dict = field(default_factory=dict)
    scoring: dict = field(default_factory=dict)
    security_policy: dict = field(default_factory=dict)
    training_situations: list[dict] = field(default_factory=list)
    raw: dict = field(default_factory=dict)


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _parse_asset(raw: dict) -> Asset:
    services = [
        Service(
            name=s["name"],
            port=int(s["port"]),
            protocol_security=ProtocolSecurity(s.get("protocol_security", "Secure")),
        )
        for s in raw.get("services", [])
    ]
    return Asset(
        id=raw["id"],
        asset_class=AssetClass(raw["class"]),
        criticality=float(raw["criticality"]),
        business_critical=bool(raw.get("business_critical", False)),
        firmware_version=str(raw.get("firmware_version", "1.0.0")),
        exposure=Exposure(raw.get("exposure", "InternalOnly")),
        services=services,
        tags=list(raw.get("tags", [])),
        has_backup=bool(raw.get("has_backup", True)),
        config_flags=list(raw.get("config_flags", [])),
    )


def bundled_scenario_path(name: str) -> Path:
    return Path(str(resources.files("aisa.data").joinpath("scenarios").joinpath(f"{name}.yaml")))


def load_scenario_doc(path: str | Path) -> ScenarioDoc:
    raw = yaml.safe_load(Path(path).read_text())
    schedule = []
    for item in raw.get("attack_schedule", []):
        if item.get("type", "vuln") == "attack":
            schedule.append(
                ScheduledInjection(
                    tick=int(item["tick"]),
                    kind="attack",
                    asset_id=item["asset"],
                    entry_id=item["entry"],
                    attack_kind=AttackKind(item["kind"]),
                )
            )
        else:
            schedule.append(
                ScheduledInjection(
                    tick=int(item["tick"]),
                    kind="vuln",
                    asset_id=item["asset"],
                    entry_id=item["entry"],
                )
            )
    schedule.sort(key=lambda s: (s.tick, s.asset_id, s.entry_id))
    return ScenarioDoc(
        name=raw.get("name", Path(path).stem),
        seed=int(raw.get("seed", 0)),
        assets=[_parse_asset(a) for a in raw.get("assets", [])],
        dependencies=[(d[0], d[1]) for d in raw.get("dependencies", [])],
        catalog_overrides=list(raw.get("catalog_overrides", [])),
        attack_schedule=schedule,
        effect_overrides=dict(raw.get("effect_table", {})),
        scanner=dict(raw.get("scanner", {})),
        scoring=dict(raw.get("scoring", {})),
        security_policy=dict(raw.get("security_policy", {})),
        training_situations=list(raw.get("training_situations", [])),
        raw=raw,
    )


def _check_dag(asset_ids: set[str], dependencies: list[tuple[str, str]]) -> None:
    edges: dict[str, list[str]] = {aid: [] for aid in asset_ids}
    for up, down in dependencies:
        if up not in asset_ids:
            raise UnknownAsset(up)
        if down not in asset_ids:
            raise UnknownAsset(down)
        edges[up].append(down)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {aid: WHITE for aid in asset_ids}
    stack_path: list[str] = []

    def visit(node: str) -> None:
        color[node] = GRAY
        stack_path.append(node)
        for nxt in edges[node]:
            if color[nxt] == GRAY:
                cycle = stack_path[stack_path.index(nxt):] + [nxt]
                raise CycleInDependencies(cycle)
            if color[nxt] == WHITE:
                visit(nxt)
        stack_path.pop()
        color[node] = BLACK

    for aid in sorted(asset_ids):
        if color[aid] == WHITE:
            visit(aid)


def _validate_assets(assets: list[Asset]) -> None:
    if not assets:
        raise InvariantViolation("scenario", "asset list must not be empty")
    seen: set[str] = set()
    for asset in assets:
        if asset.id in seen:
            raise InvariantViolation(asset.id, "duplicate asset id")
        seen.add(asset.id)
        if not 0.0 <= asset.criticality <= 1.0:
            raise InvariantViolation(asset.id, "criticality must be in [0, 1]")
        if asset.business_critical and asset.criticality < 0.8:
            raise InvariantViolation(
                asset.id, "business_critical asset requires criticality >= 0.8"
            )


def load_topology(
    doc: ScenarioDoc, seed: int | None = None
) -> tuple[Environment, list[LintWarning]]:
    """Build a validated Environment from a scenario document.

    Returns the environment plus catalog lint warnings (declared-vs-computed
    score mismatches), which are logged but never fatal.
    """
    _validate_assets(doc.assets)
    _check_dag({a.id for a in doc.assets}, doc.dependencies)
    catalog = load_catalog(overrides=doc.catalog_overrides)
    defaults = yaml.safe_load(
        resources.files("aisa.data").joinpath("effect_table.yaml").read_text()
    )
    effects = EffectTable.from_dict(_deep_merge(defaults, doc.effect_overrides))
    for asset in doc.assets:
        if asset.asset_class.value not in effects.baselines:
            raise InvariantViolation(asset.id, f"no baseline for class {asset.asset_class.value}")
    env = Environment(
        name=doc.name,
        assets={a.id: _parse_asset_copy(a) for a in doc.assets},
        dependencies=doc.dependencies,
        catalog=catalog,
        effects=effects,
        seed=doc.seed if seed is None else seed,
    )
    for injection in doc.attack_schedule:
        env.asset(injection.asset_id)
        catalog.get(injection.entry_id)
    warnings = catalog.lint()
    for warning in warnings:
        logger.warning(str(warning))
    return env, warnings


def _parse_asset_copy(asset: Asset) -> Asset:
    # Fresh mutable copy so a ScenarioDoc can seed many environments.
    return Asset(
        id=asset.id,
        asset_class=asset.asset_class,
        criticality=asset.criticality,
        business_critical=asset.business_critical,
        firmware_version=asset.firmware_version,
        exposure=asset.exposure,
        services=[Service(s.name, s.port, s.protocol_security, s.disabled) for s in asset.services],
        tags=list(asset.tags),
        has_backup=asset.has_backup,
        config_flags=list(asset.config_flags),
    )
