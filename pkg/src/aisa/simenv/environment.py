"""Simulation engine: tick advancement, attack progression, action effects.

One tick is one simulated minute. Every mutation flows through a single
Environment instance owned by its caller; identical (scenario, seed) always
produce bit-identical trajectories.
"""

from __future__ import annotations

import hashlib
import pickle
import random
from dataclasses import dataclass

from aisa.simenv.catalog import Catalog
from aisa.simenv.model import (
    ALERT_ONLY,
    CROSS_ASSET_FEATURES,
    FEATURES,
    ActionInapplicable,
    ActionOutcome,
    Asset,
    AssetState,
    AttackInstance,
    AttackKind,
    ProtocolSecurity,
    RemediationActionKind,
    Service,
    TelemetryBatch,
    TelemetryRecord,
    UnknownAsset,
    UnknownCatalogEntry,
)

# Ticks a side-effect degradation or post-attack recovery lingers.
RECOVERY_LAG_TICKS = 3


@dataclass
class ActionEffect:
    success_p: float
    disruption_minutes: float
    compliance_violation: bool
    side_effects: str  # "none" | "downstream"


@dataclass
class EffectTable:
    actions: dict[str, ActionEffect]
    action_overrides: dict[str, ActionEffect]
    attack_stages: dict[str, list[str]]
    attack_effects: dict[str, dict[str, dict[str, float | bool]]]
    baselines: dict[str, dict[str, tuple[float, float]]]
    stage_ticks: int

    def effect_for(self, action_name: str, asset_class: str) -> ActionEffect:
        override = self.action_overrides.get(f"{action_name}/{asset_class}")
        return override if override is not None else self.actions[action_name]

    @classmethod
    def from_dict(cls, data: dict) -> "EffectTable":
        def parse_effect(raw: dict, base: ActionEffect | None = None) -> ActionEffect:
            merged = {
                "success_p": base.success_p if base else 1.0,
                "disruption_minutes": base.disruption_minutes if base else 0.0,
                "compliance_violation": base.compliance_violation if base else False,
                "side_effects": base.side_effects if base else "none",
            }
            merged.update(raw)
            return ActionEffect(
                success_p=float(merged["success_p"]),
                disruption_minutes=float(merged["disruption_minutes"]),
                compliance_violation=bool(merged["compliance_violation"]),
                side_effects=str(merged["side_effects"]),
            )

        actions = {name: parse_effect(raw) for name, raw in data["actions"].items()}
        overrides = {}
        for key, raw in (data.get("action_overrides") or {}).items():
            action_name = key.split("/", 1)[0]
            overrides[key] = parse_effect(raw, base=actions[action_name])
        attacks = data.get("attacks") or {}
        baselines = {
            cls_name: {feat: (float(ms[0]), float(ms[1])) for feat, ms in feats.items()}
            for cls_name, feats in (data.get("baselines") or {}).items()
        }
        return cls(
            actions=actions,
            action_overrides=overrides,
            attack_stages={k: list(v["stages"]) for k, v in attacks.items()},
            attack_effects={k: dict(v["effects"]) for k, v in attacks.items()},
            baselines=baselines,
            stage_ticks=int(data.get("stage_ticks", 5)),
        )


class Environment:
    """Single-writer simulated environment."""

    def __init__(
        self,
        name: str,
        assets: dict[str, Asset],
        dependencies: list[tuple[str, str]],
        catalog: Catalog,
        effects: EffectTable,
        seed: int,
    ):
        self.name = name
        self.assets = assets
        self.dependencies = list(dependencies)
        self.catalog = catalog
        self.effects = effects
        self.seed = seed
        self.clock = 0
        self.rng = random.Random(seed)
        self.active_attacks: list[AttackInstance] = []
        self.injected_vulns: list[tuple[str, str]] = []
        self.downtime_minutes: dict[str, int] = {aid: 0 for aid in assets}
        self.data_loss_units = 0
        self.trajectory_digest = "0" * 64
        self._down_edges: dict[str, list[str]] = {aid: [] for aid in assets}
        self._adjacent: dict[str, set[str]] = {aid: set() for aid in assets}
        for up, down in dependencies:
            self._down_edges[up].append(down)
            self._adjacent[up].add(down)
            self._adjacent[down].add(up)
        for downs in self._down_edges.values():
            downs.sort()

    # -- topology ---------------------------------------------------------

    def asset(self, asset_id: str) -> Asset:
        try:
            return self.assets[asset_id]
        except KeyError:
            raise UnknownAsset(asset_id) from None

    def sorted_assets(self) -> list[Asset]:
        return [self.assets[aid] for aid in sorted(self.assets)]

    def downstream(self, asset_id: str) -> list[str]:
        """All assets reachable via dependency edges out of `asset_id`."""
        seen: set[str] = set()
        stack = list(self._down_edges[asset_id])
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            stack.extend(self._down_edges[node])
        return sorted(seen)

    def centrality(self, asset_id: str) -> float:
        if len(self.assets) <= 1:
            return 0.0
        return len(self.downstream(asset_id)) / (len(self.assets) - 1)

    # -- injection --------------------------------------------------------

    def inject_vuln(self, asset_id: str, entry_id: str) -> None:
        asset = self.asset(asset_id)
        entry = self.catalog.get(entry_id)
        self.injected_vulns.append((asset_id, entry_id))
        hint = entry.detection
        if hint.inventory_fact == "firmware_below":
            asset.firmware_version = entry.params.get("vulnerable_version", "0.0.0")
        elif hint.inventory_fact == "config_flag" and hint.inventory_value:
            if hint.inventory_value not in asset.config_flags:
                asset.config_flags.append(hint.inventory_value)

    def inject_attack(self, kind: AttackKind, asset_id: str, entry_id: str) -> AttackInstance:
        self.asset(asset_id)
        self.catalog.get(entry_id)
        if kind.value not in self.effects.attack_stages:
            raise UnknownCatalogEntry(kind.value)
        attack = AttackInstance(
            kind=kind,
            entry_asset_id=asset_id,
            start_tick=self.clock,
            exploited_entry_id=entry_id,
        )
        self.active_attacks.append(attack)
        return attack

    def vulns_on(self, asset_id: str) -> list[str]:
        return [e for a, e in self.injected_vulns if a == asset_id]

    def attacks_touching(self, asset_id: str) -> list[AttackInstance]:
        return [a for a in self.active_attacks if a.active and asset_id in a.affected]

    @property
    def breach_count(self) -> int:
        return sum(1 for a in self.active_attacks if a.reached_terminal)

    # -- tick advancement -------------------------------------------------

    def step(self) -> TelemetryBatch:
        self.clock += 1
        for attack in self.active_attacks:
            if attack.active and self.clock > attack.start_tick:
                self._advance_attack(attack)
        self._settle_states()
        records = []
        for asset in self.sorted_assets():
            if asset.state is AssetState.DOWN:
                continue
            records.append(self._emit_record(asset))
            if asset.state is AssetState.ISOLATED:
                self.downtime_minutes[asset.id] += 1
        for asset in self.sorted_assets():
            if asset.state is AssetState.DOWN:
                self.downtime_minutes[asset.id] += 1
        for attack in self.active_attacks:
            if not attack.active or self.clock <= attack.start_tick:
                continue
            stages = self.effects.attack_stages[attack.kind.value]
            if attack.kind is AttackKind.RANSOMWARE and stages[attack.stage] != "Foothold":
                self.data_loss_units += sum(
                    1
                    for aid in attack.affected
                    if self.assets[aid].state is not AssetState.ISOLATED
                )
        batch = TelemetryBatch(tick=self.clock, records=records)
        self._update_trajectory(batch)
        return batch

    def _advance_attack(self, attack: AttackInstance) -> None:
        stages = self.effects.attack_stages[attack.kind.value]
        frontier = [
            aid
            for aid in attack.affected
            if self.assets[aid].state not in (AssetState.ISOLATED, AssetState.DOWN)
        ]
        if not frontier:
            return
        victim_state = (
            AssetState.DEGRADED if attack.kind is AttackKind.DDOS else AssetState.COMPROMISED
        )
        for aid in frontier:
            if self.assets[aid].state is AssetState.HEALTHY:
                self.assets[aid].state = victim_state
        elapsed = self.clock - attack.start_tick
        if attack.stage < len(stages) - 1 and elapsed % self.effects.stage_ticks == 0:
            attack.stage += 1
            if attack.stage == len(stages) - 1:
                attack.reached_terminal = True
        effects = self.effects.attack_effects[attack.kind.value][stages[attack.stage]]
        if effects.get("spread"):
            self._spread(attack, frontier, victim_state)

    def _spread(self, attack: AttackInstance, frontier: list[str], victim_state: AssetState) -> None:
        candidates: list[str] = []
        for aid in sorted(frontier):
            for neighbor in sorted(self._adjacent[aid]):
                asset = self.assets[neighbor]
                if neighbor in attack.affected or neighbor in candidates:
                    continue
                if asset.state in (AssetState.ISOLATED, AssetState.DOWN):
                    continue
                candidates.append(neighbor)
        if candidates:
            target = candidates[0]
            attack.affected.append(target)
            if self.assets[target].state is AssetState.HEALTHY:
                self.assets[target].state = victim_state

    def _settle_states(self) -> None:
        for asset in self.sorted_assets():
            if asset.state not in (AssetState.DEGRADED, AssetState.COMPROMISED):
                continue
            if self.clock < asset.degraded_until:
                continue
            if self.attacks_touching(asset.id):
                continue
            if asset.state is AssetState.COMPROMISED and self.vulns_on(asset.id):
                continue
            asset.state = AssetState.HEALTHY

    def _emit_record(self, asset: Asset) -> TelemetryRecord:
        base = self.effects.baselines[asset.asset_class.value]
        features: dict[str, float] = {}
        for feat in FEATURES:
            mean, std = base.get(feat, (0.0, 0.0))
            value = self.rng.gauss(mean, std) if std > 0 else mean
            features[feat] = max(0.0, value)
        for attack in self.active_attacks:
            if not attack.active or self.clock <= attack.start_tick:
                continue
            if asset.id not in attack.affected:
                continue
            stages = self.effects.attack_stages[attack.kind.value]
            effects = self.effects.attack_effects[attack.kind.value][stages[attack.stage]]
            for key, value in effects.items():
                if key.startswith("mul_"):
                    features[key[4:]] *= float(value)
                elif key.startswith("add_"):
                    features[key[4:]] += float(value)
        if asset.state is AssetState.ISOLATED:
            for feat in CROSS_ASSET_FEATURES:
                features[feat] = 0.0
        return TelemetryRecord(
            asset_id=asset.id,
            features=features,
            firmware_version=asset.firmware_version,
            services=[Service(s.name, s.port, s.protocol_security, s.disabled) for s in asset.services],
            config_flags=sorted(asset.config_flags),
            state=asset.state.value,
        )

    def _update_trajectory(self, batch: TelemetryBatch) -> None:
        parts = [str(self.clock)]
        for record in batch.records:
            feats = ",".join(f"{record.features[f]:.6f}" for f in FEATURES)
            svc = ";".join(
                f"{s.name}:{s.port}:{s.protocol_security.value}:{int(s.disabled)}"
                for s in record.services
            )
            parts.append(
                f"{record.asset_id}|{self.assets[record.asset_id].state.value}|{feats}|"
                f"{record.firmware_version}|{','.join(record.config_flags)}|{svc}"
            )
        for attack in self.active_attacks:
            parts.append(
                f"atk:{attack.kind.value}:{attack.entry_asset_id}:{attack.stage}:"
                f"{int(attack.active)}:{','.join(attack.affected)}"
            )
        for asset_id, entry_id in self.injected_vulns:
            parts.append(f"vuln:{asset_id}:{entry_id}")
        blob = self.trajectory_digest + "\n" + "\n".join(parts)
        self.trajectory_digest = hashlib.sha256(blob.encode()).hexdigest()

    # -- actions ----------------------------------------------------------

    def apply_action(
        self,
        asset_id: str,
        action: RemediationActionKind | str,
        rng: random.Random | None = None,
    ) -> ActionOutcome:
        asset = self.asset(asset_id)
        rng = rng if rng is not None else self.rng
        action_name = action.value if isinstance(action, RemediationActionKind) else action
        if asset.state is AssetState.DOWN:
            raise ActionInapplicable(f"asset {asset_id} is down")
        if action_name == ALERT_ONLY:
            return ActionOutcome(True, 0.0, False, [], asset.state)
        kind = RemediationActionKind(action_name)
        if kind is RemediationActionKind.RESTORE_BACKUP and not asset.has_backup:
            raise ActionInapplicable(f"asset {asset_id} has no backup configured")
        effect = self.effects.effect_for(action_name, asset.asset_class.value)
        success = rng.random() < effect.success_p
        side_effects: list[str] = []
        if effect.side_effects == "downstream":
            for dep_id in self._down_edges[asset.id]:
                dep = self.assets[dep_id]
                if dep.state is AssetState.HEALTHY:
                    dep.state = AssetState.DEGRADED
                    dep.degraded_until = self.clock + RECOVERY_LAG_TICKS
                    side_effects.append(dep_id)
        cleared = False
        if success:
            cleared = self._apply_success_effects(asset, kind)
        return ActionOutcome(
            success=success,
            disruption_minutes=effect.disruption_minutes,
            compliance_violation=effect.compliance_violation,
            side_effects=side_effects,
            resulting_state=asset.state,
            cleared_vuln=cleared,
        )

    def _apply_success_effects(self, asset: Asset, kind: RemediationActionKind) -> bool:
        cleared = False
        if kind is RemediationActionKind.ISOLATE_SEGMENT:
            asset.state = AssetState.ISOLATED
        remaining: list[tuple[str, str]] = []
        for vuln_asset, entry_id in self.injected_vulns:
            entry = self.catalog.get(entry_id)
            if vuln_asset == asset.id and kind in entry.remediation:
                cleared = True
                self._unplant(asset, entry)
            else:
                remaining.append((vuln_asset, entry_id))
        self.injected_vulns = remaining
        for attack in self.active_attacks:
            if not attack.active:
                continue
            entry = self.catalog.get(attack.exploited_entry_id)
            if kind not in entry.remediation:
                continue
            if asset.id == attack.entry_asset_id:
                attack.active = False
                cleared = True
            elif asset.id in attack.affected:
                attack.affected.remove(asset.id)
        if kind is RemediationActionKind.RESTART_SERVICE:
            if not self.attacks_touching(asset.id) and not self.vulns_on(asset.id):
                asset.state = AssetState.HEALTHY
        if kind is RemediationActionKind.UPGRADE_PROTOCOL:
            for service in asset.services:
                service.protocol_security = ProtocolSecurity.SECURE
        return cleared

    def _unplant(self, asset: Asset, entry) -> None:
        hint = entry.detection
        if hint.inventory_fact == "firmware_below":
            asset.firmware_version = entry.params.get("fixed_version", asset.firmware_version)
        elif hint.inventory_fact == "config_flag" and hint.inventory_value:
            if hint.inventory_value in asset.config_flags:
                asset.config_flags.remove(hint.inventory_value)

    def disable_legacy_services(self, asset_id: str) -> list[str]:
        """Containment helper: switch off services still on legacy protocols."""
        asset = self.asset(asset_id)
        disabled = []
        for service in asset.services:
            if service.protocol_security is ProtocolSecurity.LEGACY and not service.disabled:
                service.disabled = True
                disabled.append(service.name)
        return disabled

    # -- persistence ------------------------------------------------------

    def snapshot(self) -> bytes:
        return pickle.dumps(self)


def restore(snapshot: bytes) -> Environment:
    return pickle.loads(snapshot)
