"""Remediation mapping: tabular Q-learning over vulnerability situations,
expert feedback hooks, and finding-to-plan translation.

The state space is (vulnerability class x asset class x exposure): 11 x 7 x 3
= 231 states, small enough for an exact table that an expert can audit line
by line.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from aisa.scanner import Finding, Lifecycle, RiskBand
from aisa.simenv.catalog import Catalog
from aisa.simenv.environment import Environment
from aisa.simenv.model import Asset, AssetClass, AssetState, Exposure, RemediationActionKind
from aisa.simenv.scenario import ScenarioDoc, load_topology

ANOMALY_CLASS = "anomaly"

ACTIONS = tuple(RemediationActionKind)

VULN_CLASSES = (
    "unpatched-systems",
    "ransomware",
    "weak-authentication",
    "ddos",
    "misconfiguration",
    "apt",
    "insider-threat",
    "flat-network",
    "legacy-protocols",
    "no-logging",
    ANOMALY_CLASS,
)


class PinBanConflict(Exception):
    pass


class NoActionAvailable(Exception):
    def __init__(self, state: "State"):
        super().__init__(f"all actions banned for state {state.key()}")
        self.state = state


class ConfigInvalid(Exception):
    pass


@dataclass(frozen=True)
class State:
    vuln_class: str
    asset_class: AssetClass
    exposure: Exposure

    def key(self) -> str:
        return f"{self.vuln_class}|{self.asset_class.value}|{self.exposure.value}"

    @classmethod
    def from_key(cls, key: str) -> "State":
        vuln, asset_class, exposure = key.split("|")
        return cls(vuln, AssetClass(asset_class), Exposure(exposure))


def encode_state(finding: Finding, asset: Asset) -> State:
    vuln_class = finding.catalog_entry_id if finding.catalog_entry_id else ANOMALY_CLASS
    return State(vuln_class=vuln_class, asset_class=asset.asset_class, exposure=asset.exposure)


@dataclass
class RlConfig:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    episodes: int = 5000
    step_cap: int = 6
    lambda_disruption: float = 0.01
    lambda_compliance: float = 1.0
    lambda_side_effect: float = 0.2
    resolve_reward: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ConfigInvalid("alpha must be in (0, 1]")
        if not 0 <= self.gamma < 1:
            raise ConfigInvalid("gamma must be in [0, 1)")
        if min(self.lambda_disruption, self.lambda_compliance, self.lambda_side_effect) < 0:
            raise ConfigInvalid("reward coefficients must be non-negative")
        if self.episodes < 1:
            raise ConfigInvalid("episodes must be positive")

    def epsilon_at(self, episode: int) -> float:
        if self.episodes <= 1:
            return self.epsilon_end
        frac = episode / (self.episodes - 1)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac


def reward_for(outcome, cfg: RlConfig) -> float:
    return (
        (cfg.resolve_reward if outcome.cleared_vuln else 0.0)
        - cfg.lambda_disruption * outcome.disruption_minutes
        - cfg.lambda_compliance * (1.0 if outcome.compliance_violation else 0.0)
        - cfg.lambda_side_effect * len(outcome.side_effects)
    )


class PolicyTable:
    """State-action value table plus expert pins, bans, and shaping terms."""

    def __init__(self, version: int = 1):
        self.q: dict[tuple[str, str], float] = {}
        self.visits: dict[tuple[str, str], int] = {}
        self.pins: dict[str, str] = {}
        self.bans: set[tuple[str, str]] = set()
        self.shaping: dict[tuple[str, str], float] = {}
        self.version = version
        self.metadata: dict = {}

    def get_q(self, state: State, action: RemediationActionKind) -> float:
        return self.q.get((state.key(), action.value), 0.0)

    def set_q(self, state: State, action: RemediationActionKind, value: float) -> None:
        self.q[(state.key(), action.value)] = value

    def allowed_actions(self, state: State) -> list[RemediationActionKind]:
        key = state.key()
        pinned = self.pins.get(key)
        if pinned is not None:
            return [RemediationActionKind(pinned)]
        return [a for a in ACTIONS if (key, a.value) not in self.bans]

    def best_action(self, state: State) -> RemediationActionKind:
        allowed = self.allowed_actions(state)
        if not allowed:
            raise NoActionAvailable(state)
        return max(allowed, key=lambda a: (self.get_q(state, a), -ACTIONS.index(a)))

    def q_row(self, state: State) -> dict[str, float]:
        return {a.value: self.get_q(state, a) for a in ACTIONS}

    # -- expert feedback ---------------------------------------------------

    def reinforce(self, state: State, action: RemediationActionKind, bonus: float) -> None:
        """Immediate additive adjustment plus a shaping term on future visits."""
        key = (state.key(), action.value)
        self.q[key] = self.q.get(key, 0.0) + bonus
        self.shaping[key] = self.shaping.get(key, 0.0) + bonus
        self.version += 1

    def penalize(self, state: State, action: RemediationActionKind, malus: float) -> None:
        self.reinforce(state, action, -abs(malus))

    def pin(self, state: State, action: RemediationActionKind) -> None:
        if (state.key(), action.value) in self.bans:
            raise PinBanConflict(f"{action.value} is banned for {state.key()}")
        self.pins[state.key()] = action.value
        self.version += 1

    def ban(self, state: State, action: RemediationActionKind) -> None:
        if self.pins.get(state.key()) == action.value:
            raise PinBanConflict(f"{action.value} is pinned for {state.key()}")
        self.bans.add((state.key(), action.value))
        self.version += 1

    # -- persistence ---------------------------------------------------------

    def to_doc(self) -> dict:
        return {
            "version": self.version,
            "metadata": self.metadata,
            "entries": [
                {
                    "state": state_key,
                    "action": action,
                    "q": value,
                    "visits": self.visits.get((state_key, action), 0),
                }
                for (state_key, action), value in sorted(self.q.items())
            ],
            "pins": dict(sorted(self.pins.items())),
            "bans": sorted([list(b) for b in self.bans]),
            "shaping": [
                {"state": s, "action": a, "bonus": v}
                for (s, a), v in sorted(self.shaping.items())
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "PolicyTable":
        table = cls(version=int(doc.get("version", 1)))
        table.metadata = dict(doc.get("metadata", {}))
        for entry in doc.get("entries", []):
            key = (entry["state"], entry["action"])
            table.q[key] = float(entry["q"])
            table.visits[key] = int(entry.get("visits", 0))
        table.pins = dict(doc.get("pins", {}))
        table.bans = {tuple(b) for b in doc.get("bans", [])}
        for item in doc.get("shaping", []):
            table.shaping[(item["state"], item["action"])] = float(item["bonus"])
        return table

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_doc(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "PolicyTable":
        return cls.from_doc(json.loads(Path(path).read_text()))

    @classmethod
    def from_catalog(cls, catalog: Catalog) -> "PolicyTable":
        """Seed a table from catalog remediation hints: the first listed
        action gets the strongest prior, alternatives decay behind it."""
        table = cls()
        table.metadata = {"source": "catalog-priors"}
        for entry in catalog.entries():
            for asset_class in AssetClass:
                for exposure in Exposure:
                    state = State(entry.entry_id, asset_class, exposure)
                    for idx, action in enumerate(entry.remediation):
                        table.set_q(state, action, 0.5 / (idx + 1))
        for asset_class in AssetClass:
            for exposure in Exposure:
                state = State(ANOMALY_CLASS, asset_class, exposure)
                table.set_q(state, RemediationActionKind.ENABLE_LOGGING_ALERTING, 0.2)
                table.set_q(state, RemediationActionKind.BLOCK_TRAFFIC, 0.1)
        return table


class TrainingArena:
    """Episodic vulnerability situations drawn from a scenario document."""

    def __init__(self, doc: ScenarioDoc):
        if not doc.training_situations:
            raise ConfigInvalid(f"scenario {doc.name} declares no training_situations")
        self.doc = doc
        env, _ = load_topology(doc)
        self.env = env
        self._pristine = {
            aid: (
                asset.firmware_version,
                tuple(asset.config_flags),
                tuple((s.protocol_security, s.disabled) for s in asset.services),
            )
            for aid, asset in env.assets.items()
        }
        self.situations = [(s["asset"], s["entry"]) for s in doc.training_situations]
        for asset_id, entry_id in self.situations:
            env.asset(asset_id)
            env.catalog.get(entry_id)

    def begin_episode(self, index: int, seed: int) -> tuple[Environment, State, str]:
        env = self.env
        for aid, (firmware, flags, services) in self._pristine.items():
            asset = env.assets[aid]
            asset.state = AssetState.HEALTHY
            asset.degraded_until = 0
            asset.firmware_version = firmware
            asset.config_flags = list(flags)
            for service, (proto, disabled) in zip(asset.services, services):
                service.protocol_security = proto
                service.disabled = disabled
        env.injected_vulns.clear()
        env.active_attacks.clear()
        env.rng.seed(seed)
        asset_id, entry_id = self.situations[index % len(self.situations)]
        env.inject_vuln(asset_id, entry_id)
        asset = env.asset(asset_id)
        state = State(entry_id, asset.asset_class, asset.exposure)
        return env, state, asset_id


def train(arena: TrainingArena, cfg: RlConfig, seed: int, table: PolicyTable | None = None) -> PolicyTable:
    """Episodic Q-learning over the arena's situations. Deterministic for a
    given (arena scenario, cfg, seed)."""
    table = table if table is not None else PolicyTable()
    rng = random.Random(seed)
    for episode in range(cfg.episodes):
        env, state, asset_id = arena.begin_episode(episode, rng.getrandbits(64))
        epsilon = cfg.epsilon_at(episode)
        for _ in range(cfg.step_cap):
            allowed = table.allowed_actions(state)
            if not allowed:
                raise NoActionAvailable(state)
            if len(allowed) == 1:
                action = allowed[0]
            elif rng.random() < epsilon:
                action = allowed[rng.randrange(len(allowed))]
            else:
                action = max(allowed, key=lambda a: (table.get_q(state, a), -ACTIONS.index(a)))
            outcome = env.apply_action(asset_id, action)
            reward = reward_for(outcome, cfg) + table.shaping.get(
                (state.key(), action.value), 0.0
            )
            terminal = outcome.cleared_vuln
            if terminal:
                target = reward
            else:
                next_best = max(table.get_q(state, a) for a in allowed)
                target = reward + cfg.gamma * next_best
            key = (state.key(), action.value)
            current = table.q.get(key, 0.0)
            table.q[key] = current + cfg.alpha * (target - current)
            table.visits[key] = table.visits.get(key, 0) + 1
            if terminal:
                break
    table.metadata.update(
        {
            "episodes": cfg.episodes,
            "alpha": cfg.alpha,
            "gamma": cfg.gamma,
            "seed": seed,
            "scenario": arena.doc.name,
        }
    )
    table.version += 1
    return table


class PlanStatus(Enum):
    DRAFT = "Draft"
    PENDING_APPROVAL = "PendingApproval"
    APPROVED = "Approved"
    REJECTED = "Rejected"
    EXECUTED = "Executed"
    FAILED = "Failed"


@dataclass
class RemediationPlan:
    plan_id: str
    finding_id: str
    asset_id: str
    entry_id: str | None
    actions: list[RemediationActionKind]
    requires_approval: bool
    rationale: dict
    status: PlanStatus = PlanStatus.DRAFT
    created_tick: int = 0

    def to_dict(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "finding_id": self.finding_id,
            "asset_id": self.asset_id,
            "entry_id": self.entry_id,
            "actions": [a.value for a in self.actions],
            "requires_approval": self.requires_approval,
            "rationale": self.rationale,
            "status": self.status.value,
            "created_tick": self.created_tick,
        }


_PATCH_ACTIONS = (RemediationActionKind.FIRMWARE_UPGRADE, RemediationActionKind.AUTO_PATCH)


def map_finding(
    finding: Finding,
    asset: Asset,
    table: PolicyTable,
    plan_id: str,
    tick: int = 0,
    extra_approval_triggers=None,
) -> RemediationPlan:
    """Build a remediation plan for an analyzed finding.

    The learned (or pinned) action is the core step. High-risk findings get an
    isolation step up front so the plan is a self-contained runbook, and
    patch-type actions get a service restart behind them to bring the asset
    back into service; both extra steps are idempotent to execute.
    """
    state = encode_state(finding, asset)
    primary = table.best_action(state)
    actions = [primary]
    if (
        finding.risk_band is RiskBand.HIGH
        and primary is not RemediationActionKind.ISOLATE_SEGMENT
    ):
        actions.insert(0, RemediationActionKind.ISOLATE_SEGMENT)
    if primary in _PATCH_ACTIONS:
        actions.append(RemediationActionKind.RESTART_SERVICE)
    requires_approval = asset.business_critical
    if extra_approval_triggers and not requires_approval:
        requires_approval = extra_approval_triggers(finding, asset)
    plan = RemediationPlan(
        plan_id=plan_id,
        finding_id=finding.finding_id,
        asset_id=asset.id,
        entry_id=finding.catalog_entry_id,
        actions=actions,
        requires_approval=requires_approval,
        rationale={
            "state": state.key(),
            "pinned": state.key() in table.pins,
            "q_values": {
                a.value: round(table.get_q(state, a), 6) for a in table.allowed_actions(state)
            },
            "policy_version": table.version,
        },
        created_tick=tick,
    )
    if finding.lifecycle is Lifecycle.ANALYZED:
        finding.advance(Lifecycle.PLANNED)
        if requires_approval:
            finding.advance(Lifecycle.AWAITING_APPROVAL)
    plan.status = PlanStatus.PENDING_APPROVAL if requires_approval else PlanStatus.DRAFT
    return plan
