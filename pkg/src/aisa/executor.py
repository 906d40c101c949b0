"""Remediation execution: script resolution, policy validation, the human
approval gate, simulated execution, and post-remediation integrity checks.

A plan becomes a script either from the pre-existing library or by template
instantiation; the script is validated against security policy, held for
approval when required, then applied step by step against the environment
with stop-on-first-failure semantics.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

from aisa.mapper import PlanStatus, RemediationPlan
from aisa.scanner import Finding
from aisa.simenv.environment import Environment, restore
from aisa.simenv.model import (
    ActionInapplicable,
    ActionOutcome,
    AssetClass,
    AssetState,
    RemediationActionKind,
)

INTEGRITY_PROBE_TICKS = 3
INTEGRITY_BAND_SIGMA = 4.0


class ScriptFormat(Enum):
    SYSTEM_SHELL_AUTOMATION = "SystemShellAutomation"
    GENERAL_SCRIPTING = "GeneralScripting"
    WORKFLOW_AUTOMATION = "WorkflowAutomation"


class ScriptSource(Enum):
    PREEXISTING = "Preexisting"
    GENERATED = "Generated"


class Integrity(Enum):
    RESTORED = "Restored"
    DEGRADED = "Degraded"
    FAILED = "Failed"


class TemplateMissing(Exception):
    def __init__(self, action: str):
        super().__init__(f"no script template for action {action}")
        self.action = action


class ExecutionAborted(Exception):
    pass


# Format preference per asset class: operational-technology assets run curated
# workflow automations, workstations get shell automation, the rest scripting.
_FORMAT_BY_CLASS = {
    AssetClass.SCADA_CONTROLLER: ScriptFormat.WORKFLOW_AUTOMATION,
    AssetClass.PLC: ScriptFormat.WORKFLOW_AUTOMATION,
    AssetClass.HMI: ScriptFormat.WORKFLOW_AUTOMATION,
    AssetClass.WORKSTATION: ScriptFormat.SYSTEM_SHELL_AUTOMATION,
    AssetClass.SERVER: ScriptFormat.GENERAL_SCRIPTING,
    AssetClass.DATABASE: ScriptFormat.GENERAL_SCRIPTING,
    AssetClass.FIREWALL: ScriptFormat.GENERAL_SCRIPTING,
}

# Parameter slots per action, filled from asset config, catalog data, and
# remediation history.
DEFAULT_TEMPLATES: dict[str, tuple[str, ...]] = {
    "AutoPatch": ("patch_channel",),
    "VirtualPatch": (),
    "IsolateSegment": (),
    "RestoreBackup": (),
    "BlockTraffic": (),
    "EnforceMfaResetCreds": (),
    "RateLimit": ("limit_pct",),
    "FixMisconfig": (),
    "DisableUnusedPorts": (),
    "UpgradeProtocol": ("target_protocol",),
    "AdjustPrivileges": (),
    "EnableLoggingAlerting": (),
    "RestartService": (),
    "FirmwareUpgrade": ("target_version",),
}


@dataclass
class ScriptStep:
    asset_id: str
    action: RemediationActionKind
    params: dict[str, str]

    def render(self, fmt: ScriptFormat) -> str:
        items = sorted(self.params.items())
        if fmt is ScriptFormat.SYSTEM_SHELL_AUTOMATION:
            args = "".join(f" --{k.replace('_', '-')} {v}" for k, v in items)
            return f"remctl {_kebab(self.action.value)} --asset {self.asset_id}{args}"
        if fmt is ScriptFormat.GENERAL_SCRIPTING:
            args = "".join(f", {k}={v!r}" for k, v in items)
            return f"run_action({self.action.value!r}, asset={self.asset_id!r}{args})"
        args = "".join(f" | {k}={v}" for k, v in items)
        return f"- step: {self.action.value} | asset={self.asset_id}{args}"


def _kebab(name: str) -> str:
    out = []
    for ch in name:
        if ch.isupper() and out:
            out.append("-")
        out.append(ch.lower())
    return "".join(out)


def parse_step(line: str, fmt: ScriptFormat) -> ScriptStep:
    """Invert `ScriptStep.render`."""
    if fmt is ScriptFormat.SYSTEM_SHELL_AUTOMATION:
        tokens = line.split()
        action = RemediationActionKind(
            "".join(part.capitalize() for part in tokens[1].split("-"))
        )
        params = {}
        asset_id = ""
        for key, value in zip(tokens[2::2], tokens[3::2]):
            name = key.removeprefix("--").replace("-", "_")
            if name == "asset":
                asset_id = value
            else:
                params[name] = value
        return ScriptStep(asset_id, action, params)
    if fmt is ScriptFormat.GENERAL_SCRIPTING:
        inner = line[line.index("(") + 1 : line.rindex(")")]
        parts = [p.strip() for p in inner.split(",")]
        action = RemediationActionKind(parts[0].strip("'\""))
        asset_id = ""
        params = {}
        for part in parts[1:]:
            key, value = part.split("=", 1)
            value = value.strip().strip("'\"")
            if key.strip() == "asset":
                asset_id = value
            else:
                params[key.strip()] = value
        return ScriptStep(asset_id, action, params)
    body = line.removeprefix("- step:").strip()
    fields = [f.strip() for f in body.split("|")]
    action = RemediationActionKind(fields[0])
    asset_id = ""
    params = {}
    for item in fields[1:]:
        key, value = item.split("=", 1)
        if key == "asset":
            asset_id = value
        else:
            params[key] = value
    return ScriptStep(asset_id, action, params)


@dataclass
class Script:
    script_id: str
    format: ScriptFormat
    steps: list[ScriptStep]
    source: ScriptSource
    template_id: str | None = None

    def render(self) -> str:
        return "\n".join(step.render(self.format) for step in self.steps) + "\n"

    def content_hash(self) -> str:
        return hashlib.sha256(self.render().encode()).hexdigest()

    def touched_assets(self) -> set[str]:
        return {step.asset_id for step in self.steps}


class ScriptStore:
    """Pre-existing script library plus generation templates."""

    def __init__(self, templates: dict[str, tuple[str, ...]] | None = None):
        self.scripts: dict[tuple[str, str], Script] = {}
        self.templates = dict(DEFAULT_TEMPLATES if templates is None else templates)
        self.history: dict[tuple[str, str], dict[str, str]] = {}

    def lookup(self, vuln_class: str | None, asset_class: AssetClass) -> Script | None:
        if vuln_class is None:
            return None
        return self.scripts.get((vuln_class, asset_class.value))

    def record_success(self, vuln_class: str | None, asset_class: AssetClass, script: Script) -> None:
        if vuln_class is None:
            return
        key = (vuln_class, asset_class.value)
        if key not in self.scripts:
            self.scripts[key] = script
        params: dict[str, str] = {}
        for step in script.steps:
            params.update(step.params)
        self.history[key] = params


def _step_params(
    action: RemediationActionKind,
    entry,
    history_params: dict[str, str],
    templates: dict[str, tuple[str, ...]],
) -> dict[str, str]:
    if action.value not in templates:
        raise TemplateMissing(action.value)
    params = {}
    for slot in templates[action.value]:
        if slot in history_params:
            params[slot] = history_params[slot]
        elif entry is not None and slot == "target_version":
            params[slot] = entry.params.get("fixed_version", "latest")
        elif slot == "target_protocol":
            params[slot] = "tls"
        elif slot == "patch_channel":
            params[slot] = "stable"
        elif slot == "limit_pct":
            params[slot] = "10"
        else:
            params[slot] = "default"
    return params


def resolve_script(plan: RemediationPlan, store: ScriptStore, env: Environment) -> Script:
    """Algorithm: return the library script for this (vulnerability, asset
    class) when one exists; otherwise generate one from templates, drawing
    parameters from the catalog, asset config, and past remediations."""
    asset = env.asset(plan.asset_id)
    existing = store.lookup(plan.entry_id, asset.asset_class)
    if existing is not None:
        return existing
    entry = env.catalog.get(plan.entry_id) if plan.entry_id else None
    history_params = store.history.get((plan.entry_id or "", asset.asset_class.value), {})
    fmt = _FORMAT_BY_CLASS[asset.asset_class]
    steps = [
        ScriptStep(
            asset_id=plan.asset_id,
            action=action,
            params=_step_params(action, entry, history_params, store.templates),
        )
        for action in plan.actions
    ]
    return Script(
        script_id=f"{plan.plan_id}-script",
        format=fmt,
        steps=steps,
        source=ScriptSource.GENERATED,
        template_id="builtin-templates-v1",
    )


@dataclass
class PolicyRule:
    action: RemediationActionKind | None
    asset_class: AssetClass | None = None
    tag: str | None = None
    unless_in_window: bool = False

    def matches(self, step: ScriptStep, env: Environment) -> bool:
        if self.action is not None and step.action is not self.action:
            return False
        asset = env.assets.get(step.asset_id)
        if asset is None:
            return True
        if self.asset_class is not None and asset.asset_class is not self.asset_class:
            return False
        if self.tag is not None and self.tag not in asset.tags:
            return False
        return True


@dataclass
class SecurityPolicy:
    deny_rules: list[PolicyRule] = field(default_factory=list)
    maintenance_windows: list[tuple[int, int]] = field(default_factory=list)
    max_blast_radius: int = 3
    approval_triggers: list[dict] = field(default_factory=list)

    @classmethod
    def from_dict(cls, raw: dict) -> "SecurityPolicy":
        rules = []
        for r in raw.get("deny_rules", []):
            rules.append(
                PolicyRule(
                    action=RemediationActionKind(r["action"]) if r.get("action") else None,
                    asset_class=AssetClass(r["asset_class"]) if r.get("asset_class") else None,
                    tag=r.get("tag"),
                    unless_in_window=bool(r.get("unless_in_window", False)),
                )
            )
        windows = [
            (int(w["start"]), int(w["end"])) for w in raw.get("maintenance_windows", [])
        ]
        return cls(
            deny_rules=rules,
            maintenance_windows=windows,
            max_blast_radius=int(raw.get("max_blast_radius", 3)),
            approval_triggers=list(raw.get("approval_triggers", [])),
        )

    def in_window(self, tick: int) -> bool:
        return any(start <= tick <= end for start, end in self.maintenance_windows)

    def requires_extra_approval(self, finding, asset) -> bool:
        for trigger in self.approval_triggers:
            if "exposure" in trigger and asset.exposure.value == trigger["exposure"]:
                return True
            if "risk_band" in trigger and finding.risk_band is not None:
                if finding.risk_band.value == trigger["risk_band"]:
                    return True
            if "tag" in trigger and trigger["tag"] in asset.tags:
                return True
        return False


@dataclass
class Violation:
    rule: str  # "DenyRule" | "WindowRule" | "BlastRadius"
    detail: str

    def to_dict(self) -> dict:
        return {"rule": self.rule, "detail": self.detail}


@dataclass
class Verdict:
    ok: bool
    violations: list[Violation]
    script_hash: str
    tick: int


def validate(script: Script, policy: SecurityPolicy, env: Environment, tick: int) -> Verdict:
    """Evaluate every rule; all violations are reported, not just the first."""
    violations: list[Violation] = []
    for step in script.steps:
        for rule in policy.deny_rules:
            if not rule.matches(step, env):
                continue
            if rule.unless_in_window:
                if not policy.in_window(tick):
                    violations.append(
                        Violation(
                            "WindowRule",
                            f"{step.action.value} on {step.asset_id} outside maintenance window",
                        )
                    )
            else:
                violations.append(
                    Violation("DenyRule", f"{step.action.value} denied on {step.asset_id}")
                )
    touched = script.touched_assets()
    if len(touched) > policy.max_blast_radius:
        violations.append(
            Violation(
                "BlastRadius",
                f"script touches {len(touched)} assets, limit {policy.max_blast_radius}",
            )
        )
    return Verdict(
        ok=not violations,
        violations=violations,
        script_hash=script.content_hash(),
        tick=tick,
    )


class ApprovalRegistry:
    """Durable record of approval decisions, keyed by plan."""

    def __init__(self):
        self.decisions: dict[str, dict] = {}

    def record(self, plan_id: str, verdict: str, actor: str, comment: str, tick: int) -> dict:
        decision = {
            "plan_id": plan_id,
            "verdict": verdict,
            "actor": actor,
            "comment": comment,
            "tick": tick,
        }
        self.decisions[plan_id] = decision
        return decision

    def get(self, plan_id: str) -> dict | None:
        return self.decisions.get(plan_id)


@dataclass
class ExecutedStep:
    step: ScriptStep
    outcome: ActionOutcome | None
    error: str | None = None

    def to_dict(self) -> dict:
        data = {
            "asset_id": self.step.asset_id,
            "action": self.step.action.value,
            "params": self.step.params,
            "error": self.error,
        }
        if self.outcome is not None:
            data.update(
                success=self.outcome.success,
                disruption_minutes=self.outcome.disruption_minutes,
                compliance_violation=self.outcome.compliance_violation,
                side_effects=self.outcome.side_effects,
            )
        return data


@dataclass
class RemediationResult:
    plan_id: str
    executed_steps: list[ExecutedStep]
    integrity: Integrity
    started_tick: int
    finished_tick: int
    containment_minutes: int


@dataclass
class ExecutionPending:
    plan_id: str


@dataclass
class ExecutionRejected:
    plan_id: str
    decision: dict


def execute(
    plan: RemediationPlan,
    script: Script,
    env: Environment,
    approvals: ApprovalRegistry,
    verdict: Verdict,
    finding: Finding,
    store: ScriptStore | None = None,
) -> RemediationResult | ExecutionPending | ExecutionRejected:
    """Run an approved (or ungated) plan's script against the environment.

    Validation must precede execution: a missing or stale verdict, or any
    drift between the validated script and the one presented here, aborts.
    """
    if not verdict.ok:
        raise ExecutionAborted("script failed security policy validation")
    if script.content_hash() != verdict.script_hash:
        raise ExecutionAborted("script changed since validation")
    if plan.requires_approval:
        decision = approvals.get(plan.plan_id)
        if decision is None:
            plan.status = PlanStatus.PENDING_APPROVAL
            return ExecutionPending(plan.plan_id)
        if decision["verdict"] != "Approve":
            plan.status = PlanStatus.REJECTED
            return ExecutionRejected(plan.plan_id, decision)
    started = env.clock
    executed: list[ExecutedStep] = []
    failed = False
    for step in script.steps:
        try:
            outcome = env.apply_action(step.asset_id, step.action)
        except ActionInapplicable as exc:
            executed.append(ExecutedStep(step, None, error=exc.reason))
            failed = True
            break
        executed.append(ExecutedStep(step, outcome))
        if not outcome.success:
            failed = True
            break
    integrity = integrity_check(env, plan.asset_id, finding)
    if failed and integrity is not Integrity.FAILED:
        integrity = Integrity.FAILED if _cause_remains(env, plan.asset_id, finding) else integrity
    plan.status = PlanStatus.FAILED if integrity is Integrity.FAILED else PlanStatus.EXECUTED
    if store is not None and integrity is not Integrity.FAILED:
        asset = env.asset(plan.asset_id)
        store.record_success(plan.entry_id, asset.asset_class, script)
    return RemediationResult(
        plan_id=plan.plan_id,
        executed_steps=executed,
        integrity=integrity,
        started_tick=started,
        finished_tick=env.clock,
        containment_minutes=env.clock - finding.detected_tick,
    )


def _cause_remains(env: Environment, asset_id: str, finding: Finding) -> bool:
    if finding.catalog_entry_id is not None:
        if finding.catalog_entry_id in env.vulns_on(asset_id):
            return True
        for attack in env.attacks_touching(asset_id):
            if attack.exploited_entry_id == finding.catalog_entry_id:
                return True
        return False
    return bool(env.attacks_touching(asset_id))


def integrity_check(env: Environment, asset_id: str, finding: Finding) -> Integrity:
    """Failed while the triggering cause persists; Degraded when the cause is
    cleared but the asset has not returned to normal operation; Restored when
    the asset is healthy and telemetry stays inside the baseline band for
    three consecutive probe ticks."""
    if _cause_remains(env, asset_id, finding):
        return Integrity.FAILED
    asset = env.asset(asset_id)
    if asset.state is not AssetState.HEALTHY:
        return Integrity.DEGRADED
    # Verification probe runs on a restored snapshot so the live clock and
    # random stream are untouched.
    probe = restore(env.snapshot())
    baselines = env.effects.baselines[asset.asset_class.value]
    for _ in range(INTEGRITY_PROBE_TICKS):
        record = probe.step().record_for(asset_id)
        if record is None:
            return Integrity.DEGRADED
        for feature, value in record.features.items():
            mean, std = baselines[feature]
            if std > 0:
                if abs(value - mean) > INTEGRITY_BAND_SIGMA * std:
                    return Integrity.DEGRADED
            elif abs(value - mean) > 1e-9:
                return Integrity.DEGRADED
    return Integrity.RESTORED
