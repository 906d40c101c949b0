"""Pipeline orchestration: the per-tick detection-to-remediation loop, the
baseline comparison mode, durable run artifacts, replay, and approvals.

Stage order within a tick is fixed: advance environment, scan/triage/contain,
score/prioritize, map, then resolve/validate/execute subject to approvals.
External commands (decisions, manual containment) are observed only at tick
boundaries, which keeps identical (config, seed, approval script) runs
byte-identical in the audit log.
"""

from __future__ import annotations

import hashlib
import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path

from aisa import analyzer, executor, mapper, scanner
from aisa.analyzer import ScoringConfig, build_report, impact_score, round2
from aisa.audit import AuditEvent, AuditLog, ChainCorrupt, Notifier, read_events, verify_events
from aisa.executor import (
    ApprovalRegistry,
    ExecutionPending,
    ExecutionRejected,
    Integrity,
    ScriptStore,
    SecurityPolicy,
    resolve_script,
    validate,
)
from aisa.mapper import PlanStatus, PolicyTable, RemediationPlan, State, map_finding
from aisa.scanner import Finding, FindingQueue, Lifecycle, Scanner
from aisa.simenv import RemediationActionKind, load_topology
from aisa.simenv.model import AssetState
from aisa.simenv.scenario import ScenarioDoc, bundled_scenario_path, load_scenario_doc

_PATCH_ACTIONS = {
    RemediationActionKind.FIRMWARE_UPGRADE,
    RemediationActionKind.AUTO_PATCH,
    RemediationActionKind.VIRTUAL_PATCH,
}

DEFAULT_NOTIFY_ON = ("ApprovalRequested", "Resolved", "Failed")


class ConfigError(Exception):
    pass


class UnknownPlan(Exception):
    def __init__(self, plan_id: str):
        super().__init__(f"unknown plan {plan_id!r}")
        self.plan_id = plan_id


class AlreadyDecided(Exception):
    def __init__(self, plan_id: str):
        super().__init__(f"plan {plan_id!r} already decided")
        self.plan_id = plan_id


@dataclass
class RunConfig:
    scenario_path: str
    out_dir: str
    mode: str = "aisa"  # "aisa" | "baseline"
    policy_path: str | None = None
    tick_budget: int = 500
    seed: int | None = None
    auto_approve_after_ticks: int | None = None
    manual_triage_delay_ticks: int = 2880
    manual_remediation_delay_ticks: int = 5760
    baseline_detection_miss_rate: float = 0.4
    api_bind: str = "127.0.0.1:8787"
    notify_subscribers: list[dict] = field(default_factory=list)
    notify_on: tuple[str, ...] = DEFAULT_NOTIFY_ON

    def __post_init__(self):
        if self.mode not in ("aisa", "baseline"):
            raise ConfigError(f"mode must be aisa or baseline, got {self.mode!r}")
        if self.tick_budget < 0:
            raise ConfigError("tick budget must be non-negative")
        if not 0.0 <= self.baseline_detection_miss_rate < 1.0:
            raise ConfigError("baseline detection miss rate must be in [0, 1)")

    def to_dict(self) -> dict:
        return {
            "scenario_path": self.scenario_path,
            "out_dir": self.out_dir,
            "mode": self.mode,
            "policy_path": self.policy_path,
            "tick_budget": self.tick_budget,
            "seed": self.seed,
            "auto_approve_after_ticks": self.auto_approve_after_ticks,
            "manual_triage_delay_ticks": self.manual_triage_delay_ticks,
            "manual_remediation_delay_ticks": self.manual_remediation_delay_ticks,
            "baseline_detection_miss_rate": self.baseline_detection_miss_rate,
            "api_bind": self.api_bind,
            "notify_subscribers": self.notify_subscribers,
            "notify_on": list(self.notify_on),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        raw["notify_on"] = tuple(raw.get("notify_on", DEFAULT_NOTIFY_ON))
        return cls(**raw)


@dataclass
class PlanContext:
    plan: RemediationPlan
    finding: Finding
    request_tick: int | None = None
    approved_tick: int | None = None
    executed: bool = False


def _finding_payload(finding: Finding) -> dict:
    return {
        "finding_id": finding.finding_id,
        "asset_id": finding.asset_id,
        "catalog_entry_id": finding.catalog_entry_id,
        "cve_id": finding.cve_id,
        "detected_tick": finding.detected_tick,
        "anomaly_score": round(finding.anomaly_score, 6),
        "feature": finding.feature,
        "risk_band": finding.risk_band.value if finding.risk_band else None,
        "lifecycle": finding.lifecycle.value,
    }


class Pipeline:
    """Owns all mutable run state; one instance drives one run."""

    def __init__(self, cfg: RunConfig, replay_decisions: list[dict] | None = None):
        self.cfg = cfg
        scenario_path = Path(cfg.scenario_path)
        if not scenario_path.exists():
            bundled = bundled_scenario_path(str(cfg.scenario_path))
            if bundled.exists():
                scenario_path = bundled
            else:
                raise ConfigError(f"scenario not found: {cfg.scenario_path}")
        self.doc: ScenarioDoc = load_scenario_doc(scenario_path)
        self.seed = cfg.seed if cfg.seed is not None else self.doc.seed
        self.env, self.lint_warnings = load_topology(self.doc, seed=self.seed)
        self.run_id = f"{self.doc.name}-{cfg.mode}-s{self.seed}"
        self.out_dir = Path(cfg.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        (self.out_dir / "reports").mkdir(exist_ok=True)
        (self.out_dir / "scripts").mkdir(exist_ok=True)
        (self.out_dir / "config.json").write_text(
            json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
        )

        scanner_cfg = self.doc.scanner
        self.scanner = Scanner(
            self.env.catalog,
            scanner.BaselineModel(
                decay=float(scanner_cfg.get("ewma_decay", 0.05)),
                warmup_ticks=int(scanner_cfg.get("warmup_ticks", 50)),
                z_threshold=float(scanner_cfg.get("z_threshold", 4.0)),
            ),
        )
        self.queue = FindingQueue()
        self.scoring = ScoringConfig.from_dict(self.doc.scoring)
        self.policy = SecurityPolicy.from_dict(self.doc.security_policy)
        if cfg.policy_path:
            self.table = PolicyTable.load(cfg.policy_path)
        else:
            self.table = PolicyTable.from_catalog(self.env.catalog)
        self.store = ScriptStore()
        self.audit = AuditLog(self.out_dir / "audit.log", fresh=True)
        self.notifier = Notifier(subscribers=list(cfg.notify_subscribers))
        self.approvals = ApprovalRegistry()
        self.plans: dict[str, PlanContext] = {}
        self._plan_seq = 0
        self._schedule = list(self.doc.attack_schedule)
        self._miss_rng = random.Random((self.seed * 31 + 7) & 0xFFFFFFFF)
        self._commands: list[dict] = []
        self._command_lock = threading.Lock()
        self._replay_decisions = list(replay_decisions or [])
        self._last_report_key: tuple | None = None
        self.last_report = None
        self._last_scores: dict[str, float] = {}
        self.finished = False
        self.summary: dict | None = None
        # per-injection bookkeeping for run metrics
        self._injections: list[dict] = []

    # -- public command surface (thread-safe) ------------------------------

    def submit_decision(
        self, plan_id: str, verdict: str, actor: str, comment: str = "",
        ban_action: str | None = None,
    ) -> None:
        if verdict not in ("Approve", "Reject"):
            raise ConfigError(f"verdict must be Approve or Reject, got {verdict!r}")
        with self._command_lock:
            ctx = self.plans.get(plan_id)
            if ctx is None:
                raise UnknownPlan(plan_id)
            already = self.approvals.get(plan_id) is not None or any(
                c for c in self._commands
                if c["type"] == "decision" and c["plan_id"] == plan_id
            )
            if already:
                raise AlreadyDecided(plan_id)
            self._commands.append(
                {
                    "type": "decision",
                    "plan_id": plan_id,
                    "verdict": verdict,
                    "actor": actor,
                    "comment": comment,
                    "ban_action": ban_action,
                }
            )

    def submit_containment(self, finding_id: str, actor: str) -> None:
        with self._command_lock:
            if self.queue.get(finding_id) is None:
                raise UnknownPlan(finding_id)
            self._commands.append(
                {"type": "contain", "finding_id": finding_id, "actor": actor}
            )

    # -- tick stages --------------------------------------------------------

    def tick(self) -> None:
        next_tick = self.env.clock + 1
        self._apply_commands(next_tick)
        self._apply_scripted_approvals(next_tick)
        self._apply_injections(next_tick)
        batch = self.env.step()
        self._scan_stage(batch)
        self._analyze_stage()
        self._map_stage()
        self._execute_stage()

    def _apply_commands(self, tick: int) -> None:
        with self._command_lock:
            commands, self._commands = self._commands, []
        for cmd in commands:
            if cmd["type"] == "decision":
                self._decide(
                    tick, cmd["plan_id"], cmd["verdict"], cmd["actor"],
                    cmd.get("comment", ""), cmd.get("ban_action"),
                )
            elif cmd["type"] == "contain":
                self._manual_containment(tick, cmd["finding_id"], cmd["actor"])

    def _apply_scripted_approvals(self, tick: int) -> None:
        for item in self._replay_decisions:
            if item["tick"] == tick and self.approvals.get(item["plan_id"]) is None:
                self._decide(
                    tick, item["plan_id"], item["verdict"], item["actor"],
                    item.get("comment", ""), item.get("ban_action"),
                )
        if self.cfg.mode == "baseline":
            delay = self.cfg.manual_triage_delay_ticks
            actor = "manual-triage-queue"
        elif self.cfg.auto_approve_after_ticks is not None:
            delay = self.cfg.auto_approve_after_ticks
            actor = "auto-approver"
        else:
            return
        for ctx in list(self.plans.values()):
            if (
                ctx.plan.status is PlanStatus.PENDING_APPROVAL
                and ctx.request_tick is not None
                and self.approvals.get(ctx.plan.plan_id) is None
                and tick - ctx.request_tick >= delay
            ):
                self._decide(tick, ctx.plan.plan_id, "Approve", actor, "scripted approval", None)

    def _decide(
        self, tick: int, plan_id: str, verdict: str, actor: str,
        comment: str, ban_action: str | None,
    ) -> None:
        ctx = self.plans.get(plan_id)
        if ctx is None or self.approvals.get(plan_id) is not None:
            return
        decision = self.approvals.record(plan_id, verdict, actor, comment, tick)
        self._emit(
            "ApprovalDecided",
            tick,
            {
                "plan_id": plan_id,
                "finding_id": ctx.finding.finding_id,
                "verdict": verdict,
                "actor": actor,
                "comment": comment,
                "ban_action": ban_action,
            },
        )
        if verdict == "Approve":
            ctx.plan.status = PlanStatus.APPROVED
            ctx.approved_tick = tick
        else:
            ctx.plan.status = PlanStatus.REJECTED
            if ctx.finding.lifecycle is Lifecycle.AWAITING_APPROVAL:
                ctx.finding.advance(Lifecycle.REJECTED)
            if ban_action:
                asset = self.env.asset(ctx.finding.asset_id)
                state = mapper.encode_state(ctx.finding, asset)
                self.table.ban(state, RemediationActionKind(ban_action))
                self._emit(
                    "PolicySwapped",
                    tick,
                    {
                        "reason": "ban-on-reject",
                        "state": state.key(),
                        "action": ban_action,
                        "policy_version": self.table.version,
                        "plan_id": plan_id,
                    },
                )

    def _manual_containment(self, tick: int, finding_id: str, actor: str) -> None:
        finding = self.queue.get(finding_id)
        if finding is None:
            return
        asset = self.env.asset(finding.asset_id)
        if asset.state is AssetState.ISOLATED:
            return
        outcome = self.env.apply_action(finding.asset_id, RemediationActionKind.ISOLATE_SEGMENT)
        finding.containment = {
            "kind": "manual-isolate",
            "action": RemediationActionKind.ISOLATE_SEGMENT.value,
            "tick": tick,
            "actor": actor,
            "success": outcome.success,
        }
        self._emit(
            "Contained",
            tick,
            {"finding_id": finding_id, **finding.containment},
        )

    def _apply_injections(self, tick: int) -> None:
        while self._schedule and self._schedule[0].tick <= tick:
            inj = self._schedule.pop(0)
            if inj.kind == "attack":
                self.env.inject_attack(inj.attack_kind, inj.asset_id, inj.entry_id)
            else:
                self.env.inject_vuln(inj.asset_id, inj.entry_id)
            band = self.env.catalog.get(inj.entry_id).priority_band
            self._injections.append(
                {
                    "tick": tick,
                    "kind": inj.kind,
                    "asset": inj.asset_id,
                    "entry": inj.entry_id,
                    "band": band,
                    "detected": False,
                    "detected_tick": None,
                }
            )

    def _scan_stage(self, batch) -> None:
        tick = self.env.clock
        findings = self.scanner.update_and_detect(batch)
        for finding in findings:
            if self.cfg.mode == "baseline":
                if self._miss_rng.random() < self.cfg.baseline_detection_miss_rate:
                    continue
            canonical, merged = self.queue.enqueue(finding)
            self._mark_injection_detected(canonical, tick)
            if merged:
                continue
            canonical.risk_band = self.scanner.classify_risk(
                canonical, self.env.asset(canonical.asset_id)
            )
            self._emit("Detected", tick, _finding_payload(canonical))
            if self.cfg.mode == "aisa":
                record = scanner.instant_containment(canonical, self.env)
                if record is not None:
                    self._emit(
                        "Contained", tick,
                        {"finding_id": canonical.finding_id, **record},
                    )

    def _mark_injection_detected(self, finding: Finding, tick: int) -> None:
        for inj in self._injections:
            if (
                not inj["detected"]
                and inj["asset"] == finding.asset_id
                and inj["entry"] == finding.catalog_entry_id
            ):
                inj["detected"] = True
                inj["detected_tick"] = tick

    def _analyze_stage(self) -> None:
        tick = self.env.clock
        for finding in self.queue.active():
            try:
                score = impact_score(finding, self.env, self.scoring)
            except analyzer.AssetGone:
                continue
            reported = round2(score)
            if self._last_scores.get(finding.finding_id) != reported:
                self._last_scores[finding.finding_id] = reported
                self._emit(
                    "Scored",
                    tick,
                    {
                        "finding_id": finding.finding_id,
                        "impact_score": reported,
                        "lifecycle": finding.lifecycle.value,
                    },
                )
        report = build_report(self.queue, self.env, self.scoring)
        key = tuple((e.finding_id, e.rank, e.impact_score) for e in report.entries)
        if report.entries and key != self._last_report_key:
            self._last_report_key = key
            self.last_report = report
            path = self.out_dir / "reports" / f"vuln-report-{self.run_id}-t{tick:06d}.json"
            path.write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
            self._emit(
                "ReportGenerated",
                tick,
                {"path": path.name, "entries": len(report.entries), "top": key[0][0]},
            )

    def _map_stage(self) -> None:
        tick = self.env.clock
        report = self.last_report
        ordered = (
            [self.queue.get(e.finding_id) for e in report.entries] if report else list(self.queue)
        )
        for finding in ordered:
            if finding is None or finding.lifecycle is not Lifecycle.ANALYZED:
                continue
            asset = self.env.assets.get(finding.asset_id)
            if asset is None:
                continue
            self._plan_seq += 1
            plan_id = f"plan-{self.run_id}-{self._plan_seq:04d}"
            if self.cfg.mode == "baseline":
                triggers = lambda f, a: True  # baseline never auto-executes
            else:
                triggers = self.policy.requires_extra_approval
            plan = map_finding(
                finding, asset, self.table, plan_id, tick=tick,
                extra_approval_triggers=triggers,
            )
            ctx = PlanContext(plan=plan, finding=finding)
            self.plans[plan_id] = ctx
            self._emit("Planned", tick, plan.to_dict())
            if plan.requires_approval:
                ctx.request_tick = tick
                # the reviewer sees exactly what would run
                preview = resolve_script(plan, self.store, self.env)
                event = self._emit(
                    "ApprovalRequested",
                    tick,
                    {
                        "plan_id": plan_id,
                        "finding_id": finding.finding_id,
                        "asset_id": finding.asset_id,
                        "actions": [a.value for a in plan.actions],
                        "rationale": plan.rationale,
                        "impact_score": round2(finding.impact_score)
                        if finding.impact_score is not None
                        else None,
                        "script_format": preview.format.value,
                        "script_text": preview.render(),
                    },
                )
                self._notify(event)

    def _execute_stage(self) -> None:
        tick = self.env.clock
        for ctx in list(self.plans.values()):
            if ctx.executed:
                continue
            plan = ctx.plan
            ready = False
            if plan.status is PlanStatus.APPROVED:
                if self.cfg.mode == "baseline":
                    ready = (
                        ctx.approved_tick is not None
                        and tick - ctx.approved_tick >= self.cfg.manual_remediation_delay_ticks
                    )
                else:
                    ready = True
            elif plan.status is PlanStatus.DRAFT and not plan.requires_approval:
                ready = True
            if not ready:
                continue
            self._run_plan(ctx, tick)

    def _run_plan(self, ctx: PlanContext, tick: int) -> None:
        plan, finding = ctx.plan, ctx.finding
        script = resolve_script(plan, self.store, self.env)
        script_path = self.out_dir / "scripts" / f"{plan.plan_id}.{script.format.value}.script"
        script_path.write_text(script.render())
        sidecar = {
            "script_id": script.script_id,
            "format": script.format.value,
            "source": script.source.value,
            "template_id": script.template_id,
            "steps": [
                {"asset_id": s.asset_id, "action": s.action.value, "params": s.params}
                for s in script.steps
            ],
            "content_hash": script.content_hash(),
        }
        script_path.with_suffix(".script.json").write_text(
            json.dumps(sidecar, indent=2, sort_keys=True) + "\n"
        )
        verdict = validate(script, self.policy, self.env, tick)
        self._emit(
            "Validated",
            tick,
            {
                "plan_id": plan.plan_id,
                "finding_id": finding.finding_id,
                "ok": verdict.ok,
                "violations": [v.to_dict() for v in verdict.violations],
                "script_hash": verdict.script_hash,
            },
        )
        if not verdict.ok:
            ctx.executed = True
            plan.status = PlanStatus.FAILED
            finding.advance(Lifecycle.REMEDIATING)
            finding.advance(Lifecycle.FAILED)
            event = self._emit(
                "Failed",
                tick,
                {
                    "finding_id": finding.finding_id,
                    "plan_id": plan.plan_id,
                    "reason": "validation",
                    "violations": [v.to_dict() for v in verdict.violations],
                },
            )
            self._notify(event)
            return
        finding.advance(Lifecycle.REMEDIATING)
        result = executor.execute(
            plan, script, self.env, self.approvals, verdict, finding, store=self.store
        )
        ctx.executed = True
        if isinstance(result, (ExecutionPending, ExecutionRejected)):
            # decisions are resolved before this stage; treat defensively
            ctx.executed = False
            return
        self._emit(
            "Executed",
            tick,
            {
                "plan_id": plan.plan_id,
                "finding_id": finding.finding_id,
                "steps": [s.to_dict() for s in result.executed_steps],
                "started_tick": result.started_tick,
                "finished_tick": result.finished_tick,
            },
        )
        self._emit(
            "IntegrityChecked",
            tick,
            {
                "plan_id": plan.plan_id,
                "finding_id": finding.finding_id,
                "integrity": result.integrity.value,
            },
        )
        if result.integrity is Integrity.FAILED:
            finding.advance(Lifecycle.FAILED)
            event = self._emit(
                "Failed",
                tick,
                {"finding_id": finding.finding_id, "plan_id": plan.plan_id, "reason": "execution"},
            )
        else:
            finding.advance(Lifecycle.RESOLVED)
            event = self._emit(
                "Resolved",
                tick,
                {
                    "finding_id": finding.finding_id,
                    "plan_id": plan.plan_id,
                    "integrity": result.integrity.value,
                    "containment_minutes": result.containment_minutes,
                },
            )
        self._notify(event)

    # -- event plumbing ------------------------------------------------------

    def _emit(self, kind: str, tick: int, payload: dict) -> AuditEvent:
        return self.audit.append(kind, tick, payload)

    def _notify(self, event: AuditEvent) -> None:
        if event.kind not in self.cfg.notify_on or not self.notifier.subscribers:
            return
        for record in self.notifier.notify(event):
            self._emit(
                "Notified",
                event.tick,
                {"ref_seq": event.seq, "ref_kind": event.kind, **record.to_dict()},
            )

    # -- run loop ------------------------------------------------------------

    def work_remaining(self) -> bool:
        if self._schedule:
            return True
        # undetected ground truth keeps the run alive up to the tick budget
        if self.env.injected_vulns:
            return True
        if any(a.active for a in self.env.active_attacks):
            return True
        if any(f.active for f in self.queue):
            return True
        if any(not ctx.executed and ctx.plan.status is not PlanStatus.REJECTED
               for ctx in self.plans.values()):
            return True
        return False

    def run(self) -> dict:
        had_injections = bool(self._schedule)
        while self.env.clock < self.cfg.tick_budget:
            self.tick()
            if had_injections and not self.work_remaining():
                break
        return self.finalize()

    def state_hash(self) -> str:
        state = {
            "tick": self.env.clock,
            "trajectory": self.env.trajectory_digest,
            "findings": [
                {
                    "id": f.finding_id,
                    "lifecycle": f.lifecycle.value,
                    "impact": round2(f.impact_score) if f.impact_score is not None else None,
                    "detected": f.detected_tick,
                }
                for f in self.queue
            ],
            "plans": {pid: ctx.plan.status.value for pid, ctx in sorted(self.plans.items())},
            "policy_version": self.table.version,
            "asset_states": {a.id: a.state.value for a in self.env.sorted_assets()},
            "injected_vulns": list(self.env.injected_vulns),
        }
        blob = json.dumps(state, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def finalize(self) -> dict:
        self.finished = True
        containment, first_action, patch_minutes = [], [], []
        containment_by_injection = {}
        for event in self.audit.events:
            if event.kind == "Resolved":
                finding = self.queue.get(event.payload["finding_id"])
                minutes = event.payload["containment_minutes"]
                containment.append(minutes)
                if finding is not None and finding.catalog_entry_id:
                    containment_by_injection[
                        f"{finding.asset_id}:{finding.catalog_entry_id}"
                    ] = minutes
        for finding in self.queue:
            start = finding.detected_tick
            first_tick = None
            if finding.containment is not None:
                first_tick = finding.containment["tick"]
            for event in self.audit.events:
                if (
                    event.kind == "Executed"
                    and event.payload["finding_id"] == finding.finding_id
                ):
                    if first_tick is None or event.payload["started_tick"] < first_tick:
                        first_tick = event.payload["started_tick"]
                    break
            if first_tick is not None:
                first_action.append(first_tick - start)
        for event in self.audit.events:
            if event.kind != "Executed":
                continue
            actions = {s["action"] for s in event.payload["steps"]}
            if actions & {a.value for a in _PATCH_ACTIONS}:
                finding = self.queue.get(event.payload["finding_id"])
                if finding is not None:
                    patch_minutes.append(event.payload["finished_tick"] - finding.detected_tick)
        injected_assets = {i["asset"] for i in self._injections}
        false_positives = sum(
            1 for f in self.queue if f.asset_id not in injected_assets
        )
        total_asset_ticks = max(1, len(self.env.assets) * max(1, self.env.clock))
        downtime_total = sum(self.env.downtime_minutes.values())
        self.summary = {
            "run_id": self.run_id,
            "scenario_name": self.doc.name,
            "mode": self.cfg.mode,
            "seed": self.seed,
            "ticks": self.env.clock,
            "state_hash": self.state_hash(),
            "trajectory_digest": self.env.trajectory_digest,
            "containment_minutes": containment,
            "containment_by_injection": containment_by_injection,
            "first_action_minutes": first_action,
            "patch_minutes": patch_minutes,
            "plans_total": len(self.plans),
            "plans_gated": sum(
                1 for ctx in self.plans.values() if ctx.plan.requires_approval
            ),
            "false_positives": false_positives,
            "injected": self._injections,
            "downtime_minutes_total": downtime_total,
            "uptime_pct": 100.0 * (1.0 - downtime_total / total_asset_ticks),
            "data_loss_units": self.env.data_loss_units,
            "breaches": self.env.breach_count,
            "findings_total": len(self.queue.findings),
            "findings_resolved": sum(
                1 for f in self.queue if f.lifecycle is Lifecycle.RESOLVED
            ),
            "lint_warnings": [str(w) for w in self.lint_warnings],
            "events_total": len(self.audit.events),
        }
        (self.out_dir / "summary.json").write_text(
            json.dumps(self.summary, indent=2, sort_keys=True) + "\n"
        )
        self.audit.close()
        return self.summary


def run_pipeline(cfg: RunConfig) -> dict:
    return Pipeline(cfg).run()


def reduce_events(events: list[AuditEvent]) -> dict:
    """Pure fold of an event stream into queue/plan/approval state. Used for
    event-sourcing equivalence checks and valid-prefix reconstruction."""
    findings: dict[str, dict] = {}
    plans: dict[str, dict] = {}
    decisions: dict[str, dict] = {}
    for event in events:
        p = event.payload
        if event.kind == "Detected":
            findings[p["finding_id"]] = {
                "lifecycle": "Queued",
                "asset_id": p["asset_id"],
                "catalog_entry_id": p["catalog_entry_id"],
                "detected_tick": p["detected_tick"],
                "impact_score": None,
            }
        elif event.kind == "Scored" and p["finding_id"] in findings:
            findings[p["finding_id"]]["impact_score"] = p["impact_score"]
            if findings[p["finding_id"]]["lifecycle"] == "Queued":
                findings[p["finding_id"]]["lifecycle"] = "Analyzed"
        elif event.kind == "Planned":
            plans[p["plan_id"]] = {
                "status": p["status"],
                "finding_id": p["finding_id"],
                "requires_approval": p["requires_approval"],
            }
            if p["finding_id"] in findings:
                findings[p["finding_id"]]["lifecycle"] = (
                    "AwaitingApproval" if p["requires_approval"] else "Planned"
                )
        elif event.kind == "ApprovalDecided":
            decisions[p["plan_id"]] = p
            if p["verdict"] == "Approve":
                plans[p["plan_id"]]["status"] = "Approved"
            else:
                plans[p["plan_id"]]["status"] = "Rejected"
                fid = p["finding_id"]
                if fid in findings:
                    findings[fid]["lifecycle"] = "Rejected"
        elif event.kind == "Executed":
            if p["plan_id"] in plans:
                plans[p["plan_id"]]["status"] = "Executed"
            if p["finding_id"] in findings:
                findings[p["finding_id"]]["lifecycle"] = "Remediating"
        elif event.kind == "Resolved":
            if p["finding_id"] in findings:
                findings[p["finding_id"]]["lifecycle"] = "Resolved"
            if p.get("plan_id") in plans:
                plans[p["plan_id"]]["status"] = "Executed"
        elif event.kind == "Failed":
            if p["finding_id"] in findings:
                findings[p["finding_id"]]["lifecycle"] = "Failed"
            if p.get("plan_id") in plans:
                plans[p["plan_id"]]["status"] = "Failed"
    return {"findings": findings, "plans": plans, "decisions": decisions}


def replay(log_path: str | Path, cfg: RunConfig, out_dir: str | Path) -> Pipeline:
    """Re-execute a run from its config, feeding approval decisions from the
    recorded log at their original ticks. The caller compares state hashes."""
    events = read_events(log_path)
    ok, broken = verify_events(events)
    if not ok:
        raise ChainCorrupt(broken)
    decisions = [
        {
            "tick": e.tick,
            "plan_id": e.payload["plan_id"],
            "verdict": e.payload["verdict"],
            "actor": e.payload["actor"],
            "comment": e.payload.get("comment", ""),
            "ban_action": e.payload.get("ban_action"),
        }
        for e in events
        if e.kind == "ApprovalDecided"
    ]
    replay_cfg = RunConfig.from_dict({**cfg.to_dict(), "out_dir": str(out_dir),
                                      "auto_approve_after_ticks": None})
    pipeline = Pipeline(replay_cfg, replay_decisions=decisions)
    pipeline.run()
    return pipeline
