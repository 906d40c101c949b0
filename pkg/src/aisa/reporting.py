"""Compliance reports and traditional-vs-autonomous metric comparisons,
both derived entirely from run artifacts (audit log + run summary)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path

import yaml

from aisa.audit import AuditEvent, ChainCorrupt, read_events, verify_events


class Framework(Enum):
    ISO27001 = "iso27001"
    NIST_CSF = "nist_csf"
    NERC_CIP = "nerc_cip"


class ScenarioMismatch(Exception):
    pass


def control_tags() -> dict:
    text = resources.files("aisa.data").joinpath("control_tags.yaml").read_text()
    return yaml.safe_load(text)


@dataclass
class FindingLifecycle:
    finding_id: str
    chain: list[dict] = field(default_factory=list)

    @property
    def final(self) -> str:
        return self.chain[-1]["kind"] if self.chain else "Unknown"

    def to_dict(self) -> dict:
        return {"finding_id": self.finding_id, "chain": self.chain, "final": self.final}


@dataclass
class ComplianceReport:
    run_id: str
    framework: str
    period: tuple[int, int]
    findings: list[FindingLifecycle]
    open_issues: list[str]
    control_index: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "framework": self.framework,
            "period": {"first_tick": self.period[0], "last_tick": self.period[1]},
            "findings": [f.to_dict() for f in self.findings],
            "open_issues": self.open_issues,
            "control_index": self.control_index,
        }


def reconstruct_lifecycles(events: list[AuditEvent]) -> dict[str, FindingLifecycle]:
    lifecycles: dict[str, FindingLifecycle] = {}
    for event in events:
        finding_id = event.payload.get("finding_id")
        if not finding_id:
            continue
        entry = lifecycles.setdefault(finding_id, FindingLifecycle(finding_id))
        entry.chain.append({"kind": event.kind, "tick": event.tick, "seq": event.seq})
    return lifecycles


def generate_report(
    log_path: str | Path, framework: Framework, run_id: str = "run"
) -> ComplianceReport:
    """Reconstruct per-finding lifecycles from a verified log and tag each
    event kind with the framework's control id."""
    events = read_events(log_path)
    ok, broken = verify_events(events)
    if not ok:
        raise ChainCorrupt(broken)
    tags = control_tags()
    lifecycles = reconstruct_lifecycles(events)
    for lc in lifecycles.values():
        for item in lc.chain:
            item["control"] = tags.get(item["kind"], {}).get(framework.value, "-")
    open_issues = sorted(
        fid for fid, lc in lifecycles.items() if lc.final not in ("Resolved",)
    )
    period = (events[0].tick, events[-1].tick) if events else (0, 0)
    return ComplianceReport(
        run_id=run_id,
        framework=framework.value,
        period=period,
        findings=sorted(lifecycles.values(), key=lambda lc: lc.finding_id),
        open_issues=open_issues,
        control_index={k: v[framework.value] for k, v in tags.items()},
    )


# -- metrics comparison -----------------------------------------------------

# (row name, direction, summary key). Directions: "lower" is better, "higher"
# is better with ratio savings, "points" is better with percentage-point
# savings (used where the baseline value is zero by construction).
METRIC_ROWS = (
    ("Breach Containment Time (days)", "lower", "containment_days"),
    ("Patching Time (weeks)", "lower", "patching_weeks"),
    ("Detection Accuracy for Critical Threats", "higher", "detection_accuracy_pct"),
    ("False Positives", "lower", "false_positives"),
    ("Manual Intervention for Threat Response", "lower", "manual_intervention_pct"),
    ("Average Downtime per Cyberattack (days)", "lower", "avg_downtime_days"),
    ("Data Loss Reduction (%)", "points", "data_loss_reduction_pct"),
    ("Uptime (%)", "higher", "uptime_pct"),
    ("Number of Breaches", "lower", "breaches"),
    ("Incident Response Time (days)", "lower", "incident_response_days"),
)


@dataclass
class MetricRow:
    name: str
    traditional: float | None
    aisa: float | None
    savings_pct: float | None
    direction: str

    def to_dict(self) -> dict:
        return {
            "metric": self.name,
            "traditional": self.traditional,
            "aisa": self.aisa,
            "savings_pct": self.savings_pct,
            "direction": self.direction,
        }


@dataclass
class MetricsComparison:
    scenario: str
    seed: int
    rows: list[MetricRow]

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "seed": self.seed,
                "rows": [r.to_dict() for r in self.rows]}

    def row(self, name: str) -> MetricRow:
        for row in self.rows:
            if row.name == name:
                return row
        raise KeyError(name)

    def render_text(self) -> str:
        lines = [f"{'Metric':44s} {'Traditional':>12s} {'AISA':>10s} {'Savings %':>10s}"]
        for row in self.rows:
            t = "not measured" if row.traditional is None else f"{row.traditional:.2f}"
            a = "not measured" if row.aisa is None else f"{row.aisa:.2f}"
            s = "not measured" if row.savings_pct is None else f"{row.savings_pct:.1f}"
            lines.append(f"{row.name:44s} {t:>12s} {a:>10s} {s:>10s}")
        return "\n".join(lines)


def savings_pct(direction: str, trad: float | None, aisa: float | None) -> float | None:
    """Improvement-positive savings; rows where the better direction is up
    are inverted, and point-style rows subtract directly."""
    if trad is None or aisa is None:
        return None
    if direction == "points":
        return aisa - trad
    if trad == 0:
        return None
    if direction == "lower":
        return (trad - aisa) / trad * 100.0
    return (aisa - trad) / trad * 100.0


def load_run(run_dir: str | Path) -> dict:
    run_dir = Path(run_dir)
    summary = json.loads((run_dir / "summary.json").read_text())
    config = json.loads((run_dir / "config.json").read_text())
    return {"summary": summary, "config": config, "dir": run_dir}


def run_metrics(summary: dict) -> dict:
    """Raw metric values for one run, from its summary."""

    def mean(values):
        return sum(values) / len(values) if values else None

    injected = summary.get("injected", [])
    critical = [i for i in injected if i.get("band") == "High"]
    detected_critical = [i for i in critical if i.get("detected")]
    metrics = {
        "containment_days": _div(mean(summary.get("containment_minutes", [])), 1440.0),
        "patching_weeks": _div(mean(summary.get("patch_minutes", [])), 10080.0),
        "detection_accuracy_pct": (
            100.0 * len(detected_critical) / len(critical) if critical else None
        ),
        "false_positives": float(summary.get("false_positives", 0)),
        "manual_intervention_pct": (
            100.0 * summary["plans_gated"] / summary["plans_total"]
            if summary.get("plans_total")
            else None
        ),
        "avg_downtime_days": (
            summary.get("downtime_minutes_total", 0) / max(1, len(injected)) / 1440.0
        ),
        "data_loss_units": float(summary.get("data_loss_units", 0)),
        "uptime_pct": summary.get("uptime_pct"),
        "breaches": float(summary.get("breaches", 0)),
        "incident_response_days": _div(mean(summary.get("first_action_minutes", [])), 1440.0),
    }
    return metrics


def _div(value: float | None, denom: float) -> float | None:
    return None if value is None else value / denom


def compare_runs(traditional_dir: str | Path, aisa_dir: str | Path) -> MetricsComparison:
    """Build the metric table from two completed runs over the same scenario
    and seed (baseline-mode run first)."""
    trad = load_run(traditional_dir)
    aisa = load_run(aisa_dir)
    for key in ("scenario_name", "seed"):
        if trad["summary"].get(key) != aisa["summary"].get(key):
            raise ScenarioMismatch(
                f"{key} differs: {trad['summary'].get(key)} vs {aisa['summary'].get(key)}"
            )
    trad_metrics = run_metrics(trad["summary"])
    aisa_metrics = run_metrics(aisa["summary"])
    # data loss is reported Table-style: reduction relative to the baseline run
    trad_loss = trad_metrics.pop("data_loss_units")
    aisa_loss = aisa_metrics.pop("data_loss_units")
    if trad_loss and trad_loss > 0:
        reduction = (trad_loss - aisa_loss) / trad_loss * 100.0
    else:
        reduction = None
    trad_metrics["data_loss_reduction_pct"] = 0.0 if reduction is not None else None
    aisa_metrics["data_loss_reduction_pct"] = reduction
    rows = []
    for name, direction, key in METRIC_ROWS:
        t, a = trad_metrics.get(key), aisa_metrics.get(key)
        rows.append(MetricRow(name, t, a, savings_pct(direction, t, a), direction))
    return MetricsComparison(
        scenario=trad["summary"]["scenario_name"],
        seed=trad["summary"]["seed"],
        rows=rows,
    )
