"""HTTP service: the management API the portal and operators consume.

Serves either a live pipeline (stepped by a background thread, decisions
applied at tick boundaries) or an archived run directory (read-only views
reconstructed from its artifacts). Event streaming is server-sent events
with sequence-number resume.
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse, StreamingResponse

from aisa.audit import read_events
from aisa.mapper import PlanStatus
from aisa.orchestrator import AlreadyDecided, Pipeline, RunConfig, UnknownPlan, reduce_events
from aisa.reporting import compare_runs, run_metrics

STREAM_POLL_SECONDS = 0.05


class RunHandle:
    """One run visible over the API: live pipeline or archived directory."""

    def __init__(self, run_id: str):
        self.run_id = run_id
        self.lock = threading.RLock()

    # interface: events(), queue_view(), finding_view(), approvals_view(),
    # metrics_view(), decide(), contain(), finished


class LiveRun(RunHandle):
    def __init__(self, cfg: RunConfig, pace_ticks_per_sec: float = 0.0):
        pipeline = Pipeline(cfg)
        super().__init__(pipeline.run_id)
        self.pipeline = pipeline
        self.pace = pace_ticks_per_sec
        self.thread = threading.Thread(target=self._drive, daemon=True)

    def start(self) -> "LiveRun":
        self.thread.start()
        return self

    def _drive(self) -> None:
        pipeline = self.pipeline
        had_injections = bool(pipeline._schedule)
        interval = 1.0 / self.pace if self.pace > 0 else 0.0
        while pipeline.env.clock < pipeline.cfg.tick_budget:
            started = time.monotonic()
            with self.lock:
                pipeline.tick()
                if had_injections and not pipeline.work_remaining():
                    break
            if interval:
                time.sleep(max(0.0, interval - (time.monotonic() - started)))
        with self.lock:
            pipeline.finalize()

    @property
    def finished(self) -> bool:
        return self.pipeline.finished

    def events(self):
        with self.lock:
            return list(self.pipeline.audit.events)

    def queue_view(self) -> dict:
        with self.lock:
            pipeline = self.pipeline
            report = pipeline.last_report
            ranked = {e.finding_id: e for e in report.entries} if report else {}
            entries = []
            for finding in pipeline.queue:
                entry = ranked.get(finding.finding_id)
                entries.append(
                    {
                        "finding_id": finding.finding_id,
                        "asset_id": finding.asset_id,
                        "cve_id": finding.cve_id,
                        "catalog_entry_id": finding.catalog_entry_id,
                        "detected_tick": finding.detected_tick,
                        "risk_band": finding.risk_band.value if finding.risk_band else None,
                        "impact_score": entry.impact_score if entry else None,
                        "rank": entry.rank if entry else None,
                        "lifecycle": finding.lifecycle.value,
                    }
                )
            entries.sort(key=lambda e: (e["rank"] is None, e["rank"] or 0, e["finding_id"]))
            return {"tick": pipeline.env.clock, "entries": entries}

    def finding_view(self, finding_id: str) -> dict | None:
        with self.lock:
            finding = self.pipeline.queue.get(finding_id)
            if finding is None:
                return None
            view = {
                "finding_id": finding.finding_id,
                "asset_id": finding.asset_id,
                "cve_id": finding.cve_id,
                "catalog_entry_id": finding.catalog_entry_id,
                "detected_tick": finding.detected_tick,
                "last_seen_tick": finding.last_seen_tick,
                "anomaly_score": finding.anomaly_score,
                "risk_band": finding.risk_band.value if finding.risk_band else None,
                "impact_score": finding.impact_score,
                "lifecycle": finding.lifecycle.value,
                "containment": finding.containment,
                "plans": [
                    ctx.plan.to_dict()
                    for ctx in self.pipeline.plans.values()
                    if ctx.finding.finding_id == finding_id
                ],
            }
            return view

    def approvals_view(self, status: str = "pending") -> list[dict]:
        with self.lock:
            wanted = {
                "pending": (PlanStatus.PENDING_APPROVAL,),
                "decided": (PlanStatus.APPROVED, PlanStatus.REJECTED,
                            PlanStatus.EXECUTED, PlanStatus.FAILED),
                "all": tuple(PlanStatus),
            }.get(status, (PlanStatus.PENDING_APPROVAL,))
            requests = {
                e.payload["plan_id"]: e.payload
                for e in self.pipeline.audit.events
                if e.kind == "ApprovalRequested"
            }
            views = []
            for plan_id, ctx in self.pipeline.plans.items():
                if not ctx.plan.requires_approval or ctx.plan.status not in wanted:
                    continue
                body = dict(requests.get(plan_id, {"plan_id": plan_id}))
                body.update(
                    status=ctx.plan.status.value,
                    requested_tick=ctx.request_tick,
                    decision=self.pipeline.approvals.get(plan_id),
                )
                views.append(body)
            return views

    def metrics_view(self) -> dict:
        with self.lock:
            pipeline = self.pipeline
            if pipeline.summary is not None:
                summary = pipeline.summary
            else:
                downtime = sum(pipeline.env.downtime_minutes.values())
                summary = {
                    "scenario_name": pipeline.doc.name,
                    "seed": pipeline.seed,
                    "injected": pipeline._injections,
                    "containment_minutes": [],
                    "first_action_minutes": [],
                    "patch_minutes": [],
                    "plans_total": len(pipeline.plans),
                    "plans_gated": sum(
                        1 for c in pipeline.plans.values() if c.plan.requires_approval
                    ),
                    "false_positives": 0,
                    "downtime_minutes_total": downtime,
                    "uptime_pct": None,
                    "data_loss_units": pipeline.env.data_loss_units,
                    "breaches": pipeline.env.breach_count,
                }
            return {
                "run_id": self.run_id,
                "mode": pipeline.cfg.mode,
                "tick": pipeline.env.clock,
                "finished": pipeline.finished,
                "metrics": run_metrics(summary),
                "findings_total": len(pipeline.queue.findings),
            }

    def reports_dir(self) -> Path:
        return Path(self.pipeline.cfg.out_dir) / "reports"

    def decide(self, plan_id, verdict, actor, comment, ban_action):
        self.pipeline.submit_decision(plan_id, verdict, actor, comment, ban_action)

    def contain(self, finding_id, actor):
        self.pipeline.submit_containment(finding_id, actor)


class ArchivedRun(RunHandle):
    def __init__(self, run_dir: str | Path):
        run_dir = Path(run_dir)
        summary = json.loads((run_dir / "summary.json").read_text())
        super().__init__(summary["run_id"])
        self.dir = run_dir
        self.summary = summary
        self._events = read_events(run_dir / "audit.log")
        self._reduced = reduce_events(self._events)
        self.finished = True

    def events(self):
        return self._events

    def queue_view(self) -> dict:
        entries = [
            {
                "finding_id": fid,
                "asset_id": state["asset_id"],
                "cve_id": None,
                "catalog_entry_id": state["catalog_entry_id"],
                "detected_tick": state["detected_tick"],
                "risk_band": None,
                "impact_score": state["impact_score"],
                "rank": None,
                "lifecycle": state["lifecycle"],
            }
            for fid, state in sorted(self._reduced["findings"].items())
        ]
        return {"tick": self.summary["ticks"], "entries": entries}

    def finding_view(self, finding_id: str) -> dict | None:
        state = self._reduced["findings"].get(finding_id)
        if state is None:
            return None
        return {"finding_id": finding_id, **state}

    def approvals_view(self, status: str = "pending") -> list[dict]:
        if status == "pending":
            return []
        return [
            {"plan_id": pid, **plan, "decision": self._reduced["decisions"].get(pid)}
            for pid, plan in sorted(self._reduced["plans"].items())
            if plan["requires_approval"]
        ]

    def metrics_view(self) -> dict:
        return {
            "run_id": self.run_id,
            "mode": self.summary["mode"],
            "tick": self.summary["ticks"],
            "finished": True,
            "metrics": run_metrics(self.summary),
            "findings_total": self.summary["findings_total"],
        }

    def reports_dir(self) -> Path:
        return self.dir / "reports"

    def decide(self, plan_id, verdict, actor, comment, ban_action):
        if plan_id in self._reduced["plans"]:
            raise AlreadyDecided(plan_id)
        raise UnknownPlan(plan_id)

    def contain(self, finding_id, actor):
        raise UnknownPlan(finding_id)


class RunManager:
    def __init__(self, runs_root: str | Path = "runs"):
        self.runs_root = Path(runs_root)
        self.runs: dict[str, RunHandle] = {}
        self.current_id: str | None = None

    def add(self, handle: RunHandle) -> RunHandle:
        self.runs[handle.run_id] = handle
        self.current_id = handle.run_id
        return handle

    def get(self, run_id: str | None) -> RunHandle:
        rid = run_id or self.current_id
        if rid is None or rid not in self.runs:
            raise HTTPException(status_code=404, detail="no such run")
        return self.runs[rid]

    def start_live(self, body: dict) -> LiveRun:
        cfg = RunConfig(
            scenario_path=body.get("scenario", "canonical_grid"),
            out_dir=str(self.runs_root / body.get("name", f"run-{len(self.runs)}")),
            mode=body.get("mode", "aisa"),
            policy_path=body.get("policy"),
            tick_budget=int(body.get("ticks", 500)),
            seed=body.get("seed"),
            auto_approve_after_ticks=body.get("auto_approve_after_ticks"),
        )
        handle = LiveRun(cfg, pace_ticks_per_sec=float(body.get("pace", 0.0)))
        self.add(handle)
        handle.start()
        return handle


def _sse_stream(handle: RunHandle, from_seq: int, follow: bool):
    last = from_seq - 1
    while True:
        events = handle.events()
        while last + 1 < len(events):
            last += 1
            event = events[last]
            yield f"id: {event.seq}\ndata: {json.dumps(event.to_dict(), sort_keys=True)}\n\n"
        if not follow or (handle.finished and last + 1 >= len(events)):
            yield "event: end\ndata: {}\n\n"
            return
        time.sleep(STREAM_POLL_SECONDS)
        # keep-alive comment: lets clients distinguish idle from dead, and
        # gives the generator a yield point so disconnects can cancel it
        yield ": ping\n\n"


def create_app(manager: RunManager, portal_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="aisa", docs_url=None, redoc_url=None)
    token = os.environ.get("AISA_TOKEN", "")

    @app.middleware("http")
    async def check_token(request: Request, call_next):
        if token and request.url.path.startswith("/api"):
            presented = request.headers.get("x-aisa-token", "")
            if presented != token:
                return JSONResponse({"error": "invalid token"}, status_code=401)
        return await call_next(request)

    @app.get("/api/queue")
    def get_queue(run: str | None = None):
        return manager.get(run).queue_view()

    @app.get("/api/findings/{finding_id}")
    def get_finding(finding_id: str, run: str | None = None):
        view = manager.get(run).finding_view(finding_id)
        if view is None:
            raise HTTPException(status_code=404, detail="no such finding")
        return view

    @app.get("/api/approvals")
    def get_approvals(status: str = "pending", run: str | None = None):
        return {"approvals": manager.get(run).approvals_view(status)}

    @app.post("/api/approvals/{plan_id}/decision")
    def post_decision(plan_id: str, body: dict, run: str | None = None):
        handle = manager.get(run)
        try:
            handle.decide(
                plan_id,
                body.get("verdict", ""),
                body.get("actor", "sme"),
                body.get("comment", ""),
                body.get("ban_action"),
            )
        except UnknownPlan:
            raise HTTPException(status_code=404, detail=f"unknown plan {plan_id}")
        except AlreadyDecided:
            raise HTTPException(status_code=409, detail=f"plan {plan_id} already decided")
        except Exception as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"accepted": True, "plan_id": plan_id, "verdict": body.get("verdict")}

    @app.get("/api/metrics")
    def get_metrics(run: str | None = None, compare_with: str | None = None):
        view = manager.get(run).metrics_view()
        if compare_with:
            handle = manager.get(run)
            if isinstance(handle, LiveRun):
                own_dir = Path(handle.pipeline.cfg.out_dir)
            else:
                own_dir = handle.dir
            try:
                comparison = compare_runs(compare_with, own_dir)
                view["comparison"] = comparison.to_dict()
            except Exception as exc:
                view["comparison_error"] = str(exc)
        return view

    @app.get("/api/reports/{report_id}")
    def get_report(report_id: str, run: str | None = None):
        reports_dir = manager.get(run).reports_dir()
        if report_id == "latest":
            candidates = sorted(reports_dir.glob("*.json"))
            if not candidates:
                raise HTTPException(status_code=404, detail="no reports yet")
            return json.loads(candidates[-1].read_text())
        path = reports_dir / f"{report_id}.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail="no such report")
        return json.loads(path.read_text())

    @app.get("/api/events")
    def get_events(from_seq: int = 0, follow: bool = True, run: str | None = None):
        handle = manager.get(run)
        return StreamingResponse(
            _sse_stream(handle, from_seq, follow), media_type="text/event-stream"
        )

    @app.post("/api/runs")
    def post_run(body: dict):
        try:
            handle = manager.start_live(body)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"run_id": handle.run_id}

    @app.get("/api/runs")
    def get_runs():
        return {
            "current": manager.current_id,
            "runs": [
                {"run_id": rid, "finished": handle.finished}
                for rid, handle in manager.runs.items()
            ],
        }

    @app.post("/api/findings/{finding_id}/contain")
    def post_contain(finding_id: str, body: dict | None = None, run: str | None = None):
        handle = manager.get(run)
        try:
            handle.contain(finding_id, (body or {}).get("actor", "operator"))
        except UnknownPlan:
            raise HTTPException(status_code=404, detail=f"unknown finding {finding_id}")
        return {"accepted": True, "finding_id": finding_id}

    if portal_dir is not None and Path(portal_dir).exists():
        portal = Path(portal_dir)

        @app.get("/")
        def index():
            return FileResponse(portal / "index.html")

        @app.get("/{asset_path:path}")
        def portal_asset(asset_path: str):
            target = (portal / asset_path).resolve()
            if portal.resolve() not in target.parents or not target.is_file():
                raise HTTPException(status_code=404, detail="not found")
            return FileResponse(target)

    return app


def serve(manager: RunManager, bind: str, portal_dir: str | Path | None = None) -> None:
    import uvicorn

    host, _, port = bind.partition(":")
    app = create_app(manager, portal_dir=portal_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8787), log_level="warning")
