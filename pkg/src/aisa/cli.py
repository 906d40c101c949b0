"""Command-line entry points: train, run, compare, serve, replay, report."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from aisa.audit import ChainCorrupt
from aisa.mapper import ConfigInvalid, RlConfig, TrainingArena, train as train_policy
from aisa.orchestrator import ConfigError, Pipeline, RunConfig, replay as replay_run
from aisa.reporting import Framework, ScenarioMismatch, compare_runs, generate_report
from aisa.simenv.model import InvariantViolation
from aisa.simenv.scenario import bundled_scenario_path, load_scenario_doc

EXIT_CONFIG = 2
EXIT_CHAIN = 3

_FRAMEWORKS = {
    "iso27001": Framework.ISO27001,
    "nist-csf": Framework.NIST_CSF,
    "nerc-cip": Framework.NERC_CIP,
}


def _scenario_path(name_or_path: str) -> Path:
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = bundled_scenario_path(name_or_path)
    if bundled.exists():
        return bundled
    raise click.ClickException(f"scenario not found: {name_or_path}")


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Autonomous security pipeline over a simulated infrastructure range."""


@main.command()
@click.option("--scenario", "-s", default="toy_rl", show_default=True)
@click.option("--episodes", "-n", default=20000, show_default=True, type=int)
@click.option("--seed", "-k", default=42, show_default=True, type=int)
@click.option("--out", "-o", default="policy.json", show_default=True)
def train(scenario, episodes, seed, out):
    """Learn a remediation policy table from a training scenario."""
    try:
        doc = load_scenario_doc(_scenario_path(scenario))
        cfg = RlConfig(episodes=episodes)
        table = train_policy(TrainingArena(doc), cfg, seed=seed)
    except (ConfigInvalid, InvariantViolation) as exc:
        _fail(EXIT_CONFIG, str(exc))
    table.save(out)
    visited = sum(1 for n in table.visits.values() if n > 0)
    click.echo(f"trained {episodes} episodes on {doc.name}; "
               f"{visited} state-action pairs visited; policy written to {out}")


@main.command()
@click.option("--scenario", "-s", default="canonical_grid", show_default=True)
@click.option("--policy", "-p", default=None, help="Policy table path (catalog priors if absent).")
@click.option("--mode", "-m", type=click.Choice(["aisa", "baseline"]), default="aisa",
              show_default=True)
@click.option("--ticks", "-t", default=500, show_default=True, type=int)
@click.option("--seed", "-k", default=None, type=int, help="Override the scenario seed.")
@click.option("--out", "-o", default=None, help="Run directory (default runs/<run-id>).")
@click.option("--auto-approve-after", default=None, type=int,
              help="Scripted approvals: approve pending plans after N ticks.")
def run(scenario, policy, mode, ticks, seed, out, auto_approve_after):
    """Execute the detection-to-remediation pipeline over a scenario."""
    scenario_file = _scenario_path(scenario)
    doc_seed = seed if seed is not None else load_scenario_doc(scenario_file).seed
    out = out or f"runs/{Path(scenario_file).stem}-{mode}-s{doc_seed}"
    try:
        cfg = RunConfig(
            scenario_path=str(scenario_file),
            out_dir=out,
            mode=mode,
            policy_path=policy,
            tick_budget=ticks,
            seed=seed,
            auto_approve_after_ticks=auto_approve_after,
        )
        summary = Pipeline(cfg).run()
    except (ConfigError, ConfigInvalid, InvariantViolation) as exc:
        _fail(EXIT_CONFIG, str(exc))
    click.echo(
        f"run {summary['run_id']}: {summary['ticks']} ticks, "
        f"{summary['findings_total']} findings "
        f"({summary['findings_resolved']} resolved), artifacts in {out}"
    )


@main.command()
@click.option("--run-a", required=True, help="Baseline-mode run directory.")
@click.option("--run-b", required=True, help="Autonomous-mode run directory.")
@click.option("--out", "-o", default=None, help="Also write the comparison as JSON.")
def compare(run_a, run_b, out):
    """Compare a traditional-baseline run against an autonomous run."""
    try:
        comparison = compare_runs(run_a, run_b)
    except ScenarioMismatch as exc:
        _fail(EXIT_CONFIG, str(exc))
    except FileNotFoundError as exc:
        _fail(EXIT_CONFIG, f"missing run artifact: {exc}")
    click.echo(comparison.render_text())
    if out:
        Path(out).write_text(json.dumps(comparison.to_dict(), indent=2, sort_keys=True) + "\n")
        click.echo(f"comparison written to {out}")


@main.command()
@click.option("--run", "run_dir", default=None, help="Archived run directory to expose.")
@click.option("--bind", default=None, help="host:port (env AISA_BIND overrides default).")
@click.option("--portal", default="frontend/dist", show_default=True,
              help="Portal static files directory (served when present).")
@click.option("--runs-root", default="runs", show_default=True)
def serve(run_dir, bind, portal, runs_root):
    """Serve the management API (and the portal, when built)."""
    from aisa.service import ArchivedRun, RunManager, serve as serve_app

    bind = bind or os.environ.get("AISA_BIND", "127.0.0.1:8787")
    manager = RunManager(runs_root=runs_root)
    if run_dir:
        try:
            manager.add(ArchivedRun(run_dir))
        except FileNotFoundError as exc:
            _fail(EXIT_CONFIG, f"not a run directory: {exc}")
        except ChainCorrupt as exc:
            _fail(EXIT_CHAIN, str(exc))
    click.echo(f"serving on http://{bind}")
    serve_app(manager, bind, portal_dir=portal)


@main.command()
@click.option("--log", "log_path", required=True, help="Audit log to replay.")
@click.option("--config", "config_path", default=None,
              help="Run config JSON (default: config.json beside the log).")
@click.option("--out", "-o", default=None, help="Replay output directory.")
def replay(log_path, config_path, out):
    """Re-execute a run from its audit log and verify state equality."""
    log_file = Path(log_path)
    config_file = Path(config_path) if config_path else log_file.parent / "config.json"
    if not config_file.exists():
        _fail(EXIT_CONFIG, f"run config not found at {config_file}")
    cfg = RunConfig.from_dict(json.loads(config_file.read_text()))
    out = out or str(log_file.parent / "replay")
    try:
        pipeline = replay_run(log_file, cfg, out)
    except ChainCorrupt as exc:
        _fail(EXIT_CHAIN, str(exc))
    original_summary = log_file.parent / "summary.json"
    if original_summary.exists():
        original_hash = json.loads(original_summary.read_text())["state_hash"]
        matches = original_hash == pipeline.summary["state_hash"]
        click.echo(f"replay state hash {'matches' if matches else 'DIFFERS FROM'} original")
        if not matches:
            sys.exit(1)
    else:
        click.echo(f"replayed to tick {pipeline.summary['ticks']}; no original summary to compare")


@main.command()
@click.option("--run", "run_dir", required=True, help="Run directory.")
@click.option("--framework", type=click.Choice(sorted(_FRAMEWORKS)), required=True)
@click.option("--out", "-o", default=None, help="Write the report JSON here.")
def report(run_dir, framework, out):
    """Generate a compliance-tagged lifecycle report from a run's audit log."""
    run_path = Path(run_dir)
    summary_file = run_path / "summary.json"
    run_id = (
        json.loads(summary_file.read_text())["run_id"] if summary_file.exists() else run_path.name
    )
    try:
        result = generate_report(run_path / "audit.log", _FRAMEWORKS[framework], run_id=run_id)
    except ChainCorrupt as exc:
        _fail(EXIT_CHAIN, str(exc))
    except FileNotFoundError as exc:
        _fail(EXIT_CONFIG, f"missing audit log: {exc}")
    body = json.dumps(result.to_dict(), indent=2, sort_keys=True)
    if out:
        Path(out).write_text(body + "\n")
        click.echo(f"{framework} report for {run_id}: {len(result.findings)} findings, "
                   f"{len(result.open_issues)} open issues -> {out}")
    else:
        click.echo(body)


if __name__ == "__main__":
    main()
