import json
from pathlib import Path

import pytest

from aisa.audit import AuditLog, ChainCorrupt
from aisa.orchestrator import run_pipeline
from aisa.reporting import Framework, generate_report


def canonical_run(tmp_path):
    from tests.test_orchestrator import canonical_cfg

    cfg = canonical_cfg(tmp_path)
    run_pipeline(cfg)
    return Path(cfg.out_dir) / "audit.log"


class TestComplianceReport:
    def test_canonical_lifecycle_ends_resolved(self, tmp_path):
        log_path = canonical_run(tmp_path)
        report = generate_report(log_path, Framework.ISO27001, run_id="canonical")
        cve_findings = [
            f for f in report.findings
            if any(item["kind"] == "Detected" for item in f.chain)
        ]
        assert cve_findings
        main = cve_findings[0]
        kinds = [item["kind"] for item in main.chain]
        assert kinds[0] == "Detected"
        assert "Resolved" in kinds
        assert main.final == "Resolved"
        assert main.finding_id not in report.open_issues

    def test_all_frameworks_tag_events(self, tmp_path):
        log_path = canonical_run(tmp_path)
        for framework in Framework:
            report = generate_report(log_path, framework)
            for finding in report.findings:
                assert all(item["control"] != "" for item in finding.chain)
            assert report.control_index["Detected"]

    def test_empty_log_valid_structure(self, tmp_path):
        log = AuditLog(tmp_path / "empty.log")
        log.close()
        report = generate_report(tmp_path / "empty.log", Framework.NIST_CSF)
        assert report.findings == []
        assert report.open_issues == []

    def test_failed_finding_appears_in_open_issues(self, tmp_path):
        log = AuditLog(tmp_path / "audit.log")
        log.append("Detected", 1, {"finding_id": "f1", "asset_id": "a",
                                   "catalog_entry_id": "ddos", "cve_id": "CVE-2024-39555",
                                   "detected_tick": 1, "anomaly_score": 0,
                                   "feature": None, "risk_band": "High",
                                   "lifecycle": "Queued"})
        log.append("Failed", 5, {"finding_id": "f1", "plan_id": "p1", "reason": "execution"})
        log.close()
        report = generate_report(tmp_path / "audit.log", Framework.NERC_CIP)
        assert report.open_issues == ["f1"]

    def test_corrupt_log_rejected(self, tmp_path):
        log_path = canonical_run(tmp_path)
        lines = log_path.read_text().splitlines()
        record = json.loads(lines[0])
        record["payload"]["asset_id"] = "tampered"
        lines[0] = json.dumps(record, sort_keys=True)
        log_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(ChainCorrupt):
            generate_report(log_path, Framework.ISO27001)
