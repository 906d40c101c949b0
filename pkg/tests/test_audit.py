import json

import pytest

from aisa.audit import (
    GENESIS_HASH,
    AuditLog,
    ChainCorrupt,
    Notifier,
    read_events,
    verify_log,
)


class TestChain:
    def test_first_event_has_genesis_prev(self, tmp_path):
        log = AuditLog(tmp_path / "audit.log")
        event = log.append("Detected", 1, {"finding_id": "f1"})
        assert event.prev_hash == GENESIS_HASH
        assert event.seq == 0

    def test_append_then_verify(self, tmp_path):
        path = tmp_path / "audit.log"
        log = AuditLog(path)
        for i in range(20):
            log.append("Scored", i, {"finding_id": f"f{i}", "score": i / 10})
        log.close()
        ok, broken = verify_log(path)
        assert ok and broken is None

    def test_single_byte_corruption_detected_at_index(self, tmp_path):
        path = tmp_path / "audit.log"
        log = AuditLog(path)
        for i in range(10):
            log.append("Scored", i, {"finding_id": f"f{i}", "score": 0.5})
        log.close()
        lines = path.read_text().splitlines()
        record = json.loads(lines[4])
        record["payload"]["score"] = 0.6  # flip a byte in a middle payload
        lines[4] = json.dumps(record, sort_keys=True)
        path.write_text("\n".join(lines) + "\n")
        ok, broken = verify_log(path)
        assert not ok
        assert broken == 4

    def test_every_single_byte_mutation_caught(self, tmp_path):
        path = tmp_path / "audit.log"
        log = AuditLog(path)
        for i in range(3):
            log.append("Detected", i, {"finding_id": f"f{i}"})
        log.close()
        original = path.read_bytes()
        for pos in range(0, len(original), 7):
            mutated = bytearray(original)
            mutated[pos] ^= 0x01
            path.write_bytes(bytes(mutated))
            try:
                ok, _ = verify_log(path)
            except Exception:
                ok = False  # unparseable is detected corruption too
            assert not ok, f"mutation at byte {pos} went undetected"
        path.write_bytes(original)
        ok, _ = verify_log(path)
        assert ok

    def test_gapless_sequence_enforced(self, tmp_path):
        path = tmp_path / "audit.log"
        log = AuditLog(path)
        for i in range(5):
            log.append("Scored", i, {"finding_id": f"f{i}"})
        log.close()
        lines = path.read_text().splitlines()
        del lines[2]
        path.write_text("\n".join(lines) + "\n")
        ok, broken = verify_log(path)
        assert not ok
        assert broken == 2

    def test_reopen_appends_continue_chain(self, tmp_path):
        path = tmp_path / "audit.log"
        log = AuditLog(path)
        log.append("Detected", 1, {"finding_id": "f1"})
        log.close()
        log2 = AuditLog(path)
        log2.append("Resolved", 2, {"finding_id": "f1"})
        log2.close()
        ok, _ = verify_log(path)
        assert ok
        assert [e.seq for e in read_events(path)] == [0, 1]

    def test_open_on_corrupt_log_raises(self, tmp_path):
        path = tmp_path / "audit.log"
        log = AuditLog(path)
        log.append("Detected", 1, {"finding_id": "f1"})
        log.close()
        text = path.read_text().replace('"f1"', '"fX"')
        path.write_text(text)
        with pytest.raises(ChainCorrupt):
            AuditLog(path)

    def test_determinism_identical_appends_identical_bytes(self, tmp_path):
        paths = [tmp_path / "a.log", tmp_path / "b.log"]
        for path in paths:
            log = AuditLog(path)
            log.append("Detected", 5, {"finding_id": "f1", "cve": "CVE-2024-21302"})
            log.append("Resolved", 9, {"finding_id": "f1"})
            log.close()
        assert paths[0].read_bytes() == paths[1].read_bytes()


class TestNotifier:
    def event(self, tmp_path):
        log = AuditLog(tmp_path / "audit.log")
        return log.append("Resolved", 10, {"finding_id": "f1"})

    def test_two_subscribers_two_records(self, tmp_path):
        sink_a, sink_b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        notifier = Notifier(subscribers=[
            {"kind": "log", "path": str(sink_a), "name": "soc-lead"},
            {"kind": "log", "path": str(sink_b), "name": "sme"},
        ])
        records = notifier.notify(self.event(tmp_path))
        assert len(records) == 2
        assert all(r.ok and r.attempts == 1 and not r.duplicate for r in records)
        assert sink_a.read_text() == sink_b.read_text()

    def test_unreachable_webhook_never_raises(self, tmp_path):
        notifier = Notifier(
            subscribers=[{"kind": "webhook", "url": "http://127.0.0.1:1/hook"}],
            backoff=(0.0, 0.0),
        )
        records = notifier.notify(self.event(tmp_path))
        assert len(records) == 1
        assert not records[0].ok
        assert records[0].attempts == 2
        assert records[0].detail

    def test_flaky_sink_retry_flags_duplicate(self, tmp_path):
        calls = []

        def flaky(body):
            calls.append(body)
            if len(calls) == 1:
                raise IOError("sink hiccup")

        notifier = Notifier(
            subscribers=[{"kind": "callable", "fn": flaky, "name": "flaky"}],
            backoff=(0.0, 0.0),
        )
        records = notifier.notify(self.event(tmp_path))
        assert records[0].ok
        assert records[0].attempts == 2
        assert records[0].duplicate
