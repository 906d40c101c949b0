"""Tamper-evident audit log and stakeholder notification fan-out.

Events form a hash chain: each record's hash covers its predecessor's hash
plus the canonicalized (field-ordered, length-prefixed) event bytes, so any
single-byte mutation anywhere breaks verification at that index.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import httpx

GENESIS_HASH = "0" * 64

EVENT_KINDS = (
    "Detected",
    "Contained",
    "Scored",
    "Planned",
    "ApprovalRequested",
    "ApprovalDecided",
    "Validated",
    "Executed",
    "IntegrityChecked",
    "Resolved",
    "Failed",
    "Notified",
    "ReportGenerated",
    "PolicySwapped",
)


class ChainCorrupt(Exception):
    def __init__(self, index: int, reason: str = "hash mismatch"):
        super().__init__(f"audit chain broken at event {index}: {reason}")
        self.index = index
        self.reason = reason


@dataclass
class AuditEvent:
    seq: int
    tick: int
    kind: str
    payload: dict
    prev_hash: str
    this_hash: str

    def to_dict(self) -> dict:
        return {
            "seq": self.seq,
            "tick": self.tick,
            "kind": self.kind,
            "payload": self.payload,
            "prev_hash": self.prev_hash,
            "hash": self.this_hash,
        }


def _canonical_payload(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def event_hash(prev_hash: str, seq: int, tick: int, kind: str, payload: dict) -> str:
    parts = [str(seq), str(tick), kind, _canonical_payload(payload)]
    blob = prev_hash + "".join(f"{len(p)}:{p}" for p in parts)
    return hashlib.sha256(blob.encode()).hexdigest()


class AuditLog:
    """Append-only, line-delimited event log with fsync durability."""

    def __init__(self, path: str | Path, fresh: bool = False):
        self.path = Path(path)
        self.events: list[AuditEvent] = []
        if fresh and self.path.exists():
            self.path.unlink()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            self.events = read_events(self.path)
            ok, broken = verify_events(self.events)
            if not ok:
                raise ChainCorrupt(broken)
        self._fh = self.path.open("a", encoding="utf-8")

    @property
    def tail_hash(self) -> str:
        return self.events[-1].this_hash if self.events else GENESIS_HASH

    @property
    def next_seq(self) -> int:
        return self.events[-1].seq + 1 if self.events else 0

    def append(self, kind: str, tick: int, payload: dict) -> AuditEvent:
        event = AuditEvent(
            seq=self.next_seq,
            tick=tick,
            kind=kind,
            payload=payload,
            prev_hash=self.tail_hash,
            this_hash="",
        )
        event.this_hash = event_hash(event.prev_hash, event.seq, event.tick, kind, payload)
        self._fh.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self.events.append(event)
        return event

    def close(self) -> None:
        self._fh.close()


def read_events(path: str | Path) -> list[AuditEvent]:
    # Strict newline framing: any other separator byte is corruption.
    events = []
    for index, line in enumerate(Path(path).read_text().split("\n")):
        if not line:
            continue
        try:
            raw = json.loads(line)
            events.append(
                AuditEvent(
                    seq=raw["seq"],
                    tick=raw["tick"],
                    kind=raw["kind"],
                    payload=raw["payload"],
                    prev_hash=raw["prev_hash"],
                    this_hash=raw["hash"],
                )
            )
        except (ValueError, KeyError) as exc:
            raise ChainCorrupt(index, f"unparseable record: {exc}") from None
    return events


def verify_events(events: list[AuditEvent]) -> tuple[bool, int | None]:
    """Walk the chain; returns (ok, first broken index)."""
    prev = GENESIS_HASH
    for i, event in enumerate(events):
        if event.seq != i:
            return False, i
        if event.prev_hash != prev:
            return False, i
        expected = event_hash(prev, event.seq, event.tick, event.kind, event.payload)
        if event.this_hash != expected:
            return False, i
        prev = event.this_hash
    return True, None


def verify_log(path: str | Path) -> tuple[bool, int | None]:
    try:
        return verify_events(read_events(path))
    except ChainCorrupt as exc:
        return False, exc.index


@dataclass
class DeliveryRecord:
    subscriber: str
    ok: bool
    attempts: int
    duplicate: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {
            "subscriber": self.subscriber,
            "ok": self.ok,
            "attempts": self.attempts,
            "duplicate": self.duplicate,
            "detail": self.detail,
        }


@dataclass
class Notifier:
    """At-least-once delivery to configured sinks. Failures are recorded and
    retried with capped backoff; they never block the pipeline."""

    subscribers: list[dict] = field(default_factory=list)
    backoff: tuple[float, ...] = (0.0, 0.02, 0.05)
    _client: httpx.Client | None = None

    def notify(self, event: AuditEvent) -> list[DeliveryRecord]:
        records = []
        body = json.dumps(event.to_dict(), sort_keys=True)
        for sub in self.subscribers:
            records.append(self._deliver(sub, body))
        return records

    def _deliver(self, sub: dict, body: str) -> DeliveryRecord:
        name = sub.get("name") or sub.get("url") or sub.get("path") or sub["kind"]
        failures = 0
        for attempt, pause in enumerate(self.backoff, start=1):
            if pause:
                time.sleep(pause)
            try:
                self._send(sub, body)
                return DeliveryRecord(
                    subscriber=name, ok=True, attempts=attempt, duplicate=failures > 0
                )
            except Exception as exc:  # delivery failure must never propagate
                failures += 1
                detail = str(exc)
        return DeliveryRecord(
            subscriber=name, ok=False, attempts=failures, duplicate=False, detail=detail
        )

    def _send(self, sub: dict, body: str) -> None:
        if sub["kind"] == "log":
            with Path(sub["path"]).open("a", encoding="utf-8") as fh:
                fh.write(body + "\n")
        elif sub["kind"] == "webhook":
            if self._client is None:
                self._client = httpx.Client(timeout=2.0)
            response = self._client.post(sub["url"], content=body,
                                         headers={"content-type": "application/json"})
            response.raise_for_status()
        elif sub["kind"] == "callable":  # test hook
            sub["fn"](body)
        else:
            raise ValueError(f"unknown subscriber kind {sub['kind']!r}")
