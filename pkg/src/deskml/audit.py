"""Post-hoc audits over an event log.

These deliberately do not reuse the state reducer: they re-derive resource
accounting and lifecycle legality from raw records with independent
bookkeeping, so a reducer bug cannot hide itself.
"""

from __future__ import annotations

from typing import Any, Iterable

from .eventlog import Record
from .types import LIFECYCLE, SessionState

FAILURE_STATES = {SessionState.FAILED.value, SessionState.KILLED_OOM.value}


def audit_oversubscription(records: Iterable[Record]) -> list[str]:
    """Replay binds/releases; flag any point where a node's bound resources
    exceed its totals, or a reconciliation sync disagrees with the ledger."""
    problems: list[str] = []
    totals: dict[str, tuple[int, int]] = {}
    bound: dict[str, tuple[str, int, int]] = {}  # sid -> (node, gpus, mem)
    requests: dict[str, tuple[int, int]] = {}

    def node_load(node_id: str) -> tuple[int, int]:
        g = sum(g for (n, g, _) in bound.values() if n == node_id)
        m = sum(m for (n, _, m) in bound.values() if n == node_id)
        return g, m

    def check(node_id: str, seq: int) -> None:
        g, m = node_load(node_id)
        tg, tm = totals[node_id]
        if g > tg or m > tm:
            problems.append(
                f"seq {seq}: node {node_id} oversubscribed (gpus {g}/{tg}, mem {m}/{tm})"
            )

    for rec in records:
        p = rec.payload
        if rec.kind == "node.added":
            totals[p["node_id"]] = (p["total_gpus"], p["total_memory"])
        elif rec.kind == "session.created":
            requests[p["session_id"]] = (p["gpus"], p["memory"])
        elif rec.kind == "session.adopted":
            requests[p["session_id"]] = (p["gpus"], p["memory"])
            if p.get("node_id"):
                bound[p["session_id"]] = (p["node_id"], p["gpus"], p["memory"])
                check(p["node_id"], rec.seq)
        elif rec.kind in ("session.bound", "session.serving"):
            sid = p["session_id"]
            gpus, mem = requests[sid]
            bound[sid] = (p["node_id"], gpus, mem)
            check(p["node_id"], rec.seq)
        elif rec.kind in ("session.terminal", "session.requeued"):
            bound.pop(p["session_id"], None)
        elif rec.kind == "node.synced":
            g, m = node_load(p["node_id"])
            tg, tm = totals[p["node_id"]]
            if p["available_gpus"] != tg - g or p["available_memory"] != tm - m:
                problems.append(
                    f"seq {rec.seq}: node {p['node_id']} sync mismatch "
                    f"(ledger {tg - g}/{tm - m} vs synced "
                    f"{p['available_gpus']}/{p['available_memory']})"
                )
    return problems


def audit_transitions(records: Iterable[Record]) -> list[str]:
    problems: list[str] = []
    states: dict[str, SessionState] = {}
    for rec in records:
        p = rec.payload
        if rec.kind == "session.created":
            states[p["session_id"]] = SessionState.QUEUED
        elif rec.kind == "session.adopted":
            states[p["session_id"]] = SessionState(p["state"])
        elif rec.kind in ("session.bound", "session.running", "session.terminal",
                          "session.requeued", "session.serving"):
            sid = p["session_id"]
            old = states.get(sid)
            new = {
                "session.bound": SessionState.PREPARING,
                "session.running": SessionState.RUNNING,
                "session.requeued": SessionState.QUEUED,
                "session.serving": SessionState.SERVING,
            }.get(rec.kind) or SessionState(p["state"])
            if old is None:
                problems.append(f"seq {rec.seq}: transition for unknown session {sid}")
            elif new not in LIFECYCLE[old]:
                problems.append(
                    f"seq {rec.seq}: illegal transition {old.value} -> {new.value} "
                    f"for {sid}"
                )
            states[sid] = new
        elif rec.kind == "session.removed":
            states.pop(p["session_id"], None)
    return problems


def audit_epochs(records: Iterable[Record],
                 acting: dict[int, set[str]]) -> list[str]:
    problems: list[str] = []
    last_epoch = 0
    leaders: dict[int, str] = {}
    for rec in records:
        if rec.kind != "epoch":
            continue
        epoch = rec.payload["epoch"]
        if epoch <= last_epoch:
            problems.append(f"seq {rec.seq}: epoch did not increase ({epoch})")
        last_epoch = epoch
        leaders[epoch] = rec.payload["leader"]
    for epoch, names in acting.items():
        if len(names) > 1:
            problems.append(f"epoch {epoch} had multiple acting primaries: {sorted(names)}")
        declared = leaders.get(epoch)
        if declared and names and names != {declared}:
            problems.append(
                f"epoch {epoch} acted by {sorted(names)} but declared {declared}"
            )
    return problems


def audit_notifications(records: Iterable[Record]) -> list[str]:
    """One notification per terminal failure (and per credit stop)."""
    problems: list[str] = []
    failures: dict[str, int] = {}
    credit_stops: dict[str, int] = {}
    notes: dict[str, int] = {}
    for rec in records:
        p = rec.payload
        if rec.kind == "session.terminal" and p["state"] in FAILURE_STATES:
            failures[p["session_id"]] = failures.get(p["session_id"], 0) + 1
        elif (rec.kind == "session.terminal"
              and p.get("reason") == "credit exhausted"):
            credit_stops[p["session_id"]] = credit_stops.get(p["session_id"], 0) + 1
        elif rec.kind == "notification":
            notes[p["session_id"]] = notes.get(p["session_id"], 0) + 1
    for sid, n in failures.items():
        expected = n + credit_stops.get(sid, 0)
        if notes.get(sid, 0) != expected:
            problems.append(
                f"session {sid}: {n} failures but {notes.get(sid, 0)} notifications"
            )
    for sid, n in credit_stops.items():
        if sid not in failures and notes.get(sid, 0) != n:
            problems.append(
                f"session {sid}: {n} credit stops but {notes.get(sid, 0)} notifications"
            )
    return problems


def run_all(records: list[Record],
            acting: dict[int, set[str]] | None = None) -> dict[str, Any]:
    problems = {
        "oversubscription": audit_oversubscription(records),
        "transitions": audit_transitions(records),
        "epochs": audit_epochs(records, acting or {}),
        "notifications": audit_notifications(records),
    }
    return {
        "ok": not any(problems.values()),
        "records": len(records),
        "problems": problems,
    }
