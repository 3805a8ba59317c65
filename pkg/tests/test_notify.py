"""Notification delivery and sinks."""

import json

from conftest import run_session, small_scenario
from deskml import GIB, Platform
from deskml.audit import audit_notifications
from deskml.notify import FileSink, Notifier
from deskml.types import Notification, NotifyKind, SessionState


def note(kind=NotifyKind.FAILED):
    return Notification(recipient="u", session_id="u/d/1", kind=kind,
                        detail="x", ts=0)


def test_done_session_no_notification(platform):
    p = platform
    run_session(p)
    p.run_until_quiet()
    assert p.plane.state.notifications == []
    assert p.memory_sink.delivered == []


def test_failed_session_exactly_one_notification(platform):
    p = platform
    sid = run_session(p, profile={"steps_total": 10, "step_ms": 200,
                                  "peak_memory": GIB, "failure_at": 4})
    p.run_until_quiet()
    assert p.plane.state.sessions[sid].state == SessionState.FAILED
    notes = p.plane.state.notifications
    assert len(notes) == 1
    assert notes[0].kind == NotifyKind.FAILED
    assert p.memory_sink.delivered[0].session_id == sid
    assert audit_notifications(p.records()) == []


def test_node_crash_notifies_each_owner():
    p = Platform(small_scenario())
    s1 = run_session(p, user="u1")
    s2 = run_session(p, user="u2")
    s3 = run_session(p, user="u2", config={"lr": 0.9})
    p.advance(4000)
    node = p.plane.state.sessions[s1].node_id
    p.inject_fault(node, "crash")
    p.run_until_quiet()
    victims = {sid for sid in (s1, s2, s3)
               if p.plane.state.sessions[sid].state == SessionState.FAILED}
    dead_notes = [n for n in p.plane.state.notifications
                  if n.kind == NotifyKind.NODE_DEAD]
    assert {n.session_id for n in dead_notes} == victims
    assert len(dead_notes) == len(victims)


def test_file_sink_appends_json_lines(tmp_path):
    sink = FileSink(tmp_path / "notes.jsonl")
    sink.deliver(note())
    sink.deliver(note(NotifyKind.KILLED_OOM))
    lines = (tmp_path / "notes.jsonl").read_text().strip().splitlines()
    assert len(lines) == 2
    assert json.loads(lines[1])["kind"] == "killed_oom"


def test_flaky_sink_retried_bounded():
    calls = []

    class Flaky:
        def __init__(self, fail_times):
            self.fail_times = fail_times

        def deliver(self, notification):
            calls.append(1)
            if len(calls) <= self.fail_times:
                raise RuntimeError("boom")

    notifier = Notifier([Flaky(fail_times=2)], max_attempts=3)
    notifier.deliver(note())
    assert len(calls) == 3  # two failures then success


def test_dead_sink_gives_up_and_logs(caplog):
    class Dead:
        def deliver(self, notification):
            raise RuntimeError("always down")

    notifier = Notifier([Dead()], max_attempts=3)
    with caplog.at_level("WARNING"):
        notifier.deliver(note())
    assert any("dropped after 3 attempts" in r.message for r in caplog.records)


def test_notifications_survive_replay(platform):
    p = platform
    sid = run_session(p, profile={"steps_total": 5, "step_ms": 200,
                                  "peak_memory": GIB, "failure_at": 2})
    p.run_until_quiet()
    from deskml.state import rebuild

    rebuilt = rebuild(p.records())
    assert len(rebuilt.notifications) == 1
    # but replay does not re-deliver to sinks
    assert len(p.memory_sink.delivered) == 1
