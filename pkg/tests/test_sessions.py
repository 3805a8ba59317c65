"""Lifecycle, lineage, events/logs access, comparison."""

import pytest

from conftest import run_session, small_scenario
from deskml import GIB, Platform
from deskml.errors import (
    AdmissionRejected,
    NotFoundError,
    PermissionDeniedError,
    StateError,
    ValidationError,
)
from deskml.types import SessionState


def stream(p, sid, name=None):
    return [(m.step, m.name, m.value) for m in p.plane.state.metrics[sid]
            if name is None or m.name == name]


def test_session_ids_sequence_per_user_dataset(platform):
    p = platform
    assert run_session(p) == "u1/d1/1"
    assert run_session(p) == "u1/d1/2"
    assert run_session(p, user="u2") == "u2/d1/1"
    assert run_session(p, dataset="mse-d") == "u1/mse-d/1"


def test_private_dataset_run_denied(platform):
    with pytest.raises(AdmissionRejected) as exc:
        run_session(platform, user="outsider", dataset="secret")
    assert exc.value.code == "permission_denied"


def test_stop_running_releases_resources(platform):
    p = platform
    sid = run_session(p, gpus=2)
    p.advance(4000)
    assert p.plane.state.sessions[sid].state == SessionState.RUNNING
    p.plane.stop(sid, "u1")
    sess = p.plane.state.sessions[sid]
    assert sess.state == SessionState.STOPPED
    assert sess.node_id is None
    assert p.plane.state.nodes["n1"].available_gpus == 4


def test_rm_running_rejected(platform):
    p = platform
    sid = run_session(p)
    p.advance(4000)
    with pytest.raises(StateError) as exc:
        p.plane.rm(sid, "u1")
    assert "running" in str(exc.value)


def test_rm_terminal_removes_but_keeps_submissions(platform):
    p = platform
    sid = run_session(p)
    p.run_until_quiet()
    p.plane.submit(sid, "u1")
    p.plane.rm(sid, "u1")
    assert sid not in p.plane.state.sessions
    board = p.plane.leaderboard("d1")
    assert board["entries"][0]["session_id"] == sid


def test_resume_continues_to_completion_with_identical_tail():
    """Splice oracle: an interrupted-and-resumed run must equal the
    uninterrupted run with the same seed, step for step, bit for bit."""
    seed = 321

    baseline = Platform(small_scenario())
    ref = run_session(baseline, image="noisy", seed=seed)
    baseline.run_until_quiet()
    full = stream(baseline, ref)

    p = Platform(small_scenario())
    sid = run_session(p, image="noisy", seed=seed)
    p.advance(4600)  # a few steps in
    p.plane.stop(sid, "u1")
    stop_step = p.plane.latest_checkpoint(sid).step
    assert 0 < stop_step < 10
    p.plane.resume(sid, "u1")
    p.run_until_quiet()
    assert p.plane.state.sessions[sid].state == SessionState.DONE
    assert stream(p, sid) == full


def test_resume_requires_checkpoint(platform):
    p = platform
    sid = run_session(p)
    p.plane.stop(sid, "u1")  # stopped while queued: no checkpoint
    with pytest.raises(StateError):
        p.plane.resume(sid, "u1")


def test_fork_merges_overrides_only(platform):
    p = platform
    parent = run_session(p, config={"lr": 0.1, "bs": 128})
    p.run_until_quiet()
    child = p.plane.fork(parent, "u1", overrides={"lr": 0.01})
    cfg = p.plane.state.sessions[child].config
    assert cfg == {"lr": 0.01, "bs": 128}
    assert p.plane.state.sessions[child].parent == parent


def test_fork_with_pinned_seed_replays_parent_tail():
    p = Platform(small_scenario())
    parent = run_session(p, image="noisy", seed=777)
    p.advance(4600)  # mid-run
    p.plane.stop(parent, "u1")
    ckpt = p.plane.latest_checkpoint(parent)
    assert 0 < ckpt.step < 10
    child = p.plane.fork(parent, "u1", seed=777)
    assert p.plane.state.sessions[child].start_step == ckpt.step
    p.plane.resume(parent, "u1")
    p.run_until_quiet()
    parent_tail = [m for m in stream(p, parent) if m[0] > ckpt.step]
    assert stream(p, child) == parent_tail
    assert len(parent_tail) == 10 - ckpt.step


def test_fork_of_done_parent_completes_immediately():
    p = Platform(small_scenario())
    parent = run_session(p, image="quick", seed=1)
    p.run_until_quiet()
    child = p.plane.fork(parent, "u1", seed=1)
    p.run_until_quiet()
    assert p.plane.state.sessions[child].state == SessionState.DONE
    assert stream(p, child) == []


def test_fork_unknown_override_rejected(platform):
    p = platform
    parent = run_session(p, config={"lr": 0.1})
    p.run_until_quiet()
    with pytest.raises(ValidationError):
        p.plane.fork(parent, "u1", overrides={"nope": 1})


def test_fork_of_queued_session_rejected(platform):
    p = platform
    parent = run_session(p)
    with pytest.raises(StateError):
        p.plane.fork(parent, "u1")


def test_events_filter_and_eventlen(platform):
    p = platform
    sid = run_session(p, image="quick")
    p.run_until_quiet()
    events = p.plane.events(sid, "u1", name="accuracy")
    assert len(events) == 10
    assert [e.step for e in events] == list(range(1, 11))
    assert p.plane.eventlen(sid, "u1") == 10
    assert p.plane.events(sid, "u1", name="nothing") == []
    assert p.plane.eventlen(sid, "u1", name="accuracy") == 10


def test_events_ordered_by_step_then_name(platform):
    p = platform
    sid = run_session(p)
    p.run_until_quiet()
    now = p.engine.now_ms
    p.plane.record("metric", sid, {"session_id": sid, "step": 1,
                                   "name": "aaa", "value": 1.0, "ts": now})
    events = p.plane.events(sid, "u1")
    assert (events[0].step, events[0].name) == (1, "aaa")
    assert (events[1].step, events[1].name) == (1, "accuracy")


def test_team_member_may_view_private_session(platform):
    p = platform
    sid = run_session(p, user="u1", dataset="secret", image="quick")
    p.run_until_quiet()
    assert p.plane.eventlen(sid, "u2") == 10  # same team
    with pytest.raises(PermissionDeniedError):
        p.plane.events(sid, "outsider")
    with pytest.raises(PermissionDeniedError):
        p.plane.logs(sid, "outsider")


def test_private_sessions_invisible_in_listings(platform):
    p = platform
    sid = run_session(p, user="u1", dataset="secret")
    listed = {s.session_id for s in p.plane.list_sessions("outsider")}
    assert sid not in listed
    listed = {s.session_id for s in p.plane.list_sessions("u2")}
    assert sid in listed


def test_compare_common_and_exclusive(platform):
    p = platform
    a = run_session(p, config={"lr": 0.1, "bs": 128})
    b = run_session(p, config={"lr": 0.5, "bs": 128})
    report = p.plane.compare([a, b], "u1")
    assert report["common_args"] == {"bs": 128}
    assert report["params"] == ["lr"]
    assert report["rows"][0]["values"] == {"lr": 0.1}
    assert report["rows"][1]["values"] == {"lr": 0.5}


def test_compare_identical_configs(platform):
    p = platform
    a = run_session(p, config={"lr": 0.1})
    b = run_session(p, config={"lr": 0.1})
    report = p.plane.compare([a, b], "u1")
    assert report["common_args"] == {"lr": 0.1}
    assert report["params"] == []


def test_compare_absent_param_is_none(platform):
    p = platform
    a = run_session(p, config={"lr": 0.1, "dropout": 0.5})
    b = run_session(p, config={"lr": 0.1})
    report = p.plane.compare([a, b], "u1")
    assert report["rows"][1]["values"]["dropout"] is None


def test_compare_needs_two(platform):
    sid = run_session(platform)
    with pytest.raises(ValidationError):
        platform.plane.compare([sid], "u1")


def test_memo_getid_command(platform):
    p = platform
    sid = run_session(p, config={"lr": 0.25})
    p.plane.set_memo(sid, "u1", "first try")
    assert p.plane.state.sessions[sid].memo == "first try"
    assert p.plane.getid("u1") == sid
    assert "-a lr=0.25" in p.plane.state.sessions[sid].command
    with pytest.raises(NotFoundError):
        p.plane.getid("outsider")


def test_logs_follow_progress(platform):
    p = platform
    sid = run_session(p)
    p.run_until_quiet()
    lines = [entry["line"] for entry in p.plane.logs(sid, "u1")]
    assert any("queued" in s for s in lines)
    assert any("scheduled on" in s for s in lines)
    assert any("step 10/10" in s for s in lines)
