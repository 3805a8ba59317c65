"""Warm-standby replication, promotion, and split-brain fencing."""

from conftest import run_session, small_scenario
from deskml import Platform
from deskml.audit import run_all
from deskml.failover import ROLE_PRIMARY, ROLE_SECONDARY
from deskml.state import rebuild
from deskml.types import SessionState


def test_replication_catches_up_via_pull(platform):
    p = platform
    run_session(p)
    run_session(p, user="u2")
    primary_max = p.sched_a.plane.log.max_seq
    gap_before = primary_max - p.sched_b.plane.log.max_seq
    assert gap_before > 0
    p.advance(2 * p.config.heartbeat_interval_ms)
    # the secondary pulled at least the range the heartbeat advertised,
    # and its log is a strict prefix of the primary's
    assert p.sched_b.plane.log.max_seq >= primary_max
    a = [r.to_json() for r in p.sched_a.plane.log.records()]
    b = [r.to_json() for r in p.sched_b.plane.log.records()]
    assert a[: len(b)] == b


def test_secondary_state_mirrors_primary_at_watermark(platform):
    p = platform
    run_session(p)
    p.run_until_quiet()
    p.advance(2 * p.config.heartbeat_interval_ms)
    watermark = p.sched_b.plane.log.max_seq
    at_watermark = rebuild(p.sched_a.plane.log.records(1, watermark))
    assert p.sched_b.plane.state.snapshot() == at_watermark.snapshot()


def test_heartbeats_continue_no_promotion(platform):
    p = platform
    p.advance(30_000)
    assert p.promotions == []
    assert p.sched_b.role == ROLE_SECONDARY


def test_promotion_within_timeout_of_crash(platform):
    p = platform
    p.advance(2500)
    crash_at = p.engine.now_ms
    p.inject_fault("scheduler-primary", "crash")
    p.advance(2 * p.config.failover_timeout_ms)
    assert len(p.promotions) == 1
    promo = p.promotions[0]
    assert promo["leader"] == "sched-b"
    assert promo["ts"] - crash_at <= p.config.failover_timeout_ms
    assert p.active_node().name == "sched-b"


def test_promoted_state_equals_replica_rebuild(platform):
    p = platform
    run_session(p)
    p.advance(2300)
    run_session(p, user="u2")
    p.inject_fault("scheduler-primary", "crash")
    p.advance(2 * p.config.failover_timeout_ms)
    promo = p.promotions[0]
    rebuilt = rebuild(promo["replica_records"])
    assert rebuilt.snapshot() == promo["state_snapshot"]


def test_queued_tickets_preserved_and_complete():
    # tiny cluster so a queue builds up behind a big job
    scenario = small_scenario()
    scenario["nodes"] = [{"node_id": "n1", "gpus": 2, "memory_gb": 16}]
    p = Platform(scenario)
    blocker = run_session(p, gpus=2)
    waiting = [run_session(p, gpus=1, config={"i": i}) for i in range(3)]
    p.advance(2500)  # replicated: all queued behind the blocker
    queue_before = [sid for sid in p.sched_b.plane.state.queue]
    assert set(waiting) <= set(queue_before)
    p.inject_fault("scheduler-primary", "crash")
    p.advance(2 * p.config.failover_timeout_ms)
    promo = p.promotions[0]
    queue_at_promotion = promo["state_snapshot"]["queue"]
    assert queue_at_promotion == queue_before
    p.run_until_quiet()
    for sid in waiting:
        if sid in promo["state_snapshot"]["sessions"]:
            assert p.plane.state.sessions[sid].state == SessionState.DONE
    assert p.plane.state.sessions[blocker].state in (
        SessionState.DONE, SessionState.RUNNING, SessionState.FAILED,
    )


def test_running_sessions_untouched_by_promotion(platform):
    p = platform
    sid = run_session(p)
    p.advance(4000)
    assert p.plane.state.sessions[sid].state == SessionState.RUNNING
    p.inject_fault("scheduler-primary", "crash")
    p.run_until_quiet()
    assert p.plane.state.sessions[sid].state == SessionState.DONE
    report = run_all(p.records(), p.acting)
    assert report["ok"], report["problems"]


def test_deposed_primary_demotes_on_higher_epoch(platform):
    p = platform
    p.advance(2000)
    # partition: messages to/from the primary held beyond the timeout
    p.inject_fault("scheduler-primary", "network-delay",
                   duration_ms=3 * p.config.failover_timeout_ms)
    p.advance(3 * p.config.failover_timeout_ms + 4000)
    # secondary promoted; old primary saw the higher epoch and stepped down
    assert p.sched_b.role == ROLE_PRIMARY
    assert p.sched_a.role == ROLE_SECONDARY
    assert p.active_node().name == "sched-b"
    assert len([x for x in p.promotions]) == 1
    report = run_all(p.records(), p.acting)
    assert report["ok"], report["problems"]


def test_stale_heartbeat_rejected_epoch_audit(platform):
    p = platform
    p.advance(2000)
    p.inject_fault("scheduler-primary", "network-delay",
                   duration_ms=3 * p.config.failover_timeout_ms)
    p.advance(10 * p.config.failover_timeout_ms)
    # epoch records strictly increase and each epoch had one acting leader
    epochs = [r.payload["epoch"] for r in p.records() if r.kind == "epoch"]
    assert epochs == sorted(set(epochs))
    for epoch, actors in p.acting.items():
        assert len(actors) == 1, (epoch, actors)


def test_sync_replication_keeps_pair_lockstep():
    p = Platform(small_scenario(sync_replication=True))
    run_session(p)
    assert (p.sched_b.plane.log.max_seq == p.sched_a.plane.log.max_seq)
    p.advance(3000)
    assert (p.sched_b.plane.state.snapshot()
            == p.sched_a.plane.state.snapshot())
