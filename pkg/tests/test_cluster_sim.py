"""Simulated node behavior: spawning, transfers, determinism, faults."""

import pytest

from conftest import run_session, small_scenario
from deskml import GIB, Platform
from deskml.errors import AdmissionRejected, StateError
from deskml.types import NotifyKind, SessionState


def test_spawn_registers_full_availability(platform):
    node = platform.cluster.spawn_node(8, 256 * GIB)
    view = platform.plane.state.nodes[node.node_id]
    assert view.total_gpus == 8
    assert view.available_gpus == 8
    assert view.available_memory == 256 * GIB
    assert view.cached_datasets == set()


def test_spawn_minimal_and_distinct_ids(platform):
    a = platform.cluster.spawn_node(1, 1 * GIB)
    b = platform.cluster.spawn_node(1, 1 * GIB)
    assert a.node_id != b.node_id
    with pytest.raises(StateError):
        platform.cluster.spawn_node(2, GIB, node_id=a.node_id)


def test_cold_fetch_time_is_size_over_bandwidth(platform):
    node = platform.cluster.nodes["n1"]
    assert node.dataset_fetch_ms("big", 10 * GIB) == 10_000


def test_cached_fetch_is_free(platform):
    p = platform
    run_session(p)  # lands on n1 (all-equal availability, id tiebreak)
    p.advance(4000)
    node = p.cluster.nodes["n1"]
    assert "d1" in node.cached_datasets
    assert node.dataset_fetch_ms("d1", 2 * GIB) == 0
    # control-plane view mirrors the cache for locality scoring
    assert "d1" in p.plane.state.nodes["n1"].cached_datasets


def test_private_dataset_rejected_before_any_transfer(platform):
    before = platform.cluster.copy_ms_total
    with pytest.raises(AdmissionRejected) as exc:
        run_session(platform, user="outsider", dataset="secret")
    assert exc.value.code == "permission_denied"
    assert platform.cluster.copy_ms_total == before


def test_metric_stream_run_twice_bit_identical():
    streams = []
    for _ in range(2):
        p = Platform(small_scenario())
        sid = run_session(p, image="noisy", seed=424242)
        p.run_until_quiet()
        streams.append([(m.step, m.name, m.value) for m in p.plane.state.metrics[sid]])
    assert streams[0] == streams[1]
    assert len(streams[0]) == 10


def test_whole_sim_determinism():
    def drive():
        p = Platform(small_scenario())
        run_session(p, user="u1", image="noisy", config={"lr": 0.1})
        p.advance(2000)
        run_session(p, user="u2", image="quick", config={"lr": 0.5}, gpus=2)
        p.run_until_quiet()
        return p.plane.state.snapshot(), [r.to_json() for r in p.records()]

    snap1, log1 = drive()
    snap2, log2 = drive()
    assert snap1 == snap2
    assert log1 == log2


def test_conservation_at_quiescence(platform):
    p = platform
    for i in range(4):
        run_session(p, user="u1", config={"lr": i / 10}, gpus=1)
    p.run_until_quiet()
    for view in p.plane.state.nodes.values():
        assert view.available_gpus == view.total_gpus
        assert view.available_memory == view.total_memory
    for node in p.cluster.nodes.values():
        truth = node.truth()
        assert truth["available_gpus"] == node.total_gpus
        assert truth["available_memory"] == node.total_memory


def test_conservation_while_running(platform):
    p = platform
    run_session(p, gpus=2, memory=2 * GIB)
    p.advance(4000)  # bound and running
    view = p.plane.state.nodes["n1"]
    assert view.available_gpus == view.total_gpus - 2
    assert view.available_memory == view.total_memory - 2 * GIB
    truth = p.cluster.nodes["n1"].truth()
    assert truth["available_gpus"] == view.available_gpus
    assert truth["available_memory"] == view.available_memory


def test_cache_monotone_without_capacity(platform):
    p = platform
    run_session(p, dataset="d1")
    p.advance(4000)
    caches_before = set(p.cluster.nodes["n1"].cached_datasets)
    run_session(p, dataset="mse-d")
    p.run_until_quiet()
    caches_after = set(p.cluster.nodes["n1"].cached_datasets)
    assert caches_before <= caches_after


def test_lru_eviction_when_capped():
    p = Platform(small_scenario(cache_capacity=3 * GIB))
    node = p.cluster.nodes["n1"]
    node._cache_dataset("a", 2 * GIB, now=p.engine.now_ms)
    p.advance(10)
    node._cache_dataset("b", 2 * GIB, now=p.engine.now_ms)
    assert "a" not in node.cached_datasets  # least recently used went first
    assert "b" in node.cached_datasets
    assert "a" not in p.plane.state.nodes["n1"].cached_datasets


def test_node_crash_fails_sessions_and_notifies(platform):
    p = platform
    s1 = run_session(p, user="u1", gpus=1)
    s2 = run_session(p, user="u2", gpus=1)
    p.advance(4000)
    assert p.plane.state.sessions[s1].state == SessionState.RUNNING
    p.inject_fault("n1", "crash")
    p.advance(2 * p.config.failover_timeout_ms + 2000)
    st = p.plane.state
    assert st.sessions[s1].state == SessionState.FAILED
    assert st.sessions[s2].state == SessionState.FAILED
    dead_notes = [n for n in st.notifications if n.kind == NotifyKind.NODE_DEAD]
    assert len(dead_notes) == 2
    assert {n.recipient for n in dead_notes} == {"u1", "u2"}
    assert st.nodes["n1"].liveness.value == "dead"


def test_node_death_mid_prepare_requeues(platform):
    p = platform
    sid = run_session(p, dataset="d1")  # 2 GiB copy: prepare takes ~2.5s
    p.advance(1200)
    assert p.plane.state.sessions[sid].state == SessionState.PREPARING
    p.inject_fault("n1", "crash")
    p.run_until_quiet()
    sess = p.plane.state.sessions[sid]
    assert sess.state == SessionState.DONE  # re-placed on n2 and finished
    assert not any(n.kind == NotifyKind.NODE_DEAD and n.session_id == sid
                   for n in p.plane.state.notifications)


def test_delay_below_timeout_no_promotion(platform):
    p = platform
    p.advance(2000)
    p.inject_fault("scheduler-primary", "network-delay",
                   duration_ms=p.config.failover_timeout_ms - 1500)
    p.advance(15_000)
    assert p.active_node().name == "sched-a"
    assert p.plane.state.epoch == 1
    assert not p.promotions


def test_virtual_time_only_in_sim_paths():
    # nothing in the simulation modules may consult the wall clock
    import pathlib

    src = pathlib.Path(__file__).resolve().parents[1] / "src" / "deskml"
    for name in ("engine.py", "cluster.py", "workload.py", "scheduling.py",
                 "failover.py", "state.py", "platform.py"):
        text = (src / name).read_text()
        assert "time.time(" not in text, f"wall clock leaked into {name}"
        assert "monotonic(" not in text, f"wall clock leaked into {name}"
