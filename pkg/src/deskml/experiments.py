"""Scripted scheduler experiments: seeded traces for policy comparisons,
failover drills, and utilization ground truth. Used by the demo scripts and
the acceptance suite."""

from __future__ import annotations

from typing import Any, Optional

from . import rng
from .eventlog import Record
from .platform import Platform
from .types import GIB

QUIET_TELEMETRY_MS = 3_600_000  # effectively off for experiments


def _experiment_scenario(n_nodes: int, gpus: int, seed: int,
                         policy: str = "defrag", caching: bool = True,
                         datasets: Optional[list[dict]] = None,
                         telemetry_ms: int = QUIET_TELEMETRY_MS) -> dict:
    return {
        "sim": {
            "seed": seed,
            "placement_policy": policy,
            "caching_enabled": caching,
            "telemetry_period_ms": telemetry_ms,
            "image_size": 256 * 1024 ** 2,
        },
        "users": [
            {"user_id": "admin", "role": "admin", "credits": 10 ** 9,
             "token": "admin-token"},
            {"user_id": "lab", "credits": 10 ** 9, "token": "lab-token"},
        ],
        "datasets": datasets or [
            {"dataset_id": "shared", "owner": "admin", "size_gb": 1},
        ],
        "nodes": [
            {"node_id": f"node-{i + 1}", "gpus": gpus, "memory_gb": 256}
            for i in range(n_nodes)
        ],
    }


def _profile(steps: int, step_ms: int = 500, peak_gb: float = 1.0) -> dict:
    return {"a_max": 0.9, "rate_k": 0.25, "noise_sigma": 0.0,
            "steps_total": steps, "step_ms": step_ms,
            "peak_memory": int(peak_gb * GIB)}


# -- defragmentation --------------------------------------------------------------


def run_defrag_trace(seed: int, policy: str,
                     n_jobs: int = 28, horizon_ms: int = 120_000) -> dict[str, Any]:
    """Mixed 1/2-GPU jobs trickling onto a 3x8-GPU cluster, then one 8-GPU
    job late in the trace. Returns the record log for measurement."""
    p = Platform(_experiment_scenario(3, 8, seed, policy=policy))
    t = 0
    for i in range(n_jobs):
        t += rng.randint(1200, 3200, "defrag-gap", seed, i)
        p.advance(t - p.engine.now_ms)
        gpus = rng.choice([1, 1, 1, 2, 2], "defrag-size", seed, i)
        steps = rng.randint(10, 22, "defrag-len", seed, i)
        p.plane.run("lab", "shared", "job", {"i": i}, gpus=gpus, memory=GIB,
                    profile=_profile(steps))
    big_at = t + rng.randint(4000, 8000, "defrag-big", seed)
    p.advance(big_at - p.engine.now_ms)
    p.plane.run("lab", "shared", "big-job", {"big": 1}, gpus=8, memory=2 * GIB,
                profile=_profile(12))
    p.run_until_quiet(max_ms=600_000)
    return {
        "records": p.records(),
        "acting": dict(p.acting),
        "horizon_ms": min(horizon_ms, p.engine.now_ms),
    }


def free_block_duration(records: list[Record], horizon_ms: int,
                        block_gpus: int = 8) -> int:
    """Virtual time in [0, horizon] during which at least one node with
    block_gpus total GPUs is fully free. Re-derived from raw records."""
    totals: dict[str, int] = {}
    gpus_of: dict[str, int] = {}
    used: dict[str, int] = {}
    on_node: dict[str, str] = {}

    def fully_free() -> bool:
        return any(total == block_gpus and used.get(node, 0) == 0
                   for node, total in totals.items())

    duration = 0
    cursor = 0
    state_free = True  # no nodes yet still means nothing is blocked; start free
    for rec in records:
        ts = min(rec.ts, horizon_ms)
        if ts > cursor:
            if state_free:
                duration += ts - cursor
            cursor = ts
        p = rec.payload
        if rec.kind == "node.added":
            totals[p["node_id"]] = p["total_gpus"]
            used.setdefault(p["node_id"], 0)
        elif rec.kind in ("session.created", "session.adopted"):
            gpus_of[p["session_id"]] = p["gpus"]
            if rec.kind == "session.adopted" and p.get("node_id"):
                on_node[p["session_id"]] = p["node_id"]
                used[p["node_id"]] += p["gpus"]
        elif rec.kind in ("session.bound", "session.serving"):
            sid = p["session_id"]
            on_node[sid] = p["node_id"]
            used[p["node_id"]] += gpus_of[sid]
        elif rec.kind in ("session.terminal", "session.requeued"):
            sid = p["session_id"]
            node = on_node.pop(sid, None)
            if node is not None:
                used[node] -= gpus_of[sid]
        state_free = fully_free()
        if cursor >= horizon_ms:
            break
    if cursor < horizon_ms and state_free:
        duration += horizon_ms - cursor
    return duration


# -- locality ---------------------------------------------------------------------


def run_locality_trace(seed: int, caching: bool,
                       n_jobs: int = 20) -> dict[str, Any]:
    """4 nodes, 20 jobs over 3 datasets; returns total dataset-copy time."""
    datasets = [
        {"dataset_id": "corpus-a", "owner": "admin", "size_gb": 8},
        {"dataset_id": "corpus-b", "owner": "admin", "size_gb": 6},
        {"dataset_id": "corpus-c", "owner": "admin", "size_gb": 4},
    ]
    p = Platform(_experiment_scenario(4, 4, seed, caching=caching,
                                      datasets=datasets))
    t = 0
    for i in range(n_jobs):
        t += rng.randint(1500, 2500, "loc-gap", seed, i)
        p.advance(t - p.engine.now_ms)
        ds = rng.choice(["corpus-a", "corpus-a", "corpus-b", "corpus-c"],
                        "loc-ds", seed, i)
        p.plane.run("lab", ds, "trainer", {"i": i}, gpus=1, memory=GIB,
                    profile=_profile(rng.randint(8, 14, "loc-len", seed, i)))
    p.run_until_quiet(max_ms=600_000)
    return {
        "copy_ms_total": p.cluster.copy_ms_total,
        "records": p.records(),
        "acting": dict(p.acting),
    }


# -- failover ----------------------------------------------------------------------


def run_failover_trial(seed: int) -> dict[str, Any]:
    """Crash the primary mid-trace; optionally rattle the network first."""
    p = Platform(_experiment_scenario(2, 4, seed))
    jobs = rng.randint(5, 9, "fo-jobs", seed)
    arrivals = sorted(rng.randint(0, 10_000, "fo-at", seed, i)
                      for i in range(jobs))
    crash_at = rng.randint(6_000, 14_000, "fo-crash", seed)
    timeout = p.config.failover_timeout_ms
    delay_note = None
    if rng.uniform("fo-delay?", seed) < 0.5:
        # a hold of d starting right after a heartbeat stretches the silent
        # gap to d + heartbeat_interval; stay under the timeout so the hold
        # alone never promotes
        max_benign = timeout - p.config.heartbeat_interval_ms - 200
        duration = rng.randint(500, max_benign, "fo-dur", seed)
        start = rng.randint(0, max(1, crash_at - duration - 200),
                            "fo-start", seed)
        p.engine.at(start, lambda: p.inject_fault(
            "scheduler-primary", "network-delay", duration))
        delay_note = (start, duration)
    for i, at in enumerate(arrivals):
        if at >= crash_at:
            break
        p.advance(at - p.engine.now_ms)
        p.plane.run("lab", "shared", "job", {"i": i},
                    gpus=rng.choice([1, 2, 4], "fo-size", seed, i),
                    memory=GIB,
                    profile=_profile(rng.randint(6, 18, "fo-len", seed, i)))
    p.advance(crash_at - p.engine.now_ms)
    queue_before = list(p.sched_b.plane.state.queue)
    p.inject_fault("scheduler-primary", "crash")
    p.advance(2 * timeout)
    p.run_until_quiet(max_ms=600_000)
    return {
        "crash_at": crash_at,
        "timeout": timeout,
        "delay": delay_note,
        "promotions": p.promotions,
        "replica_queue_before_crash": queue_before,
        "final_sessions": {sid: s.state.value
                           for sid, s in p.plane.state.sessions.items()},
        "records": p.records(),
        "acting": dict(p.acting),
    }


# -- utilization -------------------------------------------------------------------


def run_utilization_fleet() -> dict[str, Any]:
    """10 GPUs: 7 attributed (4 hot above 80, 3 cool below), 3 idle."""
    scenario = _experiment_scenario(2, 5, seed=3, telemetry_ms=1000)
    scenario["workloads"] = {
        "hot": dict(_profile(60, step_ms=1000),
                    utilization={"kind": "constant", "pct": 92}),
        "cool": dict(_profile(60, step_ms=1000),
                     utilization={"kind": "constant", "pct": 55}),
    }
    p = Platform(scenario)
    for i in range(4):
        p.plane.run("lab", "shared", "hot", {"i": i}, gpus=1, memory=GIB)
    for i in range(3):
        p.plane.run("lab", "shared", "cool", {"i": i}, gpus=1, memory=GIB)
    p.advance(25_000)
    return {
        "platform": p,
        "aggregate": p.plane.telemetry_aggregate(from_ms=10_000, to_ms=22_000),
        "records": p.records(),
        "acting": dict(p.acting),
    }
