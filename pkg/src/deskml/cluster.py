"""Simulated compute nodes.

Each node owns its GPU slots and memory, runs synthetic workloads step by
step on the event engine, models dataset/image transfers through a single
bandwidth scalar with per-node caches (LRU eviction when capped), and
reports everything (heartbeats, telemetry, metrics, checkpoints, terminal
events) to whichever scheduler is currently primary. Reports other than
heartbeats are buffered while no primary is reachable and flushed after a
promotion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional

from .engine import Engine
from .errors import StateError, ValidationError
from .workload import WorkloadProfile, checkpoint_digest


@dataclass
class RunState:
    snapshot: dict[str, Any]        # session payload as given at bind time
    profile: WorkloadProfile
    gpu_indices: list[int]
    allocated_memory: int
    step: int                       # last completed step
    running: bool = False           # False while preparing
    serving: bool = False


@dataclass
class SimConfig:
    bandwidth_bps: int = 1 * 1024 ** 3          # dataset copy, bytes per virtual second
    image_size: int = 512 * 1024 ** 2           # modeled container image size
    heartbeat_interval_ms: int = 1000
    failover_timeout_ms: int = 3000
    node_timeout_ms: int = 0                    # 0 -> failover_timeout_ms
    telemetry_period_ms: int = 1000
    tick_interval_ms: int = 1000
    credit_rate_per_gpu_min: float = 1.0
    cache_capacity: Optional[int] = None        # per-node dataset cache, bytes
    sync_replication: bool = False
    placement_policy: str = "defrag"            # "random" is the experiment baseline
    caching_enabled: bool = True                # False models cold fetches every time
    seed: int = 0

    def __post_init__(self):
        for name in ("bandwidth_bps", "heartbeat_interval_ms", "failover_timeout_ms",
                     "telemetry_period_ms", "tick_interval_ms"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be > 0")
        if self.failover_timeout_ms <= 2 * self.heartbeat_interval_ms:
            raise ValidationError("failover_timeout must exceed 2x heartbeat_interval")
        if not self.node_timeout_ms:
            self.node_timeout_ms = self.failover_timeout_ms


class SimNode:
    def __init__(self, node_id: str, total_gpus: int, total_memory: int,
                 cluster: "Cluster"):
        if total_gpus <= 0 or total_memory <= 0:
            raise ValidationError("node capacity must be positive")
        self.node_id = node_id
        self.total_gpus = total_gpus
        self.total_memory = total_memory
        self.cluster = cluster
        self.alive = True
        self.gpu_slots: list[Optional[str]] = [None] * total_gpus
        self.sessions: dict[str, RunState] = {}
        self.cached_datasets: dict[str, dict[str, int]] = {}  # id -> {size, last_access}
        self.cached_images: set[str] = set()
        self.outbox: list[dict[str, Any]] = []
        # last self-reported terminal outcome per session; lets a freshly
        # promoted scheduler reconstruct endings whose records died with the
        # old primary
        self.terminal_reports: dict[str, dict[str, Any]] = {}

    # -- capacity ------------------------------------------------------------

    def _take_slots(self, sid: str, gpus: int) -> list[int]:
        free = [i for i, s in enumerate(self.gpu_slots) if s is None]
        if len(free) < gpus:
            raise StateError(f"node {self.node_id} has no {gpus} free GPUs")
        taken = free[:gpus]
        for i in taken:
            self.gpu_slots[i] = sid
        return taken

    def _free_slots(self, sid: str) -> None:
        for i, s in enumerate(self.gpu_slots):
            if s == sid:
                self.gpu_slots[i] = None

    # -- cache ---------------------------------------------------------------

    def dataset_fetch_ms(self, dataset_id: str, size: int) -> int:
        if self.cluster.config.caching_enabled and dataset_id in self.cached_datasets:
            return 0
        return math.ceil(size * 1000 / self.cluster.config.bandwidth_bps)

    def image_fetch_ms(self, image_id: str) -> int:
        if image_id in self.cached_images:
            return 0
        return math.ceil(self.cluster.config.image_size * 1000
                         / self.cluster.config.bandwidth_bps)

    def _cache_dataset(self, dataset_id: str, size: int, now: int) -> None:
        if not self.cluster.config.caching_enabled:
            return
        if dataset_id in self.cached_datasets:
            self.cached_datasets[dataset_id]["last_access"] = now
            return
        cap = self.cluster.config.cache_capacity
        if cap is not None:
            in_use = {rs.snapshot["dataset_id"] for rs in self.sessions.values()}
            while (sum(e["size"] for e in self.cached_datasets.values()) + size > cap
                   and any(d not in in_use for d in self.cached_datasets)):
                victim = min(
                    (d for d in self.cached_datasets if d not in in_use),
                    key=lambda d: (self.cached_datasets[d]["last_access"], d),
                )
                del self.cached_datasets[victim]
                self.report({"kind": "cache_evicted", "node_id": self.node_id,
                             "dataset_id": victim})
        self.cached_datasets[dataset_id] = {"size": size, "last_access": now}
        self.report({"kind": "cache_dataset", "node_id": self.node_id,
                     "dataset_id": dataset_id})

    def _cache_image(self, image_id: str) -> None:
        if image_id not in self.cached_images:
            self.cached_images.add(image_id)
            self.report({"kind": "cache_image", "node_id": self.node_id,
                         "image_id": image_id})

    # -- session execution -----------------------------------------------------

    def start_session(self, snapshot: dict[str, Any], dataset_size: int) -> None:
        """Begin preparing: pull image and dataset, then run."""
        sid = snapshot["session_id"]
        profile = WorkloadProfile.from_payload(snapshot["profile"])
        rs = RunState(
            snapshot=dict(snapshot),
            profile=profile,
            gpu_indices=self._take_slots(sid, snapshot["gpus"]),
            allocated_memory=snapshot["memory"],
            step=snapshot.get("start_step", 0),
        )
        self.sessions[sid] = rs
        copy_ms = self.dataset_fetch_ms(snapshot["dataset_id"], dataset_size)
        delay = self.image_fetch_ms(snapshot["image_id"]) + copy_ms
        self.cluster.copy_ms_total += copy_ms
        self.cluster.engine.after(delay,
                                  lambda: self._prepare_done(sid, rs, dataset_size))

    def _prepare_done(self, sid: str, rs: RunState, dataset_size: int) -> None:
        # identity check kills event chains from earlier incarnations of a
        # stopped-and-resumed session
        if not self.alive or self.sessions.get(sid) is not rs:
            return  # aborted: a dead node caches nothing mid-copy
        rs.running = True
        now = self.cluster.engine.now_ms
        self._cache_image(rs.snapshot["image_id"])
        self._cache_dataset(rs.snapshot["dataset_id"], dataset_size, now)
        self.report({"kind": "dataset_touched", "node_id": self.node_id,
                     "dataset_id": rs.snapshot["dataset_id"], "ts": now})
        self.report({"kind": "session_running", "session_id": sid, "ts": now,
                     "node_id": self.node_id})
        self._log(sid, f"running on {self.node_id} "
                       f"(gpus={rs.gpu_indices}, start_step={rs.step})")
        if rs.step >= rs.profile.steps_total:
            # warm start landed on the final step: nothing left to compute
            self.detach(sid)
            self._report_terminal({"kind": "session_done", "session_id": sid,
                                   "ts": now, "step": rs.step})
            return
        self.cluster.engine.after(rs.profile.step_ms,
                                  lambda: self._step(sid, rs, rs.step + 1))

    def _step(self, sid: str, rs: RunState, step: int) -> None:
        if not self.alive or self.sessions.get(sid) is not rs:
            return
        if not rs.running or rs.serving:
            return
        now = self.cluster.engine.now_ms
        profile = rs.profile
        rs.step = step

        usage = profile.memory_at(step)
        if usage > rs.allocated_memory:
            self._log(sid, f"step {step}: memory {usage} exceeds allocation "
                           f"{rs.allocated_memory}, killed")
            self.detach(sid)
            self._report_terminal({"kind": "session_oom", "session_id": sid,
                                   "ts": now, "step": step, "usage": usage})
            return

        if profile.failure_at is not None and step == profile.failure_at:
            self._log(sid, f"step {step}: workload fault, exiting")
            self.detach(sid)
            self._report_terminal({
                "kind": "session_failed", "session_id": sid, "ts": now,
                "step": step, "detail": f"failure injected at step {step}",
            })
            return

        seed = rs.snapshot["seed"]
        config = rs.snapshot["config"]
        value = profile.metric_value(step, seed, config)
        self.report({"kind": "metric", "session_id": sid, "step": step,
                     "name": profile.metric_name, "value": value, "ts": now})
        self._log(sid, f"step {step}/{profile.steps_total} "
                       f"{profile.metric_name}={value:.6f}")

        boundary = profile.pause_every and step % profile.pause_every == 0
        if (step % profile.checkpoint_interval == 0 or step == profile.steps_total
                or boundary):
            self._checkpoint(sid, rs, step, now)

        if step == profile.steps_total:
            self.detach(sid)
            self._report_terminal({"kind": "session_done", "session_id": sid,
                                   "ts": now, "step": step})
            return
        if boundary:
            self.detach(sid)
            self._report_terminal({"kind": "session_paused", "session_id": sid,
                                   "ts": now, "step": step})
            return
        self.cluster.engine.after(profile.step_ms,
                                  lambda: self._step(sid, rs, step + 1))

    def _checkpoint(self, sid: str, rs: RunState, step: int, now: int) -> None:
        digest = checkpoint_digest(rs.snapshot["seed"], rs.snapshot["config"], step)
        self.report({"kind": "checkpoint", "session_id": sid, "step": step,
                     "digest": digest, "ts": now})

    def serve_session(self, snapshot: dict[str, Any]) -> None:
        sid = snapshot["session_id"]
        rs = RunState(
            snapshot=dict(snapshot),
            profile=WorkloadProfile.from_payload(snapshot["profile"]),
            gpu_indices=self._take_slots(sid, snapshot["gpus"]),
            allocated_memory=snapshot["memory"],
            step=snapshot.get("start_step", 0),
            running=True,
            serving=True,
        )
        self.sessions[sid] = rs
        self._log(sid, f"serving on {self.node_id}")

    def stop_session(self, sid: str, checkpoint: bool = True) -> Optional[dict[str, Any]]:
        """Detach a session; returns checkpoint info when one was cut."""
        rs = self.sessions.get(sid)
        if rs is None:
            return None
        info = None
        if checkpoint and rs.running and not rs.serving and rs.step > 0:
            digest = checkpoint_digest(rs.snapshot["seed"], rs.snapshot["config"], rs.step)
            info = {"step": rs.step, "digest": digest}
        self.detach(sid)
        return info

    def detach(self, sid: str) -> None:
        self._free_slots(sid)
        self.sessions.pop(sid, None)

    # -- periodic loops --------------------------------------------------------

    def start_loops(self) -> None:
        self._heartbeat()
        self._telemetry()

    def _heartbeat(self) -> None:
        if not self.alive:
            return
        now = self.cluster.engine.now_ms
        # liveness info is only useful live; never buffered
        self.cluster.router(
            {"kind": "node_hb", "node_id": self.node_id, "ts": now}, buffer=False
        )
        self.cluster.engine.after(self.cluster.config.heartbeat_interval_ms,
                                  self._heartbeat)

    def _telemetry(self) -> None:
        if not self.alive:
            return
        now = self.cluster.engine.now_ms
        samples = []
        for gpu, sid in enumerate(self.gpu_slots):
            if sid is None:
                samples.append({"gpu": gpu, "util": 0.0, "mem": 0, "session_id": None})
                continue
            rs = self.sessions[sid]
            if rs.serving:
                util = 5.0
            elif rs.running:
                util = rs.profile.utilization_at(rs.step)
            else:
                util = 0.0  # still preparing
            mem = rs.profile.memory_at(rs.step) // max(1, len(rs.gpu_indices))
            samples.append({"gpu": gpu, "util": util, "mem": mem, "session_id": sid})
        self.report({"kind": "telemetry", "node_id": self.node_id, "ts": now,
                     "samples": samples})
        self.cluster.engine.after(self.cluster.config.telemetry_period_ms,
                                  self._telemetry)

    # -- plumbing ---------------------------------------------------------------

    def _log(self, sid: str, line: str) -> None:
        self.report({"kind": "session_log", "session_id": sid,
                     "ts": self.cluster.engine.now_ms, "line": line})

    TERMINAL_KINDS = ("session_done", "session_failed", "session_oom",
                      "session_paused")

    def _report_terminal(self, cmd: dict[str, Any]) -> None:
        cmd = dict(cmd, node_id=self.node_id)
        self.terminal_reports[cmd["session_id"]] = cmd
        self.report(cmd)

    def has_pending_terminal(self, sid: str) -> bool:
        return any(c.get("session_id") == sid and c["kind"] in self.TERMINAL_KINDS
                   for c in self.outbox)

    def report(self, cmd: dict[str, Any]) -> None:
        self.cluster.router(cmd, buffer=True, node=self)

    def crash(self) -> None:
        self.alive = False

    def truth(self) -> dict[str, Any]:
        """Ground-truth capacity and cache view, for scheduler reconciliation."""
        return {
            "available_gpus": sum(1 for s in self.gpu_slots if s is None),
            "available_memory": self.total_memory - sum(
                rs.allocated_memory for rs in self.sessions.values()
            ),
            "cached_datasets": sorted(self.cached_datasets),
            "cached_images": sorted(self.cached_images),
        }

    def binding_snapshot(self) -> list[dict[str, Any]]:
        """What a new primary can learn by asking this node."""
        out = []
        for sid, rs in sorted(self.sessions.items()):
            out.append({
                "session": dict(rs.snapshot),
                "step": rs.step,
                "running": rs.running,
                "serving": rs.serving,
            })
        return out


class Cluster:
    """Owns the node set and routes node reports to the active scheduler."""

    def __init__(self, engine: Engine, config: SimConfig,
                 deliver: Callable[[dict[str, Any]], bool]):
        self.engine = engine
        self.config = config
        self._deliver = deliver  # returns False when no primary is reachable
        self.nodes: dict[str, SimNode] = {}
        self.copy_ms_total = 0  # cumulative dataset-copy virtual time
        self._node_counter = 0

    def spawn_node(self, total_gpus: int, total_memory: int,
                   node_id: Optional[str] = None) -> SimNode:
        if node_id is None:
            self._node_counter += 1
            node_id = f"node-{self._node_counter}"
        if node_id in self.nodes:
            raise StateError(f"duplicate node id {node_id}")
        node = SimNode(node_id, total_gpus, total_memory, self)
        self.nodes[node_id] = node
        delivered = self._deliver({
            "kind": "node_added", "node_id": node_id, "total_gpus": total_gpus,
            "total_memory": total_memory, "ts": self.engine.now_ms,
        })
        if not delivered:
            raise StateError("cannot register node: no active scheduler")
        node.start_loops()
        return node

    def router(self, cmd: dict[str, Any], buffer: bool = True,
               node: Optional[SimNode] = None) -> None:
        if self._deliver(cmd):
            return
        if buffer and node is not None:
            node.outbox.append(cmd)

    def flush_outboxes(self) -> None:
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            pending, node.outbox = node.outbox, []
            for cmd in pending:
                if not self._deliver(cmd):
                    node.outbox.append(cmd)

    def node(self, node_id: str) -> SimNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise StateError(f"unknown node {node_id}")

    def crash_node(self, node_id: str) -> None:
        self.node(node_id).crash()

    def alive_bindings(self) -> dict[str, list[dict[str, Any]]]:
        return {
            node_id: node.binding_snapshot()
            for node_id, node in sorted(self.nodes.items())
            if node.alive
        }
