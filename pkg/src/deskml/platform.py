"""Composition root: engine + cluster + scheduler pair + seeding.

A Platform is one fully wired deployment on virtual time. All external entry
points (gateway handlers, demo scripts, tests) funnel through `lock` so the
event engine stays single-threaded.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Any, Optional

from .cluster import Cluster, SimConfig
from .engine import Engine
from .errors import UnavailableError, ValidationError
from .eventlog import EventLog, Record, write_snapshot
from .failover import Network, ROLE_PRIMARY, SchedulerNode
from .leaderboard import LeaderboardCommands
from .notify import FileSink, MemorySink, Notifier, WebhookSink
from .plane import PlaneCore
from .registry import RegistryCommands
from .scheduling import SchedulerCommands
from .sessions import SessionCommands
from .sweeps import SweepCommands
from .telemetry import TelemetryCommands
from .types import GIB, SessionState


class ControlPlane(SchedulerCommands, RegistryCommands, SessionCommands,
                   LeaderboardCommands, SweepCommands, TelemetryCommands,
                   PlaneCore):
    """Full command surface over one event-sourced state."""


ACTIVE_SESSION_STATES = {
    SessionState.QUEUED, SessionState.PREPARING, SessionState.RUNNING,
}


class Platform:
    def __init__(self, scenario: Optional[dict[str, Any]] = None,
                 persist_dir: Optional[str] = None,
                 notification_sinks: Optional[list] = None,
                 snapshot_every: int = 0):
        scenario = scenario or {}
        self.config = SimConfig(**scenario.get("sim", {}))
        self.engine = Engine()
        self.network = Network(self.engine)
        self.lock = threading.RLock()
        self.memory_sink = MemorySink()
        sinks = [self.memory_sink] + list(notification_sinks or [])
        if scenario.get("notify_file"):
            sinks.append(FileSink(scenario["notify_file"]))
        if scenario.get("notify_webhook"):
            sinks.append(WebhookSink(scenario["notify_webhook"]))
        notifier = Notifier(sinks)
        templates = scenario.get("workloads", {})

        self.persist_dir = Path(persist_dir) if persist_dir else None
        self.snapshot_every = snapshot_every
        log_a = EventLog(self.persist_dir / "events.log" if self.persist_dir else None)
        plane_a = ControlPlane("sched-a", log_a, self.engine.clock, self.config,
                               notifier=notifier, templates=templates)
        plane_b = ControlPlane("sched-b", EventLog(), self.engine.clock, self.config,
                               notifier=Notifier(), templates=templates)
        self.cluster = Cluster(self.engine, self.config, deliver=self._deliver)
        plane_a.cluster = self.cluster
        plane_b.cluster = self.cluster

        self.sched_a = SchedulerNode("sched-a", plane_a, self.engine, self.network,
                                     self.config, acting_cb=self._note_acting)
        self.sched_b = SchedulerNode("sched-b", plane_b, self.engine, self.network,
                                     self.config, acting_cb=self._note_acting)
        self.sched_a.peer = self.sched_b
        self.sched_b.peer = self.sched_a
        self.acting: dict[int, set[str]] = {}
        self.promotions: list[dict[str, Any]] = []
        for node in (self.sched_a, self.sched_b):
            node.promotion_hooks.append(self._on_promotion)

        self.sched_a.start_as_primary()
        self.sched_b.start_as_secondary()
        self._seed(scenario)

    # -- wiring -----------------------------------------------------------------

    def _deliver(self, cmd: dict[str, Any]) -> bool:
        node = self.active_node()
        if node is None:
            return False
        node.plane.handle_report(cmd)
        return True

    def _note_acting(self, epoch: int, name: str, record: Record) -> None:
        self.acting.setdefault(epoch, set()).add(name)
        if (self.snapshot_every and self.persist_dir
                and record.seq % self.snapshot_every == 0):
            node = self.active_node()
            if node is not None:
                write_snapshot(self.persist_dir / f"snapshot-{record.seq}.json",
                               node.plane.state.snapshot(), record.seq)

    def _on_promotion(self, node: SchedulerNode) -> None:
        self.promotions.append({
            "epoch": node.epoch,
            "leader": node.name,
            "ts": self.engine.now_ms,
            "replica_records": list(node.plane.log.records()),
            "state_snapshot": node.plane.state.snapshot(),
        })

    def active_node(self) -> Optional[SchedulerNode]:
        live = [n for n in (self.sched_a, self.sched_b)
                if n.alive and n.role == ROLE_PRIMARY]
        if not live:
            return None
        return max(live, key=lambda n: n.epoch)

    @property
    def plane(self) -> ControlPlane:
        node = self.active_node()
        if node is None:
            raise UnavailableError("no active primary scheduler")
        return node.plane

    def records(self) -> list[Record]:
        return self.plane.log.records()

    # -- seeding -----------------------------------------------------------------

    def _seed(self, scenario: dict[str, Any]) -> None:
        plane = self.plane
        for u in scenario.get("users", []):
            plane.create_user(None, u["user_id"], role=u.get("role", "user"),
                              credits=u.get("credits", 0),
                              teams=u.get("teams", []))
            if u.get("token"):
                plane.add_token(None, u["token"], u["user_id"])
        for d in scenario.get("datasets", []):
            size = d.get("size") or int(d["size_gb"] * GIB)
            plane.push_dataset(d["owner"], d["dataset_id"], size,
                               team=d.get("team"),
                               metric_name=d.get("metric_name", "accuracy"),
                               metric_order=d.get("metric_order", "desc"))
        for n in scenario.get("nodes", []):
            memory = n.get("memory") or int(n.get("memory_gb", 256) * GIB)
            self.cluster.spawn_node(n["gpus"], memory, node_id=n.get("node_id"))
        for f in scenario.get("faults", []):
            self._schedule_fault(f)

    def _schedule_fault(self, fault: dict[str, Any]) -> None:
        at = fault["at_ms"]
        kind = fault["kind"]
        target = fault["target"]
        duration = fault.get("duration_ms", 0)
        self.engine.at(at, lambda: self.inject_fault(target, kind, duration))

    # -- fault injection -----------------------------------------------------------

    def inject_fault(self, target: str, kind: str, duration_ms: int = 0) -> None:
        if kind not in ("crash", "network-delay"):
            raise ValidationError(f"unknown fault kind {kind!r}")
        if target == "scheduler-primary":
            node = self.active_node()
            if node is None:
                return
            if kind == "crash":
                node.crash()
            else:
                self.network.hold(node.name, duration_ms)
                if node.peer is not None:
                    self.network.hold(node.peer.name, duration_ms)
        else:
            if kind == "crash":
                self.cluster.crash_node(target)
            else:
                self.network.hold(target, duration_ms)

    # -- time --------------------------------------------------------------------

    def advance(self, ms: int) -> None:
        self.engine.advance(ms)

    def run_until_quiet(self, max_ms: int = 3_600_000) -> int:
        """Advance tick by tick until no session is queued/preparing/running
        and every sweep has finished. Returns virtual ms consumed."""
        start = self.engine.now_ms
        deadline = start + max_ms
        while self.engine.now_ms < deadline:
            if self._quiet():
                return self.engine.now_ms - start
            self.engine.advance(self.config.tick_interval_ms)
        raise TimeoutError(f"platform still busy after {max_ms} virtual ms")

    def _quiet(self) -> bool:
        node = self.active_node()
        if node is None:
            return False
        state = node.plane.state
        busy = any(s.state in ACTIVE_SESSION_STATES for s in state.sessions.values())
        sweeps_busy = any(w.status.value == "running" for w in state.sweeps.values())
        return not busy and not sweeps_busy

    # -- convenience --------------------------------------------------------------

    @property
    def notifications(self):
        return self.plane.state.notifications

    def write_snapshot(self, path) -> None:
        plane = self.plane
        write_snapshot(Path(path), plane.state.snapshot(), plane.log.max_seq)
