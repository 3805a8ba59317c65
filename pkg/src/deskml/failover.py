"""Primary/secondary scheduler pair.

The primary appends to the authoritative log; heartbeats carry its max
sequence and the secondary pulls any gap by range, applying records to its
own passive plane (warm standby). When heartbeats stop for longer than the
failover timeout, the secondary promotes itself into a new epoch, reconciles
against the live cluster, flushes buffered node reports, and resumes
draining. A deposed primary demotes itself the moment it sees a higher
epoch, then resyncs from scratch.
"""

from __future__ import annotations

import logging
from typing import Any, Callable, Optional

from .engine import Engine, EventHandle
from .errors import ValidationError
from .eventlog import Record
from .types import SessionState

log = logging.getLogger(__name__)

ROLE_PRIMARY = "primary"
ROLE_SECONDARY = "secondary"


class Network:
    """Message fabric with injectable hold-downs per recipient."""

    def __init__(self, engine: Engine):
        self.engine = engine
        self._hold_until: dict[str, int] = {}

    def hold(self, target: str, duration_ms: int) -> None:
        until = self.engine.now_ms + duration_ms
        self._hold_until[target] = max(self._hold_until.get(target, 0), until)

    def send(self, target: str, fn: Callable[[], None]) -> None:
        deliver_at = max(self.engine.now_ms, self._hold_until.get(target, 0))
        self.engine.at(deliver_at, fn)


class SchedulerNode:
    def __init__(self, name: str, plane, engine: Engine, network: Network,
                 config, acting_cb: Optional[Callable[[int, str, Record], None]] = None):
        self.name = name
        self.plane = plane
        self.engine = engine
        self.network = network
        self.config = config
        self.peer: Optional["SchedulerNode"] = None
        self.role = ROLE_SECONDARY
        self.epoch = 0
        self.alive = True
        self.last_primary_hb = 0
        self.promotion_hooks: list[Callable[["SchedulerNode"], None]] = []
        self._fo_handle: Optional[EventHandle] = None
        self._acting_cb = acting_cb
        plane.on_append = self._on_append

    # -- lifecycle -------------------------------------------------------------

    def start_as_primary(self) -> None:
        self.role = ROLE_PRIMARY
        self.epoch = 1
        self.plane.active = True
        self.plane.record("epoch", "scheduler", {"epoch": 1, "leader": self.name})
        self._schedule_loops()

    def start_as_secondary(self) -> None:
        self.role = ROLE_SECONDARY
        self.plane.active = False
        self.epoch = 1
        self.last_primary_hb = self.engine.now_ms
        self._arm_failover_check()

    def crash(self) -> None:
        self.alive = False
        self.plane.active = False

    def _on_append(self, record: Record) -> None:
        if self._acting_cb is not None:
            self._acting_cb(self.epoch, self.name, record)
        if (self.config.sync_replication and self.peer is not None
                and self.peer.alive and self.peer.role == ROLE_SECONDARY):
            self.peer.plane.absorb([record])
            self.peer.last_primary_hb = self.engine.now_ms
            self.peer._arm_failover_check()

    # -- periodic loops -----------------------------------------------------------

    def _schedule_loops(self) -> None:
        self.engine.after(self.config.tick_interval_ms, self._tick)
        self.engine.after(self.config.heartbeat_interval_ms, self._heartbeat)

    def _tick(self) -> None:
        if not (self.alive and self.role == ROLE_PRIMARY):
            return
        self.plane.tick()
        self.engine.after(self.config.tick_interval_ms, self._tick)

    def _heartbeat(self) -> None:
        if not (self.alive and self.role == ROLE_PRIMARY):
            return
        peer = self.peer
        if peer is not None:
            msg = {"epoch": self.epoch, "role": self.role,
                   "max_seq": self.plane.log.max_seq, "ts": self.engine.now_ms}
            sender = self
            self.network.send(peer.name, lambda: peer.on_heartbeat(sender, msg))
        self.engine.after(self.config.heartbeat_interval_ms, self._heartbeat)

    # -- heartbeat / replication protocol ----------------------------------------

    def on_heartbeat(self, sender: "SchedulerNode", msg: dict[str, Any]) -> None:
        if not self.alive:
            return
        if msg["epoch"] < self.epoch:
            me = self
            self.network.send(sender.name,
                              lambda: sender.on_epoch_notice(me.epoch))
            return
        if msg["epoch"] > self.epoch:
            if self.role == ROLE_PRIMARY:
                self._demote(msg["epoch"])
            else:
                self.epoch = msg["epoch"]
        self.last_primary_hb = self.engine.now_ms
        self._arm_failover_check()
        mine = self.plane.log.max_seq
        if msg["max_seq"] > mine and self.role == ROLE_SECONDARY:
            me = self
            epoch_at_req = self.epoch
            self.network.send(
                sender.name,
                lambda: sender.on_pull(me, mine + 1, msg["max_seq"], epoch_at_req),
            )

    def on_pull(self, requester: "SchedulerNode", from_seq: int, to_seq: int,
                req_epoch: int) -> None:
        if not self.alive:
            return
        records = self.plane.log.records(from_seq, to_seq)
        self.network.send(requester.name,
                          lambda: requester.on_pull_reply(records, req_epoch))

    def on_pull_reply(self, records: list[Record], req_epoch: int) -> None:
        if not self.alive or self.role != ROLE_SECONDARY or req_epoch != self.epoch:
            return
        contiguous = []
        expected = self.plane.log.max_seq + 1
        for rec in records:
            if rec.seq < expected:
                continue
            if rec.seq != expected:
                break  # a gap; the next heartbeat re-pulls the full range
            contiguous.append(rec)
            expected += 1
        if contiguous:
            self.plane.absorb(contiguous)

    def wire_heartbeat(self, msg: dict[str, Any]) -> dict[str, Any]:
        """Synchronous heartbeat ingestion for the HTTP replication surface:
        {epoch, role, max_seq, ts} in, ack (or stale-epoch rejection) out."""
        for field in ("epoch", "role", "max_seq", "ts"):
            if field not in msg:
                raise ValidationError(f"heartbeat missing {field}")
        if msg["epoch"] < self.epoch:
            return {"accepted": False, "epoch": self.epoch,
                    "reason": "stale epoch"}
        self.last_primary_hb = self.engine.now_ms
        self._arm_failover_check()
        mine = self.plane.log.max_seq
        return {
            "accepted": True, "epoch": self.epoch, "max_seq": mine,
            "pull_from": mine + 1 if msg["max_seq"] > mine else None,
            "pull_to": msg["max_seq"] if msg["max_seq"] > mine else None,
        }

    def on_epoch_notice(self, newer_epoch: int) -> None:
        if not self.alive or newer_epoch <= self.epoch:
            return
        if self.role == ROLE_PRIMARY:
            self._demote(newer_epoch)
        else:
            self.epoch = newer_epoch

    # -- failover ------------------------------------------------------------------

    def _arm_failover_check(self) -> None:
        if self._fo_handle is not None:
            self._fo_handle.cancel()
        if self.role != ROLE_SECONDARY:
            return
        self._fo_handle = self.engine.at(
            self.last_primary_hb + self.config.failover_timeout_ms,
            self._failover_check,
        )

    def _failover_check(self) -> None:
        if not self.alive or self.role != ROLE_SECONDARY:
            return
        silence = self.engine.now_ms - self.last_primary_hb
        if silence >= self.config.failover_timeout_ms:
            self.promote()
        else:
            self._arm_failover_check()

    def promote(self) -> None:
        log.info("%s promoting to primary (epoch %d)", self.name, self.epoch + 1)
        self.role = ROLE_PRIMARY
        self.epoch += 1
        self.plane.active = True
        if self._fo_handle is not None:
            self._fo_handle.cancel()
        for hook in self.promotion_hooks:
            hook(self)
        self.plane.record("epoch", "scheduler",
                          {"epoch": self.epoch, "leader": self.name})
        # order matters: adopt lost bindings first so buffered node reports
        # land on known sessions, then flush, then snap node ground truth
        self._adopt_bindings()
        if self.plane.cluster is not None:
            self.plane.cluster.flush_outboxes()
        self._sync_nodes()
        self.plane.drain_queue()
        self._schedule_loops()

    def _adopt_bindings(self) -> None:
        """Fold live cluster truth into the replayed state: adopt bindings the
        replicated log never carried."""
        cluster = self.plane.cluster
        if cluster is None:
            return
        state = self.plane.state
        now = self.plane.now()
        bindings = cluster.alive_bindings()
        for node_id, bound in bindings.items():
            sim = cluster.node(node_id)
            if node_id not in state.nodes:
                self.plane.record("node.added", node_id, {
                    "node_id": node_id, "total_gpus": sim.total_gpus,
                    "total_memory": sim.total_memory,
                })
            self._settle_finished(node_id, {e["session"]["session_id"]
                                            for e in bound})
            for entry in bound:
                snap = entry["session"]
                sid = snap["session_id"]
                if sid not in state.sessions:
                    if entry["serving"]:
                        sval = SessionState.SERVING.value
                    elif entry["running"]:
                        sval = SessionState.RUNNING.value
                    else:
                        sval = SessionState.PREPARING.value
                    self.plane.record("session.adopted", sid, {
                        **snap, "state": sval, "node_id": node_id,
                    })
                else:
                    sess = state.sessions[sid]
                    if sess.state == SessionState.QUEUED:
                        self.plane.record("session.bound", sid, {
                            "session_id": sid, "node_id": node_id,
                        })
                        sess = state.sessions[sid]
                    if (sess.state == SessionState.PREPARING
                            and entry["running"] and not entry["serving"]):
                        # the running transition's record died with the old
                        # primary; the node is the authority here
                        self.plane.record("session.running", sid, {
                            "session_id": sid, "ts": now,
                        })

    def _settle_finished(self, node_id: str, still_present: set[str]) -> None:
        """The replicated log says a session is bound here, the node says it
        already ended, and the ending's record died with the old primary.
        Replay the node's remembered terminal report (unless the report is
        still sitting undelivered in its outbox, in which case the flush will
        settle it)."""
        state = self.plane.state
        sim = self.plane.cluster.node(node_id)
        stranded = sorted(
            s.session_id for s in state.sessions.values()
            if s.node_id == node_id and s.state in
            (SessionState.PREPARING, SessionState.RUNNING, SessionState.SERVING)
            and s.session_id not in still_present
        )
        for sid in stranded:
            if sim.has_pending_terminal(sid):
                continue
            tomb = sim.terminal_reports.get(sid)
            if tomb is None:
                self.plane.record("session.terminal", sid, {
                    "session_id": sid, "state": SessionState.FAILED.value,
                    "ts": self.plane.now(),
                    "reason": "lost during scheduler failover",
                })
                continue
            self.plane.handle_report(tomb)

    def _sync_nodes(self) -> None:
        cluster = self.plane.cluster
        if cluster is None:
            return
        now = self.plane.now()
        for node_id in cluster.alive_bindings():
            truth = cluster.node(node_id).truth()
            self.plane.record("node.synced", node_id, {
                "node_id": node_id, "last_heartbeat": now, **truth,
            })

    def _demote(self, new_epoch: int) -> None:
        log.info("%s demoting (saw epoch %d)", self.name, new_epoch)
        self.role = ROLE_SECONDARY
        self.epoch = new_epoch
        self.plane.active = False
        peer = self.peer
        me = self
        if peer is not None:
            self.network.send(peer.name, lambda: peer.on_full_sync_request(me))
        self.last_primary_hb = self.engine.now_ms
        self._arm_failover_check()

    def on_full_sync_request(self, requester: "SchedulerNode") -> None:
        if not self.alive or self.role != ROLE_PRIMARY:
            return
        records = self.plane.log.records()
        epoch = self.epoch
        self.network.send(requester.name,
                          lambda: requester.on_full_sync(records, epoch))

    def on_full_sync(self, records: list[Record], epoch: int) -> None:
        if not self.alive or self.role != ROLE_SECONDARY or epoch < self.epoch:
            return
        self.plane.reset_from(records)
