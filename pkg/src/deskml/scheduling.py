"""Admission, the FIFO-with-backfill queue, and the scheduler tick."""

from __future__ import annotations

from typing import Optional

from .placement import place
from .types import (
    AdmissionDecision,
    BOUND_STATES,
    NotifyKind,
    RejectReason,
    ResourceRequest,
    SessionState,
    UserAccount,
)


class SchedulerCommands:
    """Mixed into the control plane; assumes PlaneCore's attributes."""

    def admit(self, user: UserAccount, request: ResourceRequest) -> AdmissionDecision:
        """Pure admission check. Permission outranks credit outranks feasibility,
        so a rejection never leaks what it should not."""
        if not self.dataset_visible(user, request.dataset_id):
            return AdmissionDecision.reject(RejectReason.PERMISSION_DENIED)
        if user.credit_balance <= 0:
            return AdmissionDecision.reject(RejectReason.CREDIT_EXHAUSTED)
        if not any(
            n.total_gpus >= request.gpus and n.total_memory >= request.memory
            for n in self.state.nodes.values()
        ):
            return AdmissionDecision.reject(RejectReason.INFEASIBLE)
        return AdmissionDecision.accept(len(self.state.queue) + 1)

    # -- queue ------------------------------------------------------------

    def drain_queue(self) -> list[tuple[str, str]]:
        """Place queued tickets in FIFO order with backfill: a ticket that
        does not fit is skipped but keeps its position."""
        placed = []
        for sid in list(self.state.queue):
            sess = self.state.sessions[sid]
            node_id = self._placement_choice(sess.resources)
            if node_id is None:
                continue
            if self.cluster is not None and not self.cluster.node(node_id).alive:
                # node died since the last liveness sweep; ticket retries next tick
                continue
            self._bind_session(sid, node_id)
            placed.append((sid, node_id))
        return placed

    def _placement_choice(self, request: ResourceRequest) -> Optional[str]:
        policy = getattr(self.config, "placement_policy", "defrag")
        nodes = [n for n in self.state.nodes.values() if n.alive]
        if policy == "random":
            from . import rng
            from .placement import feasible

            candidates = sorted(n.node_id for n in nodes if feasible(n, request))
            if not candidates:
                return None
            self._random_draws = getattr(self, "_random_draws", 0) + 1
            return rng.choice(candidates, "placement", self.config.seed, self._random_draws)
        return place(request, nodes)

    def _bind_session(self, sid: str, node_id: str) -> None:
        sess = self.state.sessions[sid]
        self.record("session.bound", sid, {"session_id": sid, "node_id": node_id})
        self.record("session.log", sid, {
            "session_id": sid, "ts": self.now(),
            "line": f"scheduled on {node_id}",
        })
        if self.cluster is not None:
            dataset = self.state.datasets[sess.dataset_id]
            self.cluster.node(node_id).start_session(
                self._session_snapshot(sess), dataset.size
            )

    def _session_snapshot(self, sess) -> dict:
        return {
            "session_id": sess.session_id, "owner": sess.owner, "team": sess.team,
            "dataset_id": sess.dataset_id, "image_id": sess.image_id,
            "config": dict(sess.config), "gpus": sess.resources.gpus,
            "memory": sess.resources.memory, "seed": sess.seed,
            "created_at": sess.created_at, "parent": sess.parent,
            "profile": dict(sess.profile), "start_step": sess.start_step,
            "sweep_id": sess.sweep_id, "command": sess.command,
        }

    # -- tick -------------------------------------------------------------

    def tick(self) -> None:
        self._reap_dead_nodes()
        self._charge_tick()
        self.drain_queue()

    def _reap_dead_nodes(self) -> None:
        now = self.now()
        for node_id in sorted(self.state.nodes):
            node = self.state.nodes[node_id]
            if not node.alive:
                continue
            if now - node.last_heartbeat <= self.config.node_timeout_ms:
                continue
            self.record("node.dead", node_id, {"node_id": node_id})
            victims = sorted(
                s.session_id for s in self.state.sessions.values()
                if s.node_id == node_id and s.state in BOUND_STATES
            )
            for sid in victims:
                sess = self.state.sessions[sid]
                if sess.state == SessionState.PREPARING:
                    # copy aborted; ticket goes back to the front of the queue
                    self.record("session.requeued", sid, {
                        "session_id": sid, "start_step": sess.start_step,
                        "ts": now, "front": True,
                    })
                else:
                    self.record("session.terminal", sid, {
                        "session_id": sid, "state": SessionState.FAILED.value,
                        "ts": now, "reason": f"node {node_id} died",
                    })
                    self.notify(sess.owner, sid, NotifyKind.NODE_DEAD,
                                f"node {node_id} died while hosting this session")

    def _charge_tick(self) -> None:
        usage: dict[str, int] = {}
        for sess in self.state.sessions.values():
            if sess.state in BOUND_STATES and sess.resources.gpus > 0:
                usage[sess.owner] = (usage.get(sess.owner, 0)
                                     + sess.resources.gpus * self.config.tick_interval_ms)
        for user_id in sorted(usage):
            self.charge_usage(user_id, usage[user_id])

    # -- release helpers ----------------------------------------------------

    def safe_stop(self, sid: str, reason: str) -> None:
        """Checkpoint (when the workload has progressed) and stop a bound session.
        Stopping an already released session is an idempotent no-op."""
        sess = self.state.sessions[sid]
        if sess.terminal:
            import logging

            logging.getLogger(__name__).warning(
                "safe_stop of %s ignored: already %s", sid, sess.state.value
            )
            return
        info = None
        if self.cluster is not None:
            info = self.cluster_stop(sid, checkpoint=True)
        if info is not None:
            self.add_checkpoint(sid, info["step"], info["digest"], self.now())
        self.record("session.terminal", sid, {
            "session_id": sid, "state": SessionState.STOPPED.value,
            "ts": self.now(), "reason": reason,
        })

    def cluster_stop(self, sid: str, checkpoint: bool):
        sess = self.state.sessions[sid]
        if sess.node_id is None:
            return None
        return self.cluster.node(sess.node_id).stop_session(sid, checkpoint=checkpoint)
