"""Event-sourced control-plane state.

ControlState is mutated exclusively through apply(record); commands validate,
append to the log, then apply. Replaying the same records therefore rebuilds
the exact same state, which is what replication and failover lean on. The
reducer re-checks type invariants on every mutation and refuses records that
would break them.
"""

from __future__ import annotations

from typing import Any, Optional

from .errors import StateError, ValidationError
from .eventlog import Record
from .types import (
    BOUND_STATES,
    Checkpoint,
    Dataset,
    Liveness,
    MetricEvent,
    MetricOrder,
    NodeDescriptor,
    Notification,
    NotifyKind,
    ResourceRequest,
    Role,
    Session,
    SessionState,
    Submission,
    SweepState,
    SweepStatus,
    SweepStrategy,
    TelemetrySample,
    UserAccount,
    can_transition,
)


class ControlState:
    def __init__(self):
        self.users: dict[str, UserAccount] = {}
        self.tokens: dict[str, str] = {}
        self.datasets: dict[str, Dataset] = {}
        self.nodes: dict[str, NodeDescriptor] = {}
        self.sessions: dict[str, Session] = {}
        self.queue: list[str] = []
        self.session_seq: dict[str, int] = {}       # "owner/dataset" -> last seq
        self.metrics: dict[str, list[MetricEvent]] = {}
        self.checkpoints: dict[str, list[Checkpoint]] = {}
        self.submissions: dict[str, list[Submission]] = {}
        self.notifications: list[Notification] = []
        self.session_logs: dict[str, list[dict[str, Any]]] = {}
        self.telemetry: list[TelemetrySample] = []
        self.sweeps: dict[str, SweepState] = {}
        self.epoch: int = 0
        self.leader: str = ""
        self.submission_count: int = 0
        self.sweep_count: int = 0
        self.last_applied_seq: int = 0
        # derived indexes, rebuilt as records apply
        self._metric_keys: dict[str, set[tuple[int, str]]] = {}
        self._telemetry_last_ts: dict[tuple[str, int], int] = {}

    # -- helpers -----------------------------------------------------------

    def node(self, node_id: str) -> NodeDescriptor:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise StateError(f"unknown node {node_id}")

    def session(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise StateError(f"unknown session {session_id}")

    def _release(self, sess: Session) -> None:
        node = self.node(sess.node_id)
        node.available_gpus += sess.resources.gpus
        node.available_memory += sess.resources.memory
        node.validate()

    def _bind(self, sess: Session, node_id: str) -> None:
        node = self.node(node_id)
        node.available_gpus -= sess.resources.gpus
        node.available_memory -= sess.resources.memory
        node.validate()  # catches oversubscription at the mutation site

    # -- reducer -----------------------------------------------------------

    def apply(self, record: Record) -> None:
        if record.seq <= self.last_applied_seq:
            raise StateError(
                f"record {record.seq} already applied (at {self.last_applied_seq})"
            )
        handler = getattr(self, "_on_" + record.kind.replace(".", "_"), None)
        if handler is None:
            raise StateError(f"unknown record kind {record.kind!r}")
        handler(record.payload, record.ts)
        self.last_applied_seq = record.seq

    def apply_all(self, records) -> None:
        for record in records:
            self.apply(record)

    # users / tokens

    def _on_user_created(self, p, ts):
        if p["user_id"] in self.users:
            raise StateError(f"user {p['user_id']} already exists")
        self.users[p["user_id"]] = UserAccount(
            user_id=p["user_id"],
            role=Role(p["role"]),
            credit_balance=p["credits"],
            teams=set(p.get("teams", [])),
        )

    def _on_user_credits(self, p, ts):
        user = self.users[p["user_id"]]
        user.credit_balance = p["balance"]
        user.validate()

    def _on_user_role(self, p, ts):
        self.users[p["user_id"]].role = Role(p["role"])

    def _on_user_teams(self, p, ts):
        self.users[p["user_id"]].teams = set(p["teams"])

    def _on_user_charged(self, p, ts):
        user = self.users[p["user_id"]]
        user.credit_balance = p["balance"]
        user.gpu_ms_consumed = p["gpu_ms_total"]
        user.validate()

    def _on_user_exhausted(self, p, ts):
        # marker record; the accompanying safe-stops carry the state changes
        pass

    def _on_token_added(self, p, ts):
        self.tokens[p["token"]] = p["user_id"]

    # datasets

    def _on_dataset_pushed(self, p, ts):
        if p["dataset_id"] in self.datasets:
            raise StateError(f"dataset {p['dataset_id']} already exists")
        self.datasets[p["dataset_id"]] = Dataset(
            dataset_id=p["dataset_id"],
            owner=p["owner"],
            size=p["size"],
            created_at=ts,
            last_access=ts,
            team=p.get("team"),
            metric_name=p.get("metric_name", "accuracy"),
            metric_order=MetricOrder(p.get("metric_order", "desc")),
        )

    def _on_dataset_touched(self, p, ts):
        self.datasets[p["dataset_id"]].last_access = p["ts"]

    # nodes

    def _on_node_added(self, p, ts):
        if p["node_id"] in self.nodes:
            raise StateError(f"node {p['node_id']} already registered")
        self.nodes[p["node_id"]] = NodeDescriptor(
            node_id=p["node_id"],
            total_gpus=p["total_gpus"],
            available_gpus=p["total_gpus"],
            total_memory=p["total_memory"],
            available_memory=p["total_memory"],
            last_heartbeat=ts,
        )

    def _on_node_hb(self, p, ts):
        self.node(p["node_id"]).last_heartbeat = p["ts"]

    def _on_node_dead(self, p, ts):
        self.node(p["node_id"]).liveness = Liveness.DEAD

    def _on_node_cache_dataset(self, p, ts):
        self.node(p["node_id"]).cached_datasets.add(p["dataset_id"])

    def _on_node_cache_image(self, p, ts):
        self.node(p["node_id"]).cached_images.add(p["image_id"])

    def _on_node_cache_evicted(self, p, ts):
        self.node(p["node_id"]).cached_datasets.discard(p["dataset_id"])

    def _on_node_synced(self, p, ts):
        node = self.node(p["node_id"])
        node.available_gpus = p["available_gpus"]
        node.available_memory = p["available_memory"]
        node.cached_datasets = set(p["cached_datasets"])
        node.cached_images = set(p["cached_images"])
        node.last_heartbeat = p["last_heartbeat"]
        node.validate()

    # sessions

    def _session_from_payload(self, p, state: SessionState) -> Session:
        return Session(
            session_id=p["session_id"],
            owner=p["owner"],
            team=p.get("team"),
            dataset_id=p["dataset_id"],
            image_id=p["image_id"],
            config=dict(p["config"]),
            resources=ResourceRequest(
                gpus=p["gpus"], memory=p["memory"],
                dataset_id=p["dataset_id"], image_id=p["image_id"],
            ),
            state=state,
            node_id=p.get("node_id"),
            seed=p["seed"],
            created_at=p["created_at"],
            parent=p.get("parent"),
            profile=dict(p.get("profile", {})),
            start_step=p.get("start_step", 0),
            sweep_id=p.get("sweep_id"),
            command=p.get("command", ""),
        )

    def _register_session(self, sess: Session) -> None:
        if sess.session_id in self.sessions:
            raise StateError(f"session {sess.session_id} already exists")
        if sess.parent is not None:
            ancestor = sess.parent
            hops = 0
            while ancestor is not None:
                if ancestor == sess.session_id:
                    raise ValidationError("fork lineage would form a cycle")
                ancestor = (
                    self.sessions[ancestor].parent if ancestor in self.sessions else None
                )
                hops += 1
                if hops > len(self.sessions) + 1:
                    raise ValidationError("fork lineage walk did not terminate")
        self.sessions[sess.session_id] = sess
        owner_ds = f"{sess.owner}/{sess.dataset_id}"
        seq = int(sess.session_id.rsplit("/", 1)[1])
        self.session_seq[owner_ds] = max(self.session_seq.get(owner_ds, 0), seq)
        self.metrics.setdefault(sess.session_id, [])
        self._metric_keys.setdefault(sess.session_id, set())
        self.checkpoints.setdefault(sess.session_id, [])
        self.session_logs.setdefault(sess.session_id, [])

    def _on_session_created(self, p, ts):
        sess = self._session_from_payload(p, SessionState.QUEUED)
        self._register_session(sess)
        self.queue.append(sess.session_id)

    def _on_session_adopted(self, p, ts):
        """Reconciliation after failover: a node reported a binding the
        replicated log never carried."""
        sess = self._session_from_payload(p, SessionState(p["state"]))
        if sess.session_id in self.sessions:
            raise StateError(f"cannot adopt existing session {sess.session_id}")
        self._register_session(sess)
        if sess.state in BOUND_STATES:
            self._bind(sess, sess.node_id)

    def _on_session_bound(self, p, ts):
        sess = self.session(p["session_id"])
        if sess.state != SessionState.QUEUED:
            raise StateError(
                f"bind of {sess.session_id} in state {sess.state.value}"
            )
        self.queue.remove(sess.session_id)
        sess.state = SessionState.PREPARING
        sess.node_id = p["node_id"]
        self._bind(sess, p["node_id"])
        sess.validate()

    def _on_session_running(self, p, ts):
        sess = self.session(p["session_id"])
        if not can_transition(sess.state, SessionState.RUNNING):
            raise StateError(
                f"{sess.session_id}: {sess.state.value} -> running is not legal"
            )
        sess.state = SessionState.RUNNING
        sess.started_at = p["ts"]
        sess.validate()

    def _on_session_terminal(self, p, ts):
        sess = self.session(p["session_id"])
        new = SessionState(p["state"])
        if not can_transition(sess.state, new):
            raise StateError(
                f"{sess.session_id}: {sess.state.value} -> {new.value} is not legal"
            )
        if sess.state in BOUND_STATES:
            self._release(sess)
        elif sess.state == SessionState.QUEUED:
            self.queue.remove(sess.session_id)
        sess.state = new
        sess.node_id = None
        sess.finished_at = p["ts"]
        sess.serving_checkpoint = None
        sess.validate()

    def _on_session_requeued(self, p, ts):
        sess = self.session(p["session_id"])
        if not can_transition(sess.state, SessionState.QUEUED):
            raise StateError(
                f"{sess.session_id}: {sess.state.value} -> queued is not legal"
            )
        if sess.state in BOUND_STATES:
            self._release(sess)  # interrupted mid-prepare
        start_step = p["start_step"]
        sess.state = SessionState.QUEUED
        sess.node_id = None
        sess.start_step = start_step
        sess.finished_at = None
        sess.validate()
        if p.get("front"):
            self.queue.insert(0, sess.session_id)
        else:
            self.queue.append(sess.session_id)
        # the continuation recomputes everything past the checkpoint, so the
        # (session, step, name) uniqueness guarantee needs a rollback here
        kept = [m for m in self.metrics[sess.session_id] if m.step <= start_step]
        self.metrics[sess.session_id] = kept
        self._metric_keys[sess.session_id] = {(m.step, m.name) for m in kept}
        self.checkpoints[sess.session_id] = [
            c for c in self.checkpoints[sess.session_id] if c.step <= start_step
        ]

    def _on_session_serving(self, p, ts):
        sess = self.session(p["session_id"])
        if sess.state != SessionState.DONE:
            raise StateError(
                f"{sess.session_id}: serving is entered only from done "
                f"(currently {sess.state.value})"
            )
        sess.state = SessionState.SERVING
        sess.node_id = p["node_id"]
        sess.serving_checkpoint = p["checkpoint_id"]
        self._bind(sess, p["node_id"])
        sess.validate()

    def _on_session_removed(self, p, ts):
        sid = p["session_id"]
        sess = self.session(sid)
        if not sess.terminal:
            raise StateError(f"rm of non-terminal session {sid}")
        del self.sessions[sid]
        self.metrics.pop(sid, None)
        self._metric_keys.pop(sid, None)
        self.checkpoints.pop(sid, None)
        self.session_logs.pop(sid, None)
        # submissions intentionally survive: leaderboards are historical

    def _on_session_memo(self, p, ts):
        self.session(p["session_id"]).memo = p["text"]

    def _on_session_config(self, p, ts):
        sess = self.session(p["session_id"])
        sess.config = dict(p["config"])

    def _on_session_log(self, p, ts):
        self.session_logs[p["session_id"]].append({"ts": p["ts"], "line": p["line"]})

    # observability

    def _on_metric(self, p, ts):
        sid = p["session_id"]
        self.session(sid)
        key = (p["step"], p["name"])
        keys = self._metric_keys.setdefault(sid, set())
        if key in keys:
            raise StateError(f"duplicate metric {key} for {sid}")
        keys.add(key)
        self.metrics.setdefault(sid, []).append(
            MetricEvent(session_id=sid, step=p["step"], name=p["name"],
                        value=p["value"], ts=p["ts"])
        )

    def _on_telemetry(self, p, ts):
        node_id = p["node_id"]
        self.node(node_id)
        for s in p["samples"]:
            key = (node_id, s["gpu"])
            last = self._telemetry_last_ts.get(key, -1)
            if p["ts"] < last:
                raise StateError(
                    f"telemetry for {key} went backwards ({p['ts']} < {last})"
                )
            self._telemetry_last_ts[key] = p["ts"]
            self.telemetry.append(
                TelemetrySample(node_id=node_id, gpu_index=s["gpu"],
                                utilization_pct=s["util"], memory_used=s["mem"],
                                session_id=s.get("session_id"), ts=p["ts"])
            )

    def _on_checkpoint(self, p, ts):
        sid = p["session_id"]
        self.session(sid)
        self.checkpoints.setdefault(sid, []).append(
            Checkpoint(checkpoint_id=p["checkpoint_id"], session_id=sid,
                       step=p["step"], digest=p["digest"], created_at=p["ts"])
        )

    def _on_submission(self, p, ts):
        sub = Submission(
            submission_id=p["submission_id"], dataset_id=p["dataset_id"],
            user_id=p["user_id"], session_id=p["session_id"],
            checkpoint_id=p["checkpoint_id"], metric_name=p["metric_name"],
            order=MetricOrder(p["order"]), score=p["score"], ts=p["ts"],
        )
        self.submissions.setdefault(sub.dataset_id, []).append(sub)
        self.submission_count += 1

    def _on_notification(self, p, ts):
        self.notifications.append(
            Notification(recipient=p["recipient"], session_id=p["session_id"],
                         kind=NotifyKind(p["kind"]), detail=p["detail"], ts=p["ts"])
        )

    # sweeps

    def _on_sweep_created(self, p, ts):
        self.sweeps[p["sweep_id"]] = SweepState(
            sweep_id=p["sweep_id"], owner=p["owner"],
            strategy=SweepStrategy(p["strategy"]), dataset_id=p["dataset_id"],
            members=[], spec_payload=dict(p.get("spec", {})),
        )
        self.sweep_count += 1

    def _on_sweep_member(self, p, ts):
        self.sweeps[p["sweep_id"]].members.append(p["session_id"])

    def _on_sweep_generation(self, p, ts):
        self.sweeps[p["sweep_id"]].generation = p["generation"]

    def _on_sweep_done(self, p, ts):
        sweep = self.sweeps[p["sweep_id"]]
        sweep.status = SweepStatus.DONE

    # leadership

    def _on_epoch(self, p, ts):
        if p["epoch"] <= self.epoch:
            raise StateError(f"epoch must increase ({p['epoch']} <= {self.epoch})")
        self.epoch = p["epoch"]
        self.leader = p["leader"]

    # -- snapshots -----------------------------------------------------------

    def snapshot(self) -> dict[str, Any]:
        """Canonical, JSON-able dump used for equality checks and snapshot files."""
        return {
            "users": {
                u.user_id: {
                    "role": u.role.value, "credits": u.credit_balance,
                    "teams": sorted(u.teams), "gpu_ms": u.gpu_ms_consumed,
                }
                for u in self.users.values()
            },
            "tokens": dict(self.tokens),
            "datasets": {
                d.dataset_id: {
                    "owner": d.owner, "size": d.size, "team": d.team,
                    "created_at": d.created_at, "last_access": d.last_access,
                    "metric_name": d.metric_name, "metric_order": d.metric_order.value,
                }
                for d in self.datasets.values()
            },
            "nodes": {
                n.node_id: {
                    "total_gpus": n.total_gpus, "available_gpus": n.available_gpus,
                    "total_memory": n.total_memory, "available_memory": n.available_memory,
                    "cached_datasets": sorted(n.cached_datasets),
                    "cached_images": sorted(n.cached_images),
                    "liveness": n.liveness.value, "last_heartbeat": n.last_heartbeat,
                }
                for n in self.nodes.values()
            },
            "sessions": {
                s.session_id: {
                    "owner": s.owner, "team": s.team, "dataset_id": s.dataset_id,
                    "image_id": s.image_id, "config": s.config,
                    "gpus": s.resources.gpus, "memory": s.resources.memory,
                    "state": s.state.value, "node_id": s.node_id, "seed": s.seed,
                    "parent": s.parent, "created_at": s.created_at,
                    "started_at": s.started_at, "finished_at": s.finished_at,
                    "start_step": s.start_step, "sweep_id": s.sweep_id,
                    "memo": s.memo, "command": s.command,
                    "serving_checkpoint": s.serving_checkpoint,
                    "profile": s.profile,
                }
                for s in self.sessions.values()
            },
            "queue": list(self.queue),
            "metrics": {
                sid: [[m.step, m.name, m.value, m.ts] for m in events]
                for sid, events in self.metrics.items()
            },
            "checkpoints": {
                sid: [[c.checkpoint_id, c.step, c.digest, c.created_at] for c in cks]
                for sid, cks in self.checkpoints.items()
            },
            "submissions": {
                ds: [
                    [b.submission_id, b.user_id, b.session_id, b.checkpoint_id,
                     b.metric_name, b.order.value, b.score, b.ts]
                    for b in subs
                ]
                for ds, subs in self.submissions.items()
            },
            "notifications": [
                [n.recipient, n.session_id, n.kind.value, n.detail, n.ts]
                for n in self.notifications
            ],
            "session_logs": {sid: list(lines) for sid, lines in self.session_logs.items()},
            "telemetry": [
                [t.node_id, t.gpu_index, t.utilization_pct, t.memory_used,
                 t.session_id, t.ts]
                for t in self.telemetry
            ],
            "sweeps": {
                w.sweep_id: {
                    "owner": w.owner, "strategy": w.strategy.value,
                    "dataset_id": w.dataset_id, "members": list(w.members),
                    "status": w.status.value, "generation": w.generation,
                    "spec": w.spec_payload,
                }
                for w in self.sweeps.values()
            },
            "epoch": self.epoch,
            "leader": self.leader,
            "counters": {
                "submissions": self.submission_count, "sweeps": self.sweep_count,
            },
        }

    def session_table(self) -> dict[str, dict[str, Any]]:
        return self.snapshot()["sessions"]


def rebuild(records) -> ControlState:
    state = ControlState()
    state.apply_all(records)
    return state
