"""Control-plane core: the command side of the event-sourced state.

A plane validates a command against current state, appends records, applies
them, and performs origin-time side effects (cluster calls, notifications).
A follower plane is passive: it only absorbs replicated records. Side
effects never run on absorb or replay.
"""

from __future__ import annotations

import logging
from typing import Any, Callable, Optional

from .errors import AuthError, NotFoundError, StateError
from .eventlog import EventLog, Record
from .notify import Notifier
from .state import ControlState
from .types import (
    NotifyKind,
    Role,
    Session,
    SessionState,
    UserAccount,
)

log = logging.getLogger(__name__)


class PlaneCore:
    def __init__(self, name: str, eventlog: EventLog, clock, config,
                 cluster=None, notifier: Optional[Notifier] = None,
                 templates: Optional[dict[str, dict]] = None):
        self.name = name
        self.log = eventlog
        self.state = ControlState()
        self.clock = clock
        self.config = config
        self.cluster = cluster
        self.notifier = notifier or Notifier()
        self.templates = dict(templates or {})
        self.active = False  # acting primary; commands refused otherwise
        self.on_append: Optional[Callable[[Record], None]] = None
        for rec in eventlog.records():
            self.state.apply(rec)

    # -- plumbing -------------------------------------------------------------

    def now(self) -> int:
        return self.clock.now_ms()

    def record(self, kind: str, entity_id: str, payload: dict[str, Any]) -> Record:
        rec = self.log.append(kind, entity_id, self.now(), payload)
        self.state.apply(rec)
        if self.on_append is not None:
            self.on_append(rec)
        return rec

    def absorb(self, records: list[Record]) -> None:
        """Adopt replicated records (follower path, no side effects)."""
        for rec in records:
            if rec.seq <= self.state.last_applied_seq:
                continue
            self.log.append_record(rec)
            self.state.apply(rec)

    def reset_from(self, records: list[Record]) -> None:
        """Throw away local history and rebuild from an authoritative copy
        (a deposed primary resyncing: its tail may have diverged)."""
        self.log.close()
        self.log = EventLog()
        self.state = ControlState()
        for rec in records:
            self.log.append_record(rec)
            self.state.apply(rec)

    def require_user(self, user_id: str) -> UserAccount:
        user = self.state.users.get(user_id)
        if user is None:
            raise NotFoundError(f"unknown user {user_id}")
        return user

    def user_by_token(self, token: str) -> UserAccount:
        user_id = self.state.tokens.get(token)
        if user_id is None:
            raise AuthError("invalid token")
        return self.require_user(user_id)

    def get_session(self, session_id: str) -> Session:
        sess = self.state.sessions.get(session_id)
        if sess is None:
            raise NotFoundError(f"unknown session {session_id}")
        return sess

    def notify(self, recipient: str, session_id: str, kind: NotifyKind, detail: str) -> None:
        ts = self.now()
        self.record("notification", session_id, {
            "recipient": recipient, "session_id": session_id,
            "kind": kind.value, "detail": detail, "ts": ts,
        })
        self.notifier.deliver(self.state.notifications[-1])

    def is_admin(self, user: UserAccount) -> bool:
        return user.role == Role.ADMIN

    def may_view_session(self, user: UserAccount, sess: Session) -> bool:
        if user.user_id == sess.owner or self.is_admin(user):
            return True
        if sess.team is not None and sess.team in user.teams:
            return True
        # sessions are shared with the owner's current teammates, provided
        # the requester may read the dataset at all
        owner = self.state.users.get(sess.owner)
        if owner is None or not owner.teams & user.teams:
            return False
        return self.dataset_visible(user, sess.dataset_id)

    # -- node reports ----------------------------------------------------------

    def handle_report(self, cmd: dict[str, Any]) -> None:
        if not self.active:
            raise StateError("follower plane cannot process reports")
        kind = cmd["kind"]
        handler = getattr(self, "_report_" + kind, None)
        if handler is None:
            raise StateError(f"unknown report kind {kind!r}")
        handler(cmd)

    def _known_session(self, cmd) -> Optional[Session]:
        sess = self.state.sessions.get(cmd["session_id"])
        if sess is None:
            log.warning("dropping %s report for unknown session %s",
                        cmd["kind"], cmd["session_id"])
        return sess

    def _report_node_added(self, cmd):
        self.record("node.added", cmd["node_id"], {
            "node_id": cmd["node_id"], "total_gpus": cmd["total_gpus"],
            "total_memory": cmd["total_memory"],
        })

    def _report_node_hb(self, cmd):
        if cmd["node_id"] in self.state.nodes:
            self.record("node.hb", cmd["node_id"],
                        {"node_id": cmd["node_id"], "ts": cmd["ts"]})

    def _report_telemetry(self, cmd):
        if cmd["node_id"] in self.state.nodes:
            self.record("telemetry", cmd["node_id"], {
                "node_id": cmd["node_id"], "ts": cmd["ts"], "samples": cmd["samples"],
            })

    def _report_cache_dataset(self, cmd):
        self.record("node.cache.dataset", cmd["node_id"], {
            "node_id": cmd["node_id"], "dataset_id": cmd["dataset_id"],
        })

    def _report_cache_image(self, cmd):
        self.record("node.cache.image", cmd["node_id"], {
            "node_id": cmd["node_id"], "image_id": cmd["image_id"],
        })

    def _report_cache_evicted(self, cmd):
        self.record("node.cache.evicted", cmd["node_id"], {
            "node_id": cmd["node_id"], "dataset_id": cmd["dataset_id"],
        })

    def _report_dataset_touched(self, cmd):
        if cmd["dataset_id"] in self.state.datasets:
            self.record("dataset.touched", cmd["dataset_id"], {
                "dataset_id": cmd["dataset_id"], "ts": cmd["ts"],
            })

    def _report_session_running(self, cmd):
        sess = self._known_session(cmd)
        if sess is None or sess.state != SessionState.PREPARING:
            return
        self.record("session.running", sess.session_id, {
            "session_id": sess.session_id, "ts": cmd["ts"],
        })

    def _report_metric(self, cmd):
        if self._known_session(cmd) is None:
            return
        self.record("metric", cmd["session_id"], {
            "session_id": cmd["session_id"], "step": cmd["step"],
            "name": cmd["name"], "value": cmd["value"], "ts": cmd["ts"],
        })

    def _report_session_log(self, cmd):
        if self._known_session(cmd) is None:
            return
        self.record("session.log", cmd["session_id"], {
            "session_id": cmd["session_id"], "ts": cmd["ts"], "line": cmd["line"],
        })

    def _report_checkpoint(self, cmd):
        sess = self._known_session(cmd)
        if sess is None:
            return
        self.add_checkpoint(sess.session_id, cmd["step"], cmd["digest"], cmd["ts"])

    def add_checkpoint(self, session_id: str, step: int, digest: str, ts: int) -> str:
        checkpoint_id = f"{session_id}@{step}"
        existing = self.state.checkpoints.get(session_id, [])
        if any(c.step == step for c in existing):
            return checkpoint_id
        self.record("checkpoint", session_id, {
            "checkpoint_id": checkpoint_id, "session_id": session_id,
            "step": step, "digest": digest, "ts": ts,
        })
        return checkpoint_id

    def _running_reporter(self, cmd) -> Optional[Session]:
        """Resolve a self-reported terminal event's session. A running-report
        can be lost to a dying primary, so a terminal report arriving for a
        session still marked preparing first records the running transition
        the node is implicitly vouching for."""
        sess = self._known_session(cmd)
        if sess is None:
            return None
        if sess.state == SessionState.PREPARING:
            self.record("session.running", sess.session_id, {
                "session_id": sess.session_id, "ts": cmd["ts"],
            })
        return sess if sess.state == SessionState.RUNNING else None

    def _report_session_done(self, cmd):
        sess = self._running_reporter(cmd)
        if sess is None:
            return
        self.record("session.terminal", sess.session_id, {
            "session_id": sess.session_id, "state": SessionState.DONE.value,
            "ts": cmd["ts"], "reason": "completed",
        })
        self._sweep_on_member_event(sess)

    def _report_session_failed(self, cmd):
        sess = self._running_reporter(cmd)
        if sess is None:
            return
        self.record("session.terminal", sess.session_id, {
            "session_id": sess.session_id, "state": SessionState.FAILED.value,
            "ts": cmd["ts"], "reason": cmd.get("detail", "workload failure"),
        })
        self.notify(sess.owner, sess.session_id, NotifyKind.FAILED,
                    cmd.get("detail", "session failed"))
        self._sweep_on_member_event(sess)

    def _report_session_oom(self, cmd):
        sess = self._running_reporter(cmd)
        if sess is None:
            return
        detail = (f"memory use {cmd['usage']} exceeded allocation "
                  f"{sess.resources.memory} at step {cmd['step']}")
        self.record("session.terminal", sess.session_id, {
            "session_id": sess.session_id, "state": SessionState.KILLED_OOM.value,
            "ts": cmd["ts"], "reason": detail,
        })
        self.notify(sess.owner, sess.session_id, NotifyKind.KILLED_OOM, detail)
        self._sweep_on_member_event(sess)

    def _report_session_paused(self, cmd):
        sess = self._running_reporter(cmd)
        if sess is None:
            return
        self.record("session.terminal", sess.session_id, {
            "session_id": sess.session_id, "state": SessionState.STOPPED.value,
            "ts": cmd["ts"], "reason": f"paused at step {cmd['step']}",
        })
        self._sweep_on_member_event(sess)

    # overridden by the sweep mixin; harmless default for bare planes
    def _sweep_on_member_event(self, sess: Session) -> None:
        pass
