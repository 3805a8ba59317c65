"""Session lifecycle: run, stop/rm/resume, fork, events/logs, compare, serving."""

from __future__ import annotations

from typing import Any, Optional

from . import rng
from .errors import (
    AdmissionRejected,
    CapacityError,
    NotFoundError,
    PermissionDeniedError,
    StateError,
    ValidationError,
)
from .placement import place
from .types import (
    Checkpoint,
    MetricEvent,
    ResourceRequest,
    Session,
    SessionState,
    TERMINAL_STATES,
)
from .workload import WorkloadProfile, infer_latency_ms, infer_output

DEFAULT_PROFILE = WorkloadProfile().to_payload()


class SessionCommands:
    """Mixed into the control plane; assumes PlaneCore's attributes."""

    # -- creation -----------------------------------------------------------

    def run(self, user_id: str, dataset_id: str, image_id: str,
            config: dict[str, Any], gpus: int, memory: int,
            profile: Optional[dict[str, Any]] = None, seed: Optional[int] = None,
            parent: Optional[str] = None, start_step: int = 0,
            sweep_id: Optional[str] = None) -> str:
        user = self.require_user(user_id)
        request = ResourceRequest(gpus=gpus, memory=memory,
                                  dataset_id=dataset_id, image_id=image_id)
        decision = self.admit(user, request)
        if not decision.accepted:
            raise AdmissionRejected(
                decision.reason,
                f"admission rejected: {decision.reason.value}",
            )
        dataset = self.state.datasets[dataset_id]
        key = f"{user_id}/{dataset_id}"
        seq = self.state.session_seq.get(key, 0) + 1
        session_id = f"{user_id}/{dataset_id}/{seq}"
        if seed is None:
            seed = rng.u64("session-seed", self.config.seed, session_id)
        profile_payload = self._resolve_profile(image_id, profile)
        args = " ".join(f"-a {k}={v}" for k, v in config.items())
        command = f"run -d {dataset_id} -e {image_id} {args}".strip()
        self.record("session.created", session_id, {
            "session_id": session_id, "owner": user_id, "team": dataset.team,
            "dataset_id": dataset_id, "image_id": image_id, "config": dict(config),
            "gpus": gpus, "memory": memory, "seed": seed,
            "created_at": self.now(), "parent": parent,
            "profile": profile_payload, "start_step": start_step,
            "sweep_id": sweep_id, "command": command,
        })
        self.record("session.log", session_id, {
            "session_id": session_id, "ts": self.now(),
            "line": f"queued (position {decision.queue_position})",
        })
        return session_id

    def _resolve_profile(self, image_id: str,
                         explicit: Optional[dict[str, Any]]) -> dict[str, Any]:
        if explicit is not None:
            payload = dict(DEFAULT_PROFILE)
            payload.update(explicit)
        else:
            payload = dict(self.templates.get(image_id, DEFAULT_PROFILE))
        WorkloadProfile.from_payload(payload).validate()
        return payload

    # -- lifecycle -----------------------------------------------------------

    def stop(self, session_id: str, requester_id: str) -> Session:
        sess = self.get_session(session_id)
        self._require_owner(requester_id, sess)
        if sess.state == SessionState.QUEUED:
            self.record("session.terminal", session_id, {
                "session_id": session_id, "state": SessionState.STOPPED.value,
                "ts": self.now(), "reason": "stopped by user",
            })
        elif sess.state in (SessionState.PREPARING, SessionState.RUNNING,
                            SessionState.SERVING):
            self.safe_stop(session_id, reason="stopped by user")
        else:
            raise StateError(
                f"cannot stop session in state {sess.state.value}"
            )
        return self.get_session(session_id)

    def rm(self, session_id: str, requester_id: str) -> None:
        sess = self.get_session(session_id)
        self._require_owner(requester_id, sess)
        if sess.state not in TERMINAL_STATES:
            raise StateError(
                f"rm requires a terminal session (currently {sess.state.value})"
            )
        self.record("session.removed", session_id, {"session_id": session_id})

    def resume(self, session_id: str, requester_id: str) -> Session:
        sess = self.get_session(session_id)
        self._require_owner(requester_id, sess)
        if sess.state not in (SessionState.STOPPED, SessionState.FAILED):
            raise StateError(
                f"resume requires stopped or failed (currently {sess.state.value})"
            )
        latest = self.latest_checkpoint(session_id)
        if latest is None:
            raise StateError("resume requires at least one checkpoint")
        self.record("session.requeued", session_id, {
            "session_id": session_id, "start_step": latest.step, "ts": self.now(),
        })
        self.record("session.log", session_id, {
            "session_id": session_id, "ts": self.now(),
            "line": f"resumed from checkpoint at step {latest.step}",
        })
        return self.get_session(session_id)

    def fork(self, session_id: str, requester_id: str,
             overrides: Optional[dict[str, Any]] = None,
             seed: Optional[int] = None) -> str:
        parent = self.get_session(session_id)
        self._require_owner(requester_id, parent)
        overrides = overrides or {}
        latest = self.latest_checkpoint(session_id)
        if latest is None and parent.state not in TERMINAL_STATES:
            raise StateError("fork requires a checkpoint or a terminal parent")
        unknown = set(overrides) - set(parent.config)
        if unknown:
            raise ValidationError(
                f"overrides reference unknown params: {sorted(unknown)}"
            )
        config = dict(parent.config)
        config.update(overrides)
        return self.run(
            user_id=requester_id,
            dataset_id=parent.dataset_id,
            image_id=parent.image_id,
            config=config,
            gpus=parent.resources.gpus,
            memory=parent.resources.memory,
            profile=dict(parent.profile),
            seed=seed,
            parent=session_id,
            start_step=latest.step if latest else 0,
        )

    def _require_owner(self, requester_id: str, sess: Session) -> None:
        user = self.require_user(requester_id)
        if user.user_id != sess.owner and not self.is_admin(user):
            raise PermissionDeniedError(
                f"{requester_id} does not own {sess.session_id}"
            )

    # -- data access -----------------------------------------------------------

    def events(self, session_id: str, requester_id: str,
               name: Optional[str] = None,
               from_step: Optional[int] = None) -> list[MetricEvent]:
        sess = self.get_session(session_id)
        self._require_viewer(requester_id, sess)
        events = self.state.metrics.get(session_id, [])
        if name is not None:
            events = [e for e in events if e.name == name]
        if from_step is not None:
            events = [e for e in events if e.step >= from_step]
        return sorted(events, key=lambda e: (e.step, e.name))

    def eventlen(self, session_id: str, requester_id: str,
                 name: Optional[str] = None) -> int:
        return len(self.events(session_id, requester_id, name=name))

    def logs(self, session_id: str, requester_id: str) -> list[dict[str, Any]]:
        sess = self.get_session(session_id)
        self._require_viewer(requester_id, sess)
        return list(self.state.session_logs.get(session_id, []))

    def compare(self, session_ids: list[str], requester_id: str) -> dict[str, Any]:
        if len(session_ids) < 2:
            raise ValidationError("compare needs at least 2 sessions")
        sessions = [self.get_session(sid) for sid in session_ids]
        for sess in sessions:
            self._require_viewer(requester_id, sess)
        configs = [s.config for s in sessions]
        all_params = sorted({k for c in configs for k in c})
        common = {
            k: configs[0][k] for k in all_params
            if all(k in c and c[k] == configs[0].get(k) for c in configs)
        }
        exclusive = [k for k in all_params if k not in common]
        rows = [
            {"session_id": s.session_id,
             "values": {k: s.config.get(k) for k in exclusive}}
            for s in sessions
        ]
        return {"common_args": common, "params": exclusive, "rows": rows}

    def diff(self, session_id: str, other_id: str, requester_id: str) -> dict[str, Any]:
        report = self.compare([session_id, other_id], requester_id)
        a, b = report["rows"][0]["values"], report["rows"][1]["values"]
        return {
            "common_args": report["common_args"],
            "changed": {k: [a.get(k), b.get(k)] for k in report["params"]},
        }

    def set_memo(self, session_id: str, requester_id: str, text: str) -> None:
        sess = self.get_session(session_id)
        self._require_owner(requester_id, sess)
        self.record("session.memo", session_id,
                    {"session_id": session_id, "text": text})

    def getid(self, user_id: str) -> str:
        self.require_user(user_id)
        owned = [s for s in self.state.sessions.values() if s.owner == user_id]
        if not owned:
            raise NotFoundError(f"{user_id} has no sessions")
        return max(owned, key=lambda s: (s.created_at, s.session_id)).session_id

    def _require_viewer(self, requester_id: str, sess: Session) -> None:
        user = self.require_user(requester_id)
        if not self.may_view_session(user, sess):
            raise PermissionDeniedError(
                f"{requester_id} may not view {sess.session_id}"
            )

    def list_sessions(self, requester_id: str, owner: Optional[str] = None,
                      state: Optional[str] = None) -> list[Session]:
        user = self.require_user(requester_id)
        out = []
        for _, sess in sorted(self.state.sessions.items()):
            dataset = self.state.datasets.get(sess.dataset_id)
            if dataset is not None and not dataset.readable_by(user):
                continue  # never leak private-dataset sessions
            if owner and sess.owner != owner:
                continue
            if state and sess.state.value != state:
                continue
            out.append(sess)
        return out

    # -- checkpoints / serving ---------------------------------------------------

    def latest_checkpoint(self, session_id: str) -> Optional[Checkpoint]:
        cks = self.state.checkpoints.get(session_id, [])
        return max(cks, key=lambda c: c.step) if cks else None

    def get_checkpoint(self, session_id: str,
                       checkpoint_id: Optional[str]) -> Checkpoint:
        cks = self.state.checkpoints.get(session_id, [])
        if checkpoint_id is None:
            latest = self.latest_checkpoint(session_id)
            if latest is None:
                raise NotFoundError(f"{session_id} has no checkpoints")
            return latest
        for c in cks:
            if c.checkpoint_id == checkpoint_id:
                return c
        raise NotFoundError(f"unknown checkpoint {checkpoint_id}")

    def checkpoint_manifest(self, session_id: str, requester_id: str) -> dict[str, Any]:
        sess = self.get_session(session_id)
        self._require_viewer(requester_id, sess)
        return {
            "session_id": session_id,
            "checkpoints": [
                {"checkpoint_id": c.checkpoint_id, "step": c.step,
                 "digest": c.digest, "created_at": c.created_at}
                for c in self.state.checkpoints.get(session_id, [])
            ],
        }

    def serve(self, session_id: str, requester_id: str,
              checkpoint_id: Optional[str] = None) -> Session:
        sess = self.get_session(session_id)
        self._require_owner(requester_id, sess)
        if sess.state != SessionState.DONE:
            raise StateError(
                f"serve requires a done session (currently {sess.state.value})"
            )
        ckpt = self.get_checkpoint(session_id, checkpoint_id)
        node_id = place(sess.resources,
                        [n for n in self.state.nodes.values() if n.alive])
        if node_id is None:
            raise CapacityError("no node can host the serving session")
        self.record("session.serving", session_id, {
            "session_id": session_id, "node_id": node_id,
            "checkpoint_id": ckpt.checkpoint_id, "ts": self.now(),
        })
        if self.cluster is not None:
            self.cluster.node(node_id).serve_session(
                self._session_snapshot(self.get_session(session_id))
            )
        return self.get_session(session_id)

    def infer(self, session_id: str, payload: Any) -> dict[str, Any]:
        sess = self.get_session(session_id)
        if sess.state != SessionState.SERVING:
            raise StateError(
                f"session is not serving (currently {sess.state.value})"
            )
        ckpt = self.get_checkpoint(session_id, sess.serving_checkpoint)
        return {
            "session_id": session_id,
            "checkpoint_id": ckpt.checkpoint_id,
            "output": infer_output(ckpt.digest, payload),
            "latency_ms": infer_latency_ms(ckpt.digest, payload),
        }

    # -- export ---------------------------------------------------------------

    def bundle(self, session_id: str, requester_id: str) -> dict[str, Any]:
        """Everything needed to reproduce or archive a session."""
        sess = self.get_session(session_id)
        self._require_viewer(requester_id, sess)
        return {
            "session": self.session_info(sess),
            "events": [[e.step, e.name, e.value, e.ts]
                       for e in self.events(session_id, requester_id)],
            "checkpoints": self.checkpoint_manifest(session_id, requester_id),
            "logs": self.logs(session_id, requester_id),
        }

    def session_info(self, sess: Session) -> dict[str, Any]:
        return {
            "session_id": sess.session_id, "owner": sess.owner, "team": sess.team,
            "dataset_id": sess.dataset_id, "image_id": sess.image_id,
            "config": dict(sess.config), "gpus": sess.resources.gpus,
            "memory": sess.resources.memory, "state": sess.state.value,
            "node_id": sess.node_id, "parent": sess.parent, "seed": sess.seed,
            "created_at": sess.created_at, "started_at": sess.started_at,
            "finished_at": sess.finished_at, "start_step": sess.start_step,
            "sweep_id": sess.sweep_id, "memo": sess.memo, "command": sess.command,
            "serving_checkpoint": sess.serving_checkpoint,
        }
