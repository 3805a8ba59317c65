"""Users, teams, datasets, and credit accounting."""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Any, Optional

from .errors import PermissionDeniedError, StateError, ValidationError
from .types import Dataset, MetricOrder, NotifyKind, Role, SessionState, UserAccount


class RegistryCommands:
    """Mixed into the control plane; assumes PlaneCore's attributes."""

    # -- users ------------------------------------------------------------

    def create_user(self, actor_id: Optional[str], user_id: str,
                    role: str = "user", credits: int = 0,
                    teams: Optional[list[str]] = None) -> UserAccount:
        self._require_admin(actor_id)
        if user_id in self.state.users:
            raise StateError(f"user {user_id} already exists")
        if credits < 0:
            raise ValidationError("credits must be >= 0")
        self.record("user.created", user_id, {
            "user_id": user_id, "role": Role(role).value,
            "credits": credits, "teams": sorted(teams or []),
        })
        return self.state.users[user_id]

    def set_credit(self, actor_id: Optional[str], user_id: str, credits: int) -> UserAccount:
        self._require_admin(actor_id)
        self.require_user(user_id)
        if credits < 0:
            raise ValidationError("credits must be >= 0")
        self.record("user.credits", user_id, {"user_id": user_id, "balance": credits})
        return self.state.users[user_id]

    def set_role(self, actor_id: Optional[str], user_id: str, role: str) -> UserAccount:
        self._require_admin(actor_id)
        self.require_user(user_id)
        self.record("user.role", user_id, {"user_id": user_id, "role": Role(role).value})
        return self.state.users[user_id]

    def set_teams(self, actor_id: Optional[str], user_id: str, teams: list[str]) -> UserAccount:
        self._require_admin(actor_id)
        self.require_user(user_id)
        self.record("user.teams", user_id, {"user_id": user_id, "teams": sorted(teams)})
        return self.state.users[user_id]

    def add_token(self, actor_id: Optional[str], token: str, user_id: str) -> None:
        self._require_admin(actor_id)
        self.require_user(user_id)
        self.record("token.added", user_id, {"token": token, "user_id": user_id})

    def _require_admin(self, actor_id: Optional[str]) -> None:
        # None means the platform itself (boot-time seeding)
        if actor_id is None:
            return
        actor = self.require_user(actor_id)
        if actor.role != Role.ADMIN:
            raise PermissionDeniedError(f"{actor_id} is not an administrator")

    # -- datasets -----------------------------------------------------------

    def push_dataset(self, owner_id: str, dataset_id: str, size: int,
                     team: Optional[str] = None, metric_name: str = "accuracy",
                     metric_order: str = "desc") -> Dataset:
        self.require_user(owner_id)
        if size <= 0:
            raise ValidationError("dataset size must be > 0")
        if dataset_id in self.state.datasets:
            raise StateError(f"dataset {dataset_id} already exists")
        self.record("dataset.pushed", dataset_id, {
            "dataset_id": dataset_id, "owner": owner_id, "size": size,
            "team": team, "metric_name": metric_name,
            "metric_order": MetricOrder(metric_order).value,
        })
        return self.state.datasets[dataset_id]

    def list_datasets(self, requester_id: str) -> list[Dataset]:
        user = self.require_user(requester_id)
        return [d for _, d in sorted(self.state.datasets.items())
                if d.readable_by(user)]

    def dataset_visible(self, user: UserAccount, dataset_id: str) -> bool:
        dataset = self.state.datasets.get(dataset_id)
        return dataset is not None and dataset.readable_by(user)

    def dataset_info(self, dataset: Dataset) -> dict[str, Any]:
        return {
            "dataset_id": dataset.dataset_id,
            "owner": dataset.owner,
            "size": dataset.size,
            "visibility": "public" if dataset.public else "team",
            "team": dataset.team,
            "created_at": dataset.created_at,
            "last_access": dataset.last_access,
            "metric_name": dataset.metric_name,
            "metric_order": dataset.metric_order.value,
        }

    # -- credit -----------------------------------------------------------

    def charge_usage(self, user_id: str, gpu_ms: int) -> None:
        """Accumulate usage and charge whole credits against the running total.

        ceil() is applied to the cumulative amount owed, so fine-grained ticks
        round up exactly once instead of once per tick.
        """
        if gpu_ms <= 0:
            return
        user = self.require_user(user_id)
        rate = Fraction(str(self.config.credit_rate_per_gpu_min))
        gpu_ms_total = user.gpu_ms_consumed + gpu_ms
        owed_before = math.ceil(Fraction(user.gpu_ms_consumed) * rate / 60000)
        owed_total = math.ceil(Fraction(gpu_ms_total) * rate / 60000)
        delta = owed_total - owed_before
        balance = max(0, user.credit_balance - delta)
        exhausted = balance == 0 and user.credit_balance > 0
        self.record("user.charged", user_id, {
            "user_id": user_id, "gpu_ms_total": gpu_ms_total,
            "delta": delta, "balance": balance,
        })
        if exhausted:
            self._on_credit_exhausted(user_id)

    def _on_credit_exhausted(self, user_id: str) -> None:
        self.record("user.exhausted", user_id, {"user_id": user_id})
        running = sorted(
            s.session_id for s in self.state.sessions.values()
            if s.owner == user_id and not s.terminal
        )
        for sid in running:
            sess = self.state.sessions[sid]
            if sess.state == SessionState.QUEUED:
                self.record("session.terminal", sid, {
                    "session_id": sid, "state": SessionState.STOPPED.value,
                    "ts": self.now(), "reason": "credit exhausted",
                })
            else:
                self.safe_stop(sid, reason="credit exhausted")
            self.notify(user_id, sid, NotifyKind.CREDIT_STOP,
                        "credit exhausted; session safe-stopped")
