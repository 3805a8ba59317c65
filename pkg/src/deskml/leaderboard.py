"""Submissions and per-dataset leaderboards.

One leaderboard entry per user: their best score under the dataset's metric
order, ties broken by earlier submission time. Submissions outlive session
removal; the board is a historical record.
"""

from __future__ import annotations

from typing import Any, Optional

from .errors import NotFoundError
from .types import MetricOrder, Submission
from .workload import WorkloadProfile, evaluation_score


def best_submission(subs: list[Submission], order: MetricOrder) -> Submission:
    if order == MetricOrder.DESCENDING:
        return min(subs, key=lambda s: (-s.score, s.ts, s.submission_id))
    return min(subs, key=lambda s: (s.score, s.ts, s.submission_id))


def rank_submissions(submissions: list[Submission],
                     order: MetricOrder) -> list[dict[str, Any]]:
    """Collapse to one best entry per user and rank them, best first."""
    by_user: dict[str, list[Submission]] = {}
    for sub in submissions:
        by_user.setdefault(sub.user_id, []).append(sub)
    bests = [best_submission(subs, order) for subs in by_user.values()]
    sign = -1.0 if order == MetricOrder.DESCENDING else 1.0
    bests.sort(key=lambda s: (sign * s.score, s.ts, s.user_id))
    return [
        {
            "rank": i + 1,
            "user_id": s.user_id,
            "score": s.score,
            "session_id": s.session_id,
            "checkpoint_id": s.checkpoint_id,
            "submitted_at": s.ts,
            "submission_count": len(by_user[s.user_id]),
        }
        for i, s in enumerate(bests)
    ]


class LeaderboardCommands:
    """Mixed into the control plane; assumes PlaneCore's attributes."""

    def submit(self, session_id: str, requester_id: str,
               checkpoint_id: Optional[str] = None) -> dict[str, Any]:
        sess = self.get_session(session_id)
        self._require_owner(requester_id, sess)
        ckpt = self.get_checkpoint(session_id, checkpoint_id)
        dataset = self.state.datasets.get(sess.dataset_id)
        if dataset is None:
            raise NotFoundError(f"dataset {sess.dataset_id} no longer exists")
        profile = WorkloadProfile.from_payload(sess.profile)
        curve_value = profile.curve(ckpt.step, sess.config)
        score = evaluation_score(dataset, ckpt.digest, curve_value)
        submission_id = f"sub-{self.state.submission_count + 1}"
        self.record("submission", submission_id, {
            "submission_id": submission_id, "dataset_id": dataset.dataset_id,
            "user_id": sess.owner, "session_id": session_id,
            "checkpoint_id": ckpt.checkpoint_id, "metric_name": dataset.metric_name,
            "order": dataset.metric_order.value, "score": score, "ts": self.now(),
        })
        return {
            "submission_id": submission_id, "dataset_id": dataset.dataset_id,
            "session_id": session_id, "checkpoint_id": ckpt.checkpoint_id,
            "metric_name": dataset.metric_name, "order": dataset.metric_order.value,
            "score": score, "ts": self.now(),
        }

    def leaderboard(self, dataset_id: str) -> dict[str, Any]:
        dataset = self.state.datasets.get(dataset_id)
        if dataset is None:
            raise NotFoundError(f"unknown dataset {dataset_id}")
        subs = self.state.submissions.get(dataset_id, [])
        history: dict[str, list[dict[str, Any]]] = {}
        for sub in sorted(subs, key=lambda s: (s.ts, s.submission_id)):
            history.setdefault(sub.user_id, []).append({
                "submission_id": sub.submission_id, "score": sub.score,
                "ts": sub.ts, "session_id": sub.session_id,
                "checkpoint_id": sub.checkpoint_id,
            })
        return {
            "dataset_id": dataset_id,
            "metric_name": dataset.metric_name,
            "order": dataset.metric_order.value,
            "entries": rank_submissions(list(subs), dataset.metric_order),
            "history": history,
        }
