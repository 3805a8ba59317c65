"""Hyperparameter sweeps: grid, random, and population-based training.

Grid and random members run to completion independently. PBT members pause
at every generation boundary with a checkpoint; once the whole population
has paused, the bottom fraction copies config (and warm-start weights) from
uniformly chosen top members, numeric hyperparameters are multiplied by a
drawn perturbation factor, and everyone resumes. Member identity is stable
across generations.
"""

from __future__ import annotations

import itertools
import math
from typing import Any, Optional

from . import rng
from .errors import AdmissionRejected, NotFoundError, ValidationError
from .types import (
    MetricOrder,
    RejectReason,
    Session,
    SessionState,
    SweepSpec,
    SweepState,
    SweepStatus,
    SweepStrategy,
    TERMINAL_STATES,
)
from .workload import WorkloadProfile, evaluation_score


def _draw_value(space_entry: Any, *key) -> Any:
    if isinstance(space_entry, list):
        return rng.choice(space_entry, *key)
    if isinstance(space_entry, dict):
        lo, hi = float(space_entry["min"]), float(space_entry["max"])
        if space_entry.get("log"):
            return round(math.exp(rng.uniform(*key) * (math.log(hi) - math.log(lo))
                                  + math.log(lo)), 10)
        return round(lo + rng.uniform(*key) * (hi - lo), 10)
    raise ValidationError(f"sweep space entries must be lists or ranges, got {space_entry!r}")


def expand_configs(spec: SweepSpec) -> list[dict[str, Any]]:
    params = list(spec.space.keys())
    if spec.strategy == SweepStrategy.GRID:
        configs = []
        for combo in itertools.product(*(spec.space[p] for p in params)):
            cfg = dict(spec.base_config)
            cfg.update(dict(zip(params, combo)))
            configs.append(cfg)
        return configs
    count = spec.n if spec.strategy == SweepStrategy.RANDOM else spec.population
    configs = []
    for i in range(count):
        cfg = dict(spec.base_config)
        for p in params:
            cfg[p] = _draw_value(spec.space[p], "sweep-draw", spec.seed, i, p)
        configs.append(cfg)
    return configs


class SweepCommands:
    """Mixed into the control plane; assumes PlaneCore's attributes."""

    def start_sweep(self, owner_id: str, spec: SweepSpec,
                    profile: Optional[dict[str, Any]] = None) -> dict[str, Any]:
        self.require_user(owner_id)
        configs = expand_configs(spec)
        base_profile = self._resolve_profile(spec.image_id, profile)
        wl = WorkloadProfile.from_payload(base_profile)
        interval = 0
        if spec.strategy == SweepStrategy.PBT:
            interval = max(1, wl.steps_total // 10)
            base_profile = dict(base_profile)
            base_profile["pause_every"] = interval
        sweep_id = f"sw-{self.state.sweep_count + 1}"
        self.record("sweep.created", sweep_id, {
            "sweep_id": sweep_id, "owner": owner_id,
            "strategy": spec.strategy.value, "dataset_id": spec.dataset_id,
            "spec": {
                "seed": spec.seed, "population": spec.population,
                "truncation_fraction": spec.truncation_fraction,
                "perturb_factors": list(spec.perturb_factors),
                "interval": interval, "n": spec.n,
                "space": spec.space, "base_config": spec.base_config,
            },
        })
        spawned = []
        for cfg in configs:
            try:
                sid = self.run(
                    user_id=owner_id, dataset_id=spec.dataset_id,
                    image_id=spec.image_id, config=cfg, gpus=spec.gpus,
                    memory=spec.memory, profile=base_profile, sweep_id=sweep_id,
                )
            except AdmissionRejected as exc:
                if exc.reason == RejectReason.CREDIT_EXHAUSTED:
                    break  # spawning stops at credit exhaustion
                raise
            self.record("sweep.member", sweep_id,
                        {"sweep_id": sweep_id, "session_id": sid})
            spawned.append(sid)
        return {"sweep_id": sweep_id, "members": spawned}

    # -- event hooks ------------------------------------------------------------

    def _sweep_on_member_event(self, sess: Session) -> None:
        if sess.sweep_id is None:
            return
        sweep = self.state.sweeps.get(sess.sweep_id)
        if sweep is None or sweep.status == SweepStatus.DONE:
            return
        if sweep.strategy == SweepStrategy.PBT:
            self._pbt_maybe_evolve(sweep)
        self._sweep_check_done(sweep)

    def _members(self, sweep: SweepState) -> list[Session]:
        return [self.state.sessions[sid] for sid in sweep.members
                if sid in self.state.sessions]

    def _pbt_maybe_evolve(self, sweep: SweepState) -> None:
        members = self._members(sweep)
        if not members or any(s.state not in TERMINAL_STATES for s in members):
            return
        spec = sweep.spec_payload
        interval = spec["interval"]
        boundary = (sweep.generation + 1) * interval
        resumable = [
            s for s in members
            if s.state == SessionState.STOPPED
            and (latest := self.latest_checkpoint(s.session_id)) is not None
            and latest.step == boundary
        ]
        if not resumable:
            return
        generation = sweep.generation + 1
        ranked = self._rank_members(sweep, members)
        k = max(1, int(spec["population"] * spec["truncation_fraction"]))
        top = ranked[:k]
        bottom = [s for s in ranked[-k:] if s in resumable]
        replaced = []
        for loser in bottom:
            source = rng.choice(
                [t.session_id for t in top],
                "pbt-src", spec["seed"], generation, loser.session_id,
            )
            source_cfg = self.state.sessions[source].config
            new_cfg = {}
            factors = {}
            for param, value in source_cfg.items():
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    factor = rng.choice(
                        list(spec["perturb_factors"]),
                        "pbt-mut", spec["seed"], generation, loser.session_id, param,
                    )
                    new_cfg[param] = value * factor
                    factors[param] = factor
                else:
                    new_cfg[param] = value
            self.record("session.config", loser.session_id, {
                "session_id": loser.session_id, "config": new_cfg,
            })
            self.record("session.log", loser.session_id, {
                "session_id": loser.session_id, "ts": self.now(),
                "line": f"pbt generation {generation}: copied {source}, "
                        f"perturbed {sorted(factors)}",
            })
            replaced.append({
                "session_id": loser.session_id, "source": source,
                "factors": factors, "config": new_cfg,
            })
        self.record("sweep.generation", sweep.sweep_id, {
            "sweep_id": sweep.sweep_id, "generation": generation,
            "replaced": replaced, "ts": self.now(),
        })
        for sess in sorted(resumable, key=lambda s: s.session_id):
            self.record("session.requeued", sess.session_id, {
                "session_id": sess.session_id, "start_step": boundary,
                "ts": self.now(),
            })

    def _rank_members(self, sweep: SweepState,
                      members: list[Session]) -> list[Session]:
        dataset = self.state.datasets[sweep.dataset_id]
        sign = -1.0 if dataset.metric_order == MetricOrder.DESCENDING else 1.0
        worst = math.inf

        def key(sess: Session):
            events = self.state.metrics.get(sess.session_id, [])
            if not events:
                return (worst, sess.session_id)
            return (sign * events[-1].value, sess.session_id)

        return sorted(members, key=key)

    def _sweep_check_done(self, sweep: SweepState) -> None:
        members = self._members(sweep)
        if not members:
            return
        finished = {SessionState.DONE, SessionState.FAILED, SessionState.KILLED_OOM}
        if not all(s.state in finished for s in members):
            return
        best = self._best_member(sweep)
        self.record("sweep.done", sweep.sweep_id, {
            "sweep_id": sweep.sweep_id,
            "best_session": best["session_id"] if best else None,
            "best_score": best["score"] if best else None,
            "ts": self.now(),
        })

    def _best_member(self, sweep: SweepState) -> Optional[dict[str, Any]]:
        dataset = self.state.datasets[sweep.dataset_id]
        scored = []
        for sess in self._members(sweep):
            ckpt = self.latest_checkpoint(sess.session_id)
            if ckpt is None:
                continue
            profile = WorkloadProfile.from_payload(sess.profile)
            score = evaluation_score(dataset, ckpt.digest,
                                     profile.curve(ckpt.step, sess.config))
            scored.append({
                "session_id": sess.session_id, "score": score,
                "checkpoint_id": ckpt.checkpoint_id,
            })
        if not scored:
            return None
        sign = -1.0 if dataset.metric_order == MetricOrder.DESCENDING else 1.0
        return min(scored, key=lambda e: (sign * e["score"], e["session_id"]))

    # -- queries -----------------------------------------------------------------

    def sweep_info(self, sweep_id: str) -> dict[str, Any]:
        sweep = self.state.sweeps.get(sweep_id)
        if sweep is None:
            raise NotFoundError(f"unknown sweep {sweep_id}")
        members = []
        for sid in sweep.members:
            sess = self.state.sessions.get(sid)
            if sess is None:
                continue
            members.append({
                "session_id": sid, "state": sess.state.value,
                "config": dict(sess.config),
            })
        best = self._best_member(sweep)
        return {
            "sweep_id": sweep_id, "owner": sweep.owner,
            "strategy": sweep.strategy.value, "dataset_id": sweep.dataset_id,
            "status": sweep.status.value, "generation": sweep.generation,
            "members": members, "best": best,
        }

    def sweep_best(self, sweep_id: str) -> dict[str, Any]:
        sweep = self.state.sweeps.get(sweep_id)
        if sweep is None:
            raise NotFoundError(f"unknown sweep {sweep_id}")
        best = self._best_member(sweep)
        if best is None:
            raise NotFoundError(f"sweep {sweep_id} has no evaluable members yet")
        return best
