"""Synthetic training workloads.

A session's "model" is a saturating curve value = a_max * (1 - e^(-k*step))
plus keyed pseudo-normal noise, so progress curves, checkpoints, leaderboard
scores, and tuning all have meaningful, reproducible orderings without any
real training. Memory ramps linearly to the declared peak, which is what the
over-allocation kill is checked against.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from . import rng
from .errors import ValidationError
from .types import GIB, Dataset, MetricOrder


@dataclass
class WorkloadProfile:
    a_max: float = 1.0
    rate_k: float = 0.05          # per step
    noise_sigma: float = 0.0
    steps_total: int = 20
    step_ms: int = 1000
    peak_memory: int = GIB
    utilization: dict[str, Any] = field(default_factory=lambda: {"kind": "constant", "pct": 90.0})
    failure_at: Optional[int] = None
    metric_name: str = "score"
    ckpt_every: int = 0           # 0 -> steps_total // 10, min 1
    pause_every: int = 0          # self-stop with checkpoint every N steps (tuning generations)
    # optional mapping from one numeric config param to curve quality, so
    # hyperparameter choices actually matter in sweeps
    response: Optional[dict[str, Any]] = None  # {"param","best","penalty"}

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not (0 < self.a_max <= 1):
            raise ValidationError("a_max must be in (0, 1]")
        if self.rate_k <= 0:
            raise ValidationError("rate_k must be > 0")
        if self.steps_total < 1:
            raise ValidationError("steps_total must be >= 1")
        if self.step_ms <= 0:
            raise ValidationError("step_ms must be > 0")
        if self.peak_memory <= 0:
            raise ValidationError("peak_memory must be > 0")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")

    @property
    def checkpoint_interval(self) -> int:
        if self.ckpt_every > 0:
            return self.ckpt_every
        return max(1, self.steps_total // 10)

    def effective_a_max(self, config: dict[str, Any]) -> float:
        """Curve ceiling, optionally degraded by distance from the best value
        of one tuned parameter (log10 distance for positive params)."""
        if not self.response:
            return self.a_max
        param = self.response["param"]
        best = float(self.response["best"])
        penalty = float(self.response.get("penalty", 0.2))
        value = config.get(param)
        if value is None or not isinstance(value, (int, float)) or value <= 0 or best <= 0:
            return self.a_max
        distance = abs(math.log10(float(value)) - math.log10(best))
        return max(0.05, self.a_max - penalty * distance)

    def curve(self, step: int, config: Optional[dict[str, Any]] = None) -> float:
        """Noise-free learning-curve value after `step` completed steps."""
        a = self.effective_a_max(config or {})
        return a * (1.0 - math.exp(-self.rate_k * step))

    def metric_value(self, step: int, seed: int, config: Optional[dict[str, Any]] = None) -> float:
        noise = 0.0
        if self.noise_sigma > 0:
            noise = self.noise_sigma * rng.normal("metric", self.metric_name, seed, step)
        return self.curve(step, config) + noise

    def memory_at(self, step: int) -> int:
        """Modeled resident memory after `step` steps: linear ramp to peak."""
        step = min(max(step, 0), self.steps_total)
        return (self.peak_memory * step) // self.steps_total

    def oom_step(self, allocated: int) -> Optional[int]:
        """First step whose modeled usage exceeds the allocation, if any."""
        if self.peak_memory <= allocated:
            return None
        for step in range(1, self.steps_total + 1):
            if self.memory_at(step) > allocated:
                return step
        return None

    def utilization_at(self, step: int) -> float:
        spec = self.utilization or {}
        kind = spec.get("kind", "constant")
        if kind == "constant":
            return float(spec.get("pct", 90.0))
        if kind == "series":
            values = spec.get("values") or [90.0]
            return float(values[min(step, len(values) - 1)])
        raise ValidationError(f"unknown utilization kind {kind!r}")

    def to_payload(self) -> dict[str, Any]:
        return {
            "a_max": self.a_max,
            "rate_k": self.rate_k,
            "noise_sigma": self.noise_sigma,
            "steps_total": self.steps_total,
            "step_ms": self.step_ms,
            "peak_memory": self.peak_memory,
            "utilization": self.utilization,
            "failure_at": self.failure_at,
            "metric_name": self.metric_name,
            "ckpt_every": self.ckpt_every,
            "pause_every": self.pause_every,
            "response": self.response,
        }

    @classmethod
    def from_payload(cls, payload: dict[str, Any]) -> "WorkloadProfile":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in payload.items() if k in known})


def checkpoint_digest(seed: int, config: dict[str, Any], step: int) -> str:
    """Content hash standing in for model weights; pure in (seed, config, step)."""
    blob = json.dumps({"seed": seed, "config": config, "step": step}, sort_keys=True)
    return hashlib.blake2b(blob.encode(), digest_size=16).hexdigest()


def evaluation_score(dataset: Dataset, digest: str, curve_value: float) -> float:
    """Held-out evaluation of a checkpoint.

    Monotone in training quality but perturbed by a dataset-keyed hash of the
    digest, so it cannot be read off the training metrics. Ascending metrics
    (error-like) invert the curve so better training means a lower score.
    """
    wiggle = (rng.uniform("eval", dataset.dataset_id, digest) - 0.5) * 0.05
    quality = max(0.0, min(1.0, curve_value))
    if dataset.metric_order == MetricOrder.ASCENDING:
        return round(max(0.0, (1.0 - quality) * 0.5 + wiggle + 0.025), 6)
    return round(max(0.0, min(1.0, quality + wiggle)), 6)


def infer_output(digest: str, payload: Any) -> dict[str, Any]:
    """Deterministic model output for a serving request."""
    blob = json.dumps(payload, sort_keys=True)
    h = hashlib.blake2b(f"{digest}|{blob}".encode(), digest_size=8).digest()
    raw = int.from_bytes(h, "big")
    return {
        "label": raw % 10,
        "confidence": round(0.5 + (raw % 5000) / 10000.0, 4),
        "model_digest": digest,
    }


def infer_latency_ms(digest: str, payload: Any) -> int:
    blob = json.dumps(payload, sort_keys=True)
    return 1 + rng.u64("infer-latency", digest, blob) % 20
