"""Scenario files: everything a deployment needs, in one JSON object.

{
  "sim": {...SimConfig fields...},
  "users": [{"user_id", "role", "credits", "teams", "token"}],
  "datasets": [{"dataset_id", "owner", "size_gb" | "size", "team",
                "metric_name", "metric_order"}],
  "nodes": [{"node_id", "gpus", "memory_gb" | "memory"}],
  "workloads": {"image-id": {...WorkloadProfile fields...}},
  "faults": [{"at_ms", "target", "kind", "duration_ms"}]
}
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

from .errors import ValidationError
from .types import GIB

_TOP_KEYS = {"sim", "users", "datasets", "nodes", "workloads", "faults",
             "notify_file", "notify_webhook"}


def load_scenario(path) -> dict[str, Any]:
    with open(path, encoding="utf-8") as fh:
        scenario = json.load(fh)
    validate_scenario(scenario)
    return scenario


def validate_scenario(scenario: dict[str, Any]) -> None:
    unknown = set(scenario) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown scenario keys: {sorted(unknown)}")
    for u in scenario.get("users", []):
        if "user_id" not in u:
            raise ValidationError("scenario user missing user_id")
    for d in scenario.get("datasets", []):
        if "dataset_id" not in d or "owner" not in d:
            raise ValidationError("scenario dataset missing dataset_id/owner")
        if not d.get("size") and not d.get("size_gb"):
            raise ValidationError(f"dataset {d.get('dataset_id')} missing size")
    for n in scenario.get("nodes", []):
        if "gpus" not in n:
            raise ValidationError("scenario node missing gpus")


def basic_scenario(n_nodes: int = 4, gpus_per_node: int = 8,
                   memory_gb: int = 256, credits: int = 10_000,
                   seed: int = 0, **sim_overrides) -> dict[str, Any]:
    """A serviceable single-team deployment for demos and tests."""
    sim = {"seed": seed}
    sim.update(sim_overrides)
    return {
        "sim": sim,
        "users": [
            {"user_id": "admin", "role": "admin", "credits": credits,
             "token": "admin-token"},
            {"user_id": "ada", "credits": credits, "teams": ["vision"],
             "token": "ada-token"},
            {"user_id": "bo", "credits": credits, "teams": ["vision"],
             "token": "bo-token"},
        ],
        "datasets": [
            {"dataset_id": "digits", "owner": "admin", "size_gb": 8,
             "metric_name": "accuracy", "metric_order": "desc"},
            {"dataset_id": "reviews", "owner": "admin", "size_gb": 6,
             "metric_name": "mse", "metric_order": "asc"},
        ],
        "nodes": [
            {"node_id": f"node-{i + 1}", "gpus": gpus_per_node,
             "memory_gb": memory_gb}
            for i in range(n_nodes)
        ],
        "workloads": {
            "cnn": {"a_max": 0.95, "rate_k": 0.15, "noise_sigma": 0.01,
                    "steps_total": 20, "step_ms": 500,
                    "peak_memory": 4 * GIB, "metric_name": "accuracy",
                    "response": {"param": "lr", "best": 0.1, "penalty": 0.25}},
            "mlp": {"a_max": 0.85, "rate_k": 0.2, "noise_sigma": 0.0,
                    "steps_total": 10, "step_ms": 500,
                    "peak_memory": 2 * GIB, "metric_name": "score"},
        },
        "faults": [],
    }
