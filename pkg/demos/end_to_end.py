"""Whole-platform walkthrough over the real HTTP API.

Boots the scheduler pair and four simulated 8-GPU nodes, pushes two
datasets, runs a 2x2 grid sweep, submits the best checkpoint to the
leaderboard, serves it, and answers inference calls, then audits the full
event log. Everything runs on virtual time, so the wall-clock cost is
seconds.

    python3 demos/end_to_end.py
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from deskml import GIB, Platform  # noqa: E402
from deskml.audit import run_all  # noqa: E402
from deskml.client import ApiClient  # noqa: E402
from deskml.server import GatewayServer  # noqa: E402


def scenario() -> dict:
    return {
        "sim": {"seed": 11, "telemetry_period_ms": 1000},
        "users": [
            {"user_id": "admin", "role": "admin", "credits": 100000,
             "token": "admin-token"},
            {"user_id": "ada", "credits": 100000, "token": "ada-token"},
        ],
        "nodes": [{"node_id": f"node-{i + 1}", "gpus": 8, "memory_gb": 256}
                  for i in range(4)],
        "workloads": {
            "cnn": {"a_max": 0.95, "rate_k": 0.2, "noise_sigma": 0.01,
                    "steps_total": 20, "step_ms": 500, "peak_memory": 4 * GIB,
                    "metric_name": "accuracy",
                    "response": {"param": "lr", "best": 0.1, "penalty": 0.3}},
        },
    }


def main(verbose: bool = True) -> dict:
    def say(msg: str) -> None:
        if verbose:
            print(msg)

    t0 = time.monotonic()
    platform = Platform(scenario())
    server = GatewayServer(platform)
    server.start_background()
    say(f"gateway up at {server.url} (primary+secondary schedulers, 4 nodes)")

    ada = ApiClient(server.url, "ada-token")

    for ds, metric, order, size in (("digits", "accuracy", "desc", 8),
                                    ("reviews", "mse", "asc", 6)):
        ada.post_json("/v1/datasets", {
            "dataset_id": ds, "size_gb": size,
            "metric_name": metric, "metric_order": order,
        })
        say(f"pushed dataset {ds} ({size} GiB, {metric} {order})")

    sweep = ada.post_json("/v1/sweeps", {
        "strategy": "grid", "dataset_id": "digits", "image_id": "cnn",
        "space": {"lr": [0.1, 0.005], "bs": [64, 128]},
        "gpus": 2, "memory_gb": 8,
    })
    say(f"grid sweep {sweep['sweep_id']} spawned "
        f"{len(sweep['members'])} sessions: {sweep['members']}")

    ada.advance(until_quiet=True, max_ms=600_000)
    info = ada.get_json(f"/v1/sweeps/{sweep['sweep_id']}")
    best = info["best"]
    say(f"sweep finished; best member {best['session_id']} "
        f"scored {best['score']}")

    submission = ada.post_json(f"/v1/sessions/{best['session_id']}/submit",
                               {"checkpoint_id": best["checkpoint_id"]})
    board = ada.get_json("/v1/leaderboard/digits")
    say(f"submission {submission['submission_id']} ranked "
        f"#{board['entries'][0]['rank']} for {board['entries'][0]['user_id']}")

    served = ada.post_json(f"/v1/sessions/{best['session_id']}/serve",
                           {"checkpoint_id": best["checkpoint_id"]})
    say(f"serving {served['checkpoint_id']} on {served['node_id']}")

    answers = [
        ada.post_json(f"/v1/sessions/{best['session_id']}/infer",
                      {"payload": {"pixels": [1, 2, 3]}})
        for _ in range(2)
    ]
    say(f"inference answered deterministically: label="
        f"{answers[0]['output']['label']} "
        f"(latency {answers[0]['latency_ms']}ms)")

    status = ada.get_json("/v1/status")
    with platform.lock:
        audit = run_all(platform.records(), platform.acting)
    server.shutdown()
    wall_s = time.monotonic() - t0
    say(f"state-machine audits: "
        f"{'all clean' if audit['ok'] else audit['problems']}")
    say(f"done in {wall_s:.2f}s wall, {status['now_ms'] / 1000:.1f}s virtual")
    return {
        "wall_s": wall_s,
        "virtual_ms": status["now_ms"],
        "epoch": status["scheduler_epoch"],
        "sweep_members": sweep["members"],
        "best": best,
        "submission": submission,
        "leaderboard": board,
        "infer_answers": answers,
        "audit": audit,
        "notifications": len(platform.memory_sink.delivered),
    }


if __name__ == "__main__":
    summary = main()
    sys.exit(0 if summary["audit"]["ok"] else 1)
