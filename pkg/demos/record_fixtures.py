"""Record live gateway responses as dashboard test fixtures.

Boots a small deployment, produces a leaderboard with several users, a mix
of session states, and steady telemetry, then saves the raw response bodies
under frontend/fixtures/. The dashboard tests assert byte-equality against
these payloads.

    python3 demos/record_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from deskml import GIB, Platform  # noqa: E402
from deskml.client import ApiClient  # noqa: E402
from deskml.server import GatewayServer  # noqa: E402

FIXTURES = Path(__file__).resolve().parents[1] / "frontend" / "fixtures"


def scenario() -> dict:
    return {
        "sim": {"seed": 31, "telemetry_period_ms": 1000},
        "users": [
            {"user_id": "admin", "role": "admin", "credits": 10 ** 6,
             "token": "admin-token"},
            {"user_id": "ada", "credits": 10 ** 6, "token": "ada-token",
             "teams": ["vision"]},
            {"user_id": "bo", "credits": 10 ** 6, "token": "bo-token",
             "teams": ["vision"]},
        ],
        "datasets": [{"dataset_id": "digits", "owner": "admin", "size_gb": 4,
                      "metric_name": "accuracy", "metric_order": "desc"}],
        "nodes": [{"node_id": f"node-{i + 1}", "gpus": 4, "memory_gb": 64}
                  for i in range(2)],
        "workloads": {
            "cnn": {"a_max": 0.95, "rate_k": 0.2, "noise_sigma": 0.01,
                    "steps_total": 16, "step_ms": 1000, "peak_memory": 2 * GIB,
                    "metric_name": "accuracy",
                    "response": {"param": "lr", "best": 0.1, "penalty": 0.3}},
        },
    }


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    platform = Platform(scenario())
    server = GatewayServer(platform)
    server.start_background()
    ada = ApiClient(server.url, "ada-token")
    bo = ApiClient(server.url, "bo-token")

    s1 = ada.run("digits", "cnn", {"lr": 0.1, "bs": 64}, gpus=1,
                 memory_gb=4)["session_id"]
    s2 = ada.run("digits", "cnn", {"lr": 0.005, "bs": 64, "dropout": 0.5},
                 gpus=1, memory_gb=4)["session_id"]
    s3 = bo.run("digits", "cnn", {"lr": 0.02, "bs": 128}, gpus=2,
                memory_gb=8)["session_id"]
    ada.advance(until_quiet=True)
    ada.post_json(f"/v1/sessions/{s1}/submit")
    ada.post_json(f"/v1/sessions/{s2}/submit")
    bo.post_json(f"/v1/sessions/{s3}/submit")
    ada.post_json(f"/v1/sessions/{s1}/submit")  # history entry
    # leave one running and one stopped for state variety in the table
    s4 = ada.run("digits", "cnn", {"lr": 0.3, "bs": 32}, gpus=1,
                 memory_gb=4)["session_id"]
    ada.advance(ms=6_000)
    s5 = bo.run("digits", "cnn", {"lr": 0.07, "bs": 32}, gpus=1,
                memory_gb=4)["session_id"]
    ada.advance(ms=2_000)
    bo.post_json(f"/v1/sessions/{s5}/stop")

    ids = ",".join([s1, s2, s3])
    captures = {
        "sessions.json": ada.get("/v1/sessions").text,
        "compare.json": ada.get("/v1/sessions/compare", ids=ids).text,
        "leaderboard.json": ada.get("/v1/leaderboard/digits").text,
        "aggregate.json": ada.get("/v1/telemetry/aggregate",
                                  window="5000:15000").text,
        "nodes.json": ada.get("/v1/telemetry/nodes").text,
        "status.json": ada.get("/v1/status").text,
        "events_s1.json": ada.get(f"/v1/sessions/{s1}/events").text,
        "events_s2.json": ada.get(f"/v1/sessions/{s2}/events").text,
        "events_s3.json": ada.get(f"/v1/sessions/{s3}/events").text,
        "session_telemetry_s1.json":
            ada.get(f"/v1/sessions/{s1}/telemetry").text,
    }
    for name, text in captures.items():
        (FIXTURES / name).write_text(text)
        print(f"wrote frontend/fixtures/{name} ({len(text)} bytes)")
    server.shutdown()
    return 0


if __name__ == "__main__":
    sys.exit(main())
