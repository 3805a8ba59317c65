"""Session lifecycle guardrails: memory kills, credit exhaustion, failure
notifications, resume and fork lineage.

    python3 demos/lifecycle_and_credit.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from deskml import GIB, Platform  # noqa: E402


def scenario() -> dict:
    return {
        "sim": {"seed": 5, "credit_rate_per_gpu_min": 30.0,
                "telemetry_period_ms": 3_600_000},
        "users": [
            {"user_id": "admin", "role": "admin", "credits": 10 ** 6,
             "token": "admin-token"},
            {"user_id": "spender", "credits": 12, "token": "spender-token"},
            {"user_id": "greedy", "credits": 10 ** 6, "token": "greedy-token"},
        ],
        "datasets": [{"dataset_id": "corpus", "owner": "admin", "size_gb": 2}],
        "nodes": [{"node_id": "node-1", "gpus": 8, "memory_gb": 64}],
    }


def main() -> int:
    p = Platform(scenario())
    plane = p.plane

    print("== memory enforcement ==")
    glutton = plane.run("greedy", "corpus", "train", {"bs": 4096}, gpus=1,
                        memory=4 * GIB,
                        profile={"steps_total": 20, "step_ms": 300,
                                 "peak_memory": 6 * GIB})
    modest = plane.run("greedy", "corpus", "train", {"bs": 128}, gpus=1,
                       memory=4 * GIB,
                       profile={"steps_total": 20, "step_ms": 300,
                                "peak_memory": 2 * GIB, "a_max": 0.9})
    p.run_until_quiet()
    st = plane.state
    print(f"  {glutton} asked 4 GiB, ramped to 6 GiB -> "
          f"{st.sessions[glutton].state.value}")
    print(f"  co-resident {modest} -> {st.sessions[modest].state.value}")
    for n in st.notifications:
        print(f"  notification to {n.recipient}: {n.kind.value} ({n.session_id})")

    print("== credit exhaustion ==")
    burner = plane.run("spender", "corpus", "train", {"lr": 0.1}, gpus=2,
                       memory=GIB,
                       profile={"steps_total": 500, "step_ms": 1000,
                                "peak_memory": GIB})
    balances = []
    while plane.state.users["spender"].credit_balance > 0:
        p.advance(1000)
        balances.append(plane.state.users["spender"].credit_balance)
    print(f"  balance drained: {balances}")
    sess = plane.state.sessions[burner]
    print(f"  {burner} -> {sess.state.value} "
          f"(checkpoint at step {plane.latest_checkpoint(burner).step})")
    try:
        plane.run("spender", "corpus", "train", {}, gpus=1, memory=GIB)
    except Exception as exc:
        print(f"  new run rejected: {exc}")

    print("== resume and fork ==")
    admin_grant = plane.set_credit("admin", "spender", 1000)
    print(f"  admin restored credit to {admin_grant.credit_balance}")
    plane.resume(burner, "spender")
    p.advance(5000)
    plane.stop(burner, "spender")
    child = plane.fork(burner, "spender", overrides={"lr": 0.01})
    p.run_until_quiet()
    print(f"  resumed, stopped, forked -> child {child} "
          f"({plane.state.sessions[child].state.value}) "
          f"parent={plane.state.sessions[child].parent}")
    diff = plane.diff(burner, child, "spender")
    print(f"  config diff: {diff['changed']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
