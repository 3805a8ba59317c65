"""Hyperparameter tuning strategies feeding a leaderboard, plus the fleet
utilization report.

    python3 demos/tuning_and_leaderboard.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from deskml import GIB, Platform  # noqa: E402
from deskml.types import SweepSpec, SweepStrategy  # noqa: E402


def scenario() -> dict:
    return {
        "sim": {"seed": 21, "telemetry_period_ms": 1000},
        "users": [
            {"user_id": "admin", "role": "admin", "credits": 10 ** 7,
             "token": "admin-token"},
            {"user_id": "grid-fan", "credits": 10 ** 7, "token": "t1"},
            {"user_id": "dice-roller", "credits": 10 ** 7, "token": "t2"},
            {"user_id": "evolver", "credits": 10 ** 7, "token": "t3"},
        ],
        "datasets": [{"dataset_id": "digits", "owner": "admin", "size_gb": 4,
                      "metric_name": "accuracy", "metric_order": "desc"}],
        "nodes": [{"node_id": f"node-{i + 1}", "gpus": 8, "memory_gb": 128}
                  for i in range(2)],
    }


PROFILE = {"a_max": 0.95, "rate_k": 0.2, "noise_sigma": 0.01,
           "steps_total": 20, "step_ms": 400, "peak_memory": GIB,
           "metric_name": "accuracy",
           "response": {"param": "lr", "best": 0.1, "penalty": 0.3}}


def main() -> int:
    p = Platform(scenario())
    plane = p.plane

    def sweep(owner, strategy, **kw):
        spec = SweepSpec(strategy=strategy, dataset_id="digits",
                         image_id="tuner", base_config={"bs": 64},
                         seed=77, gpus=1, memory=GIB, **kw)
        result = plane.start_sweep(owner, spec, profile=PROFILE)
        p.run_until_quiet(max_ms=1_200_000)
        info = plane.sweep_info(result["sweep_id"])
        print(f"  {strategy.value}: {len(result['members'])} members, "
              f"best {info['best']['session_id']} @ {info['best']['score']}")
        return info

    print("== three tuning strategies on the same objective (best lr = 0.1) ==")
    grid = sweep("grid-fan", SweepStrategy.GRID,
                 space={"lr": [0.5, 0.1, 0.02, 0.004]})
    rand = sweep("dice-roller", SweepStrategy.RANDOM, n=4,
                 space={"lr": {"min": 0.001, "max": 1.0, "log": True}})
    pbt = sweep("evolver", SweepStrategy.PBT, population=4,
                truncation_fraction=0.25,
                space={"lr": [0.5, 0.1, 0.01, 0.0005]})
    print(f"  pbt ran {pbt['generation']} generations; final lrs: "
          f"{[m['config']['lr'] for m in pbt['members']]}")

    print("== leaderboard after everyone submits their best ==")
    for info in (grid, rand, pbt):
        plane.submit(info["best"]["session_id"],
                     plane.state.sessions[info["best"]["session_id"]].owner,
                     checkpoint_id=info["best"]["checkpoint_id"])
    board = plane.leaderboard("digits")
    print(f"  dataset {board['dataset_id']} metric {board['metric_name']} "
          f"({board['order']})")
    for e in board["entries"]:
        print(f"  #{e['rank']} {e['user_id']:<12} {e['score']}")

    agg = plane.telemetry_aggregate()
    print("== fleet utilization over the whole run ==")
    print(f"  running ratio {agg['running_ratio']:.2f}, "
          f"over-80% ratio {agg['over80_ratio']:.2f} "
          f"across {agg['total_gpus']} GPUs")
    return 0


if __name__ == "__main__":
    sys.exit(main())
