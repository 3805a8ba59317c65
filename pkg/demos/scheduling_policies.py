"""Placement-policy studies on scripted traces.

Part 1 compares defragmenting placement against a random-feasible baseline:
the policy packs small jobs onto already-busy nodes, so a fully free 8-GPU
node survives much longer and an 8-GPU job placed late in the trace starts
immediately.

Part 2 toggles dataset caching on a 4-node / 20-job trace and reports the
total dataset-copy time saved by cache reuse plus locality-aware placement.

    python3 demos/scheduling_policies.py [--seeds 10]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from deskml.experiments import (  # noqa: E402
    free_block_duration,
    run_defrag_trace,
    run_locality_trace,
)


def defrag_study(seeds: int) -> None:
    print(f"defragmentation: {seeds} seeded traces, "
          "3 nodes x 8 GPUs, mixed 1/2-GPU jobs + one late 8-GPU job")
    print(f"{'seed':>6} {'policy free-8 ms':>18} {'random free-8 ms':>18} win")
    wins = 0
    for seed in range(seeds):
        policy = run_defrag_trace(seed, "defrag")
        random_arm = run_defrag_trace(seed, "random")
        a = free_block_duration(policy["records"], policy["horizon_ms"])
        b = free_block_duration(random_arm["records"], random_arm["horizon_ms"])
        wins += a > b
        print(f"{seed:>6} {a:>18} {b:>18} {'yes' if a > b else 'NO'}")
    print(f"policy preserved the free 8-GPU block longer in {wins}/{seeds} runs\n")


def locality_study(seed: int) -> None:
    print("locality: 4 nodes x 4 GPUs, 20 jobs over 3 datasets (8/6/4 GiB)")
    on = run_locality_trace(seed, caching=True)
    off = run_locality_trace(seed, caching=False)
    reduction = 1 - on["copy_ms_total"] / off["copy_ms_total"]
    print(f"  caching disabled: {off['copy_ms_total']:>7} ms of dataset copies")
    print(f"  caching enabled:  {on['copy_ms_total']:>7} ms of dataset copies")
    print(f"  copy time cut by {reduction:.1%}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, default=10)
    args = parser.parse_args()
    defrag_study(args.seeds)
    locality_study(0)
