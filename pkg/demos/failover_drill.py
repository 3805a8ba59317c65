"""Warm-standby failover, narrated.

Kills the primary scheduler mid-trace and shows the secondary promoting
within the failover timeout, rebuilding its state from the replicated log,
reconciling against the live nodes, and finishing the queued work.

    python3 demos/failover_drill.py [--seed 4]
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from deskml.audit import run_all  # noqa: E402
from deskml.experiments import run_failover_trial  # noqa: E402
from deskml.state import rebuild  # noqa: E402


def main(seed: int) -> int:
    r = run_failover_trial(seed)
    promo = r["promotions"][0]
    print(f"trace seeded with {seed}: crash injected at t={r['crash_at']}ms "
          f"(failover timeout {r['timeout']}ms)")
    if r["delay"]:
        start, duration = r["delay"]
        print(f"network messages to the pair were also held for {duration}ms "
              f"starting at t={start}ms")
    print(f"secondary promoted to epoch {promo['epoch']} at t={promo['ts']}ms "
          f"({promo['ts'] - r['crash_at']}ms after the crash)")

    replica_state = rebuild(promo["replica_records"])
    identical = replica_state.snapshot() == promo["state_snapshot"]
    print(f"state at promotion equals a cold replay of the replicated log: "
          f"{identical}")

    queued = promo["state_snapshot"]["queue"]
    outcomes = {sid: r["final_sessions"].get(sid) for sid in queued}
    print(f"tickets queued at promotion: {queued or 'none'}")
    for sid, state in outcomes.items():
        print(f"  {sid}: {state}")

    audit = run_all(r["records"], r["acting"])
    print(f"post-hoc audits (oversubscription, transitions, epochs, "
          f"notifications): {'clean' if audit['ok'] else audit['problems']}")
    return 0 if identical and audit["ok"] else 1


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--seed", type=int, default=4)
    sys.exit(main(parser.parse_args().seed))
