"""Fleet utilization aggregation over telemetry windows."""

from __future__ import annotations

from statistics import fmean
from typing import Any, Iterable, Optional

from .types import NodeDescriptor, TelemetrySample


def aggregate_utilization(samples: Iterable[TelemetrySample],
                          nodes: Iterable[NodeDescriptor],
                          window: tuple[int, int]) -> dict[str, Any]:
    """Running ratio, high-utilization ratio, and per-session means.

    A GPU counts as running when any sample in the window attributes it to a
    session; it counts as highly utilized when its mean utilization over the
    window exceeds 80. Ratios are over every registered GPU in the fleet.
    """
    lo, hi = window
    total_gpus = sum(n.total_gpus for n in nodes)
    per_gpu: dict[tuple[str, int], list[float]] = {}
    gpu_running: set[tuple[str, int]] = set()
    per_session: dict[str, list[float]] = {}
    count = 0
    for s in samples:
        if not (lo <= s.ts <= hi):
            continue
        count += 1
        key = (s.node_id, s.gpu_index)
        per_gpu.setdefault(key, []).append(s.utilization_pct)
        if s.session_id is not None:
            gpu_running.add(key)
            per_session.setdefault(s.session_id, []).append(s.utilization_pct)
    if count == 0 or total_gpus == 0:
        return {"running_ratio": 0.0, "over80_ratio": 0.0,
                "per_session_mean": {}, "empty": True,
                "window": [lo, hi], "total_gpus": total_gpus}
    over80 = sum(1 for utils in per_gpu.values() if fmean(utils) > 80.0)
    return {
        "running_ratio": len(gpu_running) / total_gpus,
        "over80_ratio": over80 / total_gpus,
        "per_session_mean": {
            sid: fmean(utils) for sid, utils in sorted(per_session.items())
        },
        "empty": False,
        "window": [lo, hi],
        "total_gpus": total_gpus,
    }


class TelemetryCommands:
    """Mixed into the control plane; assumes PlaneCore's attributes."""

    def telemetry_aggregate(self, from_ms: Optional[int] = None,
                            to_ms: Optional[int] = None) -> dict[str, Any]:
        lo = 0 if from_ms is None else from_ms
        hi = self.now() if to_ms is None else to_ms
        return aggregate_utilization(
            self.state.telemetry, self.state.nodes.values(), (lo, hi)
        )

    def telemetry_nodes(self) -> list[dict[str, Any]]:
        out = []
        for _, node in sorted(self.state.nodes.items()):
            out.append({
                "node_id": node.node_id,
                "total_gpus": node.total_gpus,
                "available_gpus": node.available_gpus,
                "total_memory": node.total_memory,
                "available_memory": node.available_memory,
                "cached_datasets": sorted(node.cached_datasets),
                "cached_images": sorted(node.cached_images),
                "liveness": node.liveness.value,
                "last_heartbeat": node.last_heartbeat,
            })
        return out

    def telemetry_for_session(self, session_id: str,
                              requester_id: str) -> list[dict[str, Any]]:
        sess = self.get_session(session_id)
        self._require_viewer(requester_id, sess)
        return [
            {"node_id": t.node_id, "gpu_index": t.gpu_index,
             "utilization_pct": t.utilization_pct, "memory_used": t.memory_used,
             "ts": t.ts}
            for t in self.state.telemetry if t.session_id == session_id
        ]
