"""Injectable clocks. All control-plane timestamps are integer milliseconds."""

from __future__ import annotations

import time


class ManualClock:
    """A clock that only moves when told to. Drives virtual time."""

    def __init__(self, start_ms: int = 0):
        self._now = int(start_ms)

    def now_ms(self) -> int:
        return self._now

    def advance_to(self, t_ms: int) -> None:
        if t_ms < self._now:
            raise ValueError(f"clock cannot move backwards ({t_ms} < {self._now})")
        self._now = int(t_ms)


class WallClock:
    """Real time, for long-lived server deployments outside the simulator."""

    def now_ms(self) -> int:
        return int(time.time() * 1000)
