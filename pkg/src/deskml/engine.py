"""Discrete-event core: one heap, one owner of virtual time.

Events fire in (time, insertion order). Nothing in the simulation may read
the wall clock; everything is driven by advance()/run_until_idle().
"""

from __future__ import annotations

import heapq
from typing import Callable, Optional

from .clock import ManualClock


class EventHandle:
    __slots__ = ("cancelled",)

    def __init__(self):
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Engine:
    def __init__(self, start_ms: int = 0):
        self.clock = ManualClock(start_ms)
        self._heap: list[tuple[int, int, EventHandle, Callable[[], None]]] = []
        self._counter = 0
        self.events_fired = 0

    @property
    def now_ms(self) -> int:
        return self.clock.now_ms()

    def at(self, t_ms: int, fn: Callable[[], None]) -> EventHandle:
        if t_ms < self.now_ms:
            raise ValueError(f"cannot schedule in the past ({t_ms} < {self.now_ms})")
        handle = EventHandle()
        self._counter += 1
        heapq.heappush(self._heap, (int(t_ms), self._counter, handle, fn))
        return handle

    def after(self, delay_ms: int, fn: Callable[[], None]) -> EventHandle:
        return self.at(self.now_ms + int(delay_ms), fn)

    def run_until(self, t_ms: int) -> None:
        """Fire everything scheduled at or before t_ms, then land on t_ms."""
        while self._heap and self._heap[0][0] <= t_ms:
            when, _, handle, fn = heapq.heappop(self._heap)
            self.clock.advance_to(when)
            if not handle.cancelled:
                self.events_fired += 1
                fn()
        self.clock.advance_to(max(t_ms, self.now_ms))

    def advance(self, delta_ms: int) -> None:
        self.run_until(self.now_ms + int(delta_ms))

    def run_until_idle(self, limit_ms: Optional[int] = None, max_events: int = 2_000_000) -> None:
        fired = 0
        while self._heap:
            when = self._heap[0][0]
            if limit_ms is not None and when > limit_ms:
                break
            _, _, handle, fn = heapq.heappop(self._heap)
            self.clock.advance_to(when)
            if handle.cancelled:
                continue
            self.events_fired += 1
            fn()
            fired += 1
            if fired > max_events:
                raise RuntimeError("simulation did not quiesce (event storm?)")
        if limit_ms is not None and limit_ms > self.now_ms:
            self.clock.advance_to(limit_ms)

    def pending(self) -> int:
        return sum(1 for (_, _, h, _) in self._heap if not h.cancelled)
