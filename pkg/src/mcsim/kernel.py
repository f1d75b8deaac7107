"""Deterministic discrete-event kernel.

One global cycle counter, a binary-heap event queue ordered by
(fire_cycle, seq), and nothing else.  seq is a monotonically increasing
ordinal assigned at scheduling time, so two events scheduled for the same
cycle always dispatch in scheduling order regardless of heap internals.
All model components run on top of this loop; none keep their own clock.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Optional


class SchedulingError(RuntimeError):
    """Raised when an event is scheduled in the past (a configuration bug)."""


@dataclass(frozen=True)
class Event:
    fire_cycle: int
    seq: int
    target: str
    kind: str
    payload: Callable[[], None]

    def _key(self) -> tuple[int, int]:
        return (self.fire_cycle, self.seq)


class Simulator:
    """Single-threaded event loop with a monotonic cycle counter."""

    def __init__(self, trace: bool = False):
        self._now = 0
        self._seq = 0
        self._heap: list[tuple[int, int, Event]] = []
        self.dispatched = 0
        self._stopped = False
        # Optional ordered dispatch trace: (cycle, seq, target, kind).
        self.trace: Optional[list[tuple[int, int, str, str]]] = [] if trace else None

    def stop(self) -> None:
        """Ask the loop to break after the current event (used by the
        experiment driver once every measured task has completed)."""
        self._stopped = True

    @property
    def now(self) -> int:
        return self._now

    def schedule(self, ev: Event) -> Event:
        if ev.fire_cycle < self._now:
            raise SchedulingError(
                f"event {ev.target}/{ev.kind} scheduled at cycle {ev.fire_cycle} "
                f"but current cycle is {self._now}"
            )
        heapq.heappush(self._heap, (ev.fire_cycle, ev.seq, ev))
        return ev

    def at(self, cycle: int, fn: Callable[[], None], target: str = "", kind: str = "") -> Event:
        """Schedule ``fn`` to run at ``cycle``; returns the queued event."""
        ev = Event(cycle, self._next_seq(), target, kind, fn)
        return self.schedule(ev)

    def _next_seq(self) -> int:
        s = self._seq
        self._seq += 1
        return s

    def peek_next_cycle(self) -> Optional[int]:
        """Cycle of the earliest pending event, or None if the queue is empty."""
        return self._heap[0][0] if self._heap else None

    def pending_at(self, cycle: int) -> bool:
        """True if any queued event fires at exactly ``cycle``."""
        return bool(self._heap) and self._heap[0][0] == cycle

    def run_until(self, limit: int) -> int:
        """Dispatch every event with fire_cycle <= limit.

        Returns the final cycle: ``limit`` if events remain beyond it, the
        cycle of the last dispatched event if the queue drained, or the
        current cycle unchanged if nothing was pending.
        """
        while self._heap and self._heap[0][0] <= limit and not self._stopped:
            _, _, ev = heapq.heappop(self._heap)
            self._now = ev.fire_cycle
            if self.trace is not None:
                self.trace.append((ev.fire_cycle, ev.seq, ev.target, ev.kind))
            self.dispatched += 1
            ev.payload()
        if self._heap and not self._stopped:
            self._now = limit
        return self._now
