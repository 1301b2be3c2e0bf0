"""Deterministic discrete-event network model.

Each path is a pair of unidirectional links. The data direction models
serialization rate (or trace-driven delivery opportunities), a droptail
queue, seeded random loss, and a fixed propagation delay; the ACK
direction defaults to a plain constant delay. Events are processed in
(time, insertion order), so a (config, seed) pair fully determines a run.
"""

from __future__ import annotations

import heapq
import random
from collections import deque
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

DEFAULT_MTU = 1350  # payload bytes per packet


class TraceSchedule:
    """Delivery opportunities from a Mahi-mahi style trace.

    Each timestamp (integer milliseconds) lets the link release one
    MTU-sized packet. Replay wraps around with period equal to the final
    timestamp.
    """

    def __init__(self, times_ms: list[int]):
        if not times_ms:
            raise ValueError("a trace must contain at least one opportunity")
        if any(t < 0 for t in times_ms):
            raise ValueError("trace timestamps must be non-negative")
        if any(b < a for a, b in zip(times_ms, times_ms[1:])):
            raise ValueError("trace timestamps must be non-decreasing")
        self.times_ms = list(times_ms)
        self.period_ms = times_ms[-1] if times_ms[-1] > 0 else 1

    def opportunity_us(self, n: int) -> int:
        """Time of the n-th delivery opportunity (0-based), in microseconds."""
        count = len(self.times_ms)
        cycle, idx = divmod(n, count)
        return (self.times_ms[idx] + cycle * self.period_ms) * 1_000


def load_trace(path: str | Path) -> TraceSchedule:
    """Parse one non-negative integer millisecond timestamp per line."""
    times: list[int] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = int(text)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: not an integer timestamp: {text!r}")
            if value < 0:
                raise ValueError(f"{path}:{lineno}: negative timestamp")
            times.append(value)
    return TraceSchedule(times)


@dataclass(slots=True)
class LinkModel:
    """One path's configuration. Rate/queue/loss shape the data direction;
    the ACK direction is an uncongested constant delay."""

    delay_down_ms: float  # data direction propagation delay
    delay_up_ms: float  # ACK return propagation delay
    rate_mbps: float | None = None
    trace: TraceSchedule | None = None
    loss_rate: float = 0.0
    reverse_loss_rate: float = 0.0
    queue_capacity: int = 64
    mtu: int = DEFAULT_MTU
    window_packets: int | None = None  # per-path cwnd ceiling; None = auto

    def validate(self) -> None:
        if self.rate_mbps is not None and self.trace is not None:
            raise ValueError("configure either a rate or a trace, not both")
        if not (0.0 <= self.loss_rate < 1.0):
            raise ValueError("loss_rate must be in [0, 1)")
        if self.mtu <= 0 or self.queue_capacity < 0:
            raise ValueError("mtu and queue_capacity must be positive")


class LinkDirection:
    """One direction of one link; FIFO with droptail queueing and seeded loss."""

    def __init__(
        self,
        delay_us: int,
        rate_bps: float | None = None,
        trace: TraceSchedule | None = None,
        loss_rate: float = 0.0,
        queue_capacity: int = 64,
        rng: random.Random | None = None,
    ):
        self.delay_us = delay_us
        self.rate_bps = rate_bps
        self.trace = trace
        self.loss_rate = loss_rate
        self.queue_capacity = queue_capacity
        self.rng = rng or random.Random(0)
        self.busy_until = 0
        self._departures: deque[int] = deque()
        self._trace_cursor = 0
        self.attempts = 0
        self.delivered = 0
        self.queue_drops = 0
        self.loss_drops = 0

    def _queue_full(self, now: int) -> bool:
        departures = self._departures
        while departures and departures[0] <= now:
            departures.popleft()
        # capacity counts packets waiting behind the one in service
        return len(departures) > self.queue_capacity

    def transmit(self, size: int, now: int) -> int | None:
        """Accept a packet at `now`; returns its arrival time, or None if dropped."""
        self.attempts += 1
        if self.trace is not None:
            if self._queue_full(now):
                self.queue_drops += 1
                return None
            while self.trace.opportunity_us(self._trace_cursor) < now:
                self._trace_cursor += 1  # unused past opportunities are wasted
            departure = self.trace.opportunity_us(self._trace_cursor)
            self._trace_cursor += 1
        elif self.rate_bps is not None:
            if self._queue_full(now):
                self.queue_drops += 1
                return None
            serialization = int(round(size * 8 * 1e6 / self.rate_bps))
            departure = max(now, self.busy_until) + serialization
            self.busy_until = departure
        else:
            departure = now  # pure-delay link: no queue, no serialization
        if self.rate_bps is not None or self.trace is not None:
            self._departures.append(departure)
        if self.loss_rate > 0.0 and self.rng.random() < self.loss_rate:
            self.loss_drops += 1
            return None
        self.delivered += 1
        return departure + self.delay_us


class EventKind(Enum):
    PACKET_ARRIVAL = "packet_arrival"
    TIMER_FIRE = "timer_fire"
    APP_SEND = "app_send"


@dataclass(slots=True)
class Event:
    time: int
    kind: EventKind
    payload: tuple


class EventLoop:
    """Min-heap of events ordered by (time, insertion sequence)."""

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, Event]] = []
        self._seq = 0
        self.now = 0

    def schedule(self, time: int, kind: EventKind, payload: tuple = ()) -> None:
        if time < self.now:
            raise RuntimeError(f"event scheduled in the past: {time} < {self.now}")
        heapq.heappush(self._heap, (time, self._seq, Event(time, kind, payload)))
        self._seq += 1

    def __len__(self) -> int:
        return len(self._heap)

    def peek_time(self) -> int | None:
        return self._heap[0][0] if self._heap else None

    def pop(self) -> Event | None:
        if not self._heap:
            return None
        time, _, event = heapq.heappop(self._heap)
        self.now = time
        return event
