"""Per-path congestion control: Cubic plus a basic NewReno fallback."""

from __future__ import annotations

import math
from enum import Enum

K_INITIAL_WINDOW_PACKETS = 10
K_MINIMUM_WINDOW_PACKETS = 2
K_CUBIC_C = 0.4  # packets / second^3
K_CUBIC_BETA = 0.7
K_RENO_BETA = 0.5


class CcAlgorithm(Enum):
    CUBIC = "cubic"
    NEW_RENO = "newreno"


def _cube_root(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


class CongestionController:
    """One controller per path; windows are tracked in bytes.

    `max_cwnd` acts as a flow-control style ceiling so a scenario can be
    pinned below the point where droptail queues overflow.
    """

    def __init__(
        self,
        algorithm: CcAlgorithm = CcAlgorithm.CUBIC,
        mss: int = 1350,
        max_cwnd: int | None = None,
    ) -> None:
        self.algorithm = algorithm
        self.mss = mss
        self.max_cwnd = max_cwnd
        self.cwnd: float = K_INITIAL_WINDOW_PACKETS * mss
        self.ssthresh: float = math.inf
        self.w_max: float = 0.0
        self.epoch_start: int | None = None  # microseconds
        self.recovery_start_time: int = -1
        self._reno_stash: float = 0.0
        self._clamp()

    @property
    def in_slow_start(self) -> bool:
        return self.cwnd < self.ssthresh

    def _clamp(self) -> None:
        if self.max_cwnd is not None and self.cwnd > self.max_cwnd:
            self.cwnd = float(self.max_cwnd)
        floor = K_MINIMUM_WINDOW_PACKETS * self.mss
        if self.cwnd < floor:
            self.cwnd = float(floor)

    def cubic_k(self) -> float:
        """Seconds from epoch start until the cubic curve regains w_max."""
        w_max_pkts = self.w_max / self.mss
        return _cube_root(w_max_pkts * (1.0 - K_CUBIC_BETA) / K_CUBIC_C)

    def w_cubic(self, t_seconds: float) -> float:
        """Cubic window target in bytes, t seconds after the epoch start."""
        w_max_pkts = self.w_max / self.mss
        k = self.cubic_k()
        return (K_CUBIC_C * (t_seconds - k) ** 3 + w_max_pkts) * self.mss

    def on_ack(self, acked_bytes: int, now: int) -> None:
        if self.in_slow_start:
            self.cwnd += acked_bytes
        elif self.algorithm is CcAlgorithm.CUBIC:
            if self.epoch_start is None:
                self.epoch_start = now
            t = (now - self.epoch_start) / 1e6
            target = self.w_cubic(t)
            if target > self.cwnd:
                # grow toward the cubic curve, at most ack-clocked
                self.cwnd = min(target, self.cwnd + acked_bytes)
        else:
            self._reno_stash += acked_bytes
            increments = int(self._reno_stash // self.cwnd)
            if increments:
                self._reno_stash -= increments * self.cwnd
                self.cwnd += increments * self.mss
        self._clamp()

    def on_loss(self, now: int) -> None:
        """Multiplicative decrease; the caller gates this to once per loss event."""
        self.recovery_start_time = now
        beta = K_CUBIC_BETA if self.algorithm is CcAlgorithm.CUBIC else K_RENO_BETA
        self.w_max = self.cwnd
        self.cwnd = self.cwnd * beta
        self.ssthresh = self.cwnd
        self.epoch_start = None
        self._reno_stash = 0.0
        self._clamp()
