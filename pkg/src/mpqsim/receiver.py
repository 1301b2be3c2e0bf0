"""Receiver-side (ACK sender) state machine.

Each path keeps its own ack-eliciting counter and ack timer, and ACK frames
are always sent back on the path that triggered them, anchored at that
path's largest received packet number. Range suppression trims frames to a
soft Default_Limit, extending only as far as needed to cover packets not
yet acknowledged by any frame, and never past Maximum_Limit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .core import AckFrame, AckRange, ConfigError, RangeSet, SpaceMode


@dataclass(slots=True)
class RecvConfig:
    ack_eliciting_threshold: int = 2
    max_ack_delay: int = 25_000  # microseconds
    suppression_enabled: bool = False
    default_limit: int = 4
    maximum_limit: int = 64
    # When False (ablation), frames are anchored at the space's largest packet
    # regardless of which path received it, reproducing the scheduler-coupled
    # RTT attribution problem.
    per_path_anchoring: bool = True

    def validate(self) -> None:
        if self.ack_eliciting_threshold < 1:
            raise ConfigError("ack_eliciting_threshold must be >= 1")
        if not (1 <= self.default_limit <= self.maximum_limit):
            raise ConfigError("need 1 <= default_limit <= maximum_limit")


class EmitAckOnPath(NamedTuple):
    path: int


class ArmTimer(NamedTuple):
    path: int
    deadline: int  # microseconds


Action = EmitAckOnPath | ArmTimer


@dataclass(slots=True)
class PathRecvState:
    path: int
    largest_recv_pn: int | None = None
    largest_recv_time: int = 0
    ack_eliciting_since_ack: int = 0
    ack_timer_deadline: int | None = None


def apply_range_limits(
    ranges: list[AckRange],
    default_limit: int,
    maximum_limit: int,
    must_cover: set[int],
) -> list[AckRange]:
    """Trim a descending range list to the two suppression limits.

    Keeps the newest `default_limit` ranges, extending the prefix just far
    enough to cover every packet number in `must_cover`, but never beyond
    `maximum_limit` ranges.
    """
    if default_limit < 1:
        raise ConfigError("default_limit must be >= 1")
    if len(ranges) <= default_limit:
        return ranges
    needed = default_limit
    for pn in must_cover:
        for idx, r in enumerate(ranges):
            if r.smallest <= pn <= r.largest:
                if idx + 1 > needed:
                    needed = idx + 1
                break
    return ranges[: min(needed, maximum_limit)]


class ReceiverState:
    """Tracks received packet numbers per space and drives ACK emission."""

    def __init__(self, mode: SpaceMode, num_paths: int, config: RecvConfig | None = None):
        if num_paths < 1:
            raise ConfigError("need at least one path")
        self.mode = mode
        self.config = config or RecvConfig()
        self.config.validate()
        self.num_paths = num_paths
        if mode is SpaceMode.SPNS:
            self.spaces: dict[int, RangeSet] = {0: RangeSet()}
        else:
            self.spaces = {p: RangeSet() for p in range(num_paths)}
        self.per_path = [PathRecvState(p) for p in range(num_paths)]
        # receive time of each space's largest packet, for ablation-mode delay
        self._space_largest_time: dict[int, int] = {s: 0 for s in self.spaces}
        # per path: packets received on it since it last emitted an ACK; the
        # must_cover set for suppression. Every packet is covered at least
        # once by its own arrival path's next frame.
        self._since_last_ack: list[set[int]] = [set() for _ in range(num_paths)]

    def space_of(self, path: int) -> int:
        return 0 if self.mode is SpaceMode.SPNS else path

    def _check_path(self, path: int) -> None:
        if not (0 <= path < self.num_paths):
            raise ValueError(f"unknown path {path}")

    def on_packet_received(
        self, path: int, pn: int, now: int, ack_eliciting: bool = True
    ) -> list[Action]:
        """Record an arrival; returns ACK emission / timer actions to perform."""
        self._check_path(path)
        space = self.space_of(path)
        rs = self.spaces[space]
        if pn in rs:
            return []  # duplicate: ignore without resetting timers
        prev_max = rs.max_value()
        # late or gap-creating arrivals; the first packet of a space is in order
        out_of_order = prev_max is not None and pn != prev_max + 1
        rs.insert(pn)
        if prev_max is None or pn > prev_max:
            self._space_largest_time[space] = now
        prs = self.per_path[path]
        if prs.largest_recv_pn is None or pn > prs.largest_recv_pn:
            prs.largest_recv_pn = pn
            prs.largest_recv_time = now
        self._since_last_ack[path].add(pn)
        if not ack_eliciting:
            return []
        prs.ack_eliciting_since_ack += 1
        emit = prs.ack_eliciting_since_ack >= self.config.ack_eliciting_threshold
        if out_of_order and not self.config.suppression_enabled:
            emit = True
        if emit:
            prs.ack_eliciting_since_ack = 0
            prs.ack_timer_deadline = None
            return [EmitAckOnPath(path)]
        if prs.ack_timer_deadline is None:
            prs.ack_timer_deadline = now + self.config.max_ack_delay
            return [ArmTimer(path, prs.ack_timer_deadline)]
        return []

    def build_ack_frame(self, path: int, now: int) -> AckFrame:
        """Build the ACK frame this path would send right now.

        Anchored at the path's largest received packet number; ranges above
        it belong to the other paths' frames. Resets the path's eliciting
        counter and timer.
        """
        self._check_path(path)
        prs = self.per_path[path]
        if prs.largest_recv_pn is None:
            raise ValueError(f"no packets received on path {path}")
        space = self.space_of(path)
        rs = self.spaces[space]
        if self.config.per_path_anchoring:
            largest = prs.largest_recv_pn
            ack_delay = now - prs.largest_recv_time
        else:
            largest = rs.max_value()
            ack_delay = now - self._space_largest_time[space]
        ranges: list[AckRange] = []
        for r in rs.descending():
            if r.smallest > largest:
                continue
            ranges.append(AckRange(min(r.largest, largest), r.smallest))
        pending = self._since_last_ack[path]
        if self.config.suppression_enabled:
            must_cover = {pn for pn in pending if pn <= largest}
            ranges = apply_range_limits(
                ranges, self.config.default_limit, self.config.maximum_limit, must_cover
            )
            # Anything Maximum_Limit forced us to leave uncovered stays pending
            # so a later frame retries it; everything else restarts fresh.
            leftover = {
                pn
                for pn in must_cover
                if not any(r.smallest <= pn <= r.largest for r in ranges)
            }
            pending.clear()
            pending.update(leftover)
        else:
            pending.clear()
        prs.ack_eliciting_since_ack = 0
        prs.ack_timer_deadline = None
        return AckFrame(space=space, largest_acked=largest, ack_delay=ack_delay, ranges=ranges)

    def on_ack_timer(self, path: int, now: int) -> AckFrame:
        """Handle an expired ack timer by emitting the pending ACK."""
        self._check_path(path)
        prs = self.per_path[path]
        if prs.ack_timer_deadline is None or prs.ack_eliciting_since_ack == 0:
            raise ValueError(f"no ack timer pending on path {path}")
        if now < prs.ack_timer_deadline:
            raise ValueError(f"ack timer on path {path} has not expired")
        return self.build_ack_frame(path, now)
