"""Sender-side (ACK receiver) state machine.

Numbering follows the configured space mode: one shared counter, or one
counter per path. Every packet is indexed both in its number space and in
its path's send history, so loss detection can use per-path packet-count
and time thresholds instead of raw packet-number arithmetic.

RTT samples are credited per path: an ACK only yields a sample for the
path it arrived on (or the space it names), and only when its largest
acknowledged packet has not already been covered by an earlier ACK from
that same path. Samples whose largest was sent on a different path than
the one that carried the ACK land in a mixed bucket instead of any path's
smoothed estimate; with per-path anchored ACKs this never happens.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

from .congestion import CcAlgorithm, CongestionController
from .core import (
    AckFrame,
    InvariantViolation,
    ProtocolError,
    RangeSet,
    SentPacketRecord,
    SpaceMode,
)

K_INITIAL_RTT = 333_000  # microseconds, used for PTO before the first sample


@dataclass(slots=True)
class LossConfig:
    packet_threshold: int = 3
    time_threshold_num: int = 9
    time_threshold_den: int = 8
    granularity: int = 1_000  # microseconds

    def validate(self) -> None:
        if self.packet_threshold < 1:
            raise ValueError("packet_threshold must be >= 1")


@dataclass(slots=True)
class AckProcessResult:
    newly_acked: list[SentPacketRecord]
    rtt_sample: int | None = None
    rtt_path: int | None = None
    mixed_sample: int | None = None
    lost: list[SentPacketRecord] = field(default_factory=list)
    spurious: list[int] = field(default_factory=list)


class PathSendState:
    """Per-path sending history, unacked packets, RTT estimate, and cwnd."""

    def __init__(self, path: int, cc: CongestionController):
        self.path = path
        self.history: list[int] = []  # packet numbers in send order
        self.history_index: dict[int, int] = {}
        self.unacked: dict[int, SentPacketRecord] = {}  # insertion = send order
        self.largest_acked_pn: int | None = None
        self.largest_acked_index: int = -1
        self.latest_rtt: int | None = None
        self.smoothed_rtt: float | None = None
        self.rttvar: float | None = None
        self.min_rtt: int | None = None
        self.bytes_in_flight: int = 0
        self.cc = cc
        # packet numbers covered so far by ACKs credited to this path
        self.credited = RangeSet()

    def update_rtt(self, sample: int, ack_delay: int = 0) -> None:
        """Fold one RTT sample into latest/min/smoothed/rttvar."""
        if sample <= 0:
            raise ValueError(f"non-positive RTT sample: {sample}")
        self.latest_rtt = sample
        if self.smoothed_rtt is None:
            self.min_rtt = sample
            self.smoothed_rtt = float(sample)
            self.rttvar = sample / 2
            return
        self.min_rtt = min(self.min_rtt, sample)
        adjusted = sample
        if sample >= self.min_rtt + ack_delay:
            adjusted = sample - ack_delay
        self.rttvar = 0.75 * self.rttvar + 0.25 * abs(self.smoothed_rtt - adjusted)
        self.smoothed_rtt = 0.875 * self.smoothed_rtt + 0.125 * adjusted

    def pto_interval(self, max_ack_delay: int) -> int:
        srtt = self.smoothed_rtt if self.smoothed_rtt is not None else K_INITIAL_RTT
        var = self.rttvar if self.rttvar is not None else K_INITIAL_RTT / 2
        return int(srtt + 4 * var + max_ack_delay)


class _SpaceState:
    __slots__ = ("next_pn", "unacked", "lost", "records")

    def __init__(self) -> None:
        self.next_pn = 0
        self.unacked: dict[int, SentPacketRecord] = {}  # ascending pn
        self.lost: dict[int, SentPacketRecord] = {}
        self.records: dict[int, SentPacketRecord] = {}


class SenderState:
    """Connection-level sender: numbering, ack processing, loss detection."""

    def __init__(
        self,
        mode: SpaceMode,
        num_paths: int,
        loss_config: LossConfig | None = None,
        cc_factory=None,
    ):
        if num_paths < 1:
            raise ValueError("need at least one path")
        self.mode = mode
        self.loss_config = loss_config or LossConfig()
        self.loss_config.validate()
        if cc_factory is None:
            cc_factory = lambda path: CongestionController(CcAlgorithm.CUBIC)
        self.paths = [PathSendState(p, cc_factory(p)) for p in range(num_paths)]
        if mode is SpaceMode.SPNS:
            self._spaces = {0: _SpaceState()}
        else:
            self._spaces = {p: _SpaceState() for p in range(num_paths)}
        self.packet_threshold_losses = 0
        self.time_threshold_losses = 0
        self.spurious_count = 0
        self.mixed_samples: list[tuple[int, int]] = []  # (ack time, sample)

    def space_of(self, path: int) -> int:
        return 0 if self.mode is SpaceMode.SPNS else path

    def next_packet_number(self, path: int) -> int:
        sp = self._spaces[self.space_of(path)]
        pn = sp.next_pn
        sp.next_pn += 1
        return pn

    def on_packet_sent(self, path: int, record: SentPacketRecord) -> None:
        sp = self._spaces[self.space_of(path)]
        if record.pn in sp.records:
            raise InvariantViolation(f"packet number {record.pn} reused")
        sp.records[record.pn] = record
        sp.unacked[record.pn] = record
        if record.pn >= sp.next_pn:
            sp.next_pn = record.pn + 1
        ps = self.paths[path]
        ps.history.append(record.pn)
        ps.history_index[record.pn] = record.path_history_index
        ps.unacked[record.pn] = record
        if record.ack_eliciting:
            ps.bytes_in_flight += record.size

    def send_packet(
        self,
        path: int,
        size: int,
        now: int,
        ack_eliciting: bool = True,
        payload_offset: int = 0,
    ) -> SentPacketRecord:
        """Allocate the next packet number on `path` and register the send."""
        ps = self.paths[path]
        record = SentPacketRecord(
            pn=self.next_packet_number(path),
            path=path,
            send_time=now,
            size=size,
            ack_eliciting=ack_eliciting,
            path_history_index=len(ps.history),
            payload_offset=payload_offset,
        )
        self.on_packet_sent(path, record)
        return record

    def on_ack_received(self, arrival_path: int, frame: AckFrame, now: int) -> AckProcessResult:
        frame.validate()
        if self.mode is SpaceMode.SPNS:
            space = 0
            credit_path = arrival_path
        else:
            space = frame.space
            credit_path = frame.space
        sp = self._spaces.get(space)
        if sp is None:
            raise ProtocolError(f"ACK names unknown space {frame.space}")
        if frame.largest_acked >= sp.next_pn:
            raise ProtocolError(
                f"ACK covers never-sent packet {frame.largest_acked} in space {space}"
            )
        largest_record = sp.records.get(frame.largest_acked)
        if largest_record is None:
            raise ProtocolError(f"ACK largest {frame.largest_acked} was never sent")

        credit = self.paths[credit_path].credited
        largest_newly_for_path = frame.largest_acked not in credit

        ascending = frame.ranges[::-1]
        newly: list[SentPacketRecord] = []
        ri = 0
        n_ranges = len(ascending)
        for pn, rec in sp.unacked.items():
            while ri < n_ranges and ascending[ri].largest < pn:
                ri += 1
            if ri == n_ranges:
                break
            if ascending[ri].smallest <= pn:
                newly.append(rec)

        spurious: list[int] = []
        if sp.lost:
            lows = [r.smallest for r in ascending]
            for pn in list(sp.lost):
                i = bisect.bisect_right(lows, pn) - 1
                if i >= 0 and ascending[i].largest >= pn:
                    spurious.append(pn)
                    del sp.lost[pn]
            self.spurious_count += len(spurious)

        acked_bytes_by_path: dict[int, int] = {}
        for rec in newly:
            del sp.unacked[rec.pn]
            ps = self.paths[rec.path]
            del ps.unacked[rec.pn]
            if rec.ack_eliciting:
                ps.bytes_in_flight -= rec.size
            if ps.largest_acked_pn is None or rec.pn > ps.largest_acked_pn:
                ps.largest_acked_pn = rec.pn
                ps.largest_acked_index = rec.path_history_index
            acked_bytes_by_path[rec.path] = acked_bytes_by_path.get(rec.path, 0) + rec.size
        for path, acked in acked_bytes_by_path.items():
            self.paths[path].cc.on_ack(acked, now)

        result = AckProcessResult(newly_acked=newly, spurious=spurious)
        eliciting_newly = any(r.ack_eliciting for r in newly) or (
            largest_newly_for_path and largest_record.ack_eliciting
        )
        if largest_newly_for_path and eliciting_newly:
            sample = now - largest_record.send_time
            if largest_record.path == credit_path:
                self.paths[credit_path].update_rtt(sample, frame.ack_delay)
                result.rtt_sample = sample
                result.rtt_path = credit_path
            else:
                self.mixed_samples.append((now, sample))
                result.mixed_sample = sample
        for r in frame.ranges:
            credit.add_range(r.smallest, r.largest)

        for path in sorted(acked_bytes_by_path):
            result.lost.extend(self.detect_losses(path, now))
        return result

    def detect_losses(self, path: int, now: int) -> list[SentPacketRecord]:
        """Declare per-path losses by packet count and time thresholds.

        A packet is lost when the path's largest acked packet was sent at
        least `packet_threshold` sends after it, or when it was sent before
        the largest acked and has aged past 9/8 of the path's RTT.
        """
        ps = self.paths[path]
        if ps.largest_acked_pn is None:
            return []
        i = ps.largest_acked_index
        k = self.loss_config.packet_threshold
        cfg = self.loss_config
        rtt_basis = max(ps.smoothed_rtt or 0, ps.latest_rtt or 0)
        time_cutoff = None
        if rtt_basis > 0:
            delay = max(rtt_basis * cfg.time_threshold_num / cfg.time_threshold_den, cfg.granularity)
            time_cutoff = now - delay
        lost: list[tuple[SentPacketRecord, bool]] = []
        for rec in ps.unacked.values():
            idx = rec.path_history_index
            if idx >= i:
                break  # sent at or after the largest acked packet
            if idx <= i - k:
                lost.append((rec, True))
            elif time_cutoff is not None and rec.send_time <= time_cutoff:
                lost.append((rec, False))
        sp = self._spaces[self.space_of(path)]
        out = []
        for rec, by_count in lost:
            del ps.unacked[rec.pn]
            del sp.unacked[rec.pn]
            sp.lost[rec.pn] = rec
            if rec.ack_eliciting:
                ps.bytes_in_flight -= rec.size
            if by_count:
                self.packet_threshold_losses += 1
            else:
                self.time_threshold_losses += 1
            if rec.send_time > ps.cc.recovery_start_time:
                ps.cc.on_loss(now)
            out.append(rec)
        return out
