"""Drives one sender and one receiver over the simulated paths.

The transfer is one-directional: the server streams `transfer_size` bytes
split into MTU-sized packets; the client only returns ACK frames. Lost
payload is retransmitted under a fresh packet number. The run ends when
the client holds every payload byte, or at the duration cap.
"""

from __future__ import annotations

import math
import random
from collections import deque

from .congestion import CongestionController
from .core import RangeSet, ack_frame_wire_size
from .netsim import EventKind, EventLoop, LinkDirection, LinkModel
from .receiver import ArmTimer, EmitAckOnPath, ReceiverState
from .scenario import MetricsReport, ScenarioConfig
from .scheduler import Scheduler, select_path
from .sender import PathSendState, SenderState

# Sender pacing at cwnd/srtt. Window growth then cannot burst a whole
# newly-acked chunk into a droptail queue at once, and a standing queue
# raises srtt until the pacing rate settles at the bottleneck rate.
PACING_GAIN = 1.0


def auto_window_packets(link: LinkModel) -> int | None:
    """BDP plus roughly 3 ms of queue allowance, in packets.

    Keeps a rate-limited path busy while bounding droptail occupancy (and
    therefore queueing delay) well below the queue capacity.
    """
    if link.rate_mbps is None:
        return None
    rate_bps = link.rate_mbps * 1e6
    rtt_s = (link.delay_down_ms + link.delay_up_ms) / 1e3
    bdp_packets = math.ceil(rate_bps * rtt_s / (8 * link.mtu))
    headroom = max(2, int(rate_bps * 0.003 / (8 * link.mtu)))
    return bdp_packets + headroom


class Simulation:
    def __init__(self, config: ScenarioConfig):
        config.validate()
        self.config = config
        self.mode = config.mode
        n = len(config.paths)
        self.mtu = min(lm.mtu for lm in config.paths)

        self.down: list[LinkDirection] = []
        self.up: list[LinkDirection] = []
        window_bytes: list[int | None] = []
        for p, lm in enumerate(config.paths):
            self.down.append(
                LinkDirection(
                    delay_us=int(lm.delay_down_ms * 1000),
                    rate_bps=lm.rate_mbps * 1e6 if lm.rate_mbps is not None else None,
                    trace=lm.trace,
                    loss_rate=lm.loss_rate,
                    queue_capacity=lm.queue_capacity,
                    rng=random.Random(f"{config.seed}/path{p}/down"),
                )
            )
            self.up.append(
                LinkDirection(
                    delay_us=int(lm.delay_up_ms * 1000),
                    loss_rate=lm.reverse_loss_rate,
                    rng=random.Random(f"{config.seed}/path{p}/up"),
                )
            )
            window = lm.window_packets
            if window is None and config.auto_window:
                window = auto_window_packets(lm)
            window_bytes.append(window * lm.mtu if window is not None else None)

        def cc_factory(path: int) -> CongestionController:
            return CongestionController(
                config.cc, mss=config.paths[path].mtu, max_cwnd=window_bytes[path]
            )

        self.sender = SenderState(config.mode, n, config.loss, cc_factory)
        self.receiver = ReceiverState(config.mode, n, config.recv)
        self.scheduler = Scheduler(config.scheduler)
        self.loop = EventLoop()

        self.retx_queue: deque[tuple[int, int]] = deque()  # (offset, size)
        self.next_offset = 0
        self.seen_offsets: set[int] = set()
        self.delivered_bytes = 0
        self.completion_us: int | None = None

        self.packets_sent = 0
        self.packets_received = 0
        self.ack_size_sum = 0
        self.ack_frames = 0
        self.range_hist: dict[int, int] = {}
        self.ack_union = {s: RangeSet() for s in self.receiver.spaces}
        self.srtt_series: dict[int, list[tuple[float, float]]] = {p: [] for p in range(n)}
        self.rtt_samples: dict[int, list[tuple[float, float]]] = {p: [] for p in range(n)}
        self.received_pn: dict[int, list[tuple[float, int]]] = {p: [] for p in range(n)}
        self.hole_timeline: list[tuple[float, int]] = []

        self._pto_deadline: list[int | None] = [None] * n
        self._pto_scheduled = [False] * n
        self._pace_next = [0] * n
        self._wake_at: int | None = None
        self.after_event = None  # test hook: called as after_event(sim, event)

    # -- sending ---------------------------------------------------------

    def _pace_rate(self, ps: PathSendState) -> float | None:
        """Pacing rate in bytes/second, once the path has an RTT estimate."""
        if ps.smoothed_rtt is None:
            return None
        return PACING_GAIN * ps.cc.cwnd / (ps.smoothed_rtt / 1e6)

    def _send_on_path(self, path: int, size: int, offset: int, now: int) -> None:
        ps = self.sender.paths[path]
        rec = self.sender.send_packet(path, size, now, True, offset)
        self.packets_sent += 1
        rate = self._pace_rate(ps)
        if rate is not None:
            self._pace_next[path] = max(now, self._pace_next[path]) + int(size / rate * 1e6)
        arrival = self.down[path].transmit(size, now)
        if arrival is not None:
            self.loop.schedule(
                arrival, EventKind.PACKET_ARRIVAL, ("data", path, rec.pn, size, offset)
            )
        self._arm_pto(path, now)

    def _schedule_wake(self, when: int) -> None:
        if self._wake_at is None or when < self._wake_at:
            self._wake_at = when
            self.loop.schedule(when, EventKind.APP_SEND)

    def _try_send(self, now: int) -> None:
        while True:
            if self.retx_queue:
                offset, size = self.retx_queue[0]
            elif self.next_offset < self.config.transfer_size:
                offset = self.next_offset
                size = min(self.mtu, self.config.transfer_size - offset)
            else:
                return
            sendable = [ps for ps in self.sender.paths if now >= self._pace_next[ps.path]]
            path = None
            if sendable:
                path, self.scheduler.rr_cursor = select_path(
                    self.scheduler.kind, sendable, size, self.scheduler.rr_cursor
                )
            if path is None:
                # wake up when the earliest pace-blocked eligible path frees up
                wake = None
                for ps in self.sender.paths:
                    gate = self._pace_next[ps.path]
                    if now < gate and ps.bytes_in_flight + size <= ps.cc.cwnd:
                        wake = gate if wake is None else min(wake, gate)
                if wake is not None:
                    self._schedule_wake(wake)
                return
            if self.retx_queue:
                self.retx_queue.popleft()
            else:
                self.next_offset += size
            self._send_on_path(path, size, offset, now)

    # -- probe timeout ----------------------------------------------------

    def _arm_pto(self, path: int, now: int) -> None:
        ps = self.sender.paths[path]
        if not ps.unacked:
            self._pto_deadline[path] = None
            return
        deadline = now + ps.pto_interval(self.receiver.config.max_ack_delay)
        self._pto_deadline[path] = deadline
        if not self._pto_scheduled[path]:
            self.loop.schedule(deadline, EventKind.TIMER_FIRE, ("pto", path))
            self._pto_scheduled[path] = True

    def _on_pto(self, path: int, now: int) -> None:
        self._pto_scheduled[path] = False
        deadline = self._pto_deadline[path]
        ps = self.sender.paths[path]
        if deadline is None or not ps.unacked:
            return
        if now < deadline:
            self.loop.schedule(deadline, EventKind.TIMER_FIRE, ("pto", path))
            self._pto_scheduled[path] = True
            return
        # probe: resend the oldest unacked payload on this path, ignoring cwnd
        oldest = next(iter(ps.unacked.values()))
        self._send_on_path(path, oldest.size, oldest.payload_offset, now)

    # -- receiving --------------------------------------------------------

    def _record_ack_metrics(self, frame) -> int:
        wire = ack_frame_wire_size(frame, self.mode)
        self.ack_size_sum += wire
        self.ack_frames += 1
        count = len(frame.ranges)
        self.range_hist[count] = self.range_hist.get(count, 0) + 1
        union = self.ack_union[frame.space]
        for r in frame.ranges:
            union.add_range(r.smallest, r.largest)
        return wire

    def _emit_ack(self, frame, path: int, now: int) -> None:
        wire = self._record_ack_metrics(frame)
        arrival = self.up[path].transmit(wire, now)
        if arrival is not None:
            self.loop.schedule(arrival, EventKind.PACKET_ARRIVAL, ("ack", path, frame))

    def _on_data(self, path: int, pn: int, size: int, offset: int, now: int) -> None:
        self.packets_received += 1
        actions = self.receiver.on_packet_received(path, pn, now, True)
        t_ms = now / 1000
        self.received_pn[path].append((t_ms, pn))
        space = self.receiver.space_of(path)
        self.hole_timeline.append((t_ms, self.receiver.spaces[space].holes()))
        if offset not in self.seen_offsets:
            self.seen_offsets.add(offset)
            self.delivered_bytes += size
            if self.delivered_bytes >= self.config.transfer_size:
                self.completion_us = now
        for action in actions:
            if isinstance(action, EmitAckOnPath):
                frame = self.receiver.build_ack_frame(action.path, now)
                self._emit_ack(frame, action.path, now)
            elif isinstance(action, ArmTimer):
                self.loop.schedule(
                    action.deadline, EventKind.TIMER_FIRE, ("ack_timer", action.path, action.deadline)
                )

    def _on_ack_timer(self, path: int, deadline: int, now: int) -> None:
        prs = self.receiver.per_path[path]
        if prs.ack_timer_deadline != deadline or prs.ack_eliciting_since_ack == 0:
            return  # superseded by an earlier ACK
        frame = self.receiver.on_ack_timer(path, now)
        self._emit_ack(frame, path, now)

    def _on_ack(self, path: int, frame, now: int) -> None:
        result = self.sender.on_ack_received(path, frame, now)
        if result.rtt_sample is not None:
            p = result.rtt_path
            t_ms = now / 1000
            self.rtt_samples[p].append((t_ms, result.rtt_sample / 1000))
            self.srtt_series[p].append((t_ms, self.sender.paths[p].smoothed_rtt / 1000))
        for rec in result.lost:
            self.retx_queue.append((rec.payload_offset, rec.size))
        for p in sorted({rec.path for rec in result.newly_acked}):
            self._arm_pto(p, now)
        self._try_send(now)

    # -- main loop ---------------------------------------------------------

    def run(self) -> MetricsReport:
        cap_us = int(self.config.duration_cap_s * 1e6)
        self.loop.schedule(0, EventKind.APP_SEND)
        while self.completion_us is None:
            next_time = self.loop.peek_time()
            if next_time is None or next_time > cap_us:
                break
            event = self.loop.pop()
            if event.kind is EventKind.APP_SEND:
                if self._wake_at is not None and event.time >= self._wake_at:
                    self._wake_at = None
                self._try_send(event.time)
            elif event.kind is EventKind.PACKET_ARRIVAL:
                payload = event.payload
                if payload[0] == "data":
                    self._on_data(payload[1], payload[2], payload[3], payload[4], event.time)
                else:
                    self._on_ack(payload[1], payload[2], event.time)
            elif event.kind is EventKind.TIMER_FIRE:
                payload = event.payload
                if payload[0] == "ack_timer":
                    self._on_ack_timer(payload[1], payload[2], event.time)
                else:
                    self._on_pto(payload[1], event.time)
            if self.after_event is not None:
                self.after_event(self, event)
        self._flush_pending_acks()
        return self._build_report()

    def _flush_pending_acks(self) -> None:
        """Emit the ACKs whose timers were still pending when the run ended.

        The transfer stops the instant the last payload byte lands, up to
        max_ack_delay before the receiver would have acknowledged it; those
        frames still count toward ACK metrics and coverage.
        """
        now = self.loop.now
        for prs in self.receiver.per_path:
            if prs.ack_eliciting_since_ack > 0 and prs.largest_recv_pn is not None:
                frame = self.receiver.build_ack_frame(prs.path, now)
                self._record_ack_metrics(frame)

    def _build_report(self) -> MetricsReport:
        complete = self.completion_us is not None
        completion_s = self.completion_us / 1e6 if complete else None
        goodput = (self.config.transfer_size / 1000) / completion_s if complete else None
        never_acked = 0
        for space, rs in self.receiver.spaces.items():
            never_acked += rs.value_count() - rs.intersection_size(self.ack_union[space])
        return MetricsReport(
            mode=self.mode.value,
            seed=self.config.seed,
            complete=complete,
            completion_time_s=completion_s,
            goodput_kBps=goodput,
            avg_ack_frame_size=self.ack_size_sum / self.ack_frames if self.ack_frames else 0.0,
            ack_frames=self.ack_frames,
            ack_range_count_histogram=dict(sorted(self.range_hist.items())),
            srtt_ms=self.srtt_series,
            rtt_samples_ms=self.rtt_samples,
            mixed_samples_ms=[(t / 1000, s / 1000) for t, s in self.sender.mixed_samples],
            received_pn=self.received_pn,
            hole_count=self.hole_timeline,
            packet_threshold_losses=self.sender.packet_threshold_losses,
            time_threshold_losses=self.sender.time_threshold_losses,
            spurious_retx=self.sender.spurious_count,
            received_never_acked=never_acked,
            packets_sent=self.packets_sent,
            packets_received=self.packets_received,
        )
