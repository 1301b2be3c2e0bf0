"""Scenario configuration and the metrics collected from one run."""

from __future__ import annotations

from dataclasses import dataclass, field

from .congestion import CcAlgorithm
from .core import ConfigError, SpaceMode
from .netsim import LinkModel
from .receiver import RecvConfig
from .scheduler import SchedulerKind
from .sender import LossConfig


@dataclass
class ScenarioConfig:
    """Full description of one simulated transfer."""

    mode: SpaceMode
    paths: list[LinkModel]
    transfer_size: int  # bytes
    scheduler: SchedulerKind = SchedulerKind.MIN_RTT
    cc: CcAlgorithm = CcAlgorithm.CUBIC
    recv: RecvConfig = field(default_factory=RecvConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0
    duration_cap_s: float = 60.0
    # Derive a per-path cwnd ceiling (BDP plus a small queue allowance) for
    # rate-limited paths with no explicit window_packets. Acts as the
    # transfer's flow-control window.
    auto_window: bool = True

    def validate(self) -> None:
        if self.transfer_size <= 0:
            raise ConfigError("transfer_size must be positive")
        if not self.paths:
            raise ConfigError("need at least one path")
        if self.duration_cap_s <= 0:
            raise ConfigError("duration_cap_s must be positive")
        for lm in self.paths:
            try:
                lm.validate()
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
        self.recv.validate()
        try:
            self.loss.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


TimeSeries = list[tuple[float, float]]


@dataclass
class MetricsReport:
    """Everything measured in one run; deterministic per (config, seed)."""

    mode: str
    seed: int
    complete: bool
    completion_time_s: float | None
    goodput_kBps: float | None
    avg_ack_frame_size: float
    ack_frames: int
    ack_range_count_histogram: dict[int, int]
    srtt_ms: dict[int, TimeSeries]  # path -> (time_ms, smoothed rtt ms)
    rtt_samples_ms: dict[int, TimeSeries]  # path -> (time_ms, sample ms)
    mixed_samples_ms: TimeSeries  # samples whose largest came from another path
    received_pn: dict[int, list[tuple[float, int]]]  # path -> (time_ms, pn)
    hole_count: list[tuple[float, int]]  # (time_ms, holes in the arrival's space)
    packet_threshold_losses: int
    time_threshold_losses: int
    spurious_retx: int
    received_never_acked: int
    packets_sent: int
    packets_received: int

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "complete": self.complete,
            "completion_time_s": self.completion_time_s,
            "goodput_kBps": self.goodput_kBps,
            "avg_ack_frame_size": self.avg_ack_frame_size,
            "ack_frames": self.ack_frames,
            "ack_range_count_histogram": {str(k): v for k, v in self.ack_range_count_histogram.items()},
            "srtt_ms": {str(k): [list(p) for p in v] for k, v in self.srtt_ms.items()},
            "rtt_samples_ms": {str(k): [list(p) for p in v] for k, v in self.rtt_samples_ms.items()},
            "mixed_samples_ms": [list(p) for p in self.mixed_samples_ms],
            "received_pn": {str(k): [list(p) for p in v] for k, v in self.received_pn.items()},
            "hole_count": [list(p) for p in self.hole_count],
            "packet_threshold_losses": self.packet_threshold_losses,
            "time_threshold_losses": self.time_threshold_losses,
            "spurious_retx": self.spurious_retx,
            "received_never_acked": self.received_never_acked,
            "packets_sent": self.packets_sent,
            "packets_received": self.packets_received,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MetricsReport":
        def pairs(seq):
            return [tuple(p) for p in seq]

        return cls(
            mode=data["mode"],
            seed=data["seed"],
            complete=data["complete"],
            completion_time_s=data["completion_time_s"],
            goodput_kBps=data["goodput_kBps"],
            avg_ack_frame_size=data["avg_ack_frame_size"],
            ack_frames=data["ack_frames"],
            ack_range_count_histogram={int(k): v for k, v in data["ack_range_count_histogram"].items()},
            srtt_ms={int(k): pairs(v) for k, v in data["srtt_ms"].items()},
            rtt_samples_ms={int(k): pairs(v) for k, v in data["rtt_samples_ms"].items()},
            mixed_samples_ms=pairs(data["mixed_samples_ms"]),
            received_pn={int(k): pairs(v) for k, v in data["received_pn"].items()},
            hole_count=pairs(data["hole_count"]),
            packet_threshold_losses=data["packet_threshold_losses"],
            time_threshold_losses=data["time_threshold_losses"],
            spurious_retx=data["spurious_retx"],
            received_never_acked=data["received_never_acked"],
            packets_sent=data["packets_sent"],
            packets_received=data["packets_received"],
        )
