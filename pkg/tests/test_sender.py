import pytest

from mpqsim.congestion import CcAlgorithm, CongestionController
from mpqsim.core import AckFrame, AckRange, InvariantViolation, ProtocolError, SpaceMode
from mpqsim.sender import LossConfig, SenderState

FIG_PATH_OF_PN = {
    0: 1, 1: 0, 2: 0, 3: 1, 4: 1, 5: 1, 6: 0, 7: 0,
    8: 1, 9: 1, 10: 1, 11: 0, 12: 0, 13: 1, 14: 1, 15: 1,
}


def make_sender(mode=SpaceMode.SPNS, paths=2, **loss_kw):
    return SenderState(mode, paths, LossConfig(**loss_kw))


def send_fig_history(sender, size=100):
    """Interleave sends so path 0 carries {1,2,6,7,11,12}."""
    for pn in range(16):
        rec = sender.send_packet(FIG_PATH_OF_PN[pn], size, now=pn)
        assert rec.pn == pn
    return sender


def ack(space=0, largest=None, ranges=None, delay=0):
    ranges = ranges or [AckRange(largest, 0)]
    return AckFrame(space=space, largest_acked=ranges[0].largest if largest is None else largest,
                    ack_delay=delay, ranges=ranges)


# -- numbering -----------------------------------------------------------------


def test_spns_numbers_globally():
    sender = make_sender(SpaceMode.SPNS)
    pns = [sender.next_packet_number(p) for p in (0, 1, 0, 1, 0, 1)]
    assert pns == [0, 1, 2, 3, 4, 5]


def test_mpns_numbers_per_path():
    sender = make_sender(SpaceMode.MPNS)
    path0 = [sender.next_packet_number(0) for _ in range(3)]
    path1 = [sender.next_packet_number(1) for _ in range(3)]
    assert path0 == [0, 1, 2]
    assert path1 == [0, 1, 2]


def test_spns_discontinuous_path_histories():
    sender = send_fig_history(make_sender())
    assert sender.paths[0].history == [1, 2, 6, 7, 11, 12]
    assert sender.paths[1].history == [0, 3, 4, 5, 8, 9, 10, 13, 14, 15]


# -- send bookkeeping ------------------------------------------------------------


def test_bytes_in_flight_counts_eliciting_unacked():
    sender = make_sender()
    sender.send_packet(0, 500, now=0)
    sender.send_packet(0, 300, now=1)
    sender.send_packet(0, 200, now=2, ack_eliciting=False)
    assert sender.paths[0].bytes_in_flight == 800


def test_duplicate_packet_number_rejected():
    sender = make_sender()
    rec = sender.send_packet(0, 100, now=0)
    with pytest.raises(InvariantViolation):
        sender.on_packet_sent(0, rec)


# -- ack processing ----------------------------------------------------------------


def test_ack_marks_covered_and_samples_arrival_path():
    sender = send_fig_history(make_sender())
    result = sender.on_ack_received(0, ack(largest=7, ranges=[AckRange(7, 0)]), now=1000)
    assert {r.pn for r in result.newly_acked} == set(range(8))
    assert result.rtt_path == 0
    assert result.rtt_sample == 1000 - 7  # send time of pn 7 was 7
    assert sender.paths[0].largest_acked_pn == 7
    assert sender.paths[1].largest_acked_pn == 5  # largest path-1 pn below 8


def test_ack_with_already_credited_largest_gives_no_sample():
    sender = make_sender()
    sender.send_packet(0, 100, now=0)
    sender.send_packet(0, 100, now=1)
    first = sender.on_ack_received(0, ack(largest=1), now=100)
    assert first.rtt_sample is not None
    again = sender.on_ack_received(0, ack(largest=1), now=200)
    assert again.rtt_sample is None
    assert again.newly_acked == []


def test_slow_path_still_samples_after_cross_path_coverage():
    # pn 0 goes on the slow path, pn 1 on the fast one; the fast path's ACK
    # covers both first, yet the slow path's own ACK still yields its sample
    sender = make_sender()
    sender.send_packet(1, 100, now=0)  # pn 0 on path 1
    sender.send_packet(0, 100, now=10)  # pn 1 on path 0
    fast = sender.on_ack_received(0, ack(largest=1, ranges=[AckRange(1, 0)]), now=40)
    assert fast.rtt_path == 0
    slow = sender.on_ack_received(1, ack(largest=0, ranges=[AckRange(0, 0)]), now=120)
    assert slow.rtt_path == 1
    assert slow.rtt_sample == 120
    assert slow.newly_acked == []  # nothing newly acked connection-wide


def test_mismatched_largest_goes_to_mixed_bucket():
    sender = make_sender()
    sender.send_packet(0, 100, now=0)  # pn 0 on path 0
    sender.send_packet(0, 100, now=1)
    result = sender.on_ack_received(1, ack(largest=1, ranges=[AckRange(1, 0)]), now=90)
    assert result.rtt_sample is None
    assert result.mixed_sample == 89
    assert sender.mixed_samples == [(90, 89)]
    assert sender.paths[0].smoothed_rtt is None
    assert sender.paths[1].smoothed_rtt is None


def test_stale_cross_path_ack_is_of_no_use():
    sender = make_sender()
    sender.send_packet(0, 100, now=0)
    sender.send_packet(0, 100, now=1)
    sender.on_ack_received(1, ack(largest=1, ranges=[AckRange(1, 0)]), now=90)
    # a second slow-path ACK with the same largest: acked already, no sample
    result = sender.on_ack_received(1, ack(largest=1, ranges=[AckRange(1, 0)]), now=150)
    assert result.rtt_sample is None
    assert result.mixed_sample is None


def test_ack_of_non_eliciting_packet_gives_no_sample():
    sender = make_sender()
    sender.send_packet(0, 100, now=0, ack_eliciting=False)
    result = sender.on_ack_received(0, ack(largest=0), now=50)
    assert result.newly_acked and result.rtt_sample is None


def test_ack_for_never_sent_packet_is_protocol_error():
    sender = make_sender()
    sender.send_packet(0, 100, now=0)
    with pytest.raises(ProtocolError):
        sender.on_ack_received(0, ack(largest=5), now=10)


def test_mpns_ack_targets_its_space():
    sender = make_sender(SpaceMode.MPNS)
    sender.send_packet(0, 100, now=0)  # path 0 space, pn 0
    sender.send_packet(1, 100, now=5)  # path 1 space, pn 0
    result = sender.on_ack_received(0, ack(space=1, largest=0), now=100)
    # sample is attributed to the space's path, not the arrival path
    assert result.rtt_path == 1
    assert sender.paths[1].unacked == {}
    assert 0 in sender.paths[0].unacked
    with pytest.raises(ProtocolError):
        sender.on_ack_received(0, ack(space=7, largest=0), now=200)


# -- RTT estimator ------------------------------------------------------------------


def test_first_sample_initializes_estimator():
    sender = make_sender()
    ps = sender.paths[0]
    ps.update_rtt(100_000)
    assert ps.smoothed_rtt == 100_000
    assert ps.rttvar == 50_000
    assert ps.min_rtt == 100_000


def test_second_sample_updates_var_then_mean():
    ps = make_sender().paths[0]
    ps.update_rtt(100_000)
    ps.update_rtt(100_000, ack_delay=0)
    assert ps.smoothed_rtt == pytest.approx(100_000)
    assert ps.rttvar == pytest.approx(37_500)


def test_constant_samples_converge():
    ps = make_sender().paths[0]
    for _ in range(200):
        ps.update_rtt(80_000)
    assert ps.smoothed_rtt == pytest.approx(80_000, rel=1e-6)
    assert ps.rttvar == pytest.approx(0, abs=1)


def test_ack_delay_subtracted_only_above_min_rtt():
    ps = make_sender().paths[0]
    ps.update_rtt(100_000)
    # 130ms sample with 20ms delay: adjusted to 110ms
    ps.update_rtt(130_000, ack_delay=20_000)
    assert ps.smoothed_rtt == pytest.approx(0.875 * 100_000 + 0.125 * 110_000)
    # sample below min_rtt + delay is used unadjusted
    before = ps.smoothed_rtt
    ps.update_rtt(100_000, ack_delay=50_000)
    assert ps.smoothed_rtt == pytest.approx(0.875 * before + 0.125 * 100_000)


def test_min_rtt_is_a_running_minimum():
    ps = make_sender().paths[0]
    for sample in (90_000, 120_000, 75_000, 100_000):
        ps.update_rtt(sample)
    assert ps.min_rtt == 75_000


def test_non_positive_sample_rejected():
    ps = make_sender().paths[0]
    with pytest.raises(ValueError):
        ps.update_rtt(0)


# -- loss detection -------------------------------------------------------------------


def test_packet_threshold_uses_path_history():
    sender = send_fig_history(make_sender())
    result = sender.on_ack_received(0, ack(largest=11, ranges=[AckRange(11, 11)]), now=1000)
    # path 0 history [1,2,6,7,11,12]: 11 sits at index 4, so 1 and 2
    # (indices 0 and 1) are at least kPacketThreshold=3 sends behind
    assert {r.pn for r in result.lost} == {1, 2}
    assert sender.packet_threshold_losses == 2
    assert 6 in sender.paths[0].unacked and 7 in sender.paths[0].unacked


def test_connection_wide_threshold_would_misfire_but_path_rule_does_not():
    sender = send_fig_history(make_sender())
    acked_pn = 11
    k = 3
    naive_lost = {pn for pn in range(16) if pn <= acked_pn - k and pn != acked_pn}
    # the naive rule would flag path-1 packets 0,3,4,5,8 as lost
    assert {pn for pn in naive_lost if FIG_PATH_OF_PN[pn] == 1} != set()
    sender.on_ack_received(0, ack(largest=11, ranges=[AckRange(11, 11)]), now=1000)
    assert all(pn in sender.paths[1].unacked for pn in (0, 3, 4, 5, 8, 9, 10))


def test_largest_equal_to_first_send_loses_nothing():
    sender = make_sender()
    sender.send_packet(0, 100, now=0)
    sender.send_packet(0, 100, now=1)
    result = sender.on_ack_received(0, ack(largest=0, ranges=[AckRange(0, 0)]), now=100)
    assert result.lost == []


def test_time_threshold_declares_aged_packets():
    sender = make_sender()
    sender.send_packet(0, 100, now=0)  # pn 0, will age out
    sender.send_packet(0, 100, now=200_000)  # pn 1
    result = sender.on_ack_received(
        0, ack(largest=1, ranges=[AckRange(1, 1)]), now=300_000
    )
    # srtt = 100ms; cutoff = 300ms - 112.5ms; pn 0 sent at 0 is long gone
    assert [r.pn for r in result.lost] == [0]
    assert sender.time_threshold_losses == 1
    assert sender.packet_threshold_losses == 0


def test_spurious_ack_counted_once_and_flight_not_double_decremented():
    sender = make_sender()
    for i in range(5):
        sender.send_packet(0, 100, now=i)
    sender.on_ack_received(0, ack(largest=4, ranges=[AckRange(4, 4)]), now=1000)
    assert sender.packet_threshold_losses == 2  # pns 0 and 1
    assert sender.paths[0].bytes_in_flight == 200  # pns 2, 3 still out
    result = sender.on_ack_received(0, ack(largest=4, ranges=[AckRange(4, 0)]), now=2000)
    assert sorted(result.spurious) == [0, 1]
    assert {r.pn for r in result.newly_acked} == {2, 3}
    assert sender.paths[0].bytes_in_flight == 0
    assert sender.spurious_count == 2
    repeat = sender.on_ack_received(0, ack(largest=4, ranges=[AckRange(4, 0)]), now=3000)
    assert repeat.spurious == []


def test_congestion_notified_once_per_loss_event():
    cc_events = []

    class SpyCc(CongestionController):
        def on_loss(self, now):
            cc_events.append(now)
            super().on_loss(now)

    sender = SenderState(SpaceMode.SPNS, 1, LossConfig(), cc_factory=lambda p: SpyCc(CcAlgorithm.CUBIC))
    for i in range(6):
        sender.send_packet(0, 100, now=i)
    sender.on_ack_received(0, ack(largest=5, ranges=[AckRange(5, 5)]), now=1000)
    assert sender.packet_threshold_losses == 3  # pns 0,1,2 in one event
    assert len(cc_events) == 1


def test_conservation_of_bytes_in_flight():
    sender = send_fig_history(make_sender())
    def check():
        for ps in sender.paths:
            expected = sum(r.size for r in ps.unacked.values() if r.ack_eliciting)
            assert ps.bytes_in_flight == expected
    check()
    sender.on_ack_received(0, ack(largest=11, ranges=[AckRange(11, 11)]), now=1000)
    check()
    sender.on_ack_received(1, ack(largest=10, ranges=[AckRange(10, 8)]), now=2000)
    check()
    sender.on_ack_received(0, ack(largest=12, ranges=[AckRange(12, 0)]), now=3000)
    check()
