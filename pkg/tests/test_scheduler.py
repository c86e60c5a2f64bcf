import dataclasses
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from docasim.model import Direction, RbIndex, ScenarioConfig
from docasim.scheduler import (Assignment, DropReason, Occurrence, Role, SaEntry, Schedule,
                               SchedulingRequest, emit_sa, generate_occurrences, release_on_exit,
                               run_batches, schedule_request, try_assign, validate_schedule)
from oracles import schedule_violations

CFG = ScenarioConfig()
OUT_OF_RANGE = DropReason.RX_PREDICTED_OUT_OF_RANGE
CONGESTED = DropReason.PREDICTED_INTERFERENCE_OR_HALF_DUPLEX_OR_DELAY


def req(tx, rx, tx_entry=0.0, rx_entry=None, v_tx=30.0, v_rx=None, period=0.25, order=0,
        direction=Direction.FORWARD, receipt=None):
    rx_entry = tx_entry + 1.0 if rx_entry is None else rx_entry
    return SchedulingRequest(tx, rx, direction, tx_entry, rx_entry, v_tx,
                             v_tx if v_rx is None else v_rx, period, order,
                             tx_entry if receipt is None else receipt)


def place(schedule, occ):
    decision = try_assign(occ, schedule, schedule.config)
    schedule.record(occ, decision)
    return decision


class TestGenerateOccurrences:
    def test_full_traverse(self):
        occs = generate_occurrences(req(1, 2), CFG)
        assert [o.requested_tti for o in occs] == list(range(134))
        assert [o.sequence_number for o in occs] == list(range(134))

    def test_period_three_ttis(self):
        occs = generate_occurrences(req(1, 2, period=0.75), CFG)
        assert [o.requested_tti for o in occs] == list(range(0, 134, 3))

    def test_degenerate_window(self):
        cfg = ScenarioConfig(doca_length_m=10.0)
        occs = generate_occurrences(req(1, 2, period=0.75), cfg)
        assert [o.requested_tti for o in occs] == [0]

    def test_entry_snaps_up_to_grid(self):
        occs = generate_occurrences(req(1, 2, tx_entry=0.1), CFG)
        assert occs[0].requested_tti == 1

    def test_reverse_direction_same_window(self):
        fwd = generate_occurrences(req(1, 2), CFG)
        rev = generate_occurrences(req(1, 2, direction=Direction.REVERSE), CFG)
        assert [o.requested_tti for o in fwd] == [o.requested_tti for o in rev]

    def test_rejects_off_grid_period(self):
        with pytest.raises(ValueError):
            generate_occurrences(req(1, 2, period=0.3), CFG)


class TestTryAssign:
    def test_empty_grid_first_fit(self):
        s = Schedule(CFG)
        occ = Occurrence(req(1, 2, rx_entry=50 / 30), 0, 10)
        d = try_assign(occ, s, CFG)
        assert d == Assignment(occ, RbIndex(10, 0), 0)
        assert not s.log  # pure query

    def test_rx_predicted_far(self):
        s = Schedule(CFG)
        occ = Occurrence(req(1, 2, rx_entry=3.0), 0, 0)  # 90 m gap
        assert try_assign(occ, s, CFG) is OUT_OF_RANGE

    def test_out_of_range_only_after_push_is_congestion(self):
        # rx falls behind: in range at TTI 0, out of range from TTI 1 on
        s = Schedule(CFG)
        blocker = Occurrence(req(1, 9, rx_entry=0.1, order=0), 0, 0)
        place(s, blocker)
        occ = Occurrence(req(1, 2, rx_entry=70.0, v_rx=1.0, order=1), 0, 0)  # 70 m, then 77.25 m
        assert try_assign(occ, s, CFG) is CONGESTED

    def test_half_duplex_per_tti(self):
        s = Schedule(CFG)
        place(s, Occurrence(req(1, 2, order=0), 0, 0))
        # vehicle 2 already receives in TTI 0, it cannot transmit on another subchannel
        d = place(s, Occurrence(req(2, 3, tx_entry=1.0, rx_entry=2.0, order=1), 0, 0))
        assert d.rb == RbIndex(1, 0) and d.delay_ttis == 1

    def test_reuse_beyond_d(self):
        s = Schedule(CFG)
        place(s, Occurrence(req(1, 2, order=0), 0, 40))  # around x=270..300 at TTI 40
        far = place(s, Occurrence(req(3, 4, direction=Direction.REVERSE, order=1), 0, 40))
        assert far.rb == RbIndex(40, 0)

    def test_constraint_iv_tx_near_foreign_rx(self):
        s = Schedule(CFG)
        place(s, Occurrence(req(1, 2, tx_entry=0.0, rx_entry=2.0), 0, 20))  # tx 150, rx 90 at t=5
        # new tx at 60 is within d of rx 90 but its rx at 0 is far from tx 150
        d = place(s, Occurrence(req(3, 4, tx_entry=3.0, rx_entry=5.0, order=1), 0, 20))
        assert d.rb == RbIndex(20, 1)

    def test_single_domain_one_subchannel_no_delay(self):
        cfg = ScenarioConfig(doca_length_m=100.0, subchannel_count=1, max_delay_s=0.0)
        s = Schedule(cfg)
        a = place(s, Occurrence(req(1, 2, v_tx=1.0, rx_entry=0.5), 0, 0))
        b = place(s, Occurrence(req(3, 4, v_tx=1.0, tx_entry=0.0, rx_entry=0.5, order=1), 0, 0))
        assert isinstance(a, Assignment)
        assert b is CONGESTED

    def test_delay_bound_inclusive(self):
        cfg = ScenarioConfig(doca_length_m=100.0, subchannel_count=1)
        s = Schedule(cfg)
        decisions = [place(s, Occurrence(req(2 * i, 2 * i + 1, v_tx=1.0, rx_entry=0.5, order=i), 0, 0))
                     for i in range(6)]
        assert [d.delay_ttis for d in decisions[:5]] == [0, 1, 2, 3, 4]
        assert decisions[5] is CONGESTED


class TestThreeLinkWalkthrough:
    """Three links in one collision domain, F = 2, replaying the grid walk-through."""

    def build(self):
        cfg = ScenarioConfig(doca_length_m=100.0, interference_range_m=200.0, subchannel_count=2)
        a = req(1, 2, v_tx=1.0, rx_entry=0.5, period=0.5, order=0)
        b = req(3, 4, v_tx=1.0, rx_entry=0.5, order=1)
        c = req(5, 6, v_tx=1.0, rx_entry=0.5, period=0.75, order=2)
        plan = [(a, [0, 2, 4]), (b, [1, 2, 3, 4]), (c, [1, 4])]
        s = Schedule(cfg)
        out = {}
        for r, ttis in plan:
            for n, tti in enumerate(ttis):
                out[(r.tx_vehicle_id, n)] = place(s, Occurrence(r, n, tti))
        return s, out

    def test_grid(self):
        s, out = self.build()
        cells = {k: (v.rb.tti_index, v.rb.subchannel_index) for k, v in out.items()}
        assert [cells[(1, n)] for n in range(3)] == [(0, 0), (2, 0), (4, 0)]
        assert cells[(3, 1)] == (2, 1)           # second B message moves to f1
        assert cells[(5, 1)] == (5, 0)           # second C message waits one TTI
        assert out[(5, 1)].delay_ttis == 1
        assert schedule_violations(s, s.config) == []


class TestRunBatches:
    def test_same_batch_processed_in_arrival_order(self):
        cfg = ScenarioConfig(doca_length_m=100.0, subchannel_count=1, max_delay_s=0.0)
        r1 = req(1, 2, v_tx=1.0, rx_entry=0.5, order=0, receipt=0.1)
        r2 = req(3, 4, v_tx=1.0, rx_entry=0.5, order=1, receipt=0.2)
        s, drops = run_batches([r2, r1], cfg)
        assert s.log[0][0].request is r1
        assert isinstance(s.log[0][1], Assignment)
        assert [d for _, d in drops][0] is CONGESTED

    def test_swapping_order_flips_winner(self):
        cfg = ScenarioConfig(doca_length_m=100.0, subchannel_count=1, max_delay_s=0.0)
        r1 = req(1, 2, v_tx=1.0, rx_entry=0.5, order=0, receipt=0.1)
        r2 = req(3, 4, v_tx=1.0, rx_entry=0.5, order=1, receipt=0.2)
        s, _ = run_batches([r1, r2], cfg)
        winners = {a.occurrence.request.tx_vehicle_id for a in s.active.values()}
        swapped = [dataclasses.replace(r1, arrival_order=1), dataclasses.replace(r2, arrival_order=0)]
        s2, _ = run_batches(swapped, cfg)
        winners2 = {a.occurrence.request.tx_vehicle_id for a in s2.active.values() if a.rb.tti_index == 0}
        assert {a.occurrence.request.tx_vehicle_id for a in s.active.values() if a.rb.tti_index == 0} == {1}
        assert winners2 == {3}
        assert 1 in winners

    def test_singleton_is_fold_of_try_assign(self):
        r = req(1, 2, rx_entry=2.0, period=0.5)
        s, _ = run_batches([r], CFG)
        manual = Schedule(CFG)
        for occ in generate_occurrences(r, CFG):
            place(manual, occ)
        assert s.log == manual.log

    def test_deterministic(self):
        reqs = random_requests(random.Random(3), 25)
        a, _ = run_batches(reqs, CFG)
        b, _ = run_batches(list(reversed(reqs)), CFG)
        assert a.log == b.log

    def test_exit_releases_are_interleaved(self):
        cfg = ScenarioConfig(doca_length_m=100.0, subchannel_count=1, max_delay_s=0.0)
        first = req(1, 2, v_tx=1.0, rx_entry=0.5, order=0, receipt=0.0)
        later = req(3, 4, tx_entry=20.0, rx_entry=20.5, v_tx=1.0, order=1, receipt=20.0)
        s, _ = run_batches([first, later], cfg)
        early = [d for o, d in s.log if o.request is later and o.requested_tti < 400]
        assert early and all(not isinstance(d, Assignment) for d in early)
        s2, _ = run_batches([first, later], cfg, exit_times={1: 10.0})
        early = [d for o, d in s2.log if o.request is later and o.requested_tti < 400]
        assert all(isinstance(d, Assignment) for d in early)


def random_requests(rng, n, l=1000.0):
    out = []
    t = 0.0
    for i in range(n):
        t += rng.expovariate(3.0)
        direction = rng.choice(list(Direction))
        out.append(req(10 * i, 10 * i + 1, tx_entry=t, rx_entry=t + rng.uniform(0.1, 3.0),
                       v_tx=rng.uniform(5, 45), v_rx=rng.uniform(5, 45),
                       period=rng.choice([0.25, 0.5, 0.75]), order=i, direction=direction))
    return out


class TestProperties:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 30))
    def test_validity(self, seed, n):
        s, _ = run_batches(random_requests(random.Random(seed), n), CFG)
        assert schedule_violations(s, CFG) == []
        assert validate_schedule(s) == []

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6), st.integers(2, 20))
    def test_adding_a_request_keeps_earlier_decisions(self, seed, n):
        reqs = random_requests(random.Random(seed), n)
        head, _ = run_batches(reqs[:-1], CFG)
        full, _ = run_batches(reqs, CFG)
        assert full.log[:len(head.log)] == head.log

    def test_unbounded_subchannels_single_pair(self):
        cfg = ScenarioConfig(subchannel_count=1000)
        s, drops = run_batches([req(1, 2, rx_entry=1.0)], cfg)
        assert not drops
        assert all(a.delay_ttis == 0 for a in s.active.values())

    def test_collision_domain_within_d_is_single_occupancy(self):
        cfg = ScenarioConfig(doca_length_m=70.0, interference_range_m=75.0, subchannel_count=3)
        rng = random.Random(5)
        reqs = random_requests(rng, 15, l=70.0)
        s, _ = run_batches(reqs, cfg)
        inside = [c for (tti, _), c in s.cells.items()
                  if all(0 <= e.tx_pos <= 70 and 0 <= e.rx_pos <= 70 for e in c)]
        assert inside and all(len(c) == 1 for c in inside)


class TestRelease:
    def setup_schedule(self):
        s = Schedule(CFG)
        r = req(1, 2, rx_entry=1.0)
        s.register(1)
        s.register(2)
        for tti in (38, 44):
            place(s, Occurrence(r, tti, tti))
        return s

    def test_cutoff(self):
        s = self.setup_schedule()
        freed = release_on_exit(s, 1, 10.0)  # exit TTI 40
        assert [a.rb.tti_index for a in freed] == [44]
        assert [a.rb.tti_index for a in s.assignments_of(1)] == [38]
        assert (1, 44) not in s.activity and (2, 44) not in s.activity
        assert (44, 0) not in s.cells

    def test_no_future_assignments_is_noop(self):
        s = self.setup_schedule()
        before = dict(s.active)
        assert release_on_exit(s, 1, 20.0) == []
        assert s.active == before

    def test_unknown_vehicle(self):
        with pytest.raises(KeyError):
            release_on_exit(self.setup_schedule(), 99, 1.0)
        with pytest.raises(KeyError):
            emit_sa(self.setup_schedule(), 99)

    def test_freed_rb_reused_and_no_readmission(self):
        cfg = ScenarioConfig(doca_length_m=100.0, subchannel_count=1, max_delay_s=0.0)
        s = Schedule(cfg)
        a = req(1, 2, v_tx=1.0, rx_entry=0.5, order=0)
        b = req(3, 4, v_tx=1.0, rx_entry=0.5, order=1)
        place(s, Occurrence(a, 0, 8))
        assert place(s, Occurrence(b, 0, 8)) is CONGESTED
        release_on_exit(s, 1, 1.0)
        assert s.drops()[0][0].request is b  # the drop stands
        c = req(5, 6, v_tx=1.0, rx_entry=0.5, order=2)
        assert place(s, Occurrence(c, 0, 8)).rb == RbIndex(8, 0)


class TestEmitSa:
    def test_single_and_mirrored(self):
        s = Schedule(CFG)
        place(s, Occurrence(req(1, 2), 0, 3))
        assert emit_sa(s, 1) == [SaEntry(3, 0, Role.TX, 2)]
        assert emit_sa(s, 2) == [SaEntry(3, 0, Role.RX, 1)]

    def test_sorted_and_release_aware(self):
        s = Schedule(CFG)
        schedule_request(req(1, 2, rx_entry=1.0, period=0.5), s, CFG)
        sa = emit_sa(s, 2)
        assert [e.tti_index for e in sa] == sorted(e.tti_index for e in sa)
        release_on_exit(s, 1, 10.0)
        assert max(e.tti_index for e in emit_sa(s, 2)) <= 40
        assert [(e.tti_index, e.subchannel_index) for e in emit_sa(s, 1)] == \
            [(e.tti_index, e.subchannel_index) for e in emit_sa(s, 2)]
