"""Admission policies: load history, worst-case projection, decision order."""
import math

import pytest
from hypothesis import given, settings, strategies as st

from vodsim.admission import (
    POLICIES,
    AdmissionDecision,
    LoadHistory,
    decide_deterministic,
    decide_pic,
    decide_prefix_pic_multicast,
    decide_statistical,
    record_round_load,
    worst_case_check,
)
from vodsim.cache import IntervalEntry
from vodsim.disk import ActiveStream, DiskParams, admission_feasible
from vodsim.multicast import Batch
from vodsim.workload import Request


def req(rid=0, video=0, t=0.0, rate=300000.0, deadline=None):
    return Request(id=rid, video_id=video, arrival_time=t, bit_rate=rate,
                   deadline=deadline if deadline is not None else t + 30.0,
                   watch_blocks=200)


class FakeServer:
    """Duck-typed server view the decision functions consume."""

    def __init__(self, committed_streams=0, committed_frames=0.0,
                 network_free_bps=1e9, batch=None, prefix=False,
                 interval=None, allocatable=True, cached_ahead=0.0,
                 frames_total=5000.0, history=None, epsilon=0.05):
        self.committed_streams = committed_streams
        self.committed_frames = committed_frames
        self.network_free_bps = network_free_bps
        self.frames_per_block = 25
        self.disk = DiskParams()
        self.round_s = 1.0
        self.load_history = history if history is not None else LoadHistory()
        self.epsilon = epsilon
        self._batch = batch
        self._prefix = prefix
        self._interval = interval
        self._allocatable = allocatable
        self._cached_ahead = cached_ahead
        self._frames_total = frames_total

    def open_batch_for(self, video_id):
        if self._batch is not None and self._batch.video_id == video_id:
            return self._batch
        return None

    def prefix_resident(self, video_id):
        return self._prefix

    def interval_candidate(self, request):
        return self._interval

    def interval_allocatable(self, entry):
        return self._allocatable

    def video_frames(self, video_id):
        return self._frames_total

    def cached_frames_ahead(self, video_id):
        return self._cached_ahead


class TestLoadHistory:
    def test_quantile_is_order_statistic(self):
        h = LoadHistory()
        for r in (0.5, 0.1, 0.9, 0.3):
            h.record(r)
        assert h.quantile(0.25) == 0.1
        assert h.quantile(0.5) == 0.3
        assert h.quantile(0.75) == 0.5
        assert h.quantile(1.0) == 0.9

    def test_window_drops_oldest(self):
        h = LoadHistory(window=3)
        for r in (0.9, 0.1, 0.2, 0.3):
            h.record(r)
        assert len(h) == 3
        assert h.quantile(1.0) == 0.3

    def test_empty_and_domain_errors(self):
        h = LoadHistory()
        with pytest.raises(ValueError):
            h.quantile(0.5)
        h.record(0.5)
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(ValueError):
                h.quantile(bad)
        with pytest.raises(ValueError):
            LoadHistory(window=0)

    def test_record_round_load_normalizes(self):
        h = LoadHistory()
        record_round_load(h, service_s=0.4, round_s=2.0)
        assert h.quantile(1.0) == pytest.approx(0.2)
        with pytest.raises(ValueError):
            record_round_load(h, 0.4, 0.0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0.0, 2.0), min_size=1, max_size=50),
           st.floats(0.01, 1.0))
    def test_quantile_bracketing(self, ratios, p):
        h = LoadHistory()
        for r in ratios:
            h.record(r)
        q = h.quantile(p)
        ordered = sorted(ratios)
        assert q == ordered[max(0, math.ceil(p * len(ordered)) - 1)]
        at_most = sum(1 for r in ratios if r <= q)
        assert at_most >= p * len(ratios) - 1e-9


class TestWorstCaseCheck:
    def test_82nd_stream_is_infeasible(self):
        disk = DiskParams()
        ok = worst_case_check(81, 81 * 25.0, 25.0, disk, 1.0)
        bad = worst_case_check(82, 82 * 25.0, 25.0, disk, 1.0)
        assert ok.feasible and ok.reason == "ok"
        assert not bad.feasible and bad.reason == "service-bound"
        assert bad.overhead_ok and not bad.service_ok

    def test_overhead_bound_reported(self):
        disk = DiskParams()
        n = int(disk.alpha / disk.overhead_s)  # 133 overheads saturate alone
        chk = worst_case_check(n, 0.0, 0.0, disk, 1.0)
        assert not chk.feasible and chk.reason == "overhead-bound"

    @settings(max_examples=120, deadline=None)
    @given(st.integers(0, 140), st.integers(0, 30), st.integers(0, 30),
           st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]))
    def test_matches_per_stream_projection(self, n, per_stream, cand, round_s):
        # closed form must agree with summing explicit per-stream costs;
        # integer frame counts and power-of-two rounds keep both exact
        if (n == 0 or per_stream == 0) and cand == 0:
            return
        disk = DiskParams()
        streams = [
            ActiveStream(stream_id=i, video_id=0, frames_per_round=float(per_stream),
                         playback_rate_fps=per_stream / round_s if per_stream else 25.0)
            for i in range(n)
        ]
        candidate = ActiveStream(stream_id=n, video_id=0, frames_per_round=float(cand),
                                 playback_rate_fps=cand / round_s if cand else 25.0)
        chk = worst_case_check(n, float(n * per_stream), float(cand), disk, round_s)
        ref = admission_feasible(streams, candidate, disk)
        assert chk.feasible == ref.feasible
        assert chk.projected_service_s == pytest.approx(ref.projected_service_s)
        assert chk.projected_overhead_s == pytest.approx(ref.projected_overhead_s)
        assert chk.budget_s == pytest.approx(ref.budget_s)


class TestDeterministic:
    def test_admit_books_full_block_cost(self):
        d = decide_deterministic(req(), FakeServer(committed_streams=10,
                                                   committed_frames=250.0))
        assert d.admitted and d.kind == "disk"
        assert d.ledger_frames == 25.0
        assert d.charged_rate_bps == 300000.0
        assert d.network_reserve_bps == 300000.0

    def test_disk_bound_rejection(self):
        d = decide_deterministic(req(), FakeServer(committed_streams=82,
                                                   committed_frames=82 * 25.0))
        assert not d.admitted and d.kind == "reject" and d.reason == "disk-bound"
        assert d.check is not None and not d.check.feasible

    def test_network_gate(self):
        d = decide_deterministic(req(rate=300000.0),
                                 FakeServer(network_free_bps=100000.0))
        assert not d.admitted and d.reason == "network-bound"


class TestStatistical:
    def test_empty_history_falls_back_to_worst_case(self):
        d = decide_statistical(req(), FakeServer(committed_streams=0))
        assert d.admitted and d.kind == "disk" and d.check is not None

    def test_quantile_admits_past_worst_case(self):
        # measured load low: admit even where the deterministic check refuses
        h = LoadHistory()
        for _ in range(50):
            h.record(0.3)
        srv = FakeServer(committed_streams=82, committed_frames=82 * 25.0,
                         history=h)
        assert not decide_deterministic(req(), srv).admitted
        d = decide_statistical(req(), srv)
        assert d.admitted and d.kind == "disk"

    def test_quantile_rejects_when_band_full(self):
        h = LoadHistory()
        for _ in range(50):
            h.record(0.795)
        d = decide_statistical(req(), FakeServer(history=h))
        assert not d.admitted and d.reason == "disk-bound"

    def test_epsilon_selects_tail(self):
        h = LoadHistory()
        for r in [0.1] * 90 + [0.799] * 10:
            h.record(r)
        # 95th percentile sits in the high tail: 0.799 + 0.00975 > 0.8
        assert not decide_statistical(req(), FakeServer(history=h,
                                                        epsilon=0.05)).admitted
        # 50th percentile sees the quiet majority
        assert decide_statistical(req(), FakeServer(history=h,
                                                    epsilon=0.5)).admitted


class TestPic:
    def _entry(self):
        return IntervalEntry(video_id=0, leader_id=3, request_id=1, gap_blocks=12)

    def test_interval_preferred_over_disk(self):
        d = decide_pic(req(), FakeServer(interval=self._entry()))
        assert d.admitted and d.kind == "interval"
        assert d.charged_rate_bps == 0.0 and d.ledger_frames == 0.0
        assert d.interval.gap_blocks == 12

    def test_unallocatable_interval_falls_back_to_disk(self):
        d = decide_pic(req(), FakeServer(interval=self._entry(),
                                         allocatable=False))
        assert d.admitted and d.kind == "disk" and d.ledger_frames == 25.0

    def test_no_pair_no_capacity_rejects(self):
        d = decide_pic(req(), FakeServer(committed_streams=82,
                                         committed_frames=82 * 25.0))
        assert not d.admitted and d.reason == "disk-bound"


class TestPrefixPicMulticast:
    def test_batch_join_first_and_free(self):
        batch = Batch(id=5, video_id=0, opened_at=0.0, close_time=4.0)
        # joining an open channel costs neither disk nor network headroom
        d = decide_prefix_pic_multicast(
            req(t=0.0), FakeServer(batch=batch, network_free_bps=0.0,
                                   committed_streams=82,
                                   committed_frames=82 * 25.0))
        assert d.admitted and d.kind == "batch-join" and d.batch_id == 5
        assert d.ledger_frames == 0.0 and d.network_reserve_bps == 0.0

    def test_late_batch_not_joinable(self):
        batch = Batch(id=5, video_id=0, opened_at=0.0, close_time=40.0)
        d = decide_prefix_pic_multicast(req(t=0.0, deadline=30.0),
                                        FakeServer(batch=batch, prefix=True))
        assert d.kind == "batch-open"

    def test_prefix_opens_batch(self):
        d = decide_prefix_pic_multicast(req(), FakeServer(prefix=True))
        assert d.admitted and d.kind == "batch-open"

    def test_interval_before_disk(self):
        entry = IntervalEntry(video_id=0, leader_id=2, request_id=1, gap_blocks=7)
        d = decide_prefix_pic_multicast(req(), FakeServer(interval=entry))
        assert d.admitted and d.kind == "interval"

    def test_cache_credit_scales_disk_charge(self):
        srv = FakeServer(cached_ahead=2500.0, frames_total=5000.0)
        d = decide_prefix_pic_multicast(req(), srv)
        assert d.admitted and d.kind == "disk"
        assert d.ledger_frames == pytest.approx(12.5)
        assert d.charged_rate_bps == pytest.approx(150000.0)

    def test_full_credit_costs_nothing(self):
        srv = FakeServer(cached_ahead=5000.0, frames_total=5000.0,
                         committed_streams=81, committed_frames=81 * 25.0)
        d = decide_prefix_pic_multicast(req(), srv)
        assert d.admitted and d.ledger_frames == 0.0
        assert d.charged_rate_bps == 0.0

    def test_credit_flips_a_marginal_decision(self):
        # same committed load: the uncredited check refuses, half credit fits
        settings = dict(committed_streams=50, committed_frames=3275.0)
        assert not decide_deterministic(req(), FakeServer(**settings)).admitted
        d = decide_prefix_pic_multicast(
            req(), FakeServer(cached_ahead=2500.0, frames_total=5000.0,
                              **settings))
        assert d.admitted and d.kind == "disk"
        assert d.ledger_frames == pytest.approx(12.5)

    def test_network_gate_still_binds_new_channels(self):
        d = decide_prefix_pic_multicast(req(rate=300000.0),
                                        FakeServer(network_free_bps=0.0,
                                                   prefix=True))
        assert not d.admitted and d.reason == "network-bound"


class TestPolicyTable:
    def test_all_four_registered(self):
        assert set(POLICIES) == {
            "deterministic", "statistical", "pic", "prefix-pic-multicast",
        }
        for fn in POLICIES.values():
            assert callable(fn)
