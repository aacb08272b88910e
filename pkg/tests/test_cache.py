"""Cache layer: eviction order, interval allocation, popularity, pinning."""
import itertools

import pytest
from hypothesis import given, settings, strategies as st

from vodsim._core import K_DISK, get_core_class
from vodsim.cache import (
    CacheConfig,
    CacheFullError,
    CacheState,
    IntervalEntry,
    PopularityTable,
    StreamRef,
    find_interval,
    littles_law_estimate,
    update_prefix_set,
)
from vodsim.workload import Catalog, Request, Video

BACKENDS = ["pure"]
if get_core_class("auto").__module__.endswith("_ckernel"):
    BACKENDS.append("compiled")


def make_core(backend, capacity=2000, prefix_cap=1000, prefix_priority=True):
    cls = get_core_class(backend)
    core = cls(capacity, prefix_cap, prefix_priority, 0.006, 0.00375)
    return core


def register(core, video, length=200, prefix_end=20, rank=None):
    core.set_video(video, length, prefix_end)
    core.set_rank(video, rank if rank is not None else video + 1)


def req(rid=0, video=0, t=0.0):
    return Request(id=rid, video_id=video, arrival_time=t, bit_rate=300000.0,
                   deadline=t + 30.0, watch_blocks=200)


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


class TestEvictionOrder:
    def test_suffix_before_prefix(self, backend):
        core = make_core(backend)
        register(core, 0)
        assert core.insert(0, 3, 0.0)     # prefix block
        assert core.insert(0, 150, 0.0)   # suffix block
        victims = core.evict_blocks(1, 1.0)
        assert victims == [(0, 150)]

    def test_deepest_suffix_first(self, backend):
        core = make_core(backend)
        register(core, 0)
        for idx in (30, 80, 150):
            assert core.insert(0, idx, 0.0)
        assert core.evict_blocks(2, 1.0) == [(0, 150), (0, 80)]

    def test_equal_index_evicts_less_popular(self, backend):
        core = make_core(backend)
        register(core, 1, rank=1)   # popular
        register(core, 2, rank=50)  # unpopular
        assert core.insert(1, 150, 0.0)
        assert core.insert(2, 150, 0.0)
        assert core.evict_blocks(1, 1.0) == [(2, 150)]

    def test_prefix_eviction_targets_least_popular(self, backend):
        core = make_core(backend)
        register(core, 1, rank=1)
        register(core, 2, rank=50)
        assert core.insert(1, 3, 0.0)
        assert core.insert(2, 5, 0.0)
        assert core.evict_blocks(1, 1.0) == [(2, 5)]

    def test_pinned_blocks_never_selected(self, backend):
        core = make_core(backend)
        register(core, 0)
        eid = core.add_entity(K_DISK, 0, 0, 200)
        assert core.insert(0, 150, 0.0, owner=eid)
        assert core.insert(0, 40, 0.0)
        assert core.evict_blocks(2, 1.0) == [(0, 40)]
        assert core.peek(0, 150)

    def test_cache_state_evict_all_or_nothing(self, backend):
        core = make_core(backend, capacity=10, prefix_cap=5)
        register(core, 0)
        state = CacheState(CacheConfig(capacity_blocks=10), core, 25)
        eid = core.add_entity(K_DISK, 0, 0, 200)
        assert core.insert(0, 150, 0.0, owner=eid)
        with pytest.raises(CacheFullError):
            state.evict(1, 1.0)

    def test_lru_mode_evicts_least_recent(self, backend):
        core = make_core(backend, prefix_priority=False)
        register(core, 0)
        assert core.insert(0, 150, 0.0)
        assert core.insert(0, 30, 0.0)
        assert core.lookup(0, 150, 1.0)  # refresh the deep block
        assert core.evict_blocks(1, 2.0) == [(0, 30)]

    def test_full_pinned_insert_fails(self, backend):
        core = make_core(backend, capacity=2, prefix_cap=0)
        register(core, 0, prefix_end=0)
        eid = core.add_entity(K_DISK, 0, 0, 200)
        assert core.insert(0, 100, 0.0, owner=eid)
        assert core.insert(0, 101, 0.0, owner=eid)
        assert not core.insert(0, 102, 0.0)


class TestPrefixPartition:
    def test_partition_cap_enforced(self, backend):
        core = make_core(backend, capacity=100, prefix_cap=10)
        register(core, 0, prefix_end=20, rank=5)
        for idx in range(10):
            assert core.insert(0, idx, 0.0)
        assert core.prefix_used == 10
        # same-rank content cannot displace: rank must be strictly better
        assert not core.insert(0, 10, 0.0)

    def test_better_rank_displaces_worse(self, backend):
        core = make_core(backend, capacity=100, prefix_cap=2)
        register(core, 1, prefix_end=20, rank=10)
        register(core, 2, prefix_end=20, rank=1)
        assert core.insert(1, 0, 0.0)
        assert core.insert(1, 1, 0.0)
        assert core.insert(2, 0, 0.0)   # displaces one of video 1's
        assert core.prefix_used == 2
        assert core.peek(2, 0)
        assert core.count_resident(1, 0) == 1

    def test_worse_rank_cannot_displace(self, backend):
        core = make_core(backend, capacity=100, prefix_cap=2)
        register(core, 1, prefix_end=20, rank=1)
        register(core, 2, prefix_end=20, rank=10)
        assert core.insert(1, 0, 0.0)
        assert core.insert(1, 1, 0.0)
        assert not core.insert(2, 0, 0.0)


class TestPinning:
    def test_claim_and_release(self, backend):
        core = make_core(backend)
        register(core, 0)
        eid = core.add_entity(K_DISK, 0, 0, 200)
        assert core.insert(0, 7, 0.0)
        assert core.claim(0, 7, eid)
        assert core.pinned_total == 1
        core.release_pin(0, 7)
        assert core.pinned_total == 0
        assert core.audit()["ok"]

    def test_claim_of_foreign_pin_fails(self, backend):
        core = make_core(backend)
        register(core, 0)
        a = core.add_entity(K_DISK, 0, 0, 200)
        b = core.add_entity(K_DISK, 0, 0, 200)
        assert core.insert(0, 7, 0.0, owner=a)
        assert not core.claim(0, 7, b)
        assert core.claim(0, 7, a)  # own pin is idempotent

    def test_remove_entity_releases_pins(self, backend):
        core = make_core(backend)
        register(core, 0)
        eid = core.add_entity(K_DISK, 0, 0, 200)
        for idx in (5, 6, 9):
            assert core.insert(0, idx, 0.0, owner=eid)
        assert core.pinned_total == 3
        core.remove_entity(eid)
        assert core.pinned_total == 0
        assert core.resident_total == 3
        assert core.audit()["ok"]

    @settings(max_examples=60, deadline=None)
    @given(st.lists(
        st.tuples(st.integers(0, 3), st.integers(0, 4), st.integers(0, 59)),
        min_size=1, max_size=120,
    ))
    def test_eviction_never_removes_pinned(self, ops):
        # adversarial op soup; after every forced eviction wave the pinned
        # blocks must all still be resident and the audit must reconcile
        core = make_core("pure", capacity=30, prefix_cap=10)
        for v in range(5):
            register(core, v, length=60, prefix_end=6, rank=v + 1)
        owners = [core.add_entity(K_DISK, v, 0, 60) for v in range(5)]
        pinned = set()
        t = 0.0
        for op, v, idx in ops:
            t += 1.0
            if op == 0:
                core.insert(v % 5, idx, t)
            elif op == 1:
                vv = v % 5
                if core.peek(vv, idx):
                    if core.claim(vv, idx, owners[vv]):
                        pinned.add((vv, idx))
                elif core.insert(vv, idx, t, owner=owners[vv]):
                    pinned.add((vv, idx))
            elif op == 2:
                if core.peek(v % 5, idx) and core.claim(v % 5, idx, owners[v % 5]):
                    pinned.add((v % 5, idx))
            else:
                core.evict_blocks(3, t)
                for pv, pidx in pinned:
                    assert core.peek(pv, pidx), (pv, pidx)
        audit = core.audit()
        assert audit["ok"]
        assert audit["pinned"] == len(pinned)


class TestFindInterval:
    def test_single_predecessor_gap(self):
        active = [StreamRef(1, 0, 100)]
        entry = find_interval(req(video=0), active)
        assert entry.gap_blocks == 100 and entry.leader_id == 1

    def test_no_same_video_stream(self):
        assert find_interval(req(video=0), [StreamRef(1, 3, 100)]) is None

    def test_nearest_predecessor_wins(self):
        active = [StreamRef(1, 0, 90), StreamRef(2, 0, 40)]
        assert find_interval(req(video=0), active).leader_id == 2

    def test_streams_with_followers_skipped(self):
        active = [StreamRef(1, 0, 40, has_follower=True), StreamRef(2, 0, 90)]
        assert find_interval(req(video=0), active).leader_id == 2

    def test_zero_cursor_not_pairable(self):
        assert find_interval(req(video=0), [StreamRef(1, 0, 0)]) is None

    def test_tie_goes_to_lower_stream_id(self):
        active = [StreamRef(9, 0, 40), StreamRef(2, 0, 40)]
        assert find_interval(req(video=0), active).leader_id == 2


def brute_force_max_allocated(gaps, budget):
    """Largest number of candidates whose gaps fit the budget together."""
    best = 0
    for r in range(len(gaps), 0, -1):
        for combo in itertools.combinations(gaps, r):
            if sum(combo) <= budget:
                return r
    return best


class TestAllocateIntervals:
    def _state(self, backend, budget, videos=(0, 1, 2)):
        core = make_core(backend, capacity=4000, prefix_cap=0)
        for v in videos:
            register(core, v, length=400, prefix_end=0)
        state = CacheState(CacheConfig(capacity_blocks=4000), core, 25,
                           interval_budget_blocks=budget)
        return core, state

    def _make_trails(self, core, video, upto):
        for idx in range(upto):
            assert core.insert(video, idx, 0.0)

    def test_greedy_takes_small_over_large(self, backend):
        core, state = self._state(backend, budget=40)
        self._make_trails(core, 0, 10)
        self._make_trails(core, 1, 50)
        cands = [
            IntervalEntry(video_id=1, leader_id=2, request_id=11, gap_blocks=50),
            IntervalEntry(video_id=0, leader_id=1, request_id=10, gap_blocks=10),
        ]
        out = state.allocate_intervals(cands)
        assert [e.gap_blocks for e in out] == [10]
        assert state.interval_used == 10

    def test_zero_free_allocates_nothing(self, backend):
        core, state = self._state(backend, budget=0)
        self._make_trails(core, 0, 10)
        cands = [IntervalEntry(video_id=0, leader_id=1, request_id=1, gap_blocks=5)]
        assert state.allocate_intervals(cands) == []

    def test_equal_gaps_both_fit(self, backend):
        core, state = self._state(backend, budget=10)
        self._make_trails(core, 0, 5)
        self._make_trails(core, 1, 5)
        cands = [
            IntervalEntry(video_id=1, leader_id=4, request_id=9, gap_blocks=5),
            IntervalEntry(video_id=0, leader_id=3, request_id=8, gap_blocks=5),
        ]
        out = state.allocate_intervals(cands)
        assert len(out) == 2

    def test_missing_trail_blocks_alloc(self, backend):
        core, state = self._state(backend, budget=100)
        self._make_trails(core, 0, 3)  # 5-block gap needs blocks [0, 5)
        cands = [IntervalEntry(video_id=0, leader_id=1, request_id=1, gap_blocks=5)]
        assert state.allocate_intervals(cands) == []

    def test_release_restores_budget(self, backend):
        core, state = self._state(backend, budget=10)
        self._make_trails(core, 0, 10)
        cands = [IntervalEntry(video_id=0, leader_id=1, request_id=1, gap_blocks=10)]
        assert len(state.allocate_intervals(cands)) == 1
        assert state.free_interval_blocks == 0
        state.release_interval(10)
        assert state.free_interval_blocks == 10

    @settings(max_examples=80, deadline=None)
    @given(
        st.integers(1, 10),      # candidate count
        st.integers(1, 12),      # equal gap size
        st.integers(0, 60),      # budget
    )
    def test_greedy_matches_brute_force_on_equal_gaps(self, n, gap, budget):
        core, state = self._state("pure", budget=budget,
                                  videos=tuple(range(n)))
        for v in range(n):
            self._make_trails(core, v, gap)
        cands = [
            IntervalEntry(video_id=v, leader_id=v + 100, request_id=v, gap_blocks=gap)
            for v in range(n)
        ]
        out = state.allocate_intervals(cands)
        assert len(out) == brute_force_max_allocated([gap] * n, budget)


class TestPopularityTable:
    def test_score_decays_by_half_life(self):
        pop = PopularityTable(600.0, 3)
        pop.record(0, 0.0)
        assert pop.score(0, 600.0) == pytest.approx(0.5)

    def test_rank_ties_break_low_id(self):
        pop = PopularityTable(600.0, 4)
        assert pop.top_videos(0.0) == [0, 1, 2, 3]

    def test_rank_rise_on_burst(self):
        pop = PopularityTable(600.0, 3)
        pop.record(2, 0.0)
        pop.record(2, 1.0)
        pop.record(0, 2.0)
        order = pop.top_videos(3.0)
        assert order[0] == 2
        ranks = pop.ranks(3.0)
        assert ranks[2] == 1 and ranks[0] == 2


class TestUpdatePrefixSet:
    def _catalog(self, n, prefix=20, length=200):
        videos = tuple(
            Video(id=i, length_blocks=length,
                  strand_bounds=((0, prefix), (prefix, length), (length, length), (length, length)),
                  playback_rate=25.0, popularity_rank=i + 1)
            for i in range(n)
        )
        return Catalog(videos=videos, zipf_theta=1.0)

    def test_partition_fill_oracle(self):
        # 400-block partition over 20-block prefixes -> exactly the top 20
        cat = self._catalog(30)
        ranked = list(range(30))
        assert update_prefix_set(ranked, cat, 400) == list(range(20))

    def test_walk_stops_at_first_misfit(self):
        cat = self._catalog(5)
        assert update_prefix_set([0, 1, 2, 3, 4], cat, 50) == [0, 1]

    def test_rank_change_swaps_membership(self):
        cat = self._catalog(30)
        ranked = [29] + list(range(29))
        kept = update_prefix_set(ranked, cat, 400)
        assert kept[0] == 29 and len(kept) == 20 and 19 not in kept


class TestLittlesLaw:
    def test_direct_substitution(self):
        assert littles_law_estimate(0.5, 10.0) == pytest.approx(5.0)
        assert littles_law_estimate(1.0 / 60.0, 600.0) == pytest.approx(10.0)
        assert littles_law_estimate(0.0, 100.0) == 0.0

    def test_negative_rejected(self):
        with pytest.raises(Exception):
            littles_law_estimate(-1.0, 10.0)


class TestHitAccounting:
    def test_hit_ratio_counter_arithmetic(self, backend):
        core = make_core(backend)
        register(core, 0)
        state = CacheState(CacheConfig(), core, 25)
        assert core.insert(0, 1, 0.0)
        for _ in range(3):
            assert state.lookup(0, 1, 1.0)
        assert not state.lookup(0, 99, 1.0)
        assert state.hit_ratio == pytest.approx(0.75)
        assert core.hits + core.misses == 4

    def test_cached_frames_counts_ahead_only(self, backend):
        core = make_core(backend)
        register(core, 0, prefix_end=20)
        state = CacheState(CacheConfig(), core, 25)
        assert state.cached_frames(0, 0) == 0.0
        for idx in range(20):
            assert core.insert(0, idx, 0.0)
        assert state.cached_frames(0, 0) == 20 * 25
        assert state.cached_frames(0, 20) == 0.0
