"""Catalog construction, Zipf skew, and the Poisson arrival process."""
import math
import random
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from vodsim.workload import (
    ArrivalProcess,
    ConfigError,
    WorkloadConfig,
    build_catalog,
    strand_ranges,
    zipf_mass,
)


class TestZipfMass:
    def test_masses_sum_to_one(self):
        total = sum(zipf_mass(r, 1.0, 100) for r in range(1, 101))
        assert abs(total - 1.0) <= 1e-12

    def test_rank_ordering(self):
        masses = [zipf_mass(r, 1.0, 100) for r in range(1, 101)]
        assert all(a > b for a, b in zip(masses, masses[1:]))

    def test_theta_zero_is_uniform(self):
        for r in (1, 50, 100):
            assert abs(zipf_mass(r, 0.0, 100) - 0.01) <= 1e-12

    def test_power_law_ratio(self):
        # mass(rank) proportional to rank^-theta
        theta = 1.0
        got = zipf_mass(2, theta, 100) / zipf_mass(4, theta, 100)
        assert abs(got - 2.0 ** theta) <= 1e-12

    def test_default_top20_share_in_band(self):
        cfg = WorkloadConfig()
        top20 = sum(zipf_mass(r, cfg.zipf_theta, cfg.total_videos) for r in range(1, 21))
        assert 0.60 <= top20 <= 0.80


class TestStrandRanges:
    def test_partition_and_prefix_size(self):
        for length in (1, 4, 10, 40, 199, 200, 1000):
            ranges = strand_ranges(length)
            assert len(ranges) == 4
            assert ranges[0][0] == 0
            # contiguity: each strand starts where the previous ended
            for (a, b), (c, d) in zip(ranges, ranges[1:]):
                assert b == c
            assert ranges[-1][1] == length
            s1 = ranges[0][1] - ranges[0][0]
            assert s1 == max(1, math.ceil(0.1 * length))

    def test_prefix_nonempty_even_for_tiny_videos(self):
        assert strand_ranges(1)[0] == (0, 1)


class TestBuildCatalog:
    def test_deterministic_per_seed(self):
        a = build_catalog(WorkloadConfig(), 7)
        b = build_catalog(WorkloadConfig(), 7)
        assert [v.length_blocks for v in a.videos] == [v.length_blocks for v in b.videos]
        assert [v.popularity_rank for v in a.videos] == [v.popularity_rank for v in b.videos]

    def test_seed_changes_catalog(self):
        a = build_catalog(WorkloadConfig(), 1)
        b = build_catalog(WorkloadConfig(), 2)
        assert [v.length_blocks for v in a.videos] != [v.length_blocks for v in b.videos]

    def test_ranks_are_a_permutation(self):
        cat = build_catalog(WorkloadConfig(), 3)
        assert sorted(v.popularity_rank for v in cat.videos) == list(range(1, 101))

    def test_min_length_respected(self):
        cfg = WorkloadConfig(min_length_blocks=40)
        cat = build_catalog(cfg, 5)
        assert all(v.length_blocks >= 40 for v in cat.videos)

    def test_video_lookup(self):
        cat = build_catalog(WorkloadConfig(), 3)
        assert cat.video(17).id == 17
        assert len(cat) == 100


class TestArrivalProcess:
    def test_interarrival_mean_matches_poisson(self):
        # mean of n exponential gaps is within 3 sigma of the configured mean
        cfg = WorkloadConfig(mean_interarrival_s=60.0)
        cat = build_catalog(cfg, 11)
        proc = ArrivalProcess(cat, cfg, random.Random(11))
        n = 4000
        prev = 0.0
        gaps = []
        for _ in range(n):
            req = proc.next_request()
            gaps.append(req.arrival_time - prev)
            prev = req.arrival_time
        mean = sum(gaps) / n
        sigma = 60.0 / math.sqrt(n)
        assert abs(mean - 60.0) <= 3 * sigma

    def test_exponential_gap_variance(self):
        # exponential: std close to the mean
        cfg = WorkloadConfig(mean_interarrival_s=10.0)
        cat = build_catalog(cfg, 13)
        proc = ArrivalProcess(cat, cfg, random.Random(13))
        gaps = []
        prev = 0.0
        for _ in range(4000):
            req = proc.next_request()
            gaps.append(req.arrival_time - prev)
            prev = req.arrival_time
        mean = sum(gaps) / len(gaps)
        var = sum((g - mean) ** 2 for g in gaps) / (len(gaps) - 1)
        assert 0.8 <= math.sqrt(var) / mean <= 1.2

    def test_zipf_sampling_tracks_rank_masses(self):
        cfg = WorkloadConfig()
        cat = build_catalog(cfg, 17)
        proc = ArrivalProcess(cat, cfg, random.Random(17))
        counts = Counter()
        n = 20000
        for _ in range(n):
            counts[proc.next_request().video_id] += 1
        by_rank = sorted(cat.videos, key=lambda v: v.popularity_rank)
        top20 = sum(counts[v.id] for v in by_rank[:20]) / n
        assert 0.60 <= top20 <= 0.80

    def test_deadline_tracks_tolerance(self):
        cfg = WorkloadConfig(startup_tolerance_s=30.0)
        cat = build_catalog(cfg, 19)
        proc = ArrivalProcess(cat, cfg, random.Random(19))
        req = proc.next_request()
        assert req.deadline == pytest.approx(req.arrival_time + 30.0)

    def test_watch_blocks_without_early_termination(self):
        cfg = WorkloadConfig(early_termination=False)
        cat = build_catalog(cfg, 23)
        proc = ArrivalProcess(cat, cfg, random.Random(23))
        for _ in range(200):
            req = proc.next_request()
            assert req.watch_blocks >= cat.video(req.video_id).length_blocks

    def test_early_termination_mode_truncates_some(self):
        cfg = WorkloadConfig(early_termination=True)
        cat = build_catalog(cfg, 23)
        proc = ArrivalProcess(cat, cfg, random.Random(23))
        shorter = 0
        for _ in range(500):
            req = proc.next_request()
            if req.watch_blocks < cat.video(req.video_id).length_blocks:
                shorter += 1
        assert shorter > 100

    def test_request_ids_are_sequential(self):
        cfg = WorkloadConfig()
        cat = build_catalog(cfg, 29)
        proc = ArrivalProcess(cat, cfg, random.Random(29))
        ids = [proc.next_request().id for _ in range(5)]
        assert ids == sorted(ids)
        assert len(set(ids)) == 5


class TestWorkloadConfig:
    def test_defaults_validate(self):
        WorkloadConfig().validate()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"total_videos": 0},
            {"zipf_theta": -0.1},
            {"mean_interarrival_s": 0.0},
            {"mean_length_blocks": 0.0},
            {"min_length_blocks": 0},
            {"client_bit_rate_bps": 0.0},
            {"playback_fps": 0.0},
            {"startup_tolerance_s": -1.0},
            {"early_termination_prob": 1.5},
        ],
    )
    def test_bad_values_rejected(self, kwargs):
        with pytest.raises(ConfigError):
            WorkloadConfig(**kwargs).validate()
