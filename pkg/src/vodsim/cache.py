"""Cache policy layer: interval pairing, prefix maintenance, popularity.

CacheState is a thin facade over the kernel's block table. Interval
allocation is nominal bookkeeping: an allocated interval reserves its gap
in blocks against the interval budget until the follower leaves, converts,
or completes; the kernel tracks the actual pinned window as it slides.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ._core import SimCore
from .workload import Catalog, ConfigError, Request


class CacheFullError(RuntimeError):
    """Not enough unpinned blocks to satisfy a forced eviction."""


@dataclass(frozen=True)
class CacheConfig:
    capacity_blocks: int = 2000
    prefix_fraction: float = 0.5
    cache_bandwidth_Bps: float = 1_000_000_000.0
    popularity_half_life_s: float = 600.0
    popularity_refresh_s: float = 60.0
    prefix_priority_eviction: bool = True

    def validate(self) -> None:
        if self.capacity_blocks < 1:
            raise ConfigError("capacity_blocks must be >= 1")
        if not 0.0 <= self.prefix_fraction <= 1.0:
            raise ConfigError("prefix_fraction must be in [0, 1]")
        if self.cache_bandwidth_Bps <= 0:
            raise ConfigError("cache_bandwidth_Bps must be > 0")
        if self.popularity_half_life_s <= 0:
            raise ConfigError("popularity_half_life_s must be > 0")
        if self.popularity_refresh_s <= 0:
            raise ConfigError("popularity_refresh_s must be > 0")

    @property
    def prefix_cap_blocks(self) -> int:
        return int(self.capacity_blocks * self.prefix_fraction)


@dataclass(frozen=True)
class CachedBlock:
    video_id: int
    index: int


@dataclass
class StreamRef:
    """What interval pairing needs to know about an in-progress stream."""
    stream_id: int
    video_id: int
    cursor_block: int
    has_follower: bool = False


@dataclass
class IntervalEntry:
    video_id: int
    leader_id: int
    request_id: int
    gap_blocks: int
    allocated: bool = False


def find_interval(request: Request, active: list[StreamRef]) -> IntervalEntry | None:
    """Pair the request with its nearest follower-free predecessor.

    The new stream starts at block 0, so the gap equals the predecessor's
    cursor. Streams that have not consumed a block yet or already lead a
    follower are not pairable. Ties go to the lower stream id.
    """
    best = None
    for s in active:
        if s.video_id != request.video_id:
            continue
        if s.has_follower or s.cursor_block < 1:
            continue
        if best is None or s.cursor_block < best.cursor_block or (
            s.cursor_block == best.cursor_block and s.stream_id < best.stream_id
        ):
            best = s
    if best is None:
        return None
    return IntervalEntry(
        video_id=request.video_id,
        leader_id=best.stream_id,
        request_id=request.id,
        gap_blocks=best.cursor_block,
    )


class CacheState:
    """Facade over the kernel plus nominal interval-budget accounting."""

    def __init__(self, config: CacheConfig, core: SimCore, frames_per_block: int,
                 interval_budget_blocks: int | None = None):
        config.validate()
        self.config = config
        self.core = core
        self.frames_per_block = frames_per_block
        if interval_budget_blocks is None:
            interval_budget_blocks = config.capacity_blocks
        self.interval_budget = interval_budget_blocks
        self.interval_used = 0

    @property
    def free_interval_blocks(self) -> int:
        return self.interval_budget - self.interval_used

    def lookup(self, video_id: int, index: int, now: float) -> bool:
        return self.core.lookup(video_id, index, now)

    def insert(self, video_id: int, index: int, now: float, owner: int = -1) -> bool:
        return self.core.insert(video_id, index, now, owner)

    def evict(self, count: int, now: float) -> list[CachedBlock]:
        """Force out `count` blocks under the active rule; all-or-nothing."""
        evictable = self.core.resident_total - self.core.pinned_total
        if count > evictable:
            raise CacheFullError(
                f"need {count} victims, only {evictable} unpinned blocks"
            )
        victims = self.core.evict_blocks(count, now)
        return [CachedBlock(v, idx) for v, idx in victims]

    def cached_frames(self, video_id: int, cursor: int) -> float:
        """Cache credit ahead of `cursor`, in frames."""
        return self.core.count_resident(video_id, cursor) * self.frames_per_block

    def trail_resident(self, video_id: int, gap_blocks: int) -> bool:
        return self.core.resident_run(video_id, 0) >= gap_blocks

    def allocate_intervals(self, candidates: list[IntervalEntry]) -> list[IntervalEntry]:
        """Greedily allocate the smallest feasible intervals first.

        A candidate is feasible when its whole trail [0, gap) is resident
        and the gap fits the remaining interval budget. Smallest-gap-first
        maximizes admitted streams per cached block; ties break on leader
        id then request id.
        """
        order = sorted(
            candidates, key=lambda e: (e.gap_blocks, e.leader_id, e.request_id)
        )
        out = []
        for entry in order:
            if entry.gap_blocks > self.free_interval_blocks:
                continue
            if not self.trail_resident(entry.video_id, entry.gap_blocks):
                continue
            entry.allocated = True
            self.interval_used += entry.gap_blocks
            out.append(entry)
        return out

    def release_interval(self, gap_blocks: int) -> None:
        self.interval_used -= gap_blocks
        if self.interval_used < 0:
            raise AssertionError("interval budget released below zero")

    @property
    def hit_ratio(self) -> float:
        total = self.core.hits + self.core.misses
        return self.core.hits / total if total else 0.0


class PopularityTable:
    """Exponentially decayed request counts with deterministic ranking."""

    def __init__(self, half_life_s: float, total_videos: int):
        if half_life_s <= 0:
            raise ConfigError("half_life_s must be > 0")
        self.half_life_s = half_life_s
        self._decay = math.log(2.0) / half_life_s
        self._count = [0.0] * total_videos
        self._stamp = [0.0] * total_videos

    def record(self, video_id: int, now: float) -> None:
        c = self._count[video_id] * math.exp(-self._decay * (now - self._stamp[video_id]))
        self._count[video_id] = c + 1.0
        self._stamp[video_id] = now

    def score(self, video_id: int, now: float) -> float:
        return self._count[video_id] * math.exp(
            -self._decay * (now - self._stamp[video_id])
        )

    def top_videos(self, now: float) -> list[int]:
        """Video ids from most to least popular; ties to the lower id."""
        scored = [(-self.score(v, now), v) for v in range(len(self._count))]
        scored.sort()
        return [v for _, v in scored]

    def ranks(self, now: float) -> dict[int, int]:
        return {v: i + 1 for i, v in enumerate(self.top_videos(now))}


def update_prefix_set(ranked_videos: list[int], catalog: Catalog,
                      prefix_cap_blocks: int) -> list[int]:
    """Pick the most popular videos whose prefixes fit the partition.

    Walks the ranking greedily; a video whose prefix no longer fits stops
    the walk (keeping the set contiguous in rank).
    """
    maintained = []
    used = 0
    for v in ranked_videos:
        size = catalog.video(v).prefix_end
        if used + size > prefix_cap_blocks:
            break
        maintained.append(v)
        used += size
    return maintained


def littles_law_estimate(arrival_rate_per_s: float, mean_residence_s: float) -> float:
    """Expected concurrent cache-fed clients: N = lambda * T."""
    if arrival_rate_per_s < 0 or mean_residence_s < 0:
        raise ConfigError("rate and residence time must be >= 0")
    return arrival_rate_per_s * mean_residence_s
