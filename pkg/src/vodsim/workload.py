"""Synthetic video catalog and client request generation.

The catalog assigns every video a length (geometric, truncated below), a
popularity rank (a random permutation; rank 1 is the most popular), and four
contiguous strands: a prefix S1 holding the first ~10% of blocks and three
roughly equal suffix strands S2..S4. Requests arrive as a Poisson process and
pick videos Zipf-distributed over popularity rank.

One block corresponds to one second of playback at the default client bit
rate; all block/time arithmetic in the simulator relies on that equivalence.
"""
from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from functools import lru_cache


class ConfigError(ValueError):
    """Raised when a configuration value is out of its documented domain."""


@dataclass(frozen=True)
class WorkloadConfig:
    total_videos: int = 100
    zipf_theta: float = 1.0
    mean_interarrival_s: float = 60.0
    mean_length_blocks: float = 200.0
    min_length_blocks: int = 40
    client_bit_rate_bps: float = 300_000.0
    playback_fps: float = 25.0
    startup_tolerance_s: float = 30.0
    early_termination: bool = False
    early_termination_prob: float = 0.9
    mean_watch_blocks: float = 100.0

    def validate(self) -> None:
        if self.total_videos < 1:
            raise ConfigError("total_videos must be >= 1")
        if self.zipf_theta < 0:
            raise ConfigError("zipf_theta must be >= 0")
        if self.mean_interarrival_s <= 0:
            raise ConfigError("mean_interarrival_s must be > 0")
        if self.mean_length_blocks < self.min_length_blocks:
            raise ConfigError("mean_length_blocks must be >= min_length_blocks")
        if self.min_length_blocks < 1:
            raise ConfigError("min_length_blocks must be >= 1")
        if self.client_bit_rate_bps <= 0:
            raise ConfigError("client_bit_rate_bps must be > 0")
        if self.playback_fps <= 0:
            raise ConfigError("playback_fps must be > 0")
        if self.startup_tolerance_s < 0:
            raise ConfigError("startup_tolerance_s must be >= 0")
        if not 0.0 <= self.early_termination_prob <= 1.0:
            raise ConfigError("early_termination_prob must be in [0, 1]")
        if self.mean_watch_blocks <= 0:
            raise ConfigError("mean_watch_blocks must be > 0")


@dataclass(frozen=True)
class Video:
    id: int
    length_blocks: int
    # Four half-open (start, end) block ranges: prefix S1 then S2..S4.
    strand_bounds: tuple[tuple[int, int], ...]
    playback_rate: float
    popularity_rank: int

    @property
    def prefix_end(self) -> int:
        return self.strand_bounds[0][1]


@dataclass(frozen=True)
class Request:
    id: int
    video_id: int
    arrival_time: float
    bit_rate: float
    deadline: float
    # Blocks the client will actually watch; equals the video length unless
    # early termination drew a shorter session at generation time.
    watch_blocks: int


@dataclass(frozen=True)
class Catalog:
    videos: tuple[Video, ...]
    zipf_theta: float

    def __len__(self) -> int:
        return len(self.videos)

    def video(self, video_id: int) -> Video:
        return self.videos[video_id]


@lru_cache(maxsize=None)
def _zipf_norm(theta: float, total: int) -> float:
    return sum(k ** -theta for k in range(1, total + 1))


def zipf_mass(rank: int, theta: float, total_videos: int) -> float:
    """Probability mass of the video at `rank` (1-based, 1 = most popular)."""
    if total_videos < 1:
        raise ConfigError("total_videos must be >= 1")
    if not 1 <= rank <= total_videos:
        raise ConfigError(f"rank {rank} outside [1, {total_videos}]")
    if theta < 0:
        raise ConfigError("theta must be >= 0")
    return rank ** -theta / _zipf_norm(theta, total_videos)


def strand_ranges(length_blocks: int) -> tuple[tuple[int, int], ...]:
    """Split [0, L) into S1 = first ceil(0.1 L) blocks, then S2..S4 evenly.

    The remainder of L - |S1| is split so earlier strands take the extra
    block. Strands may be empty for very short videos but S1 never is.
    """
    if length_blocks < 1:
        raise ConfigError("length_blocks must be >= 1")
    s1 = max(1, math.ceil(0.1 * length_blocks))
    s1 = min(s1, length_blocks)
    rest = length_blocks - s1
    base, extra = divmod(rest, 3)
    sizes = [s1] + [base + (1 if i < extra else 0) for i in range(3)]
    bounds = []
    start = 0
    for size in sizes:
        bounds.append((start, start + size))
        start += size
    return tuple(bounds)


def _draw_length(rng: random.Random, cfg: WorkloadConfig) -> int:
    # Geometric via exponential draw, truncated below at min_length_blocks.
    raw = 1 + int(rng.expovariate(1.0 / cfg.mean_length_blocks))
    return max(cfg.min_length_blocks, raw)


def build_catalog(cfg: WorkloadConfig, seed: int) -> Catalog:
    """Build the catalog deterministically from (cfg, seed)."""
    cfg.validate()
    rng = random.Random(seed)
    lengths = [_draw_length(rng, cfg) for _ in range(cfg.total_videos)]
    ranks = list(range(1, cfg.total_videos + 1))
    rng.shuffle(ranks)
    videos = tuple(
        Video(
            id=i,
            length_blocks=lengths[i],
            strand_bounds=strand_ranges(lengths[i]),
            playback_rate=cfg.playback_fps,
            popularity_rank=ranks[i],
        )
        for i in range(cfg.total_videos)
    )
    return Catalog(videos=videos, zipf_theta=cfg.zipf_theta)


class ArrivalProcess:
    """Poisson arrivals with Zipf video choice, driven by a private RNG.

    The draw order per request is fixed (gap, video, termination) so a given
    (config, seed) always produces the byte-identical request sequence no
    matter which admission policy consumes it.
    """

    def __init__(self, catalog: Catalog, cfg: WorkloadConfig, rng: random.Random):
        cfg.validate()
        self.catalog = catalog
        self.cfg = cfg
        self.rng = rng
        self._next_id = 0
        self._clock = 0.0
        # Cumulative Zipf mass indexed by video id, so one uniform draw plus
        # a bisect picks the video.
        total = len(catalog)
        acc = 0.0
        cum = []
        for v in catalog.videos:
            acc += zipf_mass(v.popularity_rank, cfg.zipf_theta, total)
            cum.append(acc)
        cum[-1] = 1.0
        self._cum = cum

    def _draw_video(self) -> int:
        return bisect_right(self._cum, self.rng.random())

    def next_request(self) -> Request:
        cfg = self.cfg
        self._clock += self.rng.expovariate(1.0 / cfg.mean_interarrival_s)
        vid = self._draw_video()
        video = self.catalog.video(vid)
        watch = video.length_blocks
        if cfg.early_termination:
            if self.rng.random() < cfg.early_termination_prob:
                drawn = 1 + int(self.rng.expovariate(1.0 / cfg.mean_watch_blocks))
                watch = min(video.length_blocks, drawn)
        req = Request(
            id=self._next_id,
            video_id=vid,
            arrival_time=self._clock,
            bit_rate=cfg.client_bit_rate_bps,
            deadline=self._clock + cfg.startup_tolerance_s,
            watch_blocks=watch,
        )
        self._next_id += 1
        return req


def next_arrival(process: ArrivalProcess) -> Request:
    """Functional alias for ArrivalProcess.next_request."""
    return process.next_request()
