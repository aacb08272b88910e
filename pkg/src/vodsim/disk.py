"""Round-based disk service model.

A disk round serves every active disk stream once: one seek + rotational
positioning per stream, then a sequential transfer of that stream's frames
for the round. The round length R is set by the fastest-consuming stream
(min over f_i / P_i); service stays feasible while the total service time
fits inside the alpha-scaled round budget.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class DomainError(ValueError):
    """Raised when a formula argument is outside its domain."""


class NoActiveStreamsError(ValueError):
    """round_duration needs at least one frame-fetching stream."""


@dataclass(frozen=True)
class DiskParams:
    bandwidth_Bps: float = 10_000_000.0
    t_seek_s: float = 0.003
    t_rot_s: float = 0.003
    alpha: float = 0.8
    frames_per_block: int = 25
    frame_size_bytes: float = 1500.0
    # Reference-only check that charges per-stream positioning overhead once
    # per remaining frame instead of once per round. Default off; with the
    # default parameters it rejects every request.
    literal_whole_stream_check: bool = False

    def validate(self) -> None:
        if self.bandwidth_Bps <= 0:
            raise DomainError("bandwidth_Bps must be > 0")
        if self.t_seek_s < 0 or self.t_rot_s < 0:
            raise DomainError("positioning times must be >= 0")
        if not 0 < self.alpha <= 1:
            raise DomainError("alpha must be in (0, 1]")
        if self.frames_per_block < 1:
            raise DomainError("frames_per_block must be >= 1")
        if self.frame_size_bytes <= 0:
            raise DomainError("frame_size_bytes must be > 0")

    @property
    def overhead_s(self) -> float:
        return self.t_seek_s + self.t_rot_s

    @property
    def frame_transfer_s(self) -> float:
        return self.frame_size_bytes / self.bandwidth_Bps

    @property
    def block_transfer_s(self) -> float:
        return self.frames_per_block * self.frame_size_bytes / self.bandwidth_Bps

    @property
    def stream_round_cost_s(self) -> float:
        """Service time of one stream fetching one block in one round."""
        return self.overhead_s + self.block_transfer_s


@dataclass
class ActiveStream:
    stream_id: int
    video_id: int
    # Frames this stream fetches from disk per round; 0 for streams served
    # entirely from cache or riding a multicast channel.
    frames_per_round: float
    playback_rate_fps: float
    source: str = "disk"
    total_frames: float = 0.0
    cached_frames: float = 0.0


@dataclass(frozen=True)
class AdmissionCheck:
    feasible: bool
    reason: str
    overhead_ok: bool
    service_ok: bool
    round_duration_s: float
    projected_overhead_s: float
    projected_service_s: float
    budget_s: float

    def __bool__(self) -> bool:
        return self.feasible


def round_duration(streams: list[ActiveStream]) -> float:
    """R = min over fetching streams of f_i / P_i.

    Streams with f_i == 0 impose no fetch-period constraint and are skipped.
    """
    best = None
    for s in streams:
        if s.frames_per_round <= 0:
            continue
        if s.playback_rate_fps <= 0:
            raise DomainError("playback_rate_fps must be > 0")
        period = s.frames_per_round / s.playback_rate_fps
        if best is None or period < best:
            best = period
    if best is None:
        raise NoActiveStreamsError("no stream fetches frames from disk")
    return best


def round_service_time(streams: list[ActiveStream], disk: DiskParams) -> float:
    """Total time the disk spends serving one round.

    Each disk-sourced stream costs one positioning overhead plus its frame
    transfers; cache- and multicast-served streams contribute nothing.
    """
    total = 0.0
    for s in streams:
        if s.source != "disk":
            continue
        total += disk.overhead_s + s.frames_per_round * disk.frame_transfer_s
    return total


def admission_feasible(
    streams: list[ActiveStream], candidate: ActiveStream, disk: DiskParams
) -> AdmissionCheck:
    """Worst-case check that the round workload plus `candidate` still fits.

    Two conditions, both against the alpha-scaled round budget: the summed
    positioning overheads alone must fit, and the full projected service
    time must fit. Diagnostics carry each separately.
    """
    disk.validate()
    combined = list(streams) + [candidate]
    r = round_duration(combined)
    budget = disk.alpha * r
    if disk.literal_whole_stream_check:
        overhead = sum(
            s.total_frames * disk.overhead_s for s in combined if s.source == "disk"
        )
    else:
        overhead = sum(disk.overhead_s for s in combined if s.source == "disk")
    service = round_service_time(combined, disk)
    overhead_ok = overhead <= budget
    service_ok = service <= budget
    feasible = overhead_ok and service_ok
    if feasible:
        reason = "ok"
    elif not overhead_ok:
        reason = "overhead-bound"
    else:
        reason = "service-bound"
    return AdmissionCheck(
        feasible=feasible,
        reason=reason,
        overhead_ok=overhead_ok,
        service_ok=service_ok,
        round_duration_s=r,
        projected_overhead_s=overhead,
        projected_service_s=service,
        budget_s=budget,
    )


def play_time(total_frames: float, bit_rate_bps: float, frame_size_bytes: float = 1500.0) -> float:
    """Seconds to play `total_frames` at the client bit rate."""
    if total_frames < 0:
        raise DomainError("total_frames must be >= 0")
    if bit_rate_bps <= 0:
        raise DomainError("bit_rate_bps must be > 0")
    return total_frames * frame_size_bytes * 8.0 / bit_rate_bps


def cached_play_time(
    total_frames: float,
    cached_frames: float,
    bit_rate_bps: float,
    frame_size_bytes: float = 1500.0,
) -> float:
    """Play time of the part the disk must still deliver."""
    if not 0 <= cached_frames <= total_frames:
        raise DomainError("cached_frames must be in [0, total_frames]")
    return play_time(total_frames - cached_frames, bit_rate_bps, frame_size_bytes)


def reduced_bit_rate(total_frames: float, cached_frames: float, bit_rate_bps: float) -> float:
    """Effective disk-side rate after cache credit: r' = (F - C) / F * r."""
    if total_frames <= 0:
        raise DomainError("total_frames must be > 0")
    if not 0 <= cached_frames <= total_frames:
        raise DomainError("cached_frames must be in [0, total_frames]")
    if bit_rate_bps <= 0:
        raise DomainError("bit_rate_bps must be > 0")
    return (total_frames - cached_frames) / total_frames * bit_rate_bps
