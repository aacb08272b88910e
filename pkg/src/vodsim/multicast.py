"""Batching of same-video requests onto shared multicast channels.

A batch opens with the first admitted request for a video and closes at
that request's startup deadline; everyone who arrives for the same video
before the close rides the same channel. One channel consumes one stream's
worth of network bandwidth no matter how many members it carries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .workload import Request


@dataclass(frozen=True)
class SessionPacket:
    """Join message a client sends when it attaches to a session."""
    source_id: int
    timestamp: float


@dataclass(frozen=True)
class SessionRecord:
    client_id: int
    start_time: float
    multicast_channel: int
    establishment_time: float


@dataclass
class SessionProfile:
    """Server-side ledger of one multicast session's membership."""
    video_id: int
    channel_id: int
    records: list[SessionRecord] = field(default_factory=list)
    expiration_time: float | None = None

    def add(self, packet: SessionPacket, start_time: float, establishment_time: float) -> None:
        self.records.append(
            SessionRecord(
                client_id=packet.source_id,
                start_time=start_time,
                multicast_channel=self.channel_id,
                establishment_time=establishment_time,
            )
        )


@dataclass
class Batch:
    id: int
    video_id: int
    opened_at: float
    close_time: float
    requests: list[Request] = field(default_factory=list)
    state: str = "open"

    @property
    def size(self) -> int:
        return len(self.requests)


@dataclass
class MulticastChannel:
    id: int
    video_id: int
    bit_rate_bps: float
    start_time: float
    expiration_time: float
    member_count: int


def open_batch(batch_id: int, request: Request, now: float, window_s: float) -> Batch:
    """Open a batch anchored to the first request's startup deadline."""
    close = min(request.deadline, now + window_s)
    batch = Batch(id=batch_id, video_id=request.video_id, opened_at=now,
                  close_time=close)
    batch.requests.append(request)
    return batch


def can_join(batch: Batch, request: Request) -> bool:
    """A request joins only a batch that will start within its tolerance."""
    return (
        batch.state == "open"
        and batch.video_id == request.video_id
        and batch.close_time <= request.deadline
    )


def join_batch(batch: Batch, request: Request) -> SessionPacket:
    if not can_join(batch, request):
        raise ValueError("request cannot join this batch")
    batch.requests.append(request)
    return SessionPacket(source_id=request.id, timestamp=request.arrival_time)


def expired_sessions(channels: dict[int, MulticastChannel], now: float) -> list[int]:
    """Channel ids whose sessions have passed their expiration time."""
    return [cid for cid, ch in channels.items() if ch.expiration_time <= now]
