"""Admission-control policies.

All four policies see the same server view (a duck-typed object the engine
provides) and return an AdmissionDecision. The decision carries what the
engine must reserve: disk-ledger frames for the worst-case round accounting,
and the network bandwidth for the client's stream.

- deterministic: worst-case round check, ignores any cache credit.
- statistical: empirical quantile of recent measured round loads plus the
  candidate's marginal cost, against the alpha budget.
- pic: interval caching first, deterministic disk check as fallback.
- prefix-pic-multicast: batch join, batch open (prefix resident), interval,
  then a disk check whose candidate cost is scaled down by cache credit.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import ceil

from .cache import IntervalEntry
from .disk import AdmissionCheck, DiskParams, reduced_bit_rate
from .workload import Request


@dataclass(frozen=True)
class AdmissionDecision:
    admitted: bool
    kind: str            # disk | interval | batch-join | batch-open | reject
    reason: str          # ok | disk-bound | network-bound
    charged_rate_bps: float = 0.0
    ledger_frames: float = 0.0
    network_reserve_bps: float = 0.0
    batch_id: int | None = None
    interval: IntervalEntry | None = None
    check: AdmissionCheck | None = None


class LoadHistory:
    """Sliding window of measured round loads T/R."""

    def __init__(self, window: int = 200):
        if window < 1:
            raise ValueError("window must be >= 1")
        self.window = window
        self._ratios = deque(maxlen=window)

    def __len__(self) -> int:
        return len(self._ratios)

    def record(self, ratio: float) -> None:
        self._ratios.append(ratio)

    def quantile(self, p: float) -> float:
        """Empirical order statistic at probability p (0 < p <= 1)."""
        if not self._ratios:
            raise ValueError("quantile of empty history")
        if not 0.0 < p <= 1.0:
            raise ValueError("p must be in (0, 1]")
        ordered = sorted(self._ratios)
        idx = ceil(p * len(ordered)) - 1
        return ordered[max(0, idx)]


def record_round_load(history: LoadHistory, service_s: float, round_s: float) -> None:
    if round_s <= 0:
        raise ValueError("round_s must be > 0")
    history.record(service_s / round_s)


def worst_case_check(
    committed_streams: int,
    committed_frames: float,
    candidate_frames: float,
    disk: DiskParams,
    round_s: float,
) -> AdmissionCheck:
    """Closed-form worst-case round check for homogeneous round length.

    Equivalent to projecting the committed streams plus the candidate
    through the general per-stream accounting: one positioning overhead per
    stream plus frame transfers, both sums against the alpha-scaled round.
    """
    budget = disk.alpha * round_s
    overhead = (committed_streams + 1) * disk.overhead_s
    service = overhead + (committed_frames + candidate_frames) * disk.frame_transfer_s
    overhead_ok = overhead <= budget
    service_ok = service <= budget
    feasible = overhead_ok and service_ok
    reason = "ok" if feasible else ("overhead-bound" if not overhead_ok else "service-bound")
    return AdmissionCheck(
        feasible=feasible,
        reason=reason,
        overhead_ok=overhead_ok,
        service_ok=service_ok,
        round_duration_s=round_s,
        projected_overhead_s=overhead,
        projected_service_s=service,
        budget_s=budget,
    )


def _reject(reason: str, check: AdmissionCheck | None = None) -> AdmissionDecision:
    return AdmissionDecision(admitted=False, kind="reject", reason=reason, check=check)


def _disk_admit(request: Request, ledger_frames: float, charged: float,
                check: AdmissionCheck) -> AdmissionDecision:
    return AdmissionDecision(
        admitted=True,
        kind="disk",
        reason="ok",
        charged_rate_bps=charged,
        ledger_frames=ledger_frames,
        network_reserve_bps=request.bit_rate,
        check=check,
    )


def decide_deterministic(request: Request, srv) -> AdmissionDecision:
    if srv.network_free_bps < request.bit_rate:
        return _reject("network-bound")
    chk = worst_case_check(
        srv.committed_streams, srv.committed_frames,
        float(srv.frames_per_block), srv.disk, srv.round_s,
    )
    if not chk.feasible:
        return _reject("disk-bound", chk)
    return _disk_admit(request, float(srv.frames_per_block), request.bit_rate, chk)


def decide_statistical(request: Request, srv,
                       history: LoadHistory | None = None,
                       epsilon: float | None = None) -> AdmissionDecision:
    """Admit when the recent (1 - epsilon) load quantile plus the candidate's
    marginal round cost still fits the alpha budget."""
    if history is None:
        history = srv.load_history
    if epsilon is None:
        epsilon = srv.epsilon
    if srv.network_free_bps < request.bit_rate:
        return _reject("network-bound")
    if len(history) == 0:
        return decide_deterministic(request, srv)
    disk = srv.disk
    q = history.quantile(1.0 - epsilon)
    marginal = (
        disk.overhead_s + srv.frames_per_block * disk.frame_transfer_s
    ) / srv.round_s
    if q + marginal > disk.alpha:
        chk = worst_case_check(
            srv.committed_streams, srv.committed_frames,
            float(srv.frames_per_block), disk, srv.round_s,
        )
        return _reject("disk-bound", chk)
    return _disk_admit(request, float(srv.frames_per_block), request.bit_rate, None)


def decide_pic(request: Request, srv) -> AdmissionDecision:
    if srv.network_free_bps < request.bit_rate:
        return _reject("network-bound")
    entry = srv.interval_candidate(request)
    if entry is not None and srv.interval_allocatable(entry):
        return AdmissionDecision(
            admitted=True,
            kind="interval",
            reason="ok",
            charged_rate_bps=0.0,
            network_reserve_bps=request.bit_rate,
            interval=entry,
        )
    chk = worst_case_check(
        srv.committed_streams, srv.committed_frames,
        float(srv.frames_per_block), srv.disk, srv.round_s,
    )
    if not chk.feasible:
        return _reject("disk-bound", chk)
    return _disk_admit(request, float(srv.frames_per_block), request.bit_rate, chk)


def decide_prefix_pic_multicast(request: Request, srv) -> AdmissionDecision:
    """Batch join, batch open, interval, credit-scaled disk, reject."""
    batch = srv.open_batch_for(request.video_id)
    if batch is not None and batch.close_time <= request.deadline:
        return AdmissionDecision(
            admitted=True, kind="batch-join", reason="ok", batch_id=batch.id,
        )
    if srv.network_free_bps < request.bit_rate:
        return _reject("network-bound")
    if srv.prefix_resident(request.video_id):
        return AdmissionDecision(admitted=True, kind="batch-open", reason="ok")
    entry = srv.interval_candidate(request)
    if entry is not None and srv.interval_allocatable(entry):
        return AdmissionDecision(
            admitted=True,
            kind="interval",
            reason="ok",
            charged_rate_bps=0.0,
            network_reserve_bps=request.bit_rate,
            interval=entry,
        )
    frames_total = srv.video_frames(request.video_id)
    credit = min(srv.cached_frames_ahead(request.video_id), frames_total)
    candidate = srv.frames_per_block * (frames_total - credit) / frames_total
    chk = worst_case_check(
        srv.committed_streams, srv.committed_frames, candidate, srv.disk, srv.round_s,
    )
    if not chk.feasible:
        return _reject("disk-bound", chk)
    charged = reduced_bit_rate(frames_total, credit, request.bit_rate)
    return _disk_admit(request, candidate, charged, chk)


POLICIES = {
    "deterministic": decide_deterministic,
    "statistical": decide_statistical,
    "pic": decide_pic,
    "prefix-pic-multicast": decide_prefix_pic_multicast,
}
