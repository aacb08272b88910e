"""Discrete-event simulation engine.

Time advances through a heap-ordered event queue (arrivals, batch closes,
prefetch starts, member departures) threaded between fixed one-second round
ticks. Each tick advances every active entity one block via the kernel,
spends leftover disk budget on background prefix loading, then settles
completions, popularity refresh, and measurements.

Determinism: the arrival stream is generated from its own RNG so every
policy sees the identical workload for a given (config, seed); events with
equal timestamps pop in schedule order; the kernel resolves all eviction
and iteration order explicitly. Running the same config twice yields
byte-identical reports.
"""
from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass

from . import multicast
from ._core import K_CHANNEL, K_DISK, K_IC, K_PENDING, K_PREFETCH, get_core_class
from .admission import (
    POLICIES,
    AdmissionDecision,
    LoadHistory,
    record_round_load,
    worst_case_check,
)
from .cache import (
    CacheState,
    IntervalEntry,
    PopularityTable,
    StreamRef,
    find_interval,
    update_prefix_set,
)
from .config import SimConfig
from .disk import play_time
from .metrics import MetricsReport
from .workload import ArrivalProcess, Request, build_catalog

EV_ARRIVAL = 0
EV_BATCH_CLOSE = 1
EV_PREFETCH_START = 2
EV_MEMBER_LEAVE = 3
EV_TICK = 4

_ARRIVAL_SEED_SALT = 0x5DEECE66D

# Rounds of lead when asking for a channel's suffix stream.
_PREFETCH_ADMIT_LEAD = 8


@dataclass
class _Unicast:
    request: Request
    eid: int
    kind: str                  # disk | interval
    ledger_frames: float
    network_bps: float
    interval_gap: int = 0
    entered_cache_t: float | None = None


@dataclass
class _PendingBatch:
    batch: multicast.Batch
    channel_eid: int


@dataclass
class _Channel:
    eid: int
    video_id: int
    batch_size: int
    members: dict[int, Request]
    profile: multicast.SessionProfile
    start_time: float
    expiration_time: float
    network_bps: float
    prefetch_eid: int | None = None


class Simulation:
    """One simulation run; `run()` returns the MetricsReport."""

    def __init__(self, cfg: SimConfig, backend: str = "auto",
                 log_cache_events: bool = False):
        cfg.validate()
        self.cfg = cfg
        self.policy_name = cfg.policy
        self._decide = POLICIES[cfg.policy]
        self.disk = cfg.disk
        self.frames_per_block = cfg.disk.frames_per_block
        self.round_s = 1.0
        self.block_bytes = cfg.disk.frames_per_block * cfg.disk.frame_size_bytes

        self.catalog = build_catalog(cfg.workload, cfg.seed)
        self.arrivals = ArrivalProcess(
            self.catalog, cfg.workload,
            random.Random(cfg.seed + _ARRIVAL_SEED_SALT),
        )

        prefix_machinery = cfg.policy == "prefix-pic-multicast"
        cache_cfg = cfg.cache
        prefix_cap = cache_cfg.prefix_cap_blocks if prefix_machinery else 0
        core_cls = get_core_class(backend)
        # The position/popularity replacement rule exists to protect the
        # maintained prefixes; policies that keep no prefixes run plain LRU,
        # which is also what the eviction toggle's off state means.
        prefix_priority = cache_cfg.prefix_priority_eviction and prefix_machinery
        self.core = core_cls(
            cache_cfg.capacity_blocks,
            prefix_cap,
            prefix_priority,
            cfg.disk.overhead_s,
            cfg.disk.block_transfer_s,
            log_cache_events,
        )
        for v in self.catalog.videos:
            # Prefix tagging only matters to the prefix-maintaining policy;
            # the baselines treat every block as suffix.
            self.core.set_video(
                v.id, v.length_blocks, v.prefix_end if prefix_machinery else 0
            )
            self.core.set_rank(v.id, v.popularity_rank)
        interval_budget = cache_cfg.capacity_blocks - prefix_cap
        self.cache_state = CacheState(
            cache_cfg, self.core, self.frames_per_block, interval_budget
        )
        self.prefix_machinery = prefix_machinery
        self.popularity = PopularityTable(
            cache_cfg.popularity_half_life_s, len(self.catalog)
        )
        self.load_history = LoadHistory(cfg.statistical_window)
        self.epsilon = cfg.statistical_epsilon

        # Admission ledger: worst-case frames per round committed to disk.
        self.committed_streams = 0
        self.committed_frames = 0.0
        self.network_used_bps = 0.0

        self.unicast: dict[int, _Unicast] = {}
        self.channels: dict[int, _Channel] = {}
        self.prefetch_owner: dict[int, int] = {}
        self.open_batches: dict[int, _PendingBatch] = {}
        self.by_video: dict[int, set[int]] = {}
        self.profiles: list[multicast.SessionProfile] = []
        self._next_batch_id = 1

        self._heap: list = []
        self._seq = 0
        self.now = 0.0

        # Raw counters; post-warmup filtering happens at count time.
        self.c = {
            "offered": 0, "admitted": 0, "admitted_disk": 0,
            "admitted_interval": 0, "admitted_batch_open": 0,
            "admitted_batch_join": 0, "rejected": 0,
            "rejected_disk_bound": 0, "rejected_network_bound": 0,
            "videos_streamed": 0, "terminated_early": 0,
            "violations": 0, "cache_bw_violations": 0,
            "deadline_misses": 0, "interval_breaks": 0,
            "batches_formed": 0, "batch_members": 0,
            "blocks_fetched": 0, "prefix_blocks_loaded": 0,
        }
        self.disk_busy_s = 0.0
        self.rounds_measured = 0
        self.startup_delay_sum = 0.0
        self.startup_delay_n = 0
        self.concurrent_sum = 0.0
        self.cache_users_sum = 0.0
        self.samples = 0
        self.episode_exits = 0
        self.episode_residence_sum = 0.0
        self._hits_at_warmup = 0
        self._misses_at_warmup = 0
        self._warmup_snapped = cfg.warmup_s == 0.0
        self._last_hits = 0

    # -- event queue ----------------------------------------------------------

    def _schedule(self, t: float, kind: int, payload=None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, kind, payload))

    # -- server view consumed by the admission policies ------------------------

    @property
    def network_free_bps(self) -> float:
        return self.cfg.network_bandwidth_bps - self.network_used_bps

    def video_frames(self, video_id: int) -> float:
        return self.catalog.video(video_id).length_blocks * self.frames_per_block

    def cached_frames_ahead(self, video_id: int) -> float:
        return self.cache_state.cached_frames(video_id, 0)

    def prefix_resident(self, video_id: int) -> bool:
        pe = self.catalog.video(video_id).prefix_end
        return self.core.resident_run(video_id, 0) >= pe

    def open_batch_for(self, video_id: int):
        pending = self.open_batches.get(video_id)
        return pending.batch if pending is not None else None

    def interval_candidate(self, request: Request) -> IntervalEntry | None:
        eids = self.by_video.get(request.video_id)
        if not eids:
            return None
        core = self.core
        refs = []
        for eid in eids:
            kind = core.kind_of(eid)
            if kind == K_PENDING or kind == K_PREFETCH:
                continue
            refs.append(
                StreamRef(
                    stream_id=eid,
                    video_id=request.video_id,
                    cursor_block=core.cursor_of(eid),
                    has_follower=core.follower_of(eid) >= 0,
                )
            )
        return find_interval(request, refs)

    def interval_allocatable(self, entry: IntervalEntry) -> bool:
        return (
            entry.gap_blocks <= self.cache_state.free_interval_blocks
            and self.cache_state.trail_resident(entry.video_id, entry.gap_blocks)
        )

    # -- arrival handling -------------------------------------------------------

    def _post(self, t: float) -> bool:
        return t > self.cfg.warmup_s

    def _count_disposition(self, request: Request, admitted: bool, key: str) -> None:
        if not self._post(request.arrival_time):
            return
        if admitted:
            self.c["admitted"] += 1
        else:
            self.c["rejected"] += 1
        self.c[key] += 1

    def _handle_arrival(self, request: Request) -> None:
        self.popularity.record(request.video_id, self.now)
        if self._post(request.arrival_time):
            self.c["offered"] += 1
        decision = self._decide(request, self)
        self._apply_decision(request, decision)

    def _apply_decision(self, request: Request, dec: AdmissionDecision) -> None:
        video = request.video_id
        length = self.catalog.video(video).length_blocks
        watch = min(request.watch_blocks, length)
        if not dec.admitted:
            key = (
                "rejected_network_bound"
                if dec.reason == "network-bound"
                else "rejected_disk_bound"
            )
            self._count_disposition(request, False, key)
            return
        if dec.kind == "disk":
            eid = self.core.add_entity(K_DISK, video, 0, watch)
            self.committed_streams += 1
            self.committed_frames += dec.ledger_frames
            self.network_used_bps += dec.network_reserve_bps
            self.unicast[eid] = _Unicast(
                request, eid, "disk", dec.ledger_frames, dec.network_reserve_bps
            )
            self.by_video.setdefault(video, set()).add(eid)
            self._count_disposition(request, True, "admitted_disk")
            self._note_startup(request, 0.0)
        elif dec.kind == "interval":
            allocated = self.cache_state.allocate_intervals([dec.interval])
            if not allocated:
                raise AssertionError("interval vanished between check and apply")
            gap = dec.interval.gap_blocks
            eid = self.core.add_entity(K_IC, video, 0, watch)
            self.core.set_follower(dec.interval.leader_id, eid)
            for idx in range(gap):
                self.core.claim(video, idx, eid)
            self.network_used_bps += dec.network_reserve_bps
            self.unicast[eid] = _Unicast(
                request, eid, "interval", 0.0, dec.network_reserve_bps,
                interval_gap=gap, entered_cache_t=self.now,
            )
            self.by_video.setdefault(video, set()).add(eid)
            self._count_disposition(request, True, "admitted_interval")
            self._note_startup(request, 0.0)
        elif dec.kind == "batch-join":
            pending = self.open_batches[video]
            multicast.join_batch(pending.batch, request)
        elif dec.kind == "batch-open":
            batch = multicast.open_batch(
                self._next_batch_id, request, self.now,
                self.cfg.workload.startup_tolerance_s,
            )
            self._next_batch_id += 1
            eid = self.core.add_entity(K_PENDING, video, 0, length)
            for idx in range(self.catalog.video(video).prefix_end):
                self.core.claim(video, idx, eid)
            self.open_batches[video] = _PendingBatch(batch, eid)
            self._schedule(batch.close_time, EV_BATCH_CLOSE, (video, batch.id))
        else:
            raise AssertionError(f"unknown admission kind {dec.kind}")

    def _note_startup(self, request: Request, delay: float) -> None:
        if self._post(request.arrival_time):
            self.startup_delay_sum += delay
            self.startup_delay_n += 1

    # -- batch close / channel lifecycle ----------------------------------------

    def _handle_batch_close(self, video: int, batch_id: int) -> None:
        pending = self.open_batches.get(video)
        if pending is None or pending.batch.id != batch_id:
            return
        del self.open_batches[video]
        batch = pending.batch
        batch.state = "closed"
        rate = batch.requests[0].bit_rate
        if self.network_used_bps + rate > self.cfg.network_bandwidth_bps:
            for req in batch.requests:
                self._count_disposition(req, False, "rejected_network_bound")
            self.core.remove_entity(pending.channel_eid)
            return
        eid = pending.channel_eid
        self.core.activate(eid)
        self.network_used_bps += rate
        length = self.catalog.video(video).length_blocks
        duration = play_time(
            length * self.frames_per_block, rate, self.disk.frame_size_bytes
        )
        start = self.now
        expiration = start + duration
        profile = multicast.SessionProfile(
            video_id=video, channel_id=eid, expiration_time=expiration
        )
        members = {}
        for req in batch.requests:
            packet = multicast.SessionPacket(req.id, req.arrival_time)
            profile.add(packet, start_time=start, establishment_time=req.arrival_time)
            members[req.id] = req
            self._count_disposition(
                req,
                True,
                "admitted_batch_open" if req is batch.requests[0] else "admitted_batch_join",
            )
            self._note_startup(req, start - req.arrival_time)
            watch = min(req.watch_blocks, length)
            if watch < length:
                self._schedule(start + float(watch), EV_MEMBER_LEAVE, (eid, req.id))
        channel = _Channel(
            eid=eid,
            video_id=video,
            batch_size=batch.size,
            members=members,
            profile=profile,
            start_time=start,
            expiration_time=expiration,
            network_bps=rate,
        )
        self.channels[eid] = channel
        self.profiles.append(profile)
        self.by_video.setdefault(video, set()).add(eid)
        if self._post(self.now):
            self.c["batches_formed"] += 1
            self.c["batch_members"] += batch.size
        # Ask for the suffix stream a few rounds before the cursor leaves the
        # prefix; an idle slot held through the whole prefix phase starves
        # later channels, and retries shrink the lead toward zero anyway.
        prefix_end = self.catalog.video(video).prefix_end
        admit_at = start + max(0.0, (prefix_end - _PREFETCH_ADMIT_LEAD) * self.round_s)
        self._schedule(admit_at, EV_PREFETCH_START, eid)

    def _handle_prefetch_start(self, channel_eid: int) -> None:
        ch = self.channels.get(channel_eid)
        if ch is None or ch.prefetch_eid is not None:
            return
        video = ch.video_id
        length = self.catalog.video(video).length_blocks
        cursor = self.core.cursor_of(channel_eid)
        prefix_end = self.catalog.video(video).prefix_end
        start_idx = prefix_end if cursor < prefix_end else cursor + 1
        if start_idx >= length:
            return
        chk = worst_case_check(
            self.committed_streams, self.committed_frames,
            float(self.frames_per_block), self.disk, self.round_s,
        )
        if not chk.feasible:
            self._schedule(self.now + 1.0, EV_PREFETCH_START, channel_eid)
            return
        pe = self.core.add_entity(K_PREFETCH, video, start_idx, length)
        self.core.set_owner(pe, channel_eid)
        self.committed_streams += 1
        self.committed_frames += float(self.frames_per_block)
        ch.prefetch_eid = pe
        self.prefetch_owner[pe] = channel_eid

    def _handle_member_leave(self, channel_eid: int, request_id: int) -> None:
        ch = self.channels.get(channel_eid)
        if ch is None:
            return
        req = ch.members.pop(request_id, None)
        if req is None:
            return
        if self._post(self.now):
            self.c["videos_streamed"] += 1
            self.c["terminated_early"] += 1
        self._exit_episode(ch.start_time)
        if not ch.members:
            self._teardown_channel(ch, streamed_members=False)

    def _exit_episode(self, entered_t: float) -> None:
        if self._post(entered_t) and self._post(self.now):
            self.episode_exits += 1
            self.episode_residence_sum += self.now - entered_t

    def _release_prefetch(self, ch: _Channel) -> None:
        pe = ch.prefetch_eid
        if pe is None:
            return
        self.prefetch_owner.pop(pe, None)
        if self.core.alive(pe):
            self.core.remove_entity(pe)
            self.committed_streams -= 1
            self.committed_frames -= float(self.frames_per_block)
        ch.prefetch_eid = None

    def _teardown_channel(self, ch: _Channel, streamed_members: bool) -> None:
        if streamed_members and self._post(self.now):
            self.c["videos_streamed"] += len(ch.members)
        if streamed_members:
            for _ in ch.members:
                self._exit_episode(ch.start_time)
        self._release_prefetch(ch)
        self.network_used_bps -= ch.network_bps
        self.channels.pop(ch.eid, None)
        refs = self.by_video.get(ch.video_id)
        if refs is not None:
            refs.discard(ch.eid)
        if self.core.alive(ch.eid):
            self.core.remove_entity(ch.eid)

    # -- completions -------------------------------------------------------------

    def _handle_completion(self, eid: int) -> None:
        if eid in self.unicast:
            st = self.unicast.pop(eid)
            self.network_used_bps -= st.network_bps
            kind = self.core.kind_of(eid)
            if kind == K_DISK:
                self.committed_streams -= 1
                self.committed_frames -= st.ledger_frames
            else:
                self.cache_state.release_interval(st.interval_gap)
                self._exit_episode(st.entered_cache_t)
            refs = self.by_video.get(st.request.video_id)
            if refs is not None:
                refs.discard(eid)
            self.core.remove_entity(eid)
            if self._post(self.now):
                self.c["videos_streamed"] += 1
                if st.request.watch_blocks < self.catalog.video(
                    st.request.video_id
                ).length_blocks:
                    self.c["terminated_early"] += 1
            return
        if eid in self.channels:
            self._teardown_channel(self.channels[eid], streamed_members=True)
            return
        if eid in self.prefetch_owner:
            ch = self.channels.get(self.prefetch_owner[eid])
            if ch is not None:
                self._release_prefetch(ch)

    def _handle_conversion(self, eid: int) -> None:
        """An interval follower missed its trail and now runs from disk."""
        st = self.unicast.get(eid)
        if st is None or st.kind != "interval":
            return
        self.cache_state.release_interval(st.interval_gap)
        self._exit_episode(st.entered_cache_t)
        st.kind = "disk"
        st.interval_gap = 0
        st.entered_cache_t = None
        st.ledger_frames = float(self.frames_per_block)
        self.committed_streams += 1
        self.committed_frames += st.ledger_frames

    # -- tick --------------------------------------------------------------------

    def _handle_tick(self, t: float) -> None:
        core = self.core
        res = core.advance_round(t)
        for eid in res.converted:
            self._handle_conversion(eid)
        service = res.service_s
        loaded = 0
        if core.load_queue_len():
            residual = self.disk.alpha * self.round_s - service
            load_t, loaded = core.process_loads(residual, t)
            service += load_t
        record_round_load(self.load_history, service, self.round_s)
        post = self._post(t)
        if post:
            self.rounds_measured += 1
            self.disk_busy_s += min(service, self.round_s)
            if service > self.round_s + 1e-12:
                self.c["violations"] += 1
            self.c["deadline_misses"] += res.deadline_misses
            self.c["interval_breaks"] += res.interval_breaks
            self.c["blocks_fetched"] += res.blocks_fetched + loaded
            self.c["prefix_blocks_loaded"] += loaded
            hits_now = core.hits
            moved = (res.blocks_fetched + loaded + (hits_now - self._last_hits))
            if moved * self.block_bytes > self.cfg.cache.cache_bandwidth_Bps * self.round_s:
                self.c["cache_bw_violations"] += 1
        self._last_hits = core.hits
        for eid in res.completed:
            self._handle_completion(eid)
        if self.channels:
            expired = [
                ch for ch in self.channels.values() if ch.expiration_time <= t
            ]
            for ch in expired:
                self._teardown_channel(ch, streamed_members=True)
        refresh = self.cfg.cache.popularity_refresh_s
        if t > 0 and math.fmod(t, refresh) == 0.0:
            self._refresh_popularity(t)
        if post:
            n_members = sum(len(ch.members) for ch in self.channels.values())
            self.concurrent_sum += len(self.unicast) + n_members
            cache_users = n_members + sum(
                1 for st in self.unicast.values() if st.kind == "interval"
            )
            self.cache_users_sum += cache_users
            self.samples += 1
        if not self._warmup_snapped and t >= self.cfg.warmup_s:
            self._hits_at_warmup = core.hits
            self._misses_at_warmup = core.misses
            self._warmup_snapped = True
        nxt = t + 1.0
        if nxt <= self.cfg.duration_s:
            self._schedule(nxt, EV_TICK, None)

    def _refresh_popularity(self, t: float) -> None:
        order = self.popularity.top_videos(t)
        for rank, video in enumerate(order, start=1):
            self.core.set_rank(video, rank)
        if not self.prefix_machinery:
            return
        maintained = update_prefix_set(
            order, self.catalog, self.cache_state.config.prefix_cap_blocks
        )
        pairs = []
        for video in maintained:
            prefix_end = self.catalog.video(video).prefix_end
            for idx in range(prefix_end):
                if not self.core.peek(video, idx):
                    pairs.append((video, idx))
        self.core.queue_prefix_loads(pairs)

    # -- main loop -----------------------------------------------------------------

    def run(self) -> MetricsReport:
        cfg = self.cfg
        req = self.arrivals.next_request()
        if req.arrival_time <= cfg.duration_s:
            self._schedule(req.arrival_time, EV_ARRIVAL, req)
        self._schedule(1.0, EV_TICK, None)
        heap = self._heap
        while heap:
            t, _, kind, payload = heapq.heappop(heap)
            if t > cfg.duration_s:
                break
            self.now = t
            if kind == EV_TICK:
                self._handle_tick(t)
            elif kind == EV_ARRIVAL:
                self._handle_arrival(payload)
                nxt = self.arrivals.next_request()
                if nxt.arrival_time <= cfg.duration_s:
                    self._schedule(nxt.arrival_time, EV_ARRIVAL, nxt)
            elif kind == EV_BATCH_CLOSE:
                self._handle_batch_close(payload[0], payload[1])
            elif kind == EV_PREFETCH_START:
                self._handle_prefetch_start(payload)
            elif kind == EV_MEMBER_LEAVE:
                self._handle_member_leave(payload[0], payload[1])
        return self._report()

    # -- report ----------------------------------------------------------------------

    def _report(self) -> MetricsReport:
        cfg = self.cfg
        window = cfg.duration_s - cfg.warmup_s
        hits = self.core.hits - self._hits_at_warmup
        misses = self.core.misses - self._misses_at_warmup
        total_lookups = hits + misses
        pending = len(self.unicast) + sum(
            len(ch.members) for ch in self.channels.values()
        ) + sum(p.batch.size for p in self.open_batches.values())
        lam = self.episode_exits / window if window > 0 else 0.0
        residence = (
            self.episode_residence_sum / self.episode_exits
            if self.episode_exits
            else 0.0
        )
        measured = self.cache_users_sum / self.samples if self.samples else 0.0
        c = self.c
        return MetricsReport(
            policy=self.policy_name,
            seed=cfg.seed,
            duration_s=cfg.duration_s,
            warmup_s=cfg.warmup_s,
            rounds_measured=self.rounds_measured,
            offered=c["offered"],
            admitted=c["admitted"],
            admitted_disk=c["admitted_disk"],
            admitted_interval=c["admitted_interval"],
            admitted_batch_open=c["admitted_batch_open"],
            admitted_batch_join=c["admitted_batch_join"],
            rejected=c["rejected"],
            rejected_disk_bound=c["rejected_disk_bound"],
            rejected_network_bound=c["rejected_network_bound"],
            pending_at_end=pending,
            videos_streamed=c["videos_streamed"],
            terminated_early=c["terminated_early"],
            disk_busy_s=self.disk_busy_s,
            disk_utilization=self.disk_busy_s / window if window > 0 else 0.0,
            streams_per_disk_busy_s=(
                c["videos_streamed"] / self.disk_busy_s if self.disk_busy_s else 0.0
            ),
            cache_hits=hits,
            cache_misses=misses,
            cache_hit_ratio=hits / total_lookups if total_lookups else 0.0,
            violations=c["violations"],
            cache_bw_violations=c["cache_bw_violations"],
            deadline_misses=c["deadline_misses"],
            interval_breaks=c["interval_breaks"],
            batches_formed=c["batches_formed"],
            mean_batch_size=(
                c["batch_members"] / c["batches_formed"] if c["batches_formed"] else 0.0
            ),
            mean_startup_delay_s=(
                self.startup_delay_sum / self.startup_delay_n
                if self.startup_delay_n
                else 0.0
            ),
            concurrent_clients_mean=(
                self.concurrent_sum / self.samples if self.samples else 0.0
            ),
            cache_clients_mean=measured,
            littles_lambda_per_s=lam,
            littles_residence_s=residence,
            littles_predicted_clients=lam * residence,
            littles_measured_clients=measured,
            blocks_fetched=c["blocks_fetched"],
            prefix_blocks_loaded=c["prefix_blocks_loaded"],
        )


def run(cfg: SimConfig, backend: str = "auto") -> MetricsReport:
    return Simulation(cfg, backend=backend).run()
