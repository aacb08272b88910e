"""Pure-Python simulation kernel: block cache, pinning, per-round advance.

This module is the reference implementation; vodsim._core._ckernel is the
compiled twin with identical observable behavior (same counters, same
eviction victims, same event order). Everything here is deterministic:
victim selection always takes a full maximum under an explicit total order,
entities advance in ascending id order, and service time is derived from
integer op counts times fixed constants.

Entities are the per-round actors:

- DISK: a unicast stream fetching blocks from disk (reads cache first).
- IC: an interval-caching follower consuming its predecessor's trail from
  cache; a miss breaks the interval and converts it to DISK for good.
- CHANNEL: a multicast channel cursor consuming the prefetched bank; one
  block read per round regardless of member count.
- PENDING: a channel still batching; holds prefix pins, does not consume.
- PREFETCH: the disk reader filling a channel's suffix bank, at most one
  absent block per round, claiming already-resident blocks for free.

Pinning is single-owner: pinned_by holds the owning entity id or -1. A
consuming entity passes ownership of the block it just read to its follower
(window slide) or releases it.
"""
from __future__ import annotations

import heapq
from collections import deque

K_DISK = 0
K_IC = 1
K_CHANNEL = 2
K_PENDING = 3
K_PREFETCH = 4

_KEY_SHIFT = 20
_NO_RANK = 1 << 30


class RoundResult:
    __slots__ = (
        "service_s",
        "disk_entities",
        "blocks_fetched",
        "completed",
        "deadline_misses",
        "interval_breaks",
        "converted",
    )

    def __init__(self, service_s, disk_entities, blocks_fetched, completed,
                 deadline_misses, interval_breaks, converted):
        self.service_s = service_s
        self.disk_entities = disk_entities
        self.blocks_fetched = blocks_fetched
        self.completed = completed
        self.deadline_misses = deadline_misses
        self.interval_breaks = interval_breaks
        # Follower entities that broke their interval this round and now
        # fetch from disk; the caller re-books their admission ledger.
        self.converted = converted


class _Blk:
    __slots__ = ("pinned_by", "touch")

    def __init__(self, pinned_by, touch):
        self.pinned_by = pinned_by
        self.touch = touch


class _Ent:
    __slots__ = ("kind", "video", "cursor", "end", "follower", "pred",
                 "owner", "pin_lo", "pin_hi")

    def __init__(self, kind, video, cursor, end):
        self.kind = kind
        self.video = video
        self.cursor = cursor
        self.end = end
        self.follower = -1
        self.pred = -1
        self.owner = -1
        self.pin_lo = 1 << 30
        self.pin_hi = -1


class SimCore:
    """Block cache plus entity table with a one-second round advance."""

    backend = "pure"

    def __init__(self, capacity_blocks: int, prefix_cap_blocks: int,
                 prefix_priority_eviction: bool, overhead_s: float,
                 block_transfer_s: float, log_events: bool = False,
                 prefetch_lead_blocks: int = 3):
        if capacity_blocks < 1:
            raise ValueError("capacity_blocks must be >= 1")
        if not 0 <= prefix_cap_blocks <= capacity_blocks:
            raise ValueError("prefix_cap_blocks must be in [0, capacity]")
        self.capacity = capacity_blocks
        self.prefix_cap = prefix_cap_blocks
        self.prefix_priority = bool(prefix_priority_eviction)
        self.overhead = float(overhead_s)
        self.unit = float(block_transfer_s)
        self.prefetch_lead = int(prefetch_lead_blocks)

        self.blocks = {}          # key -> _Blk
        self._length = {}         # video -> blocks
        self._s1_end = {}         # video -> first suffix index
        self._rank = {}           # video -> popularity rank, 1 = best

        self.resident_total = 0
        self.prefix_used = 0
        self.pinned_total = 0
        self.hits = 0
        self.misses = 0
        self._touch_seq = 0

        # Eviction state. Suffix buckets and the index heap drive the
        # position/popularity rule; the LRU heap drives the plain rule.
        self._sfx_buckets = {}    # idx -> set(video)
        self._sfx_heap = []       # lazy max-heap of -idx
        self._pfx_unpinned = {}   # video -> count of unpinned prefix blocks
        self._lru_heap = []       # lazy (touch, key)

        self.ents = {}            # eid -> _Ent
        self._eid_order = []      # live eids, ascending
        self._next_eid = 1
        self.n_disk_like = 0      # live DISK + PREFETCH entities

        self._load_queue = deque()
        self.log_events = bool(log_events)
        self.event_log = []

    # -- catalog registration ------------------------------------------------

    def set_video(self, video: int, length_blocks: int, prefix_end: int) -> None:
        self._length[video] = length_blocks
        self._s1_end[video] = prefix_end

    def set_rank(self, video: int, rank: int) -> None:
        self._rank[video] = rank

    def video_length(self, video: int) -> int:
        return self._length[video]

    def prefix_end(self, video: int) -> int:
        return self._s1_end[video]

    # -- block primitives ----------------------------------------------------

    def peek(self, video: int, idx: int) -> bool:
        return ((video << _KEY_SHIFT) | idx) in self.blocks

    def lookup(self, video: int, idx: int, now: float) -> bool:
        """Counted cache probe; a hit refreshes recency."""
        key = (video << _KEY_SHIFT) | idx
        blk = self.blocks.get(key)
        if blk is None:
            self.misses += 1
            return False
        self.hits += 1
        self._touch_seq += 1
        blk.touch = self._touch_seq
        if not self.prefix_priority and blk.pinned_by < 0:
            heapq.heappush(self._lru_heap, (blk.touch, key))
        if self.log_events:
            self.event_log.append((now, "hit", video, idx))
        return True

    def _reg_unpinned(self, video, idx, blk, key):
        if idx < self._s1_end.get(video, 0):
            self._pfx_unpinned[video] = self._pfx_unpinned.get(video, 0) + 1
        elif self.prefix_priority:
            bucket = self._sfx_buckets.get(idx)
            if bucket is None:
                bucket = self._sfx_buckets[idx] = set()
            if not bucket:
                heapq.heappush(self._sfx_heap, -idx)
            bucket.add(video)
        if not self.prefix_priority:
            heapq.heappush(self._lru_heap, (blk.touch, key))

    def _unreg_unpinned(self, video, idx):
        if idx < self._s1_end.get(video, 0):
            self._pfx_unpinned[video] -= 1
        elif self.prefix_priority:
            bucket = self._sfx_buckets.get(idx)
            if bucket is not None:
                bucket.discard(video)

    def _pick_prefix_victim(self, worse_than_rank):
        """Unpinned prefix block of the least popular prefix-holding video.

        When worse_than_rank is given, only videos strictly less popular
        than it qualify (an incoming prefix block never displaces a
        better-ranked one).
        """
        best_v = -1
        best_rank = -1
        for v, cnt in self._pfx_unpinned.items():
            if cnt <= 0:
                continue
            r = self._rank.get(v, _NO_RANK)
            if worse_than_rank is not None and r <= worse_than_rank:
                continue
            if r > best_rank or (r == best_rank and v < best_v):
                best_v = v
                best_rank = r
        if best_v < 0:
            return None
        for idx in range(self._s1_end[best_v] - 1, -1, -1):
            blk = self.blocks.get((best_v << _KEY_SHIFT) | idx)
            if blk is not None and blk.pinned_by < 0:
                return best_v, idx
        return None

    def _pick_victim(self):
        """Main eviction rule. Returns (video, idx) or None.

        Position/popularity mode: deepest unpinned suffix block first, ties
        to the less popular video then the lower id; unpinned prefix blocks
        only when no suffix candidate exists. Plain mode: least recently
        used unpinned block.
        """
        if self.prefix_priority:
            heap = self._sfx_heap
            while heap:
                idx = -heap[0]
                bucket = self._sfx_buckets.get(idx)
                if not bucket:
                    heapq.heappop(heap)
                    continue
                best_v = -1
                best_rank = -1
                for v in bucket:
                    r = self._rank.get(v, _NO_RANK)
                    if r > best_rank or (r == best_rank and v < best_v):
                        best_v = v
                        best_rank = r
                return best_v, idx
            return self._pick_prefix_victim(None)
        heap = self._lru_heap
        while heap:
            touch, key = heap[0]
            blk = self.blocks.get(key)
            if blk is None or blk.touch != touch or blk.pinned_by >= 0:
                heapq.heappop(heap)
                continue
            return key >> _KEY_SHIFT, key & ((1 << _KEY_SHIFT) - 1)
        return None

    def _evict(self, video, idx, now):
        key = (video << _KEY_SHIFT) | idx
        del self.blocks[key]
        self._unreg_unpinned(video, idx)
        self.resident_total -= 1
        if idx < self._s1_end.get(video, 0):
            self.prefix_used -= 1
        if self.log_events:
            self.event_log.append((now, "evict", video, idx))

    def insert(self, video: int, idx: int, now: float, owner: int = -1) -> bool:
        """Admit one block, evicting per the active rule if needed.

        Returns False when no unpinned victim exists (or, for a prefix
        block, when the prefix partition is full of better-ranked content).
        """
        key = (video << _KEY_SHIFT) | idx
        if key in self.blocks:
            return True
        is_pfx = idx < self._s1_end.get(video, 0)
        if is_pfx and self.prefix_used >= self.prefix_cap:
            vic = self._pick_prefix_victim(self._rank.get(video, _NO_RANK))
            if vic is None:
                return False
            self._evict(vic[0], vic[1], now)
        if self.resident_total >= self.capacity:
            vic = self._pick_victim()
            if vic is None:
                return False
            self._evict(vic[0], vic[1], now)
        self._touch_seq += 1
        blk = _Blk(owner, self._touch_seq)
        self.blocks[key] = blk
        self.resident_total += 1
        if is_pfx:
            self.prefix_used += 1
        if owner >= 0:
            self.pinned_total += 1
            self._extend_box(self.ents[owner], idx)
        else:
            self._reg_unpinned(video, idx, blk, key)
        if self.log_events:
            self.event_log.append((now, "admit", video, idx))
        return True

    @staticmethod
    def _extend_box(ent, idx):
        if idx < ent.pin_lo:
            ent.pin_lo = idx
        if idx > ent.pin_hi:
            ent.pin_hi = idx

    def claim(self, video: int, idx: int, owner: int) -> bool:
        """Pin a resident unpinned block for an entity."""
        blk = self.blocks.get((video << _KEY_SHIFT) | idx)
        if blk is None:
            return False
        if blk.pinned_by == owner:
            return True
        if blk.pinned_by >= 0:
            return False
        self._unreg_unpinned(video, idx)
        blk.pinned_by = owner
        self.pinned_total += 1
        self._extend_box(self.ents[owner], idx)
        return True

    def _release_blk(self, blk, video, idx):
        blk.pinned_by = -1
        self.pinned_total -= 1
        self._touch_seq += 1
        blk.touch = self._touch_seq
        self._reg_unpinned(video, idx, blk, (video << _KEY_SHIFT) | idx)

    def release_pin(self, video: int, idx: int) -> None:
        blk = self.blocks.get((video << _KEY_SHIFT) | idx)
        if blk is not None and blk.pinned_by >= 0:
            self._release_blk(blk, video, idx)

    def resident_run(self, video: int, start: int) -> int:
        """Consecutive resident blocks from `start`, capped at the length."""
        length = self._length[video]
        k = start
        while k < length and ((video << _KEY_SHIFT) | k) in self.blocks:
            k += 1
        return k - start

    def count_resident(self, video: int, start: int) -> int:
        length = self._length[video]
        blocks = self.blocks
        n = 0
        for idx in range(start, length):
            if ((video << _KEY_SHIFT) | idx) in blocks:
                n += 1
        return n

    def evict_blocks(self, count: int, now: float):
        """Force out `count` unpinned blocks; returns the victims in order."""
        out = []
        for _ in range(count):
            vic = self._pick_victim()
            if vic is None:
                break
            self._evict(vic[0], vic[1], now)
            out.append(vic)
        return out

    # -- entities ------------------------------------------------------------

    def add_entity(self, kind: int, video: int, cursor: int, end: int) -> int:
        eid = self._next_eid
        self._next_eid += 1
        self.ents[eid] = _Ent(kind, video, cursor, end)
        self._eid_order.append(eid)
        if kind == K_DISK or kind == K_PREFETCH:
            self.n_disk_like += 1
        return eid

    def set_follower(self, pred_eid: int, fol_eid: int) -> None:
        self.ents[pred_eid].follower = fol_eid
        self.ents[fol_eid].pred = pred_eid

    def set_owner(self, eid: int, owner_eid: int) -> None:
        self.ents[eid].owner = owner_eid

    def activate(self, eid: int) -> None:
        ent = self.ents[eid]
        if ent.kind != K_PENDING:
            raise ValueError("only a pending channel can be activated")
        ent.kind = K_CHANNEL

    def alive(self, eid: int) -> bool:
        return eid in self.ents

    def kind_of(self, eid: int) -> int:
        return self.ents[eid].kind

    def cursor_of(self, eid: int) -> int:
        return self.ents[eid].cursor

    def video_of(self, eid: int) -> int:
        return self.ents[eid].video

    def end_of(self, eid: int) -> int:
        return self.ents[eid].end

    def follower_of(self, eid: int) -> int:
        return self.ents[eid].follower

    def set_end(self, eid: int, end: int) -> None:
        self.ents[eid].end = end

    def remove_entity(self, eid: int) -> None:
        """Drop an entity, unlinking interval partners and freeing its pins."""
        ent = self.ents.pop(eid)
        i = self._bisect_order(eid)
        self._eid_order.pop(i)
        if ent.follower >= 0:
            fol = self.ents.get(ent.follower)
            if fol is not None:
                fol.pred = -1
        if ent.pred >= 0:
            pred = self.ents.get(ent.pred)
            if pred is not None:
                pred.follower = -1
        if ent.pin_lo <= ent.pin_hi:
            v = ent.video
            for idx in range(ent.pin_lo, ent.pin_hi + 1):
                blk = self.blocks.get((v << _KEY_SHIFT) | idx)
                if blk is not None and blk.pinned_by == eid:
                    self._release_blk(blk, v, idx)
        if ent.kind == K_DISK or ent.kind == K_PREFETCH:
            self.n_disk_like -= 1

    def _bisect_order(self, eid):
        order = self._eid_order
        lo, hi = 0, len(order)
        while lo < hi:
            mid = (lo + hi) // 2
            if order[mid] < eid:
                lo = mid + 1
            else:
                hi = mid
        return lo

    # -- per-round advance ---------------------------------------------------

    def advance_round(self, now: float) -> RoundResult:
        disk_n = 0
        fetched = 0
        completed = []
        converted = []
        dmiss = 0
        icb = 0
        ents = self.ents
        blocks = self.blocks
        for eid in self._eid_order:
            e = ents[eid]
            k = e.kind
            if k == K_PENDING:
                continue
            if k == K_PREFETCH:
                ch = ents.get(e.owner)
                if ch is None:
                    completed.append(eid)
                    continue
                v = e.video
                cur = e.cursor
                end = e.end
                # Stage just ahead of the owner's cursor so each block is
                # resident shortly before it is consumed; a small lead keeps
                # pinned banks from crowding out the rest of the cache.
                limit = ch.cursor + self.prefetch_lead
                if limit > end:
                    limit = end
                while cur < limit:
                    blk = blocks.get((v << _KEY_SHIFT) | cur)
                    if blk is None:
                        break
                    if blk.pinned_by < 0:
                        self._unreg_unpinned(v, cur)
                        blk.pinned_by = e.owner
                        self.pinned_total += 1
                        self._extend_box(ch, cur)
                    cur += 1
                e.cursor = cur
                if cur < limit:
                    if self.insert(v, cur, now, e.owner):
                        fetched += 1
                        disk_n += 1
                        e.cursor = cur + 1
                if e.cursor >= end:
                    completed.append(eid)
                continue
            if e.cursor >= e.end:
                continue
            v = e.video
            b = e.cursor
            key = (v << _KEY_SHIFT) | b
            hit = self.lookup(v, b, now)
            if not hit:
                if k == K_IC:
                    icb += 1
                    e.kind = K_DISK
                    self.n_disk_like += 1
                    converted.append(eid)
                elif k == K_CHANNEL:
                    dmiss += 1
                disk_n += 1
                fetched += 1
                self.insert(v, b, now, -1)
            blk = blocks.get(key)
            fol = e.follower
            if blk is not None:
                p = blk.pinned_by
                if p == eid:
                    if fol >= 0:
                        blk.pinned_by = fol
                        self._extend_box(ents[fol], b)
                    else:
                        self._release_blk(blk, v, b)
                elif p < 0 and fol >= 0:
                    self._unreg_unpinned(v, b)
                    blk.pinned_by = fol
                    self.pinned_total += 1
                    self._extend_box(ents[fol], b)
            e.cursor = b + 1
            if e.cursor >= e.end:
                completed.append(eid)
        t = disk_n * self.overhead + fetched * self.unit
        return RoundResult(t, disk_n, fetched, completed, dmiss, icb, converted)

    # -- background prefix loading --------------------------------------------

    def queue_prefix_loads(self, pairs) -> None:
        self._load_queue = deque(pairs)

    def load_queue_len(self) -> int:
        return len(self._load_queue)

    def process_loads(self, budget_s: float, now: float):
        """Fetch queued prefix blocks into whatever budget is left.

        Costs one positioning overhead for the batch plus one transfer per
        block. Already-resident targets are skipped free; targets whose
        insert fails (displaced by better-ranked content) are dropped.
        """
        q = self._load_queue
        loaded = 0
        while q:
            v, idx = q[0]
            if ((v << _KEY_SHIFT) | idx) in self.blocks:
                q.popleft()
                continue
            if self.overhead + (loaded + 1) * self.unit > budget_s:
                break
            q.popleft()
            if self.insert(v, idx, now, -1):
                loaded += 1
        if loaded == 0:
            return 0.0, 0
        return self.overhead + loaded * self.unit, loaded

    # -- integrity ------------------------------------------------------------

    def audit(self) -> dict:
        """Recompute every counter from the raw tables (test support)."""
        resident = len(self.blocks)
        pinned = 0
        prefix = 0
        pfx_unpinned = {}
        sfx_unpinned = set()
        for key, blk in self.blocks.items():
            v = key >> _KEY_SHIFT
            idx = key & ((1 << _KEY_SHIFT) - 1)
            is_pfx = idx < self._s1_end.get(v, 0)
            if is_pfx:
                prefix += 1
            if blk.pinned_by >= 0:
                pinned += 1
                if blk.pinned_by not in self.ents:
                    raise AssertionError(f"block {v}:{idx} pinned by dead entity")
            elif is_pfx:
                pfx_unpinned[v] = pfx_unpinned.get(v, 0) + 1
            else:
                sfx_unpinned.add((idx, v))
        ok = (
            resident == self.resident_total
            and pinned == self.pinned_total
            and prefix == self.prefix_used
            and prefix <= self.prefix_cap
            and resident <= self.capacity
            and pfx_unpinned == {v: c for v, c in self._pfx_unpinned.items() if c > 0}
        )
        if self.prefix_priority:
            tracked = {
                (idx, v)
                for idx, bucket in self._sfx_buckets.items()
                for v in bucket
            }
            ok = ok and tracked == sfx_unpinned
        n_disk_like = sum(
            1 for e in self.ents.values() if e.kind in (K_DISK, K_PREFETCH)
        )
        ok = ok and n_disk_like == self.n_disk_like
        ok = ok and sorted(self.ents) == self._eid_order
        return {
            "ok": ok,
            "resident": resident,
            "pinned": pinned,
            "prefix": prefix,
            "n_disk_like": n_disk_like,
        }
