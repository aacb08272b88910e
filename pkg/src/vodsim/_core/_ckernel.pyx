# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled twin of vodsim._core.pycore.

Same observable behavior, same counters, same eviction victims, same entity
order; only the data structures are C++. Keep the two files in lockstep: any
rule change lands in pycore.py first and is mirrored here.
"""
from cython.operator cimport dereference, preincrement
from libc.stdint cimport int64_t
from libcpp.deque cimport deque as cppdeque
from libcpp.pair cimport pair
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector

from vodsim._core.pycore import RoundResult

K_DISK = 0
K_IC = 1
K_CHANNEL = 2
K_PENDING = 3
K_PREFETCH = 4

cdef int64_t _KEY_SHIFT = 20
cdef int64_t _KEY_MASK = (1 << 20) - 1
cdef int64_t _NO_RANK = 1 << 30
cdef int64_t _BIG = 1 << 30

cdef int CK_DISK = 0
cdef int CK_IC = 1
cdef int CK_CHANNEL = 2
cdef int CK_PENDING = 3
cdef int CK_PREFETCH = 4


cdef struct Blk:
    int64_t pinned_by
    int64_t touch


cdef struct Ent:
    int kind
    int64_t video
    int64_t cursor
    int64_t end
    int64_t follower
    int64_t pred
    int64_t owner
    int64_t pin_lo
    int64_t pin_hi


ctypedef pair[int64_t, int64_t] i64pair


cdef inline bint _pair_lt(i64pair a, i64pair b) nogil:
    if a.first != b.first:
        return a.first < b.first
    return a.second < b.second


cdef void _heap_push_max(vector[int64_t]& h, int64_t val) nogil:
    cdef size_t i = h.size()
    cdef size_t parent
    h.push_back(val)
    while i > 0:
        parent = (i - 1) >> 1
        if h[parent] < h[i]:
            h[parent], h[i] = h[i], h[parent]
            i = parent
        else:
            break


cdef void _heap_pop_max(vector[int64_t]& h) nogil:
    cdef size_t n = h.size() - 1
    cdef size_t i = 0, child
    h[0] = h[n]
    h.pop_back()
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and h[child] < h[child + 1]:
            child += 1
        if h[i] < h[child]:
            h[i], h[child] = h[child], h[i]
            i = child
        else:
            break


cdef void _heap_push_min(vector[i64pair]& h, i64pair val) nogil:
    cdef size_t i = h.size()
    cdef size_t parent
    h.push_back(val)
    while i > 0:
        parent = (i - 1) >> 1
        if _pair_lt(h[i], h[parent]):
            h[parent], h[i] = h[i], h[parent]
            i = parent
        else:
            break


cdef void _heap_pop_min(vector[i64pair]& h) nogil:
    cdef size_t n = h.size() - 1
    cdef size_t i = 0, child
    h[0] = h[n]
    h.pop_back()
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and _pair_lt(h[child + 1], h[child]):
            child += 1
        if _pair_lt(h[child], h[i]):
            h[i], h[child] = h[child], h[i]
            i = child
        else:
            break


cdef class SimCore:
    """Block cache plus entity table with a one-second round advance."""

    cdef public int64_t capacity
    cdef public int64_t prefix_cap
    cdef public bint prefix_priority
    cdef public double overhead
    cdef public double unit
    cdef public int64_t prefetch_lead
    cdef public int64_t resident_total
    cdef public int64_t prefix_used
    cdef public int64_t pinned_total
    cdef public int64_t hits
    cdef public int64_t misses
    cdef public int64_t n_disk_like
    cdef public bint log_events
    cdef public list event_log
    cdef public str backend

    cdef int64_t _touch_seq
    cdef int64_t _next_eid
    cdef unordered_map[int64_t, Blk] _blocks
    cdef unordered_map[int64_t, int64_t] _length
    cdef unordered_map[int64_t, int64_t] _s1_end
    cdef unordered_map[int64_t, int64_t] _rank
    cdef unordered_map[int64_t, unordered_set[int64_t]] _sfx_buckets
    cdef vector[int64_t] _sfx_heap
    cdef unordered_map[int64_t, int64_t] _pfx_unpinned
    cdef vector[i64pair] _lru_heap
    cdef unordered_map[int64_t, Ent] _ents
    cdef vector[int64_t] _eid_order
    cdef cppdeque[i64pair] _load_queue

    def __init__(self, capacity_blocks, prefix_cap_blocks,
                 prefix_priority_eviction, overhead_s, block_transfer_s,
                 log_events=False, prefetch_lead_blocks=3):
        if capacity_blocks < 1:
            raise ValueError("capacity_blocks must be >= 1")
        if not 0 <= prefix_cap_blocks <= capacity_blocks:
            raise ValueError("prefix_cap_blocks must be in [0, capacity]")
        self.capacity = capacity_blocks
        self.prefix_cap = prefix_cap_blocks
        self.prefix_priority = bool(prefix_priority_eviction)
        self.overhead = overhead_s
        self.unit = block_transfer_s
        self.prefetch_lead = prefetch_lead_blocks
        self.resident_total = 0
        self.prefix_used = 0
        self.pinned_total = 0
        self.hits = 0
        self.misses = 0
        self.n_disk_like = 0
        self._touch_seq = 0
        self._next_eid = 1
        self.log_events = bool(log_events)
        self.event_log = []
        self.backend = "compiled"

    # -- catalog registration ------------------------------------------------

    def set_video(self, video, length_blocks, prefix_end):
        self._length[<int64_t> video] = <int64_t> length_blocks
        self._s1_end[<int64_t> video] = <int64_t> prefix_end

    def set_rank(self, video, rank):
        self._rank[<int64_t> video] = <int64_t> rank

    def video_length(self, video):
        cdef unordered_map[int64_t, int64_t].iterator it = self._length.find(<int64_t> video)
        if it == self._length.end():
            raise KeyError(video)
        return dereference(it).second

    def prefix_end(self, video):
        cdef unordered_map[int64_t, int64_t].iterator it = self._s1_end.find(<int64_t> video)
        if it == self._s1_end.end():
            raise KeyError(video)
        return dereference(it).second

    cdef inline int64_t _s1(self, int64_t video) nogil:
        cdef unordered_map[int64_t, int64_t].iterator it = self._s1_end.find(video)
        if it == self._s1_end.end():
            return 0
        return dereference(it).second

    cdef inline int64_t _rank_of(self, int64_t video) nogil:
        cdef unordered_map[int64_t, int64_t].iterator it = self._rank.find(video)
        if it == self._rank.end():
            return _NO_RANK
        return dereference(it).second

    # -- block primitives ----------------------------------------------------

    def peek(self, video, idx):
        return self._blocks.count((<int64_t> video << _KEY_SHIFT) | <int64_t> idx) > 0

    def lookup(self, video, idx, now):
        cdef int64_t v = video, b = idx
        cdef int64_t key = (v << _KEY_SHIFT) | b
        cdef unordered_map[int64_t, Blk].iterator it = self._blocks.find(key)
        cdef Blk* blk
        if it == self._blocks.end():
            self.misses += 1
            return False
        blk = &dereference(it).second
        self.hits += 1
        self._touch_seq += 1
        blk.touch = self._touch_seq
        if not self.prefix_priority and blk.pinned_by < 0:
            _heap_push_min(self._lru_heap, i64pair(blk.touch, key))
        if self.log_events:
            self.event_log.append((now, "hit", video, idx))
        return True

    cdef void _reg_unpinned(self, int64_t video, int64_t idx, Blk* blk, int64_t key):
        cdef unordered_set[int64_t]* bucket
        if idx < self._s1(video):
            self._pfx_unpinned[video] += 1
        elif self.prefix_priority:
            bucket = &self._sfx_buckets[idx]
            if bucket.empty():
                _heap_push_max(self._sfx_heap, idx)
            bucket.insert(video)
        if not self.prefix_priority:
            _heap_push_min(self._lru_heap, i64pair(blk.touch, key))

    cdef void _unreg_unpinned(self, int64_t video, int64_t idx):
        cdef unordered_map[int64_t, unordered_set[int64_t]].iterator it
        if idx < self._s1(video):
            self._pfx_unpinned[video] -= 1
        elif self.prefix_priority:
            it = self._sfx_buckets.find(idx)
            if it != self._sfx_buckets.end():
                dereference(it).second.erase(video)

    cdef bint _pick_prefix_victim(self, int64_t worse_than_rank, bint use_bound,
                                  int64_t* out_v, int64_t* out_idx):
        # Unpinned prefix block of the least popular prefix-holding video;
        # with a bound, only strictly worse-ranked videos qualify.
        cdef int64_t best_v = -1, best_rank = -1
        cdef int64_t v, r, idx
        cdef unordered_map[int64_t, int64_t].iterator it = self._pfx_unpinned.begin()
        cdef unordered_map[int64_t, Blk].iterator bit
        while it != self._pfx_unpinned.end():
            v = dereference(it).first
            if dereference(it).second > 0:
                r = self._rank_of(v)
                if not (use_bound and r <= worse_than_rank):
                    if r > best_rank or (r == best_rank and v < best_v):
                        best_v = v
                        best_rank = r
            preincrement(it)
        if best_v < 0:
            return False
        idx = self._s1(best_v) - 1
        while idx >= 0:
            bit = self._blocks.find((best_v << _KEY_SHIFT) | idx)
            if bit != self._blocks.end() and dereference(bit).second.pinned_by < 0:
                out_v[0] = best_v
                out_idx[0] = idx
                return True
            idx -= 1
        return False

    cdef bint _pick_victim(self, int64_t* out_v, int64_t* out_idx):
        # Position/popularity mode: deepest unpinned suffix block, ties to
        # the less popular then lower-id video; prefix only when no suffix
        # candidate exists. Plain mode: least recently used unpinned block.
        cdef int64_t idx, best_v, best_rank, v, r, key, touch
        cdef unordered_map[int64_t, unordered_set[int64_t]].iterator bkit
        cdef unordered_set[int64_t].iterator sit
        cdef unordered_map[int64_t, Blk].iterator blit
        cdef Blk* blk
        if self.prefix_priority:
            while self._sfx_heap.size() > 0:
                idx = self._sfx_heap[0]
                bkit = self._sfx_buckets.find(idx)
                if bkit == self._sfx_buckets.end() or dereference(bkit).second.empty():
                    _heap_pop_max(self._sfx_heap)
                    continue
                best_v = -1
                best_rank = -1
                sit = dereference(bkit).second.begin()
                while sit != dereference(bkit).second.end():
                    v = dereference(sit)
                    r = self._rank_of(v)
                    if r > best_rank or (r == best_rank and v < best_v):
                        best_v = v
                        best_rank = r
                    preincrement(sit)
                out_v[0] = best_v
                out_idx[0] = idx
                return True
            return self._pick_prefix_victim(0, False, out_v, out_idx)
        while self._lru_heap.size() > 0:
            touch = self._lru_heap[0].first
            key = self._lru_heap[0].second
            blit = self._blocks.find(key)
            if blit == self._blocks.end():
                _heap_pop_min(self._lru_heap)
                continue
            blk = &dereference(blit).second
            if blk.touch != touch or blk.pinned_by >= 0:
                _heap_pop_min(self._lru_heap)
                continue
            out_v[0] = key >> _KEY_SHIFT
            out_idx[0] = key & _KEY_MASK
            return True
        return False

    cdef void _evict(self, int64_t video, int64_t idx, double now):
        cdef int64_t key = (video << _KEY_SHIFT) | idx
        self._blocks.erase(key)
        self._unreg_unpinned(video, idx)
        self.resident_total -= 1
        if idx < self._s1(video):
            self.prefix_used -= 1
        if self.log_events:
            self.event_log.append((now, "evict", int(video), int(idx)))

    def insert(self, video, idx, now, owner=-1):
        return self._insert(<int64_t> video, <int64_t> idx, <double> now,
                            <int64_t> owner)

    cdef bint _insert(self, int64_t video, int64_t idx, double now, int64_t owner):
        cdef int64_t key = (video << _KEY_SHIFT) | idx
        cdef int64_t vic_v = 0, vic_idx = 0
        cdef bint is_pfx
        cdef Blk blk
        cdef Blk* stored
        cdef Ent* oe
        if self._blocks.count(key) > 0:
            return True
        is_pfx = idx < self._s1(video)
        if is_pfx and self.prefix_used >= self.prefix_cap:
            if not self._pick_prefix_victim(self._rank_of(video), True,
                                            &vic_v, &vic_idx):
                return False
            self._evict(vic_v, vic_idx, now)
        if self.resident_total >= self.capacity:
            if not self._pick_victim(&vic_v, &vic_idx):
                return False
            self._evict(vic_v, vic_idx, now)
        self._touch_seq += 1
        blk.pinned_by = owner
        blk.touch = self._touch_seq
        self._blocks[key] = blk
        self.resident_total += 1
        if is_pfx:
            self.prefix_used += 1
        if owner >= 0:
            self.pinned_total += 1
            oe = self._ent_ptr(owner)
            self._extend_box(oe, idx)
        else:
            stored = &self._blocks[key]
            self._reg_unpinned(video, idx, stored, key)
        if self.log_events:
            self.event_log.append((now, "admit", int(video), int(idx)))
        return True

    cdef inline Ent* _ent_ptr(self, int64_t eid) except NULL:
        cdef unordered_map[int64_t, Ent].iterator it = self._ents.find(eid)
        if it == self._ents.end():
            raise KeyError(eid)
        return &dereference(it).second

    cdef inline void _extend_box(self, Ent* ent, int64_t idx) nogil:
        if idx < ent.pin_lo:
            ent.pin_lo = idx
        if idx > ent.pin_hi:
            ent.pin_hi = idx

    def claim(self, video, idx, owner):
        cdef int64_t v = video, b = idx, o = owner
        cdef unordered_map[int64_t, Blk].iterator it = self._blocks.find(
            (v << _KEY_SHIFT) | b)
        cdef Blk* blk
        if it == self._blocks.end():
            return False
        blk = &dereference(it).second
        if blk.pinned_by == o:
            return True
        if blk.pinned_by >= 0:
            return False
        self._unreg_unpinned(v, b)
        blk.pinned_by = o
        self.pinned_total += 1
        self._extend_box(self._ent_ptr(o), b)
        return True

    cdef void _release_blk(self, Blk* blk, int64_t video, int64_t idx):
        blk.pinned_by = -1
        self.pinned_total -= 1
        self._touch_seq += 1
        blk.touch = self._touch_seq
        self._reg_unpinned(video, idx, blk, (video << _KEY_SHIFT) | idx)

    def release_pin(self, video, idx):
        cdef int64_t v = video, b = idx
        cdef unordered_map[int64_t, Blk].iterator it = self._blocks.find(
            (v << _KEY_SHIFT) | b)
        if it != self._blocks.end() and dereference(it).second.pinned_by >= 0:
            self._release_blk(&dereference(it).second, v, b)

    def resident_run(self, video, start):
        cdef int64_t v = video, k = start
        cdef int64_t length = self._length[v]
        while k < length and self._blocks.count((v << _KEY_SHIFT) | k) > 0:
            k += 1
        return k - start

    def count_resident(self, video, start):
        cdef int64_t v = video, idx
        cdef int64_t length = self._length[v]
        cdef int64_t n = 0
        for idx in range(<int64_t> start, length):
            if self._blocks.count((v << _KEY_SHIFT) | idx) > 0:
                n += 1
        return n

    def evict_blocks(self, count, now):
        cdef int64_t vic_v = 0, vic_idx = 0
        cdef double t = now
        out = []
        for _ in range(count):
            if not self._pick_victim(&vic_v, &vic_idx):
                break
            self._evict(vic_v, vic_idx, t)
            out.append((int(vic_v), int(vic_idx)))
        return out

    # -- entities ------------------------------------------------------------

    def add_entity(self, kind, video, cursor, end):
        cdef int64_t eid = self._next_eid
        cdef Ent e
        self._next_eid += 1
        e.kind = kind
        e.video = video
        e.cursor = cursor
        e.end = end
        e.follower = -1
        e.pred = -1
        e.owner = -1
        e.pin_lo = _BIG
        e.pin_hi = -1
        self._ents[eid] = e
        self._eid_order.push_back(eid)
        if e.kind == CK_DISK or e.kind == CK_PREFETCH:
            self.n_disk_like += 1
        return eid

    def set_follower(self, pred_eid, fol_eid):
        cdef Ent* p = self._ent_ptr(<int64_t> pred_eid)
        cdef Ent* f = self._ent_ptr(<int64_t> fol_eid)
        p.follower = fol_eid
        f.pred = pred_eid

    def set_owner(self, eid, owner_eid):
        self._ent_ptr(<int64_t> eid).owner = owner_eid

    def activate(self, eid):
        cdef Ent* e = self._ent_ptr(<int64_t> eid)
        if e.kind != CK_PENDING:
            raise ValueError("only a pending channel can be activated")
        e.kind = CK_CHANNEL

    def alive(self, eid):
        return self._ents.count(<int64_t> eid) > 0

    def kind_of(self, eid):
        return self._ent_ptr(<int64_t> eid).kind

    def cursor_of(self, eid):
        return self._ent_ptr(<int64_t> eid).cursor

    def video_of(self, eid):
        return self._ent_ptr(<int64_t> eid).video

    def end_of(self, eid):
        return self._ent_ptr(<int64_t> eid).end

    def follower_of(self, eid):
        return self._ent_ptr(<int64_t> eid).follower

    def set_end(self, eid, end):
        self._ent_ptr(<int64_t> eid).end = end

    def remove_entity(self, eid):
        """Drop an entity, unlinking interval partners and freeing its pins."""
        cdef int64_t e_id = eid
        cdef unordered_map[int64_t, Ent].iterator it = self._ents.find(e_id)
        if it == self._ents.end():
            raise KeyError(eid)
        cdef Ent ent = dereference(it).second
        self._ents.erase(it)
        cdef size_t i = self._bisect_order(e_id)
        self._eid_order.erase(self._eid_order.begin() + i)
        cdef unordered_map[int64_t, Ent].iterator oit
        if ent.follower >= 0:
            oit = self._ents.find(ent.follower)
            if oit != self._ents.end():
                dereference(oit).second.pred = -1
        if ent.pred >= 0:
            oit = self._ents.find(ent.pred)
            if oit != self._ents.end():
                dereference(oit).second.follower = -1
        cdef int64_t v, idx
        cdef unordered_map[int64_t, Blk].iterator bit
        if ent.pin_lo <= ent.pin_hi:
            v = ent.video
            for idx in range(ent.pin_lo, ent.pin_hi + 1):
                bit = self._blocks.find((v << _KEY_SHIFT) | idx)
                if bit != self._blocks.end() and dereference(bit).second.pinned_by == e_id:
                    self._release_blk(&dereference(bit).second, v, idx)
        if ent.kind == CK_DISK or ent.kind == CK_PREFETCH:
            self.n_disk_like -= 1

    cdef size_t _bisect_order(self, int64_t eid) nogil:
        cdef size_t lo = 0, hi = self._eid_order.size(), mid
        while lo < hi:
            mid = (lo + hi) // 2
            if self._eid_order[mid] < eid:
                lo = mid + 1
            else:
                hi = mid
        return lo

    # -- per-round advance ---------------------------------------------------

    def advance_round(self, now):
        cdef double t_now = now
        cdef int64_t disk_n = 0, fetched = 0, dmiss = 0, icb = 0
        cdef int64_t eid, v, b, key, cur, end, limit, fol, p
        cdef size_t oi
        cdef Ent* e
        cdef Ent* ch
        cdef Ent* fe
        cdef unordered_map[int64_t, Ent].iterator chit
        cdef unordered_map[int64_t, Blk].iterator bit
        cdef Blk* blk
        cdef bint hit
        completed = []
        converted = []
        for oi in range(self._eid_order.size()):
            eid = self._eid_order[oi]
            e = &self._ents[eid]
            if e.kind == CK_PENDING:
                continue
            if e.kind == CK_PREFETCH:
                chit = self._ents.find(e.owner)
                if chit == self._ents.end():
                    completed.append(eid)
                    continue
                ch = &dereference(chit).second
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
                    bit = self._blocks.find((v << _KEY_SHIFT) | cur)
                    if bit == self._blocks.end():
                        break
                    blk = &dereference(bit).second
                    if blk.pinned_by < 0:
                        self._unreg_unpinned(v, cur)
                        blk.pinned_by = e.owner
                        self.pinned_total += 1
                        self._extend_box(ch, cur)
                    cur += 1
                e.cursor = cur
                if cur < limit:
                    if self._insert(v, cur, t_now, e.owner):
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
            hit = self.lookup(v, b, t_now)
            if not hit:
                if e.kind == CK_IC:
                    icb += 1
                    e.kind = CK_DISK
                    self.n_disk_like += 1
                    converted.append(eid)
                elif e.kind == CK_CHANNEL:
                    dmiss += 1
                disk_n += 1
                fetched += 1
                self._insert(v, b, t_now, -1)
            bit = self._blocks.find(key)
            fol = e.follower
            if bit != self._blocks.end():
                blk = &dereference(bit).second
                p = blk.pinned_by
                if p == eid:
                    if fol >= 0:
                        blk.pinned_by = fol
                        fe = &self._ents[fol]
                        self._extend_box(fe, b)
                    else:
                        self._release_blk(blk, v, b)
                elif p < 0 and fol >= 0:
                    self._unreg_unpinned(v, b)
                    blk.pinned_by = fol
                    self.pinned_total += 1
                    fe = &self._ents[fol]
                    self._extend_box(fe, b)
            e.cursor = b + 1
            if e.cursor >= e.end:
                completed.append(eid)
        cdef double t = disk_n * self.overhead + fetched * self.unit
        return RoundResult(t, int(disk_n), int(fetched), completed,
                           int(dmiss), int(icb), converted)

    # -- background prefix loading --------------------------------------------

    def queue_prefix_loads(self, pairs):
        self._load_queue.clear()
        cdef int64_t v, idx
        for v, idx in pairs:
            self._load_queue.push_back(i64pair(v, idx))

    def load_queue_len(self):
        return self._load_queue.size()

    def process_loads(self, budget_s, now):
        """Fetch queued prefix blocks into whatever budget is left.

        Costs one positioning overhead for the batch plus one transfer per
        block. Already-resident targets are skipped free; targets whose
        insert fails (displaced by better-ranked content) are dropped.
        """
        cdef double budget = budget_s
        cdef double t_now = now
        cdef int64_t loaded = 0
        cdef int64_t v, idx
        while not self._load_queue.empty():
            v = self._load_queue.front().first
            idx = self._load_queue.front().second
            if self._blocks.count((v << _KEY_SHIFT) | idx) > 0:
                self._load_queue.pop_front()
                continue
            if self.overhead + (loaded + 1) * self.unit > budget:
                break
            self._load_queue.pop_front()
            if self._insert(v, idx, t_now, -1):
                loaded += 1
        if loaded == 0:
            return 0.0, 0
        return self.overhead + loaded * self.unit, int(loaded)

    # -- integrity ------------------------------------------------------------

    def audit(self):
        """Recompute every counter from the raw tables (test support)."""
        cdef int64_t resident = self._blocks.size()
        cdef int64_t pinned = 0
        cdef int64_t prefix = 0
        cdef int64_t v, idx, key
        cdef bint is_pfx
        pfx_unpinned = {}
        sfx_unpinned = set()
        cdef unordered_map[int64_t, Blk].iterator it = self._blocks.begin()
        while it != self._blocks.end():
            key = dereference(it).first
            v = key >> _KEY_SHIFT
            idx = key & _KEY_MASK
            is_pfx = idx < self._s1(v)
            if is_pfx:
                prefix += 1
            if dereference(it).second.pinned_by >= 0:
                pinned += 1
                if self._ents.count(dereference(it).second.pinned_by) == 0:
                    raise AssertionError(
                        f"block {v}:{idx} pinned by dead entity")
            elif is_pfx:
                pfx_unpinned[v] = pfx_unpinned.get(v, 0) + 1
            else:
                sfx_unpinned.add((idx, v))
            preincrement(it)
        tracked_pfx = {}
        cdef unordered_map[int64_t, int64_t].iterator pit = self._pfx_unpinned.begin()
        while pit != self._pfx_unpinned.end():
            if dereference(pit).second > 0:
                tracked_pfx[dereference(pit).first] = dereference(pit).second
            preincrement(pit)
        ok = (
            resident == self.resident_total
            and pinned == self.pinned_total
            and prefix == self.prefix_used
            and prefix <= self.prefix_cap
            and resident <= self.capacity
            and pfx_unpinned == tracked_pfx
        )
        cdef unordered_map[int64_t, unordered_set[int64_t]].iterator bkit
        cdef unordered_set[int64_t].iterator sit
        if self.prefix_priority:
            tracked = set()
            bkit = self._sfx_buckets.begin()
            while bkit != self._sfx_buckets.end():
                sit = dereference(bkit).second.begin()
                while sit != dereference(bkit).second.end():
                    tracked.add((dereference(bkit).first, dereference(sit)))
                    preincrement(sit)
                preincrement(bkit)
            ok = ok and tracked == sfx_unpinned
        cdef int64_t n_disk_like = 0
        eids = []
        cdef unordered_map[int64_t, Ent].iterator eit = self._ents.begin()
        while eit != self._ents.end():
            eids.append(dereference(eit).first)
            if dereference(eit).second.kind == CK_DISK or dereference(eit).second.kind == CK_PREFETCH:
                n_disk_like += 1
            preincrement(eit)
        ok = ok and n_disk_like == self.n_disk_like
        order = [self._eid_order[i] for i in range(self._eid_order.size())]
        ok = ok and sorted(eids) == order
        return {
            "ok": bool(ok),
            "resident": int(resident),
            "pinned": int(pinned),
            "prefix": int(prefix),
            "n_disk_like": int(n_disk_like),
        }
