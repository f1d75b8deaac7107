# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled twins of the per-beat hot kernels.

Semantics must stay bit-identical to mcsim.kernels.pure; the differential
test drives both with random traces and compares full state digests.
"""

from libc.stdlib cimport calloc, free


cdef class CacheCore:
    cdef public int num_sets, ways
    cdef long long* _tags
    cdef unsigned char* _valid
    cdef unsigned char* _dirty
    cdef unsigned char* _lru

    def __cinit__(self, int num_sets, int ways):
        if num_sets < 1 or ways < 1:
            raise ValueError("num_sets and ways must be >= 1")
        self.num_sets = num_sets
        self.ways = ways
        cdef size_t n = <size_t>(num_sets * ways)
        self._tags = <long long*>calloc(n, sizeof(long long))
        self._valid = <unsigned char*>calloc(n, 1)
        self._dirty = <unsigned char*>calloc(n, 1)
        self._lru = <unsigned char*>calloc(n, 1)
        if not (self._tags and self._valid and self._dirty and self._lru):
            raise MemoryError()
        cdef int s, w
        for s in range(num_sets):
            for w in range(ways):
                self._lru[s * ways + w] = <unsigned char>w

    def __dealloc__(self):
        free(self._tags)
        free(self._valid)
        free(self._dirty)
        free(self._lru)

    cpdef int lookup(self, int set_idx, long long tag):
        cdef int base = set_idx * self.ways
        cdef int w
        for w in range(self.ways):
            if self._valid[base + w] and self._tags[base + w] == tag:
                return w
        return -1

    cpdef void touch(self, int set_idx, int way):
        cdef int base = set_idx * self.ways
        cdef int k, pos = -1
        for k in range(self.ways):
            if self._lru[base + k] == way:
                pos = k
                break
        for k in range(pos, self.ways - 1):
            self._lru[base + k] = self._lru[base + k + 1]
        self._lru[base + self.ways - 1] = <unsigned char>way

    cpdef int victim_way(self, int set_idx):
        cdef int base = set_idx * self.ways
        cdef int w
        for w in range(self.ways):
            if not self._valid[base + w]:
                return w
        return self._lru[base]

    cpdef void fill(self, int set_idx, int way, long long tag, int dirty):
        cdef int i = set_idx * self.ways + way
        self._tags[i] = tag
        self._valid[i] = 1
        self._dirty[i] = 1 if dirty else 0
        self.touch(set_idx, way)

    cpdef void set_dirty(self, int set_idx, int way):
        self._dirty[set_idx * self.ways + way] = 1

    cpdef void invalidate(self, int set_idx, int way):
        cdef int i = set_idx * self.ways + way
        self._valid[i] = 0
        self._dirty[i] = 0

    def way_state(self, int set_idx, int way):
        cdef int i = set_idx * self.ways + way
        return (self._tags[i], self._valid[i], self._dirty[i])

    def lru_order(self, int set_idx):
        cdef int base = set_idx * self.ways
        return [self._lru[base + k] for k in range(self.ways)]

    def state_digest(self):
        cdef int n = self.num_sets * self.ways
        valid = bytes(bytearray([self._valid[i] for i in range(n)]))
        dirty = bytes(bytearray([self._dirty[i] for i in range(n)]))
        lru = bytes(bytearray([self._lru[i] for i in range(n)]))
        tags = tuple(self._tags[i] for i in range(n))
        return (valid, dirty, lru, tags)


cdef struct Stream:
    int active
    long long handle
    int length
    int idx
    long long arrival
    int interval


cdef class SpmEngine:
    READ = 0
    WRITE = 1

    cdef public int num_banks, num_ports
    cdef public long long synced
    cdef public long long serviced_beats
    cdef Stream* _streams
    cdef int** _banks
    cdef int* _bank_rr
    cdef long long* _conflicts
    cdef int* _port_pref
    cdef int _active

    def __cinit__(self, int num_banks, int num_ports):
        if num_banks < 1 or num_ports < 1:
            raise ValueError("num_banks and num_ports must be >= 1")
        if num_ports > 32:
            raise ValueError("compiled engine supports at most 32 ports")
        self.num_banks = num_banks
        self.num_ports = num_ports
        self.synced = 0
        self.serviced_beats = 0
        self._active = 0
        cdef int slots = num_ports * 2
        self._streams = <Stream*>calloc(slots, sizeof(Stream))
        self._banks = <int**>calloc(slots, sizeof(int*))
        self._bank_rr = <int*>calloc(num_banks, sizeof(int))
        self._conflicts = <long long*>calloc(num_banks, sizeof(long long))
        self._port_pref = <int*>calloc(num_ports, sizeof(int))
        if not (self._streams and self._banks and self._bank_rr
                and self._conflicts and self._port_pref):
            raise MemoryError()

    def __dealloc__(self):
        cdef int i
        if self._banks:
            for i in range(self.num_ports * 2):
                free(self._banks[i])
        free(self._banks)
        free(self._streams)
        free(self._bank_rr)
        free(self._conflicts)
        free(self._port_pref)

    @property
    def conflicts(self):
        return [self._conflicts[b] for b in range(self.num_banks)]

    def busy(self):
        return self._active > 0

    def enqueue(self, int port, int channel, long long handle, banks,
                long long arrival, int interval=1):
        cdef int slot = port * 2 + channel
        if self._streams[slot].active:
            raise RuntimeError(f"port {port} channel {channel} already has an in-flight burst")
        cdef int n = len(banks)
        if n == 0:
            raise ValueError("empty burst")
        if interval < 1:
            raise ValueError("interval must be >= 1")
        cdef int* arr = <int*>calloc(n, sizeof(int))
        if not arr:
            raise MemoryError()
        cdef int i
        for i in range(n):
            arr[i] = banks[i]
        free(self._banks[slot])
        self._banks[slot] = arr
        self._streams[slot].active = 1
        self._streams[slot].handle = handle
        self._streams[slot].length = n
        self._streams[slot].idx = 0
        self._streams[slot].arrival = arrival
        self._streams[slot].interval = interval
        self._active += 1

    def next_completion_lower_bound(self):
        cdef long long lb = -1
        cdef long long pace, drain, start, cand
        cdef int slot
        cdef Stream* s
        for slot in range(self.num_ports * 2):
            s = &self._streams[slot]
            if not s.active:
                continue
            pace = s.arrival + <long long>(s.length - 1) * s.interval
            start = s.arrival + <long long>s.idx * s.interval
            if start < self.synced:
                start = self.synced
            drain = start + (s.length - s.idx - 1)
            cand = pace if pace > drain else drain
            if lb < 0 or cand < lb:
                lb = cand
        return None if lb < 0 else lb

    def advance(self, long long upto):
        out = []
        cdef long long c = self.synced
        cdef int done
        while c < upto and self._active:
            done = self._cycle(c, out)
            c += 1
            if done:
                break
        self.synced = upto if self._active == 0 else c
        return out

    cdef int _cycle(self, long long c, list out):
        cdef int P = self.num_ports
        cdef int pres_port[64]
        cdef int pres_ch[64]
        cdef int pres_bank[64]
        cdef unsigned char taken[64]
        cdef int n_pres = 0
        cdef int p, ch, k, slot
        cdef Stream* s
        for p in range(P):
            for k in range(2):
                ch = self._port_pref[p] if k == 0 else 1 - self._port_pref[p]
                slot = p * 2 + ch
                s = &self._streams[slot]
                if s.active and s.arrival + <long long>s.idx * s.interval <= c:
                    pres_port[n_pres] = p
                    pres_ch[n_pres] = ch
                    pres_bank[n_pres] = self._banks[slot][s.idx]
                    taken[n_pres] = 0
                    n_pres += 1
                    break
        if n_pres == 0:
            return 0
        cdef int completed = 0
        cdef int i, j, b, best, cont, rr, key, bestkey, winner
        # process contended banks in ascending bank order, like the pure twin
        while True:
            b = -1
            for i in range(n_pres):
                if not taken[i] and (b < 0 or pres_bank[i] < b):
                    b = pres_bank[i]
            if b < 0:
                break
            cont = 0
            for i in range(n_pres):
                if not taken[i] and pres_bank[i] == b:
                    cont += 1
            rr = self._bank_rr[b]
            winner = -1
            bestkey = 1 << 30
            for i in range(n_pres):
                if not taken[i] and pres_bank[i] == b:
                    key = (pres_port[i] - rr) % P
                    if key < 0:
                        key += P
                    if key < bestkey:
                        bestkey = key
                        winner = i
            if cont > 1:
                self._conflicts[b] += cont - 1
            for i in range(n_pres):
                if not taken[i] and pres_bank[i] == b:
                    taken[i] = 1
            p = pres_port[winner]
            ch = pres_ch[winner]
            self._bank_rr[b] = (p + 1) % P
            slot = p * 2 + ch
            s = &self._streams[slot]
            s.idx += 1
            self.serviced_beats += 1
            self._port_pref[p] = 1 - ch
            if s.idx == s.length:
                s.active = 0
                self._active -= 1
                out.append((s.handle, p, ch, c))
                completed = 1
        return completed

    def state_digest(self):
        cdef int slot
        cdef Stream* s
        streams = []
        for slot in range(self.num_ports * 2):
            s = &self._streams[slot]
            if s.active:
                banks = tuple(self._banks[slot][i] for i in range(s.length))
                streams.append((s.handle, banks, s.idx, s.arrival, s.interval))
            else:
                streams.append(None)
        return (
            tuple(self._bank_rr[b] for b in range(self.num_banks)),
            tuple(self._conflicts[b] for b in range(self.num_banks)),
            tuple(self._port_pref[p] for p in range(self.num_ports)),
            self.synced,
            self.serviced_beats,
            tuple(streams),
        )
