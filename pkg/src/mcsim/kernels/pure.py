"""Pure-Python implementations of the per-beat hot kernels.

Two state machines live here: the cache tag/LRU array used by the
last-level cache and the bank arbitration engine used by the scratchpad.
They are semantically identical to the compiled twins in ``_speed.pyx``;
the selector in ``mcsim.kernels`` picks whichever is available (or forced
via MCSIM_PURE_PYTHON=1).  Keep both in lockstep: the differential test
drives them with random traces and requires bit-identical state.
"""

from __future__ import annotations


class CacheCore:
    """Tag, valid/dirty and per-set LRU state for a set-associative cache.

    Timing and partition policy live in the caller; this class only answers
    "which way holds this tag" and "which way is the victim" and keeps the
    recency order.  The LRU order of a set is a permutation of its ways,
    position 0 least recent.
    """

    def __init__(self, num_sets: int, ways: int):
        if num_sets < 1 or ways < 1:
            raise ValueError("num_sets and ways must be >= 1")
        self.num_sets = num_sets
        self.ways = ways
        n = num_sets * ways
        self._tags = [0] * n
        self._valid = bytearray(n)
        self._dirty = bytearray(n)
        # lru[set*ways + k] = way at recency position k (0 = LRU).
        self._lru = bytearray(num_sets * ways)
        for s in range(num_sets):
            base = s * ways
            for w in range(ways):
                self._lru[base + w] = w

    def lookup(self, set_idx: int, tag: int) -> int:
        """Way holding (valid) ``tag`` in ``set_idx``, or -1.  No LRU update."""
        base = set_idx * self.ways
        for w in range(self.ways):
            if self._valid[base + w] and self._tags[base + w] == tag:
                return w
        return -1

    def touch(self, set_idx: int, way: int) -> None:
        """Mark ``way`` most recently used."""
        base = set_idx * self.ways
        pos = -1
        for k in range(self.ways):
            if self._lru[base + k] == way:
                pos = k
                break
        for k in range(pos, self.ways - 1):
            self._lru[base + k] = self._lru[base + k + 1]
        self._lru[base + self.ways - 1] = way

    def victim_way(self, set_idx: int) -> int:
        """First invalid way if any, else the LRU way."""
        base = set_idx * self.ways
        for w in range(self.ways):
            if not self._valid[base + w]:
                return w
        return self._lru[base]

    def fill(self, set_idx: int, way: int, tag: int, dirty: int) -> None:
        i = set_idx * self.ways + way
        self._tags[i] = tag
        self._valid[i] = 1
        self._dirty[i] = 1 if dirty else 0
        self.touch(set_idx, way)

    def set_dirty(self, set_idx: int, way: int) -> None:
        self._dirty[set_idx * self.ways + way] = 1

    def invalidate(self, set_idx: int, way: int) -> None:
        i = set_idx * self.ways + way
        self._valid[i] = 0
        self._dirty[i] = 0

    def way_state(self, set_idx: int, way: int) -> tuple[int, int, int]:
        """(tag, valid, dirty) of one way."""
        i = set_idx * self.ways + way
        return (self._tags[i], self._valid[i], self._dirty[i])

    def lru_order(self, set_idx: int) -> list[int]:
        base = set_idx * self.ways
        return [self._lru[base + k] for k in range(self.ways)]

    def state_digest(self) -> tuple:
        """Hashable full-state snapshot, used by the differential tests."""
        return (bytes(self._valid), bytes(self._dirty), bytes(self._lru), tuple(self._tags))


class SpmEngine:
    """Cycle-stepped bank arbitration for the multi-port scratchpad.

    Each (port, channel) slot carries at most one in-flight burst, supplied
    by the crossbar.  Every cycle each port presents one eligible beat
    (alternating read/write by a per-port preference bit) and each bank
    grants one presenter, round-robin across ports.  Losing presenters
    stall and bump their bank's conflict counter.  ``advance`` processes
    whole cycles and stops at the end of the first cycle that completed a
    burst, so the caller can schedule completion events at exact cycles.
    """

    READ = 0
    WRITE = 1

    def __init__(self, num_banks: int, num_ports: int):
        if num_banks < 1 or num_ports < 1:
            raise ValueError("num_banks and num_ports must be >= 1")
        self.num_banks = num_banks
        self.num_ports = num_ports
        # stream slot: [handle, banks, idx, arrival, interval] or None
        self._streams: list[list] = [None] * (num_ports * 2)
        self._bank_rr = [0] * num_banks
        self.conflicts = [0] * num_banks
        self._port_pref = [0] * num_ports
        self.synced = 0
        self._active = 0
        self.serviced_beats = 0

    def busy(self) -> bool:
        return self._active > 0

    def enqueue(self, port: int, channel: int, handle: int, banks: list[int], arrival: int, interval: int = 1) -> None:
        slot = port * 2 + channel
        if self._streams[slot] is not None:
            raise RuntimeError(f"port {port} channel {channel} already has an in-flight burst")
        if not banks:
            raise ValueError("empty burst")
        if interval < 1:
            raise ValueError("interval must be >= 1")
        self._streams[slot] = [handle, banks, 0, arrival, interval]
        self._active += 1

    def next_completion_lower_bound(self):
        """Earliest cycle any in-flight burst could finish, or None if idle."""
        lb = None
        for s in self._streams:
            if s is None:
                continue
            _, banks, idx, arrival, interval = s
            n = len(banks)
            pace = arrival + (n - 1) * interval
            drain = max(self.synced, arrival + idx * interval) + (n - idx - 1)
            cand = max(pace, drain)
            if lb is None or cand < lb:
                lb = cand
        return lb

    def advance(self, upto: int):
        """Process cycles [synced, upto); stop after a completing cycle.

        Returns [(handle, port, channel, cycle), ...] for bursts whose last
        beat was serviced, all within a single cycle.
        """
        out: list[tuple[int, int, int, int]] = []
        c = self.synced
        while c < upto and self._active:
            done = self._cycle(c)
            c += 1
            if done:
                out = done
                break
        self.synced = upto if not self._active else c
        return out

    def _cycle(self, c: int):
        presented = []  # (port, channel, stream)
        for p in range(self.num_ports):
            pref = self._port_pref[p]
            for ch in (pref, 1 - pref):
                s = self._streams[p * 2 + ch]
                if s is not None and s[3] + s[2] * s[4] <= c:
                    presented.append((p, ch, s))
                    break
        if not presented:
            return None
        by_bank: dict[int, list] = {}
        for entry in presented:
            s = entry[2]
            head_bank = s[1][s[2]]
            by_bank.setdefault(head_bank, []).append(entry)
        done = None
        for b in sorted(by_bank):
            contenders = by_bank[b]
            if len(contenders) == 1:
                winner = contenders[0]
            else:
                rr = self._bank_rr[b]
                winner = min(contenders, key=lambda e: (e[0] - rr) % self.num_ports)
                self.conflicts[b] += len(contenders) - 1
            p, ch, s = winner
            self._bank_rr[b] = (p + 1) % self.num_ports
            s[2] += 1
            self.serviced_beats += 1
            self._port_pref[p] = 1 - ch
            if s[2] == len(s[1]):
                self._streams[p * 2 + ch] = None
                self._active -= 1
                if done is None:
                    done = []
                done.append((s[0], p, ch, c))
        return done

    def state_digest(self) -> tuple:
        return (
            tuple(self._bank_rr),
            tuple(self.conflicts),
            tuple(self._port_pref),
            self.synced,
            self.serviced_beats,
            tuple((s[0], tuple(s[1]), s[2], s[3], s[4]) if s else None for s in self._streams),
        )
