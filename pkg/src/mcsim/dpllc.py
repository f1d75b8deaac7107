"""Set-partitionable last-level cache over a deterministic HyperRAM backend.

The cache is physically one tag/data array (128KiB, 64B lines, 8 ways by
default) carved into disjoint set ranges by a partition table keyed by
part_id.  A request indexes only within its partition's sets, so two tasks
with disjoint partitions cannot evict each other - their hit/miss streams
are the same as when running alone.  part_ids missing from the table fall
back to default_part (several tasks may share the cache that way while
their counters stay per-part_id).  Selective flush empties one partition,
writing dirty lines back, without touching any other partition's tags,
recency state or counters.

The HyperRAM behind the cache has fixed per-burst setup plus per-beat
cycles and services each of its channels strictly in order, so completion
times are a pure function of the arrival trace.

Timing model: the cache front-end is one crossbar port per direction that
accepts one beat per cycle; a miss blocks the stream until its line fill
(and any victim writeback) completes, and each requester may have one
miss outstanding.  Burst walks are therefore fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from mcsim.kernel import Simulator
from mcsim.kernels import CacheCore
from mcsim.transport import Endpoint, Op, Transaction

KIB = 1024
MIB = 1024 * 1024


@dataclass
class HyperRamConfig:
    access_latency_cycles: int = 24
    cycles_per_beat: int = 2
    channels: int = 2
    channel_interleave_bytes: int = 1 * MIB

    def validate(self) -> list[str]:
        problems = []
        if self.access_latency_cycles < 1:
            problems.append("hyperram access_latency_cycles must be >= 1")
        if self.cycles_per_beat < 1:
            problems.append("hyperram cycles_per_beat must be >= 1")
        if self.channels < 1:
            problems.append("hyperram channels must be >= 1")
        return problems


class HyperRam:
    """In-order fixed-timing memory channels; the scarce resource behind misses."""

    def __init__(self, cfg: HyperRamConfig):
        self.cfg = cfg
        self.channel_free = [0] * cfg.channels
        self.accesses = 0
        self.busy_cycles = 0

    def channel_for(self, addr: int) -> int:
        return (addr // self.cfg.channel_interleave_bytes) % self.cfg.channels

    def access(self, beats: int, cycle: int, channel: int) -> int:
        """Serve one burst on a channel; returns its completion cycle."""
        if beats < 1:
            raise ValueError("beats must be >= 1")
        start = max(cycle, self.channel_free[channel])
        done = start + self.cfg.access_latency_cycles + beats * self.cfg.cycles_per_beat
        self.channel_free[channel] = done
        self.accesses += 1
        self.busy_cycles += done - start
        return done


@dataclass
class Partition:
    base_set: int
    num_sets: int


@dataclass
class LlcConfig:
    total_bytes: int = 128 * KIB
    line_bytes: int = 64
    ways: int = 8
    partition_table: dict[int, Partition] = field(default_factory=dict)
    default_part: int = 0
    hit_cycles: int = 1

    @property
    def num_sets(self) -> int:
        return self.total_bytes // (self.line_bytes * self.ways)

    @property
    def line_beats(self) -> int:
        # line transfer length on the memory side, in 8-byte beats
        return max(1, self.line_bytes // 8)

    def validate(self) -> list[str]:
        problems = []
        if self.total_bytes % (self.line_bytes * self.ways) != 0:
            problems.append("total_bytes must divide into whole sets")
        if not self.partition_table:
            problems.append("partition_table must define at least one partition")
        if self.default_part not in self.partition_table:
            problems.append(f"default_part {self.default_part} missing from partition_table")
        spans = []
        for pid, p in self.partition_table.items():
            if p.num_sets < 1:
                problems.append(f"partition {pid}: num_sets must be >= 1")
            if p.base_set < 0 or p.base_set + p.num_sets > self.num_sets:
                problems.append(f"partition {pid}: set range outside the {self.num_sets}-set array")
            spans.append((p.base_set, p.base_set + p.num_sets, pid))
        spans.sort()
        # identical ranges are deliberate sharing; partial overlap is a bug
        for (a0, a1, pa), (b0, b1, pb) in zip(spans, spans[1:]):
            if a1 > b0 and (a0, a1) != (b0, b1):
                problems.append(f"partitions {pa} and {pb} partially overlap in set ranges")
        return problems


class Dpllc(Endpoint):
    """Crossbar endpoint: partitioned lookup front-end plus HyperRAM."""

    num_ports = 1

    def __init__(self, sim: Simulator, cfg: LlcConfig, hr_cfg: HyperRamConfig,
                 name: str = "llc", recorder=None):
        problems = cfg.validate() + hr_cfg.validate()
        if problems:
            raise ValueError("llc: " + "; ".join(problems))
        self.sim = sim
        self.cfg = cfg
        self.name = name
        self.recorder = recorder
        self.core = CacheCore(cfg.num_sets, cfg.ways)
        self.hyperram = HyperRam(hr_cfg)
        self.hits: dict[int, int] = {}
        self.misses: dict[int, int] = {}
        self.evictions: dict[int, int] = {}
        self.flushes: dict[int, int] = {}
        self.reprogram_violations = 0
        # line-granular data: cached lines and the memory behind them
        self._line_data: dict[int, dict[int, int]] = {}
        self._backing: dict[int, dict[int, int]] = {}
        # one outstanding miss per requester
        self._miss_free: dict[str, int] = {}

    # ---------------- partition plumbing ----------------

    def partition_for(self, part_id: int) -> Partition:
        p = self.cfg.partition_table.get(part_id)
        if p is None:
            p = self.cfg.partition_table[self.cfg.default_part]
        return p

    def set_index(self, addr: int, part_id: int) -> int:
        p = self.partition_for(part_id)
        line = addr // self.cfg.line_bytes
        return p.base_set + (line % p.num_sets)

    def _count(self, table: dict[int, int], part_id: int) -> None:
        table[part_id] = table.get(part_id, 0) + 1

    def counters(self, part_id: int) -> tuple[int, int, int, int]:
        return (self.hits.get(part_id, 0), self.misses.get(part_id, 0),
                self.evictions.get(part_id, 0), self.flushes.get(part_id, 0))

    # ---------------- functional data plane ----------------

    def _line_of(self, addr: int) -> int:
        return addr // self.cfg.line_bytes

    def _beat_slot(self, addr: int) -> int:
        return addr % self.cfg.line_bytes

    def peek_backing(self, addr: int) -> int:
        return self._backing.get(self._line_of(addr), {}).get(self._beat_slot(addr), 0)

    # ---------------- the lookup state machine ----------------

    def lookup(self, addr: int, part_id: int, op: Op, cycle: int,
               requester: str = "") -> tuple[bool, int]:
        """One line-granular access.  Returns (hit, service_done_cycle).

        On a miss the LRU victim within the same set is evicted (written
        back if dirty) and the line is fetched from HyperRAM; the returned
        cycle is when the fill data is available.  Counters are booked
        under the requester's part_id.
        """
        line = self._line_of(addr)
        set_idx = self.set_index(addr, part_id)
        way = self.core.lookup(set_idx, line)
        if way >= 0:
            self.core.touch(set_idx, way)
            if op is Op.WRITE:
                self.core.set_dirty(set_idx, way)
            self._count(self.hits, part_id)
            return True, cycle + self.cfg.hit_cycles
        self._count(self.misses, part_id)
        gate = self._miss_free.get(requester, 0)
        issue = max(cycle, gate)
        way = self.core.victim_way(set_idx)
        vtag, vvalid, vdirty = self.core.way_state(set_idx, way)
        if vvalid:
            self._count(self.evictions, part_id)
            self._writeback_line(vtag, issue, dirty=bool(vdirty))
        fill_ch = self.hyperram.channel_for(addr)
        done = self.hyperram.access(self.cfg.line_beats, issue, fill_ch)
        self.core.fill(set_idx, way, line, 0)
        if op is Op.WRITE:
            self.core.set_dirty(set_idx, way)
        self._line_data[line] = dict(self._backing.get(line, {}))
        self._miss_free[requester] = done
        if self.recorder is not None:
            self.recorder.emit(issue, self.name, "fill", line=line, part_id=part_id,
                               set=set_idx, done=done)
        return False, done

    def _writeback_line(self, line: int, cycle: int, dirty: bool) -> None:
        data = self._line_data.pop(line, None)
        if not dirty:
            return
        if data is not None:
            self._backing[line] = dict(data)
        ch = self.hyperram.channel_for(line * self.cfg.line_bytes)
        self.hyperram.access(self.cfg.line_beats, cycle, ch)
        if self.recorder is not None:
            self.recorder.emit(cycle, self.name, "writeback", line=line)

    # ---------------- crossbar endpoint ----------------

    def begin_burst(self, txn: Transaction, grant_cycle: int, port: int,
                    on_port_free: Callable[[int], None],
                    on_complete: Callable[[Transaction, int], None]) -> None:
        cur = grant_cycle + 1
        interval = txn.w_supply_interval if txn.op is Op.WRITE else 1
        completion = cur
        data_out: Optional[list[int]] = [] if txn.op is Op.READ else None
        for i in range(txn.beats):
            beat_addr = txn.addr + i * txn.beat_bytes
            earliest = grant_cycle + 1 + i * interval
            cur = max(cur, earliest)
            line = self._line_of(beat_addr)
            hit, done = self.lookup(beat_addr, txn.part_id, txn.op, cur, txn.initiator)
            if hit:
                accept = cur
            else:
                accept = done  # blocking: the stream stalls on the fill
            if txn.op is Op.WRITE:
                slot = self._beat_slot(beat_addr)
                value = txn.data[i] if txn.data is not None else 0
                self._line_data.setdefault(line, {})[slot] = value
            else:
                data_out.append(self._line_data.get(line, {}).get(self._beat_slot(beat_addr), 0))
            completion = max(completion, done)
            cur = accept + 1
        if txn.op is Op.READ:
            txn.data_out = data_out
        txn.t_complete = completion
        last_accept = cur - 1
        self.sim.at(last_accept, lambda: on_port_free(last_accept),
                    target=self.name, kind="port_free")
        self.sim.at(completion, lambda: on_complete(txn, completion),
                    target=self.name, kind="burst_done")

    # ---------------- management operations ----------------

    def flush_partition(self, part_id: int, cycle: Optional[int] = None) -> int:
        """Invalidate every valid line in one partition, writing dirty lines
        back.  No other partition's tags, LRU order or counters change.
        Unknown part_id is a no-op (returns 0)."""
        p = self.cfg.partition_table.get(part_id)
        if p is None:
            if self.recorder is not None:
                self.recorder.emit(self.sim.now, self.name, "flush_unknown_part", part_id=part_id)
            return 0
        when = self.sim.now if cycle is None else cycle
        flushed = 0
        for s in range(p.base_set, p.base_set + p.num_sets):
            for w in range(self.cfg.ways):
                tag, valid, dirty = self.core.way_state(s, w)
                if valid:
                    self._writeback_line(tag, when, dirty=bool(dirty))
                    self.core.invalidate(s, w)
                    flushed += 1
        self.flushes[part_id] = self.flushes.get(part_id, 0) + flushed
        if self.recorder is not None:
            self.recorder.emit(when, self.name, "flush", part_id=part_id, lines=flushed)
        return flushed

    def partition_valid_lines(self, part_id: int) -> int:
        p = self.cfg.partition_table.get(part_id)
        if p is None:
            return 0
        n = 0
        for s in range(p.base_set, p.base_set + p.num_sets):
            for w in range(self.cfg.ways):
                if self.core.way_state(s, w)[1]:
                    n += 1
        return n

    def set_partition_table(self, table: dict[int, Partition]) -> list[int]:
        """Reprogram the partition map (hypervisor write).

        Partitions whose set range changes must be flushed first; any that
        still hold valid lines are flagged as violations and force-flushed
        so physical state stays inside partition bounds."""
        violated = []
        for pid, old in self.cfg.partition_table.items():
            new = table.get(pid)
            if (new is None or (new.base_set, new.num_sets) != (old.base_set, old.num_sets)) \
                    and self.partition_valid_lines(pid) > 0:
                violated.append(pid)
                self.flush_partition(pid)
        self.reprogram_violations += len(violated)
        trial = LlcConfig(self.cfg.total_bytes, self.cfg.line_bytes, self.cfg.ways,
                          table, self.cfg.default_part, self.cfg.hit_cycles)
        problems = trial.validate()
        if problems:
            raise ValueError("llc reprogram: " + "; ".join(problems))
        self.cfg = trial
        if self.recorder is not None:
            self.recorder.emit(self.sim.now, self.name, "repartition",
                               violations=list(violated))
        return violated

    def audit_inclusion(self) -> bool:
        """Every valid line's set index lies inside some partition's range."""
        covered = [False] * self.cfg.num_sets
        for p in self.cfg.partition_table.values():
            for s in range(p.base_set, p.base_set + p.num_sets):
                covered[s] = True
        for s in range(self.cfg.num_sets):
            for w in range(self.cfg.ways):
                if self.core.way_state(s, w)[1] and not covered[s]:
                    return False
        return True
