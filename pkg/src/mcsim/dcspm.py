"""Banked L2 scratchpad with aliased interleaved/contiguous address maps.

The scratchpad spans total_bytes over a power-of-two number of single-
cycle banks and is reachable through several alias windows.  Which window
an address falls in selects the decode, per access and with zero extra
cycles: the interleaved map stripes consecutive words across banks (good
for bandwidth when sharing), the contiguous map gives each bank a solid
address stretch (good for isolating initiators onto private banks).  Both
aliases of a byte resolve to the same physical storage cell.

Timing is handled by the SpmEngine hot kernel: each of the two AXI ports
feeds at most one read and one write burst at a time, ports take one beat
per cycle, banks take one beat per cycle, and same-cycle collisions on a
bank serialize round-robin across ports while bumping that bank's
conflict counter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from mcsim.kernel import Simulator
from mcsim.kernels import SpmEngine
from mcsim.transport import Endpoint, Op, Transaction

KIB = 1024
MIB = 1024 * 1024


class SpmMode(Enum):
    INTERLEAVED = "interleaved"
    CONTIGUOUS = "contiguous"


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class AliasWindow:
    base: int
    mode: SpmMode


@dataclass
class SpmConfig:
    total_bytes: int = 1 * MIB
    num_banks: int = 16
    word_bytes: int = 8
    ports: int = 2
    alias_windows: list[AliasWindow] = field(default_factory=list)

    @property
    def bank_bytes(self) -> int:
        return self.total_bytes // self.num_banks

    def validate(self) -> list[str]:
        problems = []
        if self.num_banks < 1 or (self.num_banks & (self.num_banks - 1)) != 0:
            problems.append("num_banks must be a power of two")
        if self.total_bytes % max(self.num_banks, 1) != 0:
            problems.append("total_bytes must divide evenly into banks")
        if self.word_bytes < 1 or (self.word_bytes & (self.word_bytes - 1)) != 0:
            problems.append("word_bytes must be a power of two")
        if self.ports < 1:
            problems.append("ports must be >= 1")
        if not self.alias_windows:
            problems.append("at least one alias window is required")
        spans = sorted((w.base, w.base + self.total_bytes) for w in self.alias_windows)
        for (a0, a1), (b0, _) in zip(spans, spans[1:]):
            if a1 > b0:
                problems.append(f"alias windows [{a0:#x},{a1:#x}) and [{b0:#x},...) overlap")
        return problems

    def window_for(self, addr: int) -> Optional[AliasWindow]:
        for w in self.alias_windows:
            if w.base <= addr < w.base + self.total_bytes:
                return w
        return None


def spm_decode(cfg: SpmConfig, addr: int) -> tuple[int, int, SpmMode]:
    """Resolve a byte address through its alias window to (bank, offset, mode).

    Interleaved mode stripes word-granules round-robin over the banks;
    contiguous mode maps each bank_bytes stretch to one bank.  Both modes
    address the same physical cells.
    """
    w = cfg.window_for(addr)
    if w is None:
        raise DecodeError(f"address {addr:#x} outside every scratchpad alias window")
    off = addr - w.base
    if w.mode is SpmMode.INTERLEAVED:
        word = off // cfg.word_bytes
        bank = word % cfg.num_banks
        bank_off = (word // cfg.num_banks) * cfg.word_bytes + off % cfg.word_bytes
    else:
        bank = off // cfg.bank_bytes
        bank_off = off % cfg.bank_bytes
    return bank, bank_off, w.mode


class Dcspm(Endpoint):
    """Crossbar endpoint wrapping the bank engine plus functional storage."""

    def __init__(self, sim: Simulator, cfg: SpmConfig, name: str = "spm", recorder=None):
        problems = cfg.validate()
        if problems:
            raise ValueError("spm: " + "; ".join(problems))
        self.sim = sim
        self.cfg = cfg
        self.name = name
        self.num_ports = cfg.ports
        self.recorder = recorder
        self.engine = SpmEngine(cfg.num_banks, cfg.ports)
        # physical cells, keyed by (bank, word-aligned bank offset)
        self._cells: dict[tuple[int, int], int] = {}
        self._handles: dict[int, tuple] = {}
        self._next_handle = 0
        self._pump_at: Optional[int] = None
        self._pump_gen = 0  # identifies the single live pump event

    # functional access, used by tests and by burst completion
    def write_word(self, addr: int, value: int) -> None:
        bank, off, _ = spm_decode(self.cfg, addr)
        self._cells[(bank, off - off % self.cfg.word_bytes)] = value

    def read_word(self, addr: int) -> int:
        bank, off, _ = spm_decode(self.cfg, addr)
        return self._cells.get((bank, off - off % self.cfg.word_bytes), 0)

    @property
    def conflicts(self) -> list[int]:
        return list(self.engine.conflicts)

    def begin_burst(self, txn: Transaction, grant_cycle: int, port: int,
                    on_port_free: Callable[[int], None],
                    on_complete: Callable[[Transaction, int], None]) -> None:
        banks = []
        for i in range(txn.beats):
            bank, _, _ = spm_decode(self.cfg, txn.addr + i * txn.beat_bytes)
            banks.append(bank)
        handle = self._next_handle
        self._next_handle += 1
        self._handles[handle] = (txn, on_port_free, on_complete)
        channel = SpmEngine.WRITE if txn.op is Op.WRITE else SpmEngine.READ
        interval = txn.w_supply_interval if txn.op is Op.WRITE else 1
        now = self.sim.now
        stale = self.engine.advance(now)
        if stale:
            raise RuntimeError("scratchpad engine had unreported completions")
        self.engine.enqueue(port, channel, handle, banks, grant_cycle + 1, interval)
        self._schedule_pump()

    def _schedule_pump(self) -> None:
        lb = self.engine.next_completion_lower_bound()
        if lb is None:
            return
        lb = max(lb, self.sim.now)
        if self._pump_at is not None and self._pump_at <= lb:
            return
        self._pump_at = lb
        self._pump_gen += 1
        gen = self._pump_gen
        self.sim.at(lb, lambda: self._pump(gen), target=self.name, kind="pump")

    def _pump(self, gen: int) -> None:
        if gen != self._pump_gen:
            return  # superseded
        now = self.sim.now
        if self.sim.pending_at(now):
            # let every other event of this cycle (new grants) land first
            self._pump_gen += 1
            nxt = self._pump_gen
            self.sim.at(now, lambda: self._pump(nxt), target=self.name, kind="pump")
            return
        self._pump_at = None
        completions = self.engine.advance(now + 1)
        for handle, port, channel, cycle in completions:
            txn, on_port_free, on_complete = self._handles.pop(handle)
            self._finish(txn, cycle)
            on_port_free(cycle)
            on_complete(txn, cycle)
        self._schedule_pump()

    def _finish(self, txn: Transaction, cycle: int) -> None:
        txn.t_complete = cycle
        if txn.op is Op.WRITE:
            if txn.data is not None:
                for i, v in enumerate(txn.data):
                    self.write_word(txn.addr + i * txn.beat_bytes, v)
        else:
            txn.data_out = [self.read_word(txn.addr + i * txn.beat_bytes)
                            for i in range(txn.beats)]
        if self.recorder is not None:
            self.recorder.emit(cycle, self.name, "burst_done",
                               txn_id=txn.txn_id, initiator=txn.initiator, beats=txn.beats)
