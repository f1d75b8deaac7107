"""Per-initiator traffic shaper: burst splitter, write buffer, regulator.

The shaper sits between an initiator and the crossbar and has three
independently enableable stages:

* granular burst splitter (GBS) - fragments long bursts to a configurable
  beat count so arbitration can interleave initiators fairly;
* write buffer (WB) - holds write data and forwards a write only once its
  data is fully buffered (or the buffer is brim-full for oversize bursts),
  so a slow producer never stalls the shared write channel;
* traffic regulation unit (TRU) - grants each initiator a fixed beat
  budget per configurable period; unused budget does not roll over.

Fragments of one burst release strictly in order, and a fragment enters
arbitration only once the previous fragment's last beat has been granted;
with a single initiator this makes shaped streams gapless, which is why
enabling the shaper costs at most one cycle (the write-buffer register).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional

from mcsim.kernel import Simulator
from mcsim.transport import Crossbar, Op, Transaction

# Fragment ids live above this multiplier of their parent id; the engine
# keeps parent ids below it so the two namespaces cannot collide.
FRAG_ID_BASE = 1_000_000


@dataclass
class TsuConfig:
    split_beats: int = 0          # 0 = splitter bypass
    wb_depth_beats: int = 32
    budget_beats: int = 1
    period_cycles: int = 1
    gbs_on: bool = False
    wb_on: bool = False
    tru_on: bool = False

    def validate(self) -> list[str]:
        problems = []
        if self.split_beats < 0:
            problems.append("split_beats must be 0 (bypass) or >= 1")
        if self.tru_on and self.budget_beats < 1:
            problems.append("budget_beats must be >= 1 when tru_on")
        if self.period_cycles < 1:
            problems.append("period_cycles must be >= 1")
        if self.wb_on and self.wb_depth_beats < 1:
            problems.append("wb_depth_beats must be >= 1 when wb_on")
        if self.tru_on and self.gbs_on and self.split_beats > self.budget_beats:
            problems.append(
                f"split_beats ({self.split_beats}) exceeds budget_beats "
                f"({self.budget_beats}); fragments could never release"
            )
        return problems

    @property
    def enabled(self) -> bool:
        return self.gbs_on or self.wb_on or self.tru_on


@dataclass
class TruState:
    period_start: int = 0
    budget_left: int = 0


def tru_roll(state: TruState, cfg: TsuConfig, cycle: int) -> None:
    """Advance period_start past elapsed whole periods, refilling the budget."""
    if cycle >= state.period_start + cfg.period_cycles:
        elapsed = (cycle - state.period_start) // cfg.period_cycles
        state.period_start += elapsed * cfg.period_cycles
        state.budget_left = cfg.budget_beats


def tru_grant(state: TruState, cfg: TsuConfig, want_beats: int, cycle: int) -> int:
    """Grant up to ``want_beats`` from the current period's budget."""
    tru_roll(state, cfg, cycle)
    granted = min(want_beats, state.budget_left)
    state.budget_left -= granted
    return granted


def gbs_split(txn: Transaction, split_beats: int) -> list[Transaction]:
    """Fragment a burst into in-order pieces of at most ``split_beats`` beats.

    split_beats == 0 bypasses: the transaction is returned unchanged.
    Fragments cover the original byte range exactly, in order, and inherit
    initiator, op, partition id and criticality.
    """
    if split_beats == 0 or txn.beats <= split_beats:
        return [txn]
    frags = []
    consumed = 0
    idx = 0
    while consumed < txn.beats:
        n = min(split_beats, txn.beats - consumed)
        frag = Transaction(
            txn_id=txn.txn_id * FRAG_ID_BASE + idx + 1,
            initiator=txn.initiator,
            op=txn.op,
            addr=txn.addr + consumed * txn.beat_bytes,
            beats=n,
            beat_bytes=txn.beat_bytes,
            part_id=txn.part_id,
            criticality=txn.criticality,
            parent_id=txn.txn_id,
            frag_index=idx,
            data=txn.data[consumed:consumed + n] if txn.data is not None else None,
            w_supply_interval=txn.w_supply_interval,
        )
        frags.append(frag)
        consumed += n
        idx += 1
    return frags


def tsu_latency_bound(cfg: TsuConfig, txn_beats: int, endpoint_service_cycles_per_beat: int) -> int:
    """Analytic worst-case completion bound for a regulated burst.

    Worst phase: the burst arrives with the budget just exhausted, so its
    first batch releases at the next period boundary (period-1 cycles away
    at worst).  Batches of budget_beats then release once per period and
    drain at the endpoint's per-beat service rate; the recurrence below
    accounts for batches that outrun the service rate.
    """
    if not cfg.tru_on:
        raise ValueError("latency bound is defined for regulated traffic (tru_on)")
    if cfg.budget_beats < 1:
        raise ValueError("budget_beats must be >= 1")
    k = math.ceil(txn_beats / cfg.budget_beats)
    finish = 0
    remaining = txn_beats
    for i in range(k):
        batch = min(cfg.budget_beats, remaining)
        remaining -= batch
        release = (cfg.period_cycles - 1) + i * cfg.period_cycles
        finish = max(finish, release) + batch * endpoint_service_cycles_per_beat
    return finish


class WriteBuffer:
    """Beat-accounted write buffer shared by all of one initiator's writes."""

    def __init__(self, depth_beats: int, enabled: bool = True):
        self.depth = depth_beats
        self.enabled = enabled
        self.occupancy = 0
        self._received: dict[int, int] = {}
        self._eligible: dict[int, int] = {}

    def offer_beat(self, txn: Transaction, beat_index: int, cycle: int) -> bool:
        """Offer one write beat.  False means the buffer is full and the
        initiator is back-pressured (never the shared interconnect)."""
        if not self.enabled:
            return True
        if txn.op is not Op.WRITE:
            raise ValueError("write buffer only accepts write beats")
        if self.occupancy >= self.depth:
            return False
        self.occupancy += 1
        got = self._received.get(txn.txn_id, 0) + 1
        self._received[txn.txn_id] = got
        if got == txn.beats or self.occupancy == self.depth:
            # fully buffered, or brim-full flow-through for oversize bursts
            self._eligible.setdefault(txn.txn_id, cycle)
        return True

    def eligible_at(self, txn: Transaction) -> Optional[int]:
        return self._eligible.get(txn.txn_id)

    def beats_received(self, txn: Transaction) -> int:
        return self._received.get(txn.txn_id, 0)

    def release(self, txn: Transaction, landed_beats: int) -> None:
        """Free a delivered fragment's buffered beats."""
        if not self.enabled:
            return
        self.occupancy -= landed_beats
        assert self.occupancy >= 0
        self._received.pop(txn.txn_id, None)
        self._eligible.pop(txn.txn_id, None)


class _FragState:
    __slots__ = ("frag", "ready", "landed")

    def __init__(self, frag: Transaction):
        self.frag = frag
        self.ready: Optional[int] = None   # cycle the fragment may enter the TRU
        self.landed = 0                    # beats held in the write buffer


class TsuPipe:
    """Wires GBS -> WB -> TRU in front of the crossbar for one initiator."""

    def __init__(self, sim: Simulator, cfg: TsuConfig, initiator: str, xbar: Crossbar,
                 recorder=None):
        problems = cfg.validate()
        if problems:
            raise ValueError(f"tsu[{initiator}]: " + "; ".join(problems))
        self.sim = sim
        self.cfg = cfg
        self.initiator = initiator
        self.xbar = xbar
        self.recorder = recorder
        self.wb = WriteBuffer(cfg.wb_depth_beats, cfg.wb_on)
        self.tru = TruState(period_start=0, budget_left=cfg.budget_beats if cfg.tru_on else 0)
        self._queue: deque[_FragState] = deque()
        self._gate_open = True
        self._retry_at: Optional[int] = None
        self._parents: dict[int, list] = {}
        self.tru_stall_cycles = 0
        self.released_beats = 0
        self.max_parent_beats = 0
        self.release_log: list[tuple[int, int]] = []  # (cycle, beats)

    def reconfigure(self, cfg: TsuConfig) -> None:
        """Mid-simulation register write; applies to traffic not yet released."""
        problems = cfg.validate()
        if problems:
            raise ValueError(f"tsu[{self.initiator}] reconfig: " + "; ".join(problems))
        self.cfg = cfg
        self.wb.enabled = cfg.wb_on
        self.wb.depth = cfg.wb_depth_beats
        if cfg.tru_on:
            self.tru.period_start = self.sim.now - (self.sim.now % cfg.period_cycles)
            self.tru.budget_left = cfg.budget_beats
        if self.recorder is not None:
            self.recorder.emit(self.sim.now, f"tsu.{self.initiator}", "reconfig",
                               gbs_on=cfg.gbs_on, wb_on=cfg.wb_on, tru_on=cfg.tru_on,
                               split_beats=cfg.split_beats, budget_beats=cfg.budget_beats,
                               period_cycles=cfg.period_cycles)
        self._try_release()

    def submit(self, txn: Transaction,
               on_complete: Callable[[Transaction, int], None]) -> None:
        """Accept one transaction from the initiator at the current cycle."""
        now = self.sim.now
        if txn.t_issue < 0:
            txn.t_issue = now
        self.max_parent_beats = max(self.max_parent_beats, txn.beats)
        if not self.cfg.enabled:
            self.xbar.submit(txn, on_complete, None)
            return
        frags = gbs_split(txn, self.cfg.split_beats if self.cfg.gbs_on else 0)
        # [outstanding fragments, completion high-water, callback, parent]
        self._parents[txn.txn_id] = [len(frags), -1, on_complete, txn]
        for frag in frags:
            st = _FragState(frag)
            if frag.op is Op.WRITE and self.cfg.wb_on:
                self._try_load(st, now)
            else:
                st.ready = now
            self._queue.append(st)
        self._try_release()

    def _try_load(self, st: _FragState, now: int) -> None:
        """Land a write fragment's beats in the buffer if there is room.

        The producer has the whole burst ready at issue (DMA-style), or
        trickles beats every w_supply_interval cycles for slow producers;
        either way the landing schedule is analytic.  The fragment becomes
        forwardable one register stage after its last beat lands.  Bursts
        larger than the whole buffer flow through: they become forwardable
        once the buffer is brim-full (only legal for full-rate producers,
        so the shared write channel still never stalls).
        """
        frag = st.frag
        free = self.wb.depth - self.wb.occupancy
        interval = frag.w_supply_interval
        if frag.beats > self.wb.depth:
            if interval > 1:
                raise ValueError(
                    f"{self.initiator}: {frag.beats}-beat write exceeds the "
                    f"{self.wb.depth}-beat buffer and the producer is slower than "
                    "the bus; split the burst or deepen the buffer"
                )
            if free <= 0:
                return
            st.landed = free
            self.wb.occupancy += free
            st.ready = now + 1
            frag.w_supply_interval = 1
            return
        if frag.beats > free:
            return
        st.landed = frag.beats
        self.wb.occupancy += frag.beats
        last_land = now if interval == 1 else now + (frag.beats - 1) * interval
        st.ready = last_land + 1
        frag.w_supply_interval = 1  # the buffer now feeds the bus at full rate

    def _try_release(self) -> None:
        now = self.sim.now
        while self._queue and self._gate_open:
            st = self._queue[0]
            frag = st.frag
            if st.ready is None:
                return  # awaiting buffer space; freed on a drain
            if st.ready > now:
                self._schedule_retry(st.ready)
                return
            if self.cfg.tru_on:
                tru_roll(self.tru, self.cfg, now)
                if frag.beats > self.cfg.budget_beats:
                    raise ValueError(
                        f"{self.initiator}: fragment of {frag.beats} beats can never fit "
                        f"budget {self.cfg.budget_beats}; enable the splitter or raise the budget"
                    )
                if self.tru.budget_left < frag.beats:
                    self._schedule_retry(self.tru.period_start + self.cfg.period_cycles)
                    return
                self.tru.budget_left -= frag.beats
            self._queue.popleft()
            self.tru_stall_cycles += now - st.ready
            self.released_beats += frag.beats
            self.release_log.append((now, frag.beats))
            self._gate_open = False
            if self.recorder is not None:
                self.recorder.emit(now, f"tsu.{self.initiator}", "release",
                                   txn_id=frag.txn_id, beats=frag.beats)
            landed = st.landed
            self.xbar.submit(
                frag,
                self._frag_complete,
                lambda f, cyc, _landed=landed: self._frag_last_grant(f, cyc, _landed),
            )

    def _schedule_retry(self, cycle: int) -> None:
        if self._retry_at is not None and self._retry_at <= cycle:
            return
        self._retry_at = cycle

        def retry():
            if self._retry_at == self.sim.now:
                self._retry_at = None
                self._try_release()

        self.sim.at(cycle, retry, target=f"tsu.{self.initiator}", kind="retry")

    def _frag_last_grant(self, frag: Transaction, last_beat_cycle: int, landed: int) -> None:
        if frag.op is Op.WRITE and self.cfg.wb_on and landed:
            self.wb.release(frag, landed)
            for st in self._queue:
                if st.ready is None:
                    self._try_load(st, self.sim.now)
                    break
        self._gate_open = True
        self._try_release()

    def _frag_complete(self, frag: Transaction, cycle: int) -> None:
        key = frag.parent_id if frag.parent_id is not None else frag.txn_id
        state = self._parents.get(key)
        if state is None:
            return
        state[0] -= 1
        state[1] = max(state[1], cycle)
        parent = state[3]
        if frag is not parent:
            if frag.t_accept >= 0 and (parent.t_accept < 0 or frag.t_accept < parent.t_accept):
                parent.t_accept = frag.t_accept
            if frag.data_out is not None:
                if parent.data_out is None:
                    parent.data_out = [0] * parent.beats
                base = (frag.addr - parent.addr) // parent.beat_bytes
                parent.data_out[base:base + frag.beats] = frag.data_out
            if frag.error and not parent.error:
                parent.error = frag.error
        if state[0] == 0:
            del self._parents[key]
            parent.t_complete = state[1]
            state[2](parent, state[1])
