"""Transaction model and the shared crossbar.

Transactions are AXI-style bursts: an address, a beat count, a bytes-per-
beat width (64b bus by default) plus the partition id and criticality tag
they carry through the fabric.  The crossbar routes by address range and
arbitrates per (endpoint, port, channel) with a round-robin pointer.
Bursts are atomic at the arbiter: a granted burst holds its port-channel
until the endpoint has taken its last beat.  That is deliberate - it is
the unfairness the upstream burst splitter exists to remove, so the
baseline has to exhibit it.  Reads and writes arbitrate on separate
channels and may be granted in the same cycle at one endpoint.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

from mcsim.kernel import Simulator


class Op(Enum):
    READ = "read"
    WRITE = "write"


class Criticality(Enum):
    CRITICAL = "critical"
    NON_CRITICAL = "non_critical"


READ_CHANNEL = 0
WRITE_CHANNEL = 1


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass
class Transaction:
    """One burst. Fragments produced by the burst splitter are Transactions
    too, linked to their parent via parent_id/frag_index."""

    txn_id: int
    initiator: str
    op: Op
    addr: int
    beats: int
    beat_bytes: int = 8
    part_id: int = 0
    criticality: Criticality = Criticality.NON_CRITICAL
    t_issue: int = -1
    t_accept: int = -1
    t_complete: int = -1
    parent_id: Optional[int] = None
    frag_index: int = 0
    error: Optional[str] = None
    data: Optional[list[int]] = None
    data_out: Optional[list[int]] = None
    # write-data production pace in cycles per beat; >1 models a producer
    # slower than the bus (only observable downstream with the WB off)
    w_supply_interval: int = 1

    def __post_init__(self):
        if self.beats < 1:
            raise ValueError(f"txn {self.txn_id}: beats must be >= 1, got {self.beats}")
        if not _is_pow2(self.beat_bytes):
            raise ValueError(f"txn {self.txn_id}: beat_bytes must be a power of two")
        if self.addr % self.beat_bytes != 0:
            raise ValueError(f"txn {self.txn_id}: addr 0x{self.addr:x} not aligned to beat_bytes")

    @property
    def total_bytes(self) -> int:
        return self.beats * self.beat_bytes

    @property
    def end_addr(self) -> int:
        return self.addr + self.total_bytes

    @property
    def channel(self) -> int:
        return WRITE_CHANNEL if self.op is Op.WRITE else READ_CHANNEL


@dataclass(frozen=True)
class AddrRange:
    base: int
    size: int
    endpoint: str

    @property
    def end(self) -> int:
        return self.base + self.size

    def contains(self, addr: int) -> bool:
        return self.base <= addr < self.end


ARB_POLICIES = ("round_robin", "fixed_priority")


@dataclass
class CrossbarConfig:
    ports_in: list[str]
    route_table: list[AddrRange]
    # multi-port endpoints: which endpoint port an initiator's traffic uses
    port_map: dict[str, int] = field(default_factory=dict)
    # fixed_priority grants strictly by ports_in order (first = highest)
    arb: str = "round_robin"

    def validate(self) -> list[str]:
        problems = []
        ranges = sorted(self.route_table, key=lambda r: r.base)
        for a, b in zip(ranges, ranges[1:]):
            if a.end > b.base:
                problems.append(
                    f"route ranges overlap: [{a.base:#x},{a.end:#x}) and [{b.base:#x},{b.end:#x})"
                )
        if len(set(self.ports_in)) != len(self.ports_in):
            problems.append("duplicate initiator port names")
        if self.arb not in ARB_POLICIES:
            problems.append(f"arb must be one of {ARB_POLICIES}, got {self.arb!r}")
        return problems


class Endpoint:
    """Protocol for crossbar endpoints (scratchpad, cache front-end)."""

    name: str
    num_ports: int = 1

    def begin_burst(self, txn: Transaction, grant_cycle: int, port: int,
                    on_port_free: Callable[[int], None],
                    on_complete: Callable[[Transaction, int], None]) -> None:
        """Start servicing a granted burst.

        Beats reach the endpoint from grant_cycle+1 at one per cycle,
        stretched by any structural stalls.  The endpoint must call
        on_port_free(last_beat_cycle) when the port-channel may take the
        next grant and on_complete(txn, completion_cycle) when the burst's
        last beat has been serviced.
        """
        raise NotImplementedError


class _PortArbiter:
    """Round-robin burst arbiter for one (endpoint, port, channel)."""

    def __init__(self, sim: Simulator, endpoint: Endpoint, port: int, channel: int,
                 initiators: list[str], recorder=None, arb: str = "round_robin"):
        self.sim = sim
        self.endpoint = endpoint
        self.port = port
        self.channel = channel
        self.order = list(initiators)
        self.queues: dict[str, deque] = {name: deque() for name in initiators}
        self.arb = arb
        self.rr = 0
        self.busy = False
        self._arb_pending = False
        self.recorder = recorder
        self.grants = 0
        # supply-stall cycles observed while a granted write held the channel
        self.data_stall_cycles = 0

    def request(self, txn: Transaction, on_complete: Callable[[Transaction, int], None],
                on_last_grant: Optional[Callable[[Transaction, int], None]] = None) -> None:
        self.queues[txn.initiator].append((txn, on_complete, on_last_grant))
        self._kick(self.sim.now)

    def pending(self) -> int:
        return sum(len(q) for q in self.queues.values())

    def _kick(self, cycle: int) -> None:
        if self.busy or self._arb_pending or not self.pending():
            return
        self._arb_pending = True
        self.sim.at(cycle, self._arbitrate, target=self._tag(), kind="arb")

    def _tag(self) -> str:
        return f"{self.endpoint.name}.p{self.port}.{'w' if self.channel else 'r'}"

    def _arbitrate(self) -> None:
        self._arb_pending = False
        if self.busy:
            return
        n = len(self.order)
        start = 0 if self.arb == "fixed_priority" else self.rr
        chosen = None
        for k in range(n):
            name = self.order[(start + k) % n]
            if self.queues[name]:
                chosen = (start + k) % n
                break
        if chosen is None:
            return
        txn, on_complete, on_last_grant = self.queues[self.order[chosen]].popleft()
        if self.arb != "fixed_priority":
            self.rr = (chosen + 1) % n
        self.busy = True
        self.grants += 1
        now = self.sim.now
        if txn.t_accept < 0:
            txn.t_accept = now
        if self.recorder is not None:
            self.recorder.emit(now, "xbar", "grant", txn_id=txn.txn_id,
                               initiator=txn.initiator, endpoint=self.endpoint.name,
                               port=self.port, channel=self.channel, beats=txn.beats)

        def port_free(last_beat_cycle: int, _txn=txn, _cb=on_last_grant):
            # the next address phase may overlap the last data beat, so the
            # next grant can happen in the same cycle the port drains
            self.busy = False
            if _cb is not None:
                _cb(_txn, last_beat_cycle)
            self._kick(max(self.sim.now, last_beat_cycle))

        self.endpoint.begin_burst(txn, now, self.port, port_free, on_complete)


class Crossbar:
    """Routes bursts to endpoint ports and owns all port arbiters."""

    def __init__(self, sim: Simulator, cfg: CrossbarConfig, endpoints: dict[str, Endpoint],
                 recorder=None):
        problems = cfg.validate()
        if problems:
            raise ValueError("; ".join(problems))
        self.sim = sim
        self.cfg = cfg
        self.endpoints = endpoints
        self.recorder = recorder
        self.decode_errors = 0
        self.arbiters: dict[tuple[str, int, int], _PortArbiter] = {}
        for name, ep in endpoints.items():
            for port in range(ep.num_ports):
                for ch in (READ_CHANNEL, WRITE_CHANNEL):
                    self.arbiters[(name, port, ch)] = _PortArbiter(
                        sim, ep, port, ch, cfg.ports_in, recorder, cfg.arb)

    def route(self, addr: int) -> Optional[str]:
        for r in self.cfg.route_table:
            if r.contains(addr):
                return r.endpoint
        return None

    def submit(self, txn: Transaction, on_complete: Callable[[Transaction, int], None],
               on_last_grant: Optional[Callable[[Transaction, int], None]] = None) -> bool:
        """Route and enqueue a burst.  Returns False on a decode error, in
        which case the burst completes immediately with an error marker."""
        ep_name = self.route(txn.addr)
        if ep_name is None:
            txn.error = "decode"
            txn.t_complete = self.sim.now + 1
            self.decode_errors += 1
            if self.recorder is not None:
                self.recorder.emit(self.sim.now, "xbar", "decode_error",
                                   txn_id=txn.txn_id, addr=txn.addr, initiator=txn.initiator)
            if on_last_grant is not None:
                self.sim.at(txn.t_complete, lambda: on_last_grant(txn, txn.t_complete),
                            target="xbar", kind="decode_err_grant")
            self.sim.at(txn.t_complete, lambda: on_complete(txn, txn.t_complete),
                        target="xbar", kind="decode_err_done")
            return False
        port = self.cfg.port_map.get(txn.initiator, 0) % self.endpoints[ep_name].num_ports
        self.arbiters[(ep_name, port, txn.channel)].request(txn, on_complete, on_last_grant)
        return True
