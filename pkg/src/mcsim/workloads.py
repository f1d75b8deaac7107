"""Synthetic initiator behaviors for the interference scenarios.

Three generator kinds cover the study's traffic shapes:

* stride_reader - a latency-sensitive task issuing single-beat reads with
  a fixed stride, one outstanding, optionally wrapping over a footprint so
  later passes have reuse; per-access latency and jitter are recorded;
* dma_linear - a bulk engine streaming maximal read bursts from a source
  region and write bursts to a destination, several bursts in flight,
  optionally looping forever as a background interferer;
* double_buffered - an accelerator moving tiles from L2 to its private L1
  and overlapping each tile's compute with the next tile's transfer (two
  buffers); the compute side is either a fixed cycle count or the AMR
  cluster's commit-stream model.

Each generator alone produces a deterministic completion cycle; that solo
run is the scenario's isolated reference.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from mcsim.amr import AmrCluster
from mcsim.transport import Criticality, Op, Transaction


@dataclass
class TaskSpec:
    name: str
    kind: str                    # stride_reader | dma_linear | double_buffered
    criticality: Criticality = Criticality.NON_CRITICAL
    part_id: int = 0
    start: int = 0
    measured: bool = True
    # stride_reader
    base: int = 0
    stride: int = 64
    count: int = 0
    wrap_bytes: int = 0          # 0 = pure arithmetic sequence
    warmup: int = 0              # accesses excluded from steady-state stats
    # dma_linear
    src: int = 0
    dst: int = 0
    bytes: int = 0
    burst_beats: int = 16
    outstanding: int = 4
    loop: bool = False
    # double_buffered
    tiles: int = 0
    tile_bytes: int = 0
    compute_cycles_per_tile: int = 0
    units_per_tile: int = 0      # >0 routes compute through the AMR cluster

    def validate(self, beat_bytes: int) -> list[str]:
        problems = []
        if self.kind == "stride_reader":
            if self.stride < beat_bytes:
                problems.append(f"task {self.name}: stride must be >= beat_bytes")
            if self.wrap_bytes and self.wrap_bytes % self.stride != 0:
                problems.append(f"task {self.name}: wrap_bytes must be a stride multiple")
        elif self.kind == "dma_linear":
            chunk = self.burst_beats * beat_bytes
            if self.bytes <= 0 or self.bytes % chunk != 0:
                problems.append(f"task {self.name}: bytes must be a positive multiple "
                                f"of burst_beats*beat_bytes ({chunk})")
        elif self.kind == "double_buffered":
            if self.tiles < 1:
                problems.append(f"task {self.name}: tiles must be >= 1")
            chunk = self.burst_beats * beat_bytes
            if self.tile_bytes <= 0 or self.tile_bytes % chunk != 0:
                problems.append(f"task {self.name}: tile_bytes must be a positive multiple "
                                f"of burst_beats*beat_bytes ({chunk})")
            if self.units_per_tile == 0 and self.compute_cycles_per_tile <= 0:
                problems.append(f"task {self.name}: needs compute_cycles_per_tile or units_per_tile")
        else:
            problems.append(f"task {self.name}: unknown kind {self.kind!r}")
        return problems


class TaskRun:
    """Common bookkeeping for one task inside one simulation run."""

    def __init__(self, spec: TaskSpec, engine):
        self.spec = spec
        self.engine = engine
        self.done = False
        self.completion_cycle: Optional[int] = None
        self.latencies: list[int] = []
        self.accesses = 0

    def start(self) -> None:
        raise NotImplementedError

    def _finish(self) -> None:
        if self.done:
            return
        self.done = True
        self.completion_cycle = self.engine.sim.now - self.spec.start
        self.engine.task_finished(self)

    def steady_latencies(self) -> list[int]:
        return self.latencies[self.spec.warmup:] if self.spec.warmup else list(self.latencies)

    def stats(self) -> dict:
        window = self.steady_latencies() or self.latencies
        out = {
            "completion_cycles": self.completion_cycle if self.completion_cycle is not None else -1,
            "accesses": self.accesses,
        }
        if window:
            out["lat_min"] = min(window)
            out["lat_max"] = max(window)
            out["lat_avg"] = sum(window) / len(window)
            out["jitter"] = max(window) - min(window)
        else:
            out["lat_min"] = out["lat_max"] = out["jitter"] = 0
            out["lat_avg"] = 0.0
        return out


class StrideReaderRun(TaskRun):
    def __init__(self, spec: TaskSpec, engine):
        super().__init__(spec, engine)
        self._i = 0

    def start(self) -> None:
        self.engine.sim.at(self.spec.start, self._issue_next,
                           target=self.spec.name, kind="task_start")

    def _addr(self, i: int) -> int:
        off = i * self.spec.stride
        if self.spec.wrap_bytes:
            off %= self.spec.wrap_bytes
        return self.spec.base + off

    def _issue_next(self) -> None:
        if self._i >= self.spec.count:
            self._finish()
            return
        addr = self._addr(self._i)
        self._i += 1
        self.engine.issue(self.spec, Op.READ, addr, 1, self._completed)

    def _completed(self, txn: Transaction, cycle: int) -> None:
        self.latencies.append(cycle - txn.t_issue)
        self.accesses += 1
        self._issue_next()


class DmaLinearRun(TaskRun):
    """Reads chunk k from src, then writes it to dst; outstanding-deep."""

    def __init__(self, spec: TaskSpec, engine):
        super().__init__(spec, engine)
        self._chunk_bytes = spec.burst_beats * engine.beat_bytes
        self._chunks = spec.bytes // self._chunk_bytes
        self._reads_issued = 0
        self._writes_done = 0
        self._read_bursts = 0
        self._write_bursts = 0
        self.write_latencies: list[int] = []

    def start(self) -> None:
        self.engine.sim.at(self.spec.start, self._pump_reads,
                           target=self.spec.name, kind="task_start")

    def _in_flight(self) -> int:
        return self._reads_issued - self._writes_done

    def _pump_reads(self) -> None:
        if self.engine.stopped or self.done:
            return
        while self._reads_issued < self._chunks and self._in_flight() < self.spec.outstanding:
            k = self._reads_issued
            self._reads_issued += 1
            addr = self.spec.src + k * self._chunk_bytes
            self._read_bursts += 1
            self.engine.issue(self.spec, Op.READ, addr, self.spec.burst_beats,
                              lambda txn, cyc, _k=k: self._read_done(_k, txn, cyc))

    def _read_done(self, k: int, txn: Transaction, cycle: int) -> None:
        self.latencies.append(cycle - txn.t_issue)
        self.accesses += 1
        if self.engine.stopped:
            return
        addr = self.spec.dst + k * self._chunk_bytes
        self._write_bursts += 1
        self.engine.issue(self.spec, Op.WRITE, addr, self.spec.burst_beats, self._write_done)

    def _write_done(self, txn: Transaction, cycle: int) -> None:
        self.write_latencies.append(cycle - txn.t_issue)
        self._writes_done += 1
        if self._writes_done == self._chunks:
            if self.spec.loop and not self.engine.stopped:
                self._reads_issued = 0
                self._writes_done = 0
                self._pump_reads()
            else:
                self._finish()
        else:
            self._pump_reads()


class DoubleBufferedRun(TaskRun):
    """Tile pipeline: transfer(i+1) overlaps compute(i) across two buffers."""

    def __init__(self, spec: TaskSpec, engine, cluster: Optional[AmrCluster] = None):
        super().__init__(spec, engine)
        self.cluster = cluster
        if spec.units_per_tile > 0 and cluster is None:
            raise ValueError(f"task {spec.name}: units_per_tile needs the AMR cluster")
        self._chunk_bytes = spec.burst_beats * engine.beat_bytes
        self._bursts_per_tile = spec.tile_bytes // self._chunk_bytes
        self._xfer_tile = 0           # next tile to transfer
        self._burst_in_tile = 0
        self._burst_in_flight = False
        self._compute_done_tile = -1  # highest tile whose compute finished
        self._xfer_done_tile = -1
        self._computing = False
        self.tile_transfer_spans: list[tuple[int, int]] = []
        self.tile_compute_spans: list[tuple[int, int]] = []
        self._xfer_start_cycle: Optional[int] = None

    def start(self) -> None:
        self.engine.sim.at(self.spec.start, self._try_transfer,
                           target=self.spec.name, kind="task_start")

    def _buffer_free_for(self, tile: int) -> bool:
        # two buffers: transferring tile i needs compute(i-2) finished
        return tile - 2 <= self._compute_done_tile or tile < 2

    def _tile_base(self, tile: int) -> int:
        return self.spec.src + (tile % 2) * self.spec.tile_bytes

    def _try_transfer(self) -> None:
        if self.engine.stopped or self.done or self._burst_in_flight:
            return
        if self._xfer_tile >= self.spec.tiles:
            return
        if not self._buffer_free_for(self._xfer_tile):
            return
        if self._burst_in_tile == 0:
            self._xfer_start_cycle = self.engine.sim.now
        b = self._burst_in_tile
        addr = self._tile_base(self._xfer_tile) + b * self._chunk_bytes
        self._burst_in_flight = True
        self.engine.issue(self.spec, Op.READ, addr, self.spec.burst_beats, self._burst_done)

    def _burst_done(self, txn: Transaction, cycle: int) -> None:
        self._burst_in_flight = False
        self.latencies.append(cycle - txn.t_issue)
        self.accesses += 1
        self._burst_in_tile += 1
        if self._burst_in_tile < self._bursts_per_tile:
            self._try_transfer()
            return
        tile = self._xfer_tile
        self.tile_transfer_spans.append((self._xfer_start_cycle, cycle))
        self._xfer_done_tile = tile
        self._xfer_tile += 1
        self._burst_in_tile = 0
        self._try_compute()
        self._try_transfer()

    def _try_compute(self) -> None:
        if self._computing or self.engine.stopped:
            return
        tile = self._compute_done_tile + 1
        if tile > self._xfer_done_tile or tile >= self.spec.tiles:
            return
        self._computing = True
        now = self.engine.sim.now
        if self.cluster is not None and self.spec.units_per_tile > 0:
            phase = self.cluster.compute_phase(now, self.spec.units_per_tile)
            self.engine.record_amr_phase(phase)
            end = phase.end_cycle
        else:
            end = now + self.spec.compute_cycles_per_tile
        self.tile_compute_spans.append((now, end))

        def compute_done(_tile=tile, _end=end):
            self._computing = False
            self._compute_done_tile = _tile
            if _tile == self.spec.tiles - 1:
                self._finish()
            else:
                self._try_compute()
                self._try_transfer()

        self.engine.sim.at(end, compute_done, target=self.spec.name, kind="compute_done")

    def steady_latencies(self) -> list[int]:
        # drop the pipeline-fill and drain tiles
        if self.spec.tiles < 3 or self._bursts_per_tile == 0:
            return list(self.latencies)
        lo = self._bursts_per_tile
        hi = (self.spec.tiles - 1) * self._bursts_per_tile
        return self.latencies[lo:hi]


def build_task(spec: TaskSpec, engine, cluster: Optional[AmrCluster]) -> TaskRun:
    if spec.kind == "stride_reader":
        return StrideReaderRun(spec, engine)
    if spec.kind == "dma_linear":
        return DmaLinearRun(spec, engine)
    if spec.kind == "double_buffered":
        return DoubleBufferedRun(spec, engine, cluster if spec.units_per_tile > 0 else None)
    raise ValueError(f"unknown task kind {spec.kind!r}")
