"""Full-system wiring and the experiment driver.

SocSim instantiates one simulation: kernel, scratchpad, cache+HyperRAM,
crossbar, one shaper pipe per initiator, the AMR cluster when configured,
and the task generators.  run_experiment() executes a scenario's variants
in order - the isolated variant first (every measured task runs alone to
produce the normalization baselines), then each configured variant with
all tasks active - and returns per-variant results ready for reporting.

Simulation instances share no state, so runs are embarrassingly parallel;
they execute sequentially here to keep the driver trivial and the output
ordering deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from mcsim.amr import AmrCluster, AmrMode, PhaseResult
from mcsim.dcspm import Dcspm
from mcsim.dpllc import Dpllc, Partition
from mcsim.kernel import Simulator
from mcsim.scenario import Scenario, SimEventSpec, Variant, resolve_variant
from mcsim.transport import Crossbar, CrossbarConfig, Op, Transaction
from mcsim.tsu import TsuConfig, TsuPipe, tsu_latency_bound
from mcsim.workloads import TaskSpec, TaskRun, build_task

# parent transaction ids stay below the fragment id namespace
MAX_PARENT_IDS = 1_000_000


class EventRecorder:
    """Append-only structured event log; one dict per simulator event."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.events: list[dict] = []

    def emit(self, cycle: int, component: str, kind: str, **fields) -> None:
        if not self.enabled:
            return
        ev = {"cycle": cycle, "component": component, "kind": kind}
        ev.update(fields)
        self.events.append(ev)


@dataclass
class RunResult:
    """Everything measured in one simulation run."""

    tasks: dict[str, dict] = field(default_factory=dict)
    llc_counters: dict[int, dict[str, int]] = field(default_factory=dict)
    bank_conflicts: list[int] = field(default_factory=list)
    spm_serviced_beats: int = 0
    initiators: dict[str, dict] = field(default_factory=dict)
    amr: dict = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)
    end_cycle: int = 0
    timeout_tasks: list[str] = field(default_factory=list)

    def merge(self, other: "RunResult") -> None:
        """Fold a solo run into this result (isolated variant assembly)."""
        self.tasks.update(other.tasks)
        for pid, c in other.llc_counters.items():
            mine = self.llc_counters.setdefault(pid, {k: 0 for k in c})
            for k, v in c.items():
                mine[k] = mine.get(k, 0) + v
        if other.bank_conflicts:
            if not self.bank_conflicts:
                self.bank_conflicts = [0] * len(other.bank_conflicts)
            self.bank_conflicts = [a + b for a, b in zip(self.bank_conflicts, other.bank_conflicts)]
        self.spm_serviced_beats += other.spm_serviced_beats
        self.initiators.update(other.initiators)
        for k, v in other.amr.items():
            if k == "sw_recovery_ratio":
                self.amr[k] = max(self.amr.get(k, 0), v)
            elif isinstance(v, (int, float)):
                self.amr[k] = self.amr.get(k, 0) + v
            else:
                self.amr.setdefault(k, v)
        self.events.extend(other.events)
        self.end_cycle = max(self.end_cycle, other.end_cycle)
        self.timeout_tasks.extend(other.timeout_tasks)


class SocSim:
    """One deterministic simulation instance built from a resolved scenario."""

    def __init__(self, scenario: Scenario, only_task: Optional[str] = None,
                 record_events: bool = True):
        self.scenario = scenario
        self.beat_bytes = scenario.beat_bytes
        self.sim = Simulator()
        self.recorder = EventRecorder(record_events)
        self.stopped = False
        self._next_txn_id = 1

        endpoints = {}
        self.spm = None
        self.llc = None
        if scenario.spm is not None:
            self.spm = Dcspm(self.sim, scenario.spm, "spm", self.recorder)
            endpoints["spm"] = self.spm
        if scenario.llc is not None:
            self.llc = Dpllc(self.sim, scenario.llc, scenario.hyperram, "llc", self.recorder)
            endpoints["llc"] = self.llc

        active = {name: spec for name, spec in scenario.tasks.items()
                  if only_task is None or name == only_task}
        if only_task is not None and not active:
            raise ValueError(f"no task named {only_task!r}")
        self.xbar = Crossbar(
            self.sim,
            CrossbarConfig(ports_in=sorted(scenario.tasks),
                           route_table=scenario.route_table,
                           port_map=dict(scenario.spm_port_map),
                           arb=scenario.arb),
            endpoints, self.recorder)

        self.pipes: dict[str, TsuPipe] = {}
        for name in sorted(scenario.tasks):
            cfg = scenario.tsu.get(name, TsuConfig())
            self.pipes[name] = TsuPipe(self.sim, cfg, name, self.xbar, self.recorder)

        self.cluster = None
        self.amr_phases: list[PhaseResult] = []
        if scenario.amr is not None:
            self.cluster = AmrCluster(scenario.amr, self.recorder)
            for f in scenario.faults:
                self.cluster.schedule_fault(f)

        self.tasks: dict[str, TaskRun] = {}
        for name in sorted(active):
            self.tasks[name] = build_task(active[name], self, self.cluster)
        self._pending_measured = sum(1 for t in self.tasks.values() if t.spec.measured)
        self.decode_errors: dict[str, int] = {}

    # ---------------- services used by task generators ----------------

    def issue(self, spec: TaskSpec, op: Op, addr: int, beats: int, on_complete) -> Transaction:
        txn_id = self._next_txn_id
        self._next_txn_id += 1
        if txn_id >= MAX_PARENT_IDS:
            raise RuntimeError("transaction id namespace exhausted")
        txn = Transaction(
            txn_id=txn_id, initiator=spec.name, op=op, addr=addr, beats=beats,
            beat_bytes=self.beat_bytes, part_id=spec.part_id, criticality=spec.criticality)
        txn.t_issue = self.sim.now
        self.recorder.emit(self.sim.now, spec.name, "issue", txn_id=txn_id,
                           op=op.value, addr=addr, beats=beats)

        def completed(t: Transaction, cycle: int):
            if t.error:
                self.decode_errors[spec.name] = self.decode_errors.get(spec.name, 0) + 1
            self.recorder.emit(cycle, spec.name, "complete", txn_id=t.txn_id,
                               latency=cycle - t.t_issue, error=t.error or "")
            on_complete(t, cycle)

        self.pipes[spec.name].submit(txn, completed)
        return txn

    def task_finished(self, task: TaskRun) -> None:
        self.recorder.emit(self.sim.now, task.spec.name, "task_done",
                           completion=task.completion_cycle)
        if task.spec.measured:
            self._pending_measured -= 1
            if self._pending_measured == 0:
                self.sim.stop()

    def record_amr_phase(self, phase: PhaseResult) -> None:
        self.amr_phases.append(phase)
        for fault, outcome in phase.fault_outcomes:
            self.recorder.emit(phase.end_cycle, "amr", "fault_outcome",
                               core=fault.core_id, injected_at=fault.cycle,
                               outcome=outcome)

    # ---------------- mid-simulation reconfiguration ----------------

    def _schedule_scenario_events(self) -> None:
        for ev in self.scenario.events:
            self.sim.at(ev.cycle, lambda e=ev: self._apply_event(e),
                        target="scenario", kind=ev.kind)

    def _apply_event(self, ev: SimEventSpec) -> None:
        if ev.kind == "set_tsu":
            pipe = self.pipes[ev.args["initiator"]]
            node = ev.args.get("tsu", {})
            base = pipe.cfg
            pipe.reconfigure(TsuConfig(
                split_beats=node.get("split_beats", base.split_beats),
                wb_depth_beats=node.get("wb_depth_beats", base.wb_depth_beats),
                budget_beats=node.get("budget_beats", base.budget_beats),
                period_cycles=node.get("period_cycles", base.period_cycles),
                gbs_on=node.get("gbs_on", base.gbs_on),
                wb_on=node.get("wb_on", base.wb_on),
                tru_on=node.get("tru_on", base.tru_on),
            ))
        elif ev.kind == "flush_partition":
            if self.llc is not None:
                self.llc.flush_partition(int(ev.args["part_id"]))
        elif ev.kind == "set_partitions":
            if self.llc is not None:
                table = {int(pid): Partition(int(r["base_set"]), int(r["num_sets"]))
                         for pid, r in ev.args["partitions"].items()}
                self.llc.set_partition_table(table)
        elif ev.kind == "set_amr_mode":
            if self.cluster is not None:
                resume = self.cluster.configure(AmrMode(ev.args["mode"]), self.sim.now)
                self.cluster.blocked_until = resume

    # ---------------- running ----------------

    def run(self) -> RunResult:
        for t in self.tasks.values():
            t.start()
        self._schedule_scenario_events()
        self.sim.run_until(self.scenario.run_limit)
        self.stopped = True
        res = RunResult()
        res.end_cycle = self.sim.now
        for name, t in self.tasks.items():
            stats = t.stats()
            done = t.done
            stats["timeout"] = 0 if done or not t.spec.measured else 1
            if not done and t.spec.measured:
                res.timeout_tasks.append(name)
            res.tasks[name] = stats
        if self.llc is not None:
            part_ids = set(self.llc.cfg.partition_table)
            part_ids.update(t.spec.part_id for t in self.tasks.values())
            part_ids.update(self.llc.hits, self.llc.misses, self.llc.evictions, self.llc.flushes)
            for pid in sorted(part_ids):
                h, m, e, f = self.llc.counters(pid)
                res.llc_counters[pid] = {"llc_hits": h, "llc_misses": m,
                                         "llc_evictions": e, "llc_flushes": f}
        if self.spm is not None:
            res.bank_conflicts = self.spm.conflicts
            res.spm_serviced_beats = self.spm.engine.serviced_beats
        for name in sorted(self.tasks):
            pipe = self.pipes[name]
            res.initiators[name] = {
                "beats_released": pipe.released_beats,
                "tru_stall_cycles": pipe.tru_stall_cycles,
                "decode_errors": self.decode_errors.get(name, 0),
            }
            if pipe.cfg.tru_on and pipe.max_parent_beats > 0:
                service = worst_service_per_beat(self.scenario, name)
                res.initiators[name]["tru_latency_bound"] = tsu_latency_bound(
                    pipe.cfg, pipe.max_parent_beats, service)
        if self.cluster is not None:
            recs = [r for p in self.amr_phases for r in p.recoveries]
            outcomes = [o for p in self.amr_phases for _, o in p.fault_outcomes]
            res.amr = {
                "detections": sum(p.detections for p in self.amr_phases),
                "recoveries": len(recs),
                "recovery_cycles_total": sum(r.resume_cycle - r.detect_cycle for r in recs),
                "reexecuted_commits": sum(r.reexecuted_commits for r in recs),
                "reconfigurations": len(self.cluster.reconfigurations),
                "reconfig_cycles_total": sum(c for _, _, _, c in self.cluster.reconfigurations),
                "silent_corruptions": sum(p.silent_corruptions for p in self.amr_phases),
                "unrecoverable_groups": sum(len(p.unrecoverable_groups) for p in self.amr_phases),
                "faults_applied": len(outcomes),
                "faults_detected": outcomes.count("detected"),
                "faults_masked": outcomes.count("masked"),
                "sw_recovery_ratio": (self.cluster.sw_recovery_cycles()
                                      / self.cluster.cfg.recovery_cycles),
            }
        res.events = self.recorder.events
        return res


def _task_fragment_beats(scenario: Scenario, name: str) -> int:
    spec = scenario.tasks[name]
    cfg = scenario.tsu.get(name, TsuConfig())
    burst = spec.burst_beats if spec.kind in ("dma_linear", "double_buffered") else 1
    if cfg.gbs_on and cfg.split_beats:
        return min(burst, cfg.split_beats)
    return burst


def _task_endpoints(scenario: Scenario, name: str) -> set[str]:
    spec = scenario.tasks[name]
    eps = set()
    addrs = [spec.base] if spec.kind == "stride_reader" else \
        [spec.src, spec.dst] if spec.kind == "dma_linear" else [spec.src]
    for a in addrs:
        for r in scenario.route_table:
            if r.contains(a):
                eps.add(r.endpoint)
    return eps


def worst_service_per_beat(scenario: Scenario, name: str) -> int:
    """Conservative per-beat service figure for the latency bound.

    Covers the worst endpoint the initiator touches: its own fragment's
    cache fills (miss plus dirty writeback per line, plus channel queueing
    behind every competitor's outstanding fill) and one maximal burst from
    every competing initiator between consecutive round-robin grants.
    Intentionally loose; soundness is what the bound test checks.
    """
    frag = _task_fragment_beats(scenario, name)
    eps = _task_endpoints(scenario, name)
    worst = 1
    for ep in eps:
        if ep == "llc" and scenario.llc is not None:
            lb = scenario.llc.line_beats
            fill = scenario.hyperram.access_latency_cycles + lb * scenario.hyperram.cycles_per_beat
            def hold(beats: int) -> int:
                lines = -(-beats // lb) + 1
                return lines * 2 * fill + beats
            total = hold(frag)
            for other in scenario.tasks:
                if other == name or ep not in _task_endpoints(scenario, other):
                    continue
                ob = _task_fragment_beats(scenario, other)
                lines = -(-ob // lb) + 1
                total += hold(ob) + lines * 2 * fill  # grant hold + channel queueing
            worst = max(worst, -(-total // frag))
        elif ep == "spm" and scenario.spm is not None:
            stretch = scenario.spm.ports
            total = frag * stretch
            my_port = scenario.spm_port_map.get(name, 0)
            for other in scenario.tasks:
                if other == name or ep not in _task_endpoints(scenario, other):
                    continue
                if scenario.spm_port_map.get(other, 0) != my_port:
                    continue
                total += _task_fragment_beats(scenario, other) * stretch
            worst = max(worst, -(-total // frag))
    return worst


def run_variant(base: Scenario, variant: Variant, record_events: bool = True) -> RunResult:
    scenario = resolve_variant(base, variant)
    if variant.isolated:
        merged = RunResult()
        for name in sorted(scenario.tasks):
            if not scenario.tasks[name].measured:
                continue
            solo = SocSim(scenario, only_task=name, record_events=record_events)
            merged.merge(solo.run())
        return merged
    return SocSim(scenario, record_events=record_events).run()


def run_experiment(base: Scenario, variant_names: Optional[list[str]] = None,
                   record_events: bool = True) -> dict[str, RunResult]:
    """Run the isolated variant plus every configured variant, in order."""
    results: dict[str, RunResult] = {}
    for variant in base.variants:
        if variant_names and variant.name not in variant_names \
                and not variant.isolated:
            continue
        results[variant.name] = run_variant(base, variant, record_events)
    return results
