"""Adaptive-modular-redundancy cluster: lockstep modes, voting, fast recovery.

Twelve cores execute an abstract commit stream (one commit per work unit);
that granularity is enough to express everything the cluster's redundancy
hardware does.  The runtime-switchable modes are:

* independent - 12 single-core groups, maximum throughput, no protection;
* dual lockstep - 6 main+shadow pairs, a checker compares每 commit; a
  mismatch is detected but the pair cannot tell which core is wrong, so
  both restore the last verified checkpoint and re-execute;
* triple lockstep - 4 triples with a majority voter; the majority value
  commits on time, the odd core out is flagged and resynchronized from a
  majority peer in the background.

Mode changes stall the cluster for a configured 82..183 cycles.  Recovery
is the hardware fast-recovery walk Detected -> Restore -> Resync -> Resume
taking exactly recovery_cycles (24 by default) plus re-execution of the
commits since the last checkpoint; checkpoints are ECC-backed every
checkpoint_period commits (cycle-by-cycle at the default of 1) and are
treated as incorruptible.  A software recovery baseline (full state reload
through the memory system) is modeled as a configurable multiple of the
hardware path; the shipped calibration makes it 16x, and reports flag the
figure as calibration-dependent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional


class AmrMode(Enum):
    INDIP = "INDIP"
    DLM = "DLM"
    TLM = "TLM"


GROUP_SIZES = {AmrMode.INDIP: 1, AmrMode.DLM: 2, AmrMode.TLM: 3}

RECONFIG_MIN = 82
RECONFIG_MAX = 183


def default_reconfig_table() -> dict[tuple[AmrMode, AmrMode], int]:
    t = {}
    for a in AmrMode:
        t[(a, a)] = 0
    t[(AmrMode.INDIP, AmrMode.DLM)] = t[(AmrMode.DLM, AmrMode.INDIP)] = 82
    t[(AmrMode.INDIP, AmrMode.TLM)] = t[(AmrMode.TLM, AmrMode.INDIP)] = 183
    t[(AmrMode.DLM, AmrMode.TLM)] = t[(AmrMode.TLM, AmrMode.DLM)] = 131
    return t


@dataclass
class AmrConfig:
    num_cores: int = 12
    mode: AmrMode = AmrMode.INDIP
    recovery_cycles: int = 24
    reconfig_cycles: dict[tuple[AmrMode, AmrMode], int] = field(default_factory=default_reconfig_table)
    checkpoint_period: int = 1
    cycles_per_unit: int = 1
    sw_recovery_multiplier: int = 16

    def validate(self) -> list[str]:
        problems = []
        if self.num_cores != 12:
            problems.append("the cluster has 12 cores")
        if self.recovery_cycles < 1:
            problems.append("recovery_cycles must be >= 1")
        if self.checkpoint_period < 1:
            problems.append("checkpoint_period must be >= 1")
        if self.cycles_per_unit < 1:
            problems.append("cycles_per_unit must be >= 1")
        for (a, b), v in self.reconfig_cycles.items():
            if a is b:
                if v != 0:
                    problems.append(f"reconfig {a.value}->{b.value} must be 0")
            elif not (RECONFIG_MIN <= v <= RECONFIG_MAX):
                problems.append(
                    f"reconfig {a.value}->{b.value} = {v} outside [{RECONFIG_MIN}, {RECONFIG_MAX}]")
        return problems


@dataclass(frozen=True)
class FaultEvent:
    core_id: int
    cycle: int
    # effect: the target core's next commit value is corrupted


class Fsm(Enum):
    NORMAL = "Normal"
    DETECTED = "Detected"
    RESTORE = "Restore"
    RESYNC = "Resync"
    RESUME = "Resume"


@dataclass
class CoreState:
    core_id: int
    role: str = "main"          # "main" or "shadow"
    fsm: Fsm = Fsm.NORMAL
    checkpoint_commit: int = -1
    work_done: int = 0


@dataclass
class CommitOutcome:
    kind: str                   # "committed" | "detected" | "unrecoverable"
    value: Optional[int] = None
    faulty: frozenset = frozenset()


class UnrecoverableGroupError(RuntimeError):
    pass


def group_commit(outputs: list[int], mode: AmrMode) -> CommitOutcome:
    """Checker/voter for one group's commit.

    Independent groups commit unconditionally.  A pair commits only on
    agreement: a mismatch is detected but attributed to both cores.  A
    triple commits the majority value and flags the odd core; three
    distinct values are unrecoverable.
    """
    size = GROUP_SIZES[mode]
    if len(outputs) != size:
        raise ValueError(f"{mode.value} groups commit {size} values, got {len(outputs)}")
    if mode is AmrMode.INDIP:
        return CommitOutcome("committed", outputs[0])
    if mode is AmrMode.DLM:
        if outputs[0] == outputs[1]:
            return CommitOutcome("committed", outputs[0])
        return CommitOutcome("detected", None, frozenset({0, 1}))
    counts: dict[int, list[int]] = {}
    for idx, v in enumerate(outputs):
        counts.setdefault(v, []).append(idx)
    best = max(counts.items(), key=lambda kv: len(kv[1]))
    if len(best[1]) == 1:
        return CommitOutcome("unrecoverable", None, frozenset(range(3)))
    minority = frozenset(i for i in range(3) if i not in best[1])
    return CommitOutcome("committed", best[0], minority)


def commit_value(group: int, index: int) -> int:
    """Deterministic per-commit reference value (stand-in for real results)."""
    return ((group + 1) * 2654435761 + (index + 1) * 40503) & 0xFFFFFFFF

CORRUPT_MASK = 0xDEAD


@dataclass
class RecoveryEvent:
    group: int
    detect_cycle: int
    resume_cycle: int
    reexecuted_commits: int
    background: bool            # triple lockstep resyncs without stalling
    fsm_spans: list[tuple[str, int, int]]


@dataclass
class PhaseResult:
    start_cycle: int
    end_cycle: int
    outputs: list[list[int]]            # committed values per group
    detections: int = 0
    recoveries: list[RecoveryEvent] = field(default_factory=list)
    silent_corruptions: int = 0
    unrecoverable_groups: list[int] = field(default_factory=list)
    fault_outcomes: list[tuple[FaultEvent, str]] = field(default_factory=list)


class AmrCluster:
    """Commit-stream model of the cluster; also usable standalone."""

    def __init__(self, cfg: AmrConfig, recorder=None):
        problems = cfg.validate()
        if problems:
            raise ValueError("amr: " + "; ".join(problems))
        self.cfg = cfg
        self.mode = cfg.mode
        self.recorder = recorder
        self.cores = [CoreState(i) for i in range(cfg.num_cores)]
        self._regroup()
        self.reconfigurations: list[tuple[int, str, str, int]] = []
        self.recovering_until = -1
        self.blocked_until = 0  # reconfiguration stall seen by the next phase
        self.pending_faults: list[FaultEvent] = []

    def _regroup(self) -> None:
        size = GROUP_SIZES[self.mode]
        self.groups = [list(range(g * size, (g + 1) * size))
                       for g in range(self.cfg.num_cores // size)]
        for g, members in enumerate(self.groups):
            for k, core in enumerate(members):
                self.cores[core].role = "main" if k == 0 else "shadow"

    @property
    def active_mains(self) -> int:
        return len(self.groups)

    def schedule_fault(self, fault: FaultEvent) -> None:
        if not (0 <= fault.core_id < self.cfg.num_cores):
            raise ValueError(f"fault targets core {fault.core_id}; cluster has 12 cores")
        self.pending_faults.append(fault)
        self.pending_faults.sort(key=lambda f: (f.cycle, f.core_id))

    # ---------------- mode switching ----------------

    def configure(self, to_mode: AmrMode, cycle: int) -> int:
        """Switch mode; the cluster stalls for the configured cycle count.
        A switch requested during recovery is rejected and retried once the
        recovering group resumes."""
        start = cycle
        if cycle < self.recovering_until:
            start = self.recovering_until
        cost = self.cfg.reconfig_cycles[(self.mode, to_mode)]
        resume = start + cost
        if self.recorder is not None:
            self.recorder.emit(start, "amr", "reconfig",
                               from_mode=self.mode.value, to_mode=to_mode.value,
                               cost=cost, resume=resume, deferred=start != cycle)
        self.reconfigurations.append((start, self.mode.value, to_mode.value, cost))
        self.mode = to_mode
        self._regroup()
        return resume

    # ---------------- recovery ----------------

    def _fsm_spans(self, detect_cycle: int) -> list[tuple[str, int, int]]:
        """Split recovery_cycles across the Detected/Restore/Resync/Resume walk."""
        rc = self.cfg.recovery_cycles
        detected = 1 if rc >= 4 else 0
        resume = 1 if rc >= 2 else 0
        middle = rc - detected - resume
        restore = middle // 2
        resync = middle - restore
        spans = []
        t = detect_cycle
        for name, span in ((Fsm.DETECTED.value, detected), (Fsm.RESTORE.value, restore),
                           (Fsm.RESYNC.value, resync), (Fsm.RESUME.value, resume)):
            if span > 0:
                spans.append((name, t, t + span))
                t += span
        return spans

    def hfr_recover(self, group: int, cycle: int, reexecuted: int, background: bool) -> RecoveryEvent:
        """Walk the recovery FSM; the group resumes recovery_cycles later.
        No cluster reboot happens; checkpoints are ECC-backed and never
        corrupt, so escalation is impossible in this model."""
        resume = cycle + self.cfg.recovery_cycles
        ev = RecoveryEvent(group, cycle, resume, reexecuted, background,
                           self._fsm_spans(cycle))
        if not background:
            self.recovering_until = max(self.recovering_until, resume)
        if self.recorder is not None:
            self.recorder.emit(cycle, "amr", "recovery", group=group, resume=resume,
                               reexecuted=reexecuted, background=background)
        return ev

    # ---------------- execution ----------------

    def run_workload(self, work_units: int, mode: Optional[AmrMode] = None) -> int:
        """Compute-bound cycle count: work spread over the active main cores."""
        if work_units < 0:
            raise ValueError("work_units must be >= 0")
        if work_units == 0:
            return 0
        m = mode or self.mode
        mains = self.cfg.num_cores // GROUP_SIZES[m]
        return -(-work_units // mains) * self.cfg.cycles_per_unit

    def compute_phase(self, start_cycle: int, work_units: int) -> PhaseResult:
        """Execute one compute phase, weaving in any scheduled faults.

        Groups run the same commit count in lockstep; a dual-lockstep
        recovery stalls only its own group, so the phase ends at the
        slowest group's finish.  Committed value streams are returned so
        callers can diff against a fault-free oracle.
        """
        cpu = self.cfg.cycles_per_unit
        cp_period = self.cfg.checkpoint_period
        start_cycle = max(start_cycle, self.blocked_until)
        commits = 0 if work_units == 0 else -(-work_units // self.active_mains)
        result = PhaseResult(start_cycle, start_cycle, [[] for _ in self.groups])
        end = start_cycle
        leftover: list[FaultEvent] = []
        for g, members in enumerate(self.groups):
            t = start_cycle
            halted = False
            j = 0
            corrupt_next: set[int] = set()
            applied: list[FaultEvent] = []
            faults_here = [f for f in self.pending_faults if f.core_id in members]
            fi = 0
            while j < commits and not halted:
                commit_end = t + cpu
                while fi < len(faults_here) and faults_here[fi].cycle < commit_end:
                    corrupt_next.add(faults_here[fi].core_id)
                    applied.append(faults_here[fi])
                    fi += 1
                outputs = []
                for core in members:
                    v = commit_value(g, j)
                    if core in corrupt_next:
                        v ^= CORRUPT_MASK
                    outputs.append(v)
                value_altering = bool(corrupt_next)
                corrupt_next.clear()
                outcome = group_commit(outputs, self.mode)
                if outcome.kind == "committed":
                    result.outputs[g].append(outcome.value)
                    for core in members:
                        if (j + 1) % cp_period == 0:
                            self.cores[core].checkpoint_commit = j
                        self.cores[core].work_done += 1
                    if outcome.faulty:
                        # triple lockstep: masked; flagged core resyncs in background
                        result.detections += 1
                        result.recoveries.append(
                            self.hfr_recover(g, commit_end, 0, background=True))
                        self._book(result, applied, "masked")
                    elif value_altering and self.mode is AmrMode.INDIP:
                        result.silent_corruptions += 1
                        self._book(result, applied, "silent")
                    t = commit_end
                    j += 1
                elif outcome.kind == "detected":
                    result.detections += 1
                    cp = self.cores[members[0]].checkpoint_commit
                    reexec = j - cp  # commits to re-run, the corrupted one included
                    rec = self.hfr_recover(g, commit_end, reexec, background=False)
                    result.recoveries.append(rec)
                    self._book(result, applied, "detected")
                    # restore to the checkpoint, re-execute up to the failed
                    # commit; the loop re-enters with the fault cleared
                    t = rec.resume_cycle + (reexec - 1) * cpu
                else:
                    result.unrecoverable_groups.append(g)
                    self._book(result, applied, "unrecoverable")
                    if self.recorder is not None:
                        self.recorder.emit(commit_end, "amr", "group_halted", group=g)
                    halted = True
            end = max(end, t)
            leftover.extend(faults_here[fi:])
        self.pending_faults = sorted(leftover, key=lambda f: (f.cycle, f.core_id))
        result.end_cycle = end
        return result

    @staticmethod
    def _book(result: PhaseResult, applied: list[FaultEvent], outcome: str) -> None:
        for f in applied:
            result.fault_outcomes.append((f, outcome))
        applied.clear()

    def sw_recovery_cycles(self) -> int:
        """Software recovery baseline: full checkpoint reload through the
        memory system, modeled as a calibration multiple of the HFR walk."""
        return self.cfg.sw_recovery_multiplier * self.cfg.recovery_cycles
