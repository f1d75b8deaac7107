"""Scenario configuration: YAML schema, strict validation, variants.

A scenario file describes one experiment: the topology (scratchpad, cache,
memory windows), per-initiator shaper settings, the task list, optional
cluster configuration with a fault schedule, and a list of named variants.
Variants are dotted key-path overrides of the base document - "regulated"
differs from "unregulated" by only the tsu keys, the same way software
reprograms the silicon's registers between runs.

Validation is strict and complete: unknown keys are errors (no silent typo
tolerance), dangling references are errors, and every problem found is
reported, not just the first.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from mcsim.amr import AmrConfig, AmrMode, FaultEvent, default_reconfig_table
from mcsim.dcspm import MIB, AliasWindow, SpmConfig, SpmMode
from mcsim.dpllc import HyperRamConfig, LlcConfig, Partition
from mcsim.transport import AddrRange, Criticality
from mcsim.tsu import TsuConfig
from mcsim.workloads import TaskSpec


class ScenarioError(ValueError):
    """Carries every validation problem found in a scenario document."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("scenario invalid:\n  - " + "\n  - ".join(problems))


@dataclass
class Variant:
    name: str
    isolated: bool = False
    overrides: dict[str, Any] = field(default_factory=dict)


@dataclass
class SimEventSpec:
    cycle: int
    kind: str                   # set_tsu | flush_partition | set_partitions | set_amr_mode
    args: dict[str, Any] = field(default_factory=dict)


@dataclass
class Scenario:
    name: str
    seed: int
    run_limit: int
    beat_bytes: int
    spm: Optional[SpmConfig]
    llc: Optional[LlcConfig]
    hyperram: Optional[HyperRamConfig]
    hyperram_window: Optional[AddrRange]
    route_table: list[AddrRange]
    spm_port_map: dict[str, int]
    # crossbar policy; fixed_priority grants by task-name order
    arb: str = "round_robin"
    tsu: dict[str, TsuConfig] = field(default_factory=dict)
    tasks: dict[str, TaskSpec] = field(default_factory=dict)
    amr: Optional[AmrConfig] = None
    faults: list[FaultEvent] = field(default_factory=list)
    variants: list[Variant] = field(default_factory=list)
    events: list[SimEventSpec] = field(default_factory=list)
    raw: dict[str, Any] = field(default_factory=dict, repr=False)


def _check_keys(problems: list[str], where: str, node: dict, allowed: set[str],
                required: set[str] = frozenset()) -> None:
    if not isinstance(node, dict):
        problems.append(f"{where}: expected a mapping")
        return
    for k in node:
        if k not in allowed:
            problems.append(f"{where}: unknown key {k!r}")
    for k in required:
        if k not in node:
            problems.append(f"{where}: missing required key {k!r}")


def apply_overrides(doc: dict, overrides: dict[str, Any]) -> dict:
    """Return a deep copy of ``doc`` with dotted key paths replaced.

    Path segments index mappings; a segment that looks like an integer
    indexes a mapping under that integer key (partition tables use int
    keys).  Intermediate mappings are created as needed.
    """
    out = copy.deepcopy(doc)
    for path, value in overrides.items():
        parts = [int(p) if p.lstrip("-").isdigit() else p for p in str(path).split(".")]
        node = out
        for p in parts[:-1]:
            if not isinstance(node, dict):
                raise ScenarioError([f"override {path!r}: {p!r} does not address a mapping"])
            node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ScenarioError([f"override {path!r}: parent is not a mapping"])
        node[parts[-1]] = copy.deepcopy(value)
    return out


TOP_KEYS = {"name", "seed", "run_limit", "topology", "tsu", "tasks", "amr",
            "variants", "events"}
TOPOLOGY_KEYS = {"beat_bytes", "spm", "llc", "spm_port_map", "arb"}
SPM_KEYS = {"total_bytes", "num_banks", "word_bytes", "ports", "windows"}
LLC_KEYS = {"total_bytes", "line_bytes", "ways", "partitions", "default_part",
            "hit_cycles", "hyperram"}
HYPERRAM_KEYS = {"window_base", "window_bytes", "access_latency_cycles",
                 "cycles_per_beat", "channels", "channel_interleave_bytes"}
TSU_KEYS = {"split_beats", "wb_depth_beats", "budget_beats", "period_cycles",
            "gbs_on", "wb_on", "tru_on"}
TASK_KEYS = {"kind", "criticality", "part_id", "start", "measured",
             "base", "stride", "count", "wrap_bytes", "warmup",
             "src", "dst", "bytes", "burst_beats", "outstanding", "loop",
             "tiles", "tile_bytes", "compute_cycles_per_tile", "units_per_tile"}
AMR_KEYS = {"mode", "recovery_cycles", "checkpoint_period", "cycles_per_unit",
            "sw_recovery_multiplier", "reconfig_cycles", "faults"}
VARIANT_KEYS = {"name", "isolated", "overrides"}
EVENT_KEYS = {"cycle", "kind", "initiator", "tsu", "part_id", "partitions",
              "default_part", "mode"}


def resolve(doc: dict, name_hint: str = "") -> Scenario:
    """Validate a parsed scenario document and build the typed Scenario.

    Every problem is collected; a ScenarioError listing all of them is
    raised if any were found.
    """
    problems: list[str] = []
    _check_keys(problems, "top level", doc, TOP_KEYS, {"topology", "tasks"})
    if problems and not isinstance(doc, dict):
        raise ScenarioError(problems)

    name = doc.get("name", name_hint or "scenario")
    seed = doc.get("seed", 0)
    run_limit = doc.get("run_limit", 1_000_000)
    if not isinstance(run_limit, int) or run_limit <= 0:
        problems.append("run_limit must be a positive integer")

    topo = doc.get("topology", {})
    _check_keys(problems, "topology", topo, TOPOLOGY_KEYS)
    beat_bytes = topo.get("beat_bytes", 8) if isinstance(topo, dict) else 8

    route_table: list[AddrRange] = []
    spm_cfg = None
    if isinstance(topo, dict) and "spm" in topo:
        node = topo["spm"]
        _check_keys(problems, "topology.spm", node, SPM_KEYS, {"windows"})
        if isinstance(node, dict):
            windows = []
            for i, w in enumerate(node.get("windows", [])):
                _check_keys(problems, f"topology.spm.windows[{i}]", w, {"base", "mode"},
                            {"base", "mode"})
                if isinstance(w, dict) and "base" in w and "mode" in w:
                    try:
                        mode = SpmMode(w["mode"])
                    except ValueError:
                        problems.append(f"topology.spm.windows[{i}]: mode must be "
                                        f"'interleaved' or 'contiguous', got {w['mode']!r}")
                        continue
                    windows.append(AliasWindow(int(w["base"]), mode))
            spm_cfg = SpmConfig(
                total_bytes=node.get("total_bytes", 1 * MIB),
                num_banks=node.get("num_banks", 16),
                word_bytes=node.get("word_bytes", 8),
                ports=node.get("ports", 2),
                alias_windows=windows,
            )
            problems.extend(f"topology.spm: {p}" for p in spm_cfg.validate())
            for w in windows:
                route_table.append(AddrRange(w.base, spm_cfg.total_bytes, "spm"))

    llc_cfg = None
    hr_cfg = None
    hr_window = None
    if isinstance(topo, dict) and "llc" in topo:
        node = topo["llc"]
        _check_keys(problems, "topology.llc", node, LLC_KEYS, {"partitions", "hyperram"})
        if isinstance(node, dict):
            parts = {}
            pnode = node.get("partitions", {})
            if not isinstance(pnode, dict):
                problems.append("topology.llc.partitions: expected a mapping part_id -> range")
                pnode = {}
            for pid, rng in pnode.items():
                _check_keys(problems, f"topology.llc.partitions[{pid}]", rng,
                            {"base_set", "num_sets"}, {"base_set", "num_sets"})
                if isinstance(rng, dict) and "base_set" in rng and "num_sets" in rng:
                    parts[int(pid)] = Partition(int(rng["base_set"]), int(rng["num_sets"]))
            hnode = node.get("hyperram", {})
            _check_keys(problems, "topology.llc.hyperram", hnode, HYPERRAM_KEYS,
                        {"window_base", "window_bytes"})
            if isinstance(hnode, dict):
                hr_cfg = HyperRamConfig(
                    access_latency_cycles=hnode.get("access_latency_cycles", 24),
                    cycles_per_beat=hnode.get("cycles_per_beat", 2),
                    channels=hnode.get("channels", 2),
                    channel_interleave_bytes=hnode.get("channel_interleave_bytes", 1 * MIB),
                )
                problems.extend(f"topology.llc.hyperram: {p}" for p in hr_cfg.validate())
                if "window_base" in hnode and "window_bytes" in hnode:
                    hr_window = AddrRange(int(hnode["window_base"]),
                                          int(hnode["window_bytes"]), "llc")
                    route_table.append(hr_window)
            llc_cfg = LlcConfig(
                total_bytes=node.get("total_bytes", 128 * 1024),
                line_bytes=node.get("line_bytes", 64),
                ways=node.get("ways", 8),
                partition_table=parts,
                default_part=node.get("default_part", 0),
                hit_cycles=node.get("hit_cycles", 1),
            )
            problems.extend(f"topology.llc: {p}" for p in llc_cfg.validate())

    spm_port_map = dict(topo.get("spm_port_map", {})) if isinstance(topo, dict) else {}
    arb = topo.get("arb", "round_robin") if isinstance(topo, dict) else "round_robin"
    if arb not in ("round_robin", "fixed_priority"):
        problems.append(f"topology.arb must be 'round_robin' or 'fixed_priority', got {arb!r}")

    tasks: dict[str, TaskSpec] = {}
    tnode = doc.get("tasks", {})
    if not isinstance(tnode, dict) or not tnode:
        problems.append("tasks: at least one task is required")
        tnode = {}
    for tname, t in tnode.items():
        _check_keys(problems, f"tasks.{tname}", t, TASK_KEYS, {"kind"})
        if not isinstance(t, dict):
            continue
        crit_raw = t.get("criticality", "non_critical")
        try:
            crit = Criticality(crit_raw)
        except ValueError:
            problems.append(f"tasks.{tname}: criticality must be 'critical' or "
                            f"'non_critical', got {crit_raw!r}")
            crit = Criticality.NON_CRITICAL
        spec = TaskSpec(
            name=tname,
            kind=t.get("kind", ""),
            criticality=crit,
            part_id=t.get("part_id", 0),
            start=t.get("start", 0),
            measured=t.get("measured", True),
            base=int(t.get("base", 0)),
            stride=t.get("stride", 64),
            count=t.get("count", 0),
            wrap_bytes=t.get("wrap_bytes", 0),
            warmup=t.get("warmup", 0),
            src=int(t.get("src", 0)),
            dst=int(t.get("dst", 0)),
            bytes=t.get("bytes", 0),
            burst_beats=t.get("burst_beats", 16),
            outstanding=t.get("outstanding", 4),
            loop=t.get("loop", False),
            tiles=t.get("tiles", 0),
            tile_bytes=t.get("tile_bytes", 0),
            compute_cycles_per_tile=t.get("compute_cycles_per_tile", 0),
            units_per_tile=t.get("units_per_tile", 0),
        )
        problems.extend(spec.validate(beat_bytes))
        tasks[tname] = spec

    tsu: dict[str, TsuConfig] = {}
    for iname, t in (doc.get("tsu") or {}).items():
        _check_keys(problems, f"tsu.{iname}", t, TSU_KEYS)
        if iname not in tasks:
            problems.append(f"tsu.{iname}: no task/initiator with that name")
        if isinstance(t, dict):
            cfg = TsuConfig(
                split_beats=t.get("split_beats", 0),
                wb_depth_beats=t.get("wb_depth_beats", 32),
                budget_beats=t.get("budget_beats", 1),
                period_cycles=t.get("period_cycles", 1),
                gbs_on=t.get("gbs_on", False),
                wb_on=t.get("wb_on", False),
                tru_on=t.get("tru_on", False),
            )
            problems.extend(f"tsu.{iname}: {p}" for p in cfg.validate())
            tsu[iname] = cfg

    amr_cfg = None
    faults: list[FaultEvent] = []
    if "amr" in doc:
        node = doc["amr"]
        _check_keys(problems, "amr", node, AMR_KEYS)
        if isinstance(node, dict):
            mode_raw = node.get("mode", "INDIP")
            try:
                mode = AmrMode(mode_raw)
            except ValueError:
                problems.append(f"amr.mode must be INDIP, DLM or TLM, got {mode_raw!r}")
                mode = AmrMode.INDIP
            table = default_reconfig_table()
            for key, v in (node.get("reconfig_cycles") or {}).items():
                try:
                    a, b = str(key).split("-")
                    table[(AmrMode(a), AmrMode(b))] = int(v)
                except (ValueError, KeyError):
                    problems.append(f"amr.reconfig_cycles: bad entry {key!r} "
                                    "(use e.g. 'INDIP-DLM: 82')")
            amr_cfg = AmrConfig(
                mode=mode,
                recovery_cycles=node.get("recovery_cycles", 24),
                reconfig_cycles=table,
                checkpoint_period=node.get("checkpoint_period", 1),
                cycles_per_unit=node.get("cycles_per_unit", 1),
                sw_recovery_multiplier=node.get("sw_recovery_multiplier", 16),
            )
            problems.extend(f"amr: {p}" for p in amr_cfg.validate())
            for i, f in enumerate(node.get("faults") or []):
                _check_keys(problems, f"amr.faults[{i}]", f, {"core", "cycle"},
                            {"core", "cycle"})
                if isinstance(f, dict) and "core" in f and "cycle" in f:
                    faults.append(FaultEvent(int(f["core"]), int(f["cycle"])))

    variants: list[Variant] = []
    seen = set()
    for i, v in enumerate(doc.get("variants") or []):
        _check_keys(problems, f"variants[{i}]", v, VARIANT_KEYS, {"name"})
        if isinstance(v, dict) and "name" in v:
            if v["name"] in seen:
                problems.append(f"variants[{i}]: duplicate name {v['name']!r}")
            seen.add(v["name"])
            variants.append(Variant(v["name"], v.get("isolated", False),
                                    dict(v.get("overrides") or {})))
    if not any(v.isolated for v in variants):
        variants.insert(0, Variant("isolated", isolated=True))

    events: list[SimEventSpec] = []
    for i, e in enumerate(doc.get("events") or []):
        _check_keys(problems, f"events[{i}]", e, EVENT_KEYS, {"cycle", "kind"})
        if isinstance(e, dict) and "cycle" in e and "kind" in e:
            kind = e["kind"]
            if kind not in ("set_tsu", "flush_partition", "set_partitions", "set_amr_mode"):
                problems.append(f"events[{i}]: unknown kind {kind!r}")
                continue
            args = {k: v for k, v in e.items() if k not in ("cycle", "kind")}
            events.append(SimEventSpec(int(e["cycle"]), kind, args))

    # cross-references
    for tname, spec in tasks.items():
        if llc_cfg is not None and spec.part_id != 0 \
                and spec.part_id not in llc_cfg.partition_table:
            problems.append(f"tasks.{tname}: part_id {spec.part_id} has no partition "
                            "(and is not the untagged default 0)")
        for label, addr in _task_addresses(spec):
            if addr and route_table and not any(r.contains(addr) for r in route_table):
                problems.append(f"tasks.{tname}: {label} {addr:#x} is outside every "
                                "mapped address window")
        if spec.kind == "double_buffered" and spec.units_per_tile > 0 and amr_cfg is None:
            problems.append(f"tasks.{tname}: units_per_tile set but no amr section")
    for iname in spm_port_map:
        if iname not in tasks:
            problems.append(f"topology.spm_port_map.{iname}: no task/initiator with that name")
    if spm_cfg is None and llc_cfg is None:
        problems.append("topology: at least one endpoint (spm or llc) is required")

    if problems:
        raise ScenarioError(sorted(set(problems)))

    return Scenario(
        name=name, seed=seed, run_limit=run_limit, beat_bytes=beat_bytes,
        spm=spm_cfg, llc=llc_cfg, hyperram=hr_cfg, hyperram_window=hr_window,
        route_table=route_table, spm_port_map=spm_port_map, arb=arb, tsu=tsu,
        tasks=tasks, amr=amr_cfg, faults=faults, variants=variants, events=events,
        raw=doc,
    )


def _task_addresses(spec: TaskSpec):
    if spec.kind == "stride_reader":
        yield "base", spec.base
    elif spec.kind == "dma_linear":
        yield "src", spec.src
        yield "dst", spec.dst
    elif spec.kind == "double_buffered":
        yield "src", spec.src


def load_raw(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ScenarioError([f"{path}: scenario file must contain a mapping"])
    return doc


def load_scenario(path: str | Path) -> Scenario:
    """Parse, validate and resolve a scenario file (base document only)."""
    doc = load_raw(path)
    return resolve(doc, name_hint=Path(path).stem)


def resolve_variant(scenario: Scenario, variant: Variant) -> Scenario:
    """Apply a variant's overrides to the base document and re-resolve."""
    if not variant.overrides:
        return scenario
    doc = apply_overrides(scenario.raw, variant.overrides)
    return resolve(doc, name_hint=scenario.name)
