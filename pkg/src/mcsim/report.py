"""Report assembly: metrics.csv, events.jsonl, human-readable summary.

The CSV schema is bit-exact by contract: header
``scenario,variant,subject,metric,value,unit``, one numeric value per row,
decimal point, no thousands separators, LF line endings, rows sorted by
(variant, subject, metric).  Every counter the report defines appears even
when zero, so downstream tooling never has to special-case absence.
Ratios against the isolated variant are emitted only when an isolated
variant exists.
"""

from __future__ import annotations

import json
from pathlib import Path

from mcsim.engine import RunResult

CSV_HEADER = "scenario,variant,subject,metric,value,unit"

METRICS = [
    ("task", "completion_cycles", "cycles"),
    ("task", "accesses", "count"),
    ("task", "lat_min", "cycles"),
    ("task", "lat_avg", "cycles"),
    ("task", "lat_max", "cycles"),
    ("task", "jitter", "cycles"),
    ("task", "timeout", "flag"),
    ("task", "ratio_completion_vs_isolated", "ratio"),
    ("task", "ratio_lat_avg_vs_isolated", "ratio"),
    ("part", "llc_hits", "count"),
    ("part", "llc_misses", "count"),
    ("part", "llc_evictions", "count"),
    ("part", "llc_flushes", "count"),
    ("part", "ratio_misses_vs_isolated", "ratio"),
    ("bank", "spm_conflicts", "count"),
    ("spm", "serviced_beats", "beats"),
    ("initiator", "beats_released", "beats"),
    ("initiator", "tru_stall_cycles", "cycles"),
    ("initiator", "decode_errors", "count"),
    ("initiator", "tru_latency_bound", "cycles"),
    ("amr", "detections", "count"),
    ("amr", "recoveries", "count"),
    ("amr", "recovery_cycles_total", "cycles"),
    ("amr", "reexecuted_commits", "count"),
    ("amr", "reconfigurations", "count"),
    ("amr", "reconfig_cycles_total", "cycles"),
    ("amr", "silent_corruptions", "count"),
    ("amr", "unrecoverable_groups", "count"),
    ("amr", "faults_applied", "count"),
    ("amr", "faults_detected", "count"),
    ("amr", "faults_masked", "count"),
    ("amr", "sw_recovery_ratio", "ratio"),
]


def list_metrics() -> list[tuple[str, str, str]]:
    return list(METRICS)


def format_value(v) -> str:
    """Canonical numeric formatting: ints plain, floats shortest-roundtrip."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    f = float(v)
    if f == int(f) and abs(f) < 1e15:
        return str(int(f))
    return repr(f)


def build_rows(scenario_name: str, results: dict[str, RunResult]) -> list[tuple]:
    """Flatten run results into (scenario, variant, subject, metric, value, unit)."""
    rows: list[tuple] = []
    isolated = results.get("isolated")

    def add(variant: str, subject: str, metric: str, value, unit: str) -> None:
        rows.append((scenario_name, variant, subject, metric, format_value(value), unit))

    for variant, res in results.items():
        for tname, stats in sorted(res.tasks.items()):
            subj = f"task:{tname}"
            for key in ("completion_cycles", "accesses", "lat_min", "lat_avg",
                        "lat_max", "jitter", "timeout"):
                unit = next(u for s, m, u in METRICS if s == "task" and m == key)
                add(variant, subj, key, stats.get(key, 0), unit)
            if isolated is not None and tname in isolated.tasks:
                iso = isolated.tasks[tname]
                if iso.get("completion_cycles", 0) > 0 and stats.get("completion_cycles", -1) >= 0:
                    add(variant, subj, "ratio_completion_vs_isolated",
                        stats["completion_cycles"] / iso["completion_cycles"], "ratio")
                if iso.get("lat_avg", 0) > 0:
                    add(variant, subj, "ratio_lat_avg_vs_isolated",
                        stats.get("lat_avg", 0) / iso["lat_avg"], "ratio")
        for pid, counters in sorted(res.llc_counters.items()):
            subj = f"part:{pid}"
            for key in ("llc_hits", "llc_misses", "llc_evictions", "llc_flushes"):
                add(variant, subj, key, counters.get(key, 0), "count")
            if isolated is not None and pid in isolated.llc_counters:
                iso_m = isolated.llc_counters[pid].get("llc_misses", 0)
                if iso_m > 0:
                    add(variant, subj, "ratio_misses_vs_isolated",
                        counters.get("llc_misses", 0) / iso_m, "ratio")
        for bank, n in enumerate(res.bank_conflicts):
            add(variant, f"bank:{bank}", "spm_conflicts", n, "count")
        if res.bank_conflicts:
            add(variant, "spm", "serviced_beats", res.spm_serviced_beats, "beats")
        for iname, c in sorted(res.initiators.items()):
            subj = f"initiator:{iname}"
            add(variant, subj, "beats_released", c.get("beats_released", 0), "beats")
            add(variant, subj, "tru_stall_cycles", c.get("tru_stall_cycles", 0), "cycles")
            add(variant, subj, "decode_errors", c.get("decode_errors", 0), "count")
            if "tru_latency_bound" in c:
                add(variant, subj, "tru_latency_bound", c["tru_latency_bound"], "cycles")
        if res.amr:
            for key in ("detections", "recoveries", "recovery_cycles_total",
                        "reexecuted_commits", "reconfigurations", "reconfig_cycles_total",
                        "silent_corruptions", "unrecoverable_groups", "faults_applied",
                        "faults_detected", "faults_masked", "sw_recovery_ratio"):
                unit = next(u for s, m, u in METRICS if s == "amr" and m == key)
                add(variant, "amr", key, res.amr.get(key, 0), unit)
    rows.sort(key=lambda r: (r[1], r[2], r[3]))
    return rows


def write_csv(rows: list[tuple], path: Path) -> None:
    lines = [CSV_HEADER]
    lines.extend(",".join(str(x) for x in row) for row in rows)
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def write_events(results: dict[str, RunResult], path: Path) -> None:
    with open(path, "wb") as fh:
        for variant in sorted(results):
            for ev in results[variant].events:
                obj = {"variant": variant}
                obj.update(ev)
                fh.write(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode())
                fh.write(b"\n")


def write_summary(scenario_name: str, results: dict[str, RunResult], path: Path) -> None:
    lines = [f"scenario: {scenario_name}", ""]
    isolated = results.get("isolated")
    header = f"{'variant':<24} {'task':<12} {'completion':>12} {'lat_avg':>10} {'jitter':>8} {'vs isolated':>12}"
    lines.append(header)
    lines.append("-" * len(header))
    for variant, res in results.items():
        for tname, stats in sorted(res.tasks.items()):
            ratio = ""
            if isolated is not None and tname in isolated.tasks:
                iso = isolated.tasks[tname].get("completion_cycles", 0)
                if iso > 0 and stats.get("completion_cycles", -1) >= 0:
                    ratio = f"{stats['completion_cycles'] / iso:.3f}x"
            timeout = " TIMEOUT" if stats.get("timeout") else ""
            lines.append(
                f"{variant:<24} {tname:<12} {stats.get('completion_cycles', -1):>12} "
                f"{stats.get('lat_avg', 0):>10.2f} {stats.get('jitter', 0):>8} {ratio:>12}{timeout}")
    for variant, res in results.items():
        if res.amr:
            lines.append("")
            lines.append(f"amr [{variant}]: detections={res.amr['detections']} "
                         f"recoveries={res.amr['recoveries']} "
                         f"recovery_cycles_total={res.amr['recovery_cycles_total']} "
                         f"reconfig_cycles_total={res.amr['reconfig_cycles_total']}")
            lines.append(f"  sw_recovery_ratio={res.amr['sw_recovery_ratio']:.1f}x "
                         "(calibration-dependent: software reload modeled as a "
                         "configured multiple of the hardware walk)")
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def emit_report(scenario_name: str, results: dict[str, RunResult], out_dir: str | Path,
                namespaced: bool = False) -> dict[str, Path]:
    """Write metrics.csv, events.jsonl and summary.txt; returns the paths."""
    if not results:
        raise ValueError("no results to report")
    out = Path(out_dir)
    if namespaced:
        out = out / scenario_name
    out.mkdir(parents=True, exist_ok=True)
    rows = build_rows(scenario_name, results)
    paths = {
        "metrics": out / "metrics.csv",
        "events": out / "events.jsonl",
        "summary": out / "summary.txt",
    }
    write_csv(rows, paths["metrics"])
    write_events(results, paths["events"])
    write_summary(scenario_name, results, paths["summary"])
    return paths
