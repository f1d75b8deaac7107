"""Experiment driver and reporting: variants, determinism, CSV contract."""

import copy
import json
import subprocess
import sys
from pathlib import Path

import pytest

from mcsim import report
from mcsim.cli import find_scenario, main as cli_main
from mcsim.engine import SocSim, run_experiment, run_variant
from mcsim.scenario import Variant, load_scenario, resolve

SPM_BASE = 0x78000000


def small_doc():
    return {
        "name": "small",
        "run_limit": 50_000,
        "topology": {
            "spm": {"windows": [{"base": SPM_BASE, "mode": "interleaved"},
                                {"base": 0x7A000000, "mode": "contiguous"}]},
        },
        "tasks": {
            "r": {"kind": "stride_reader", "base": SPM_BASE, "stride": 64,
                  "count": 64, "criticality": "critical"},
            "d": {"kind": "dma_linear", "src": SPM_BASE + 0x40000,
                  "dst": SPM_BASE + 0x80000, "bytes": 4096, "burst_beats": 16},
        },
        "variants": [
            {"name": "isolated", "isolated": True},
            {"name": "contended"},
            {"name": "shaped", "overrides": {"tsu.d.gbs_on": True,
                                             "tsu.d.split_beats": 4}},
        ],
    }


def test_run_experiment_produces_all_variants():
    results = run_experiment(resolve(small_doc()))
    assert set(results) == {"isolated", "contended", "shaped"}
    for res in results.values():
        assert res.tasks["r"]["completion_cycles"] > 0


def test_isolated_variant_runs_each_measured_task_alone():
    results = run_experiment(resolve(small_doc()))
    iso = results["isolated"]
    # both tasks have isolated numbers, and the reader saw zero contention
    assert iso.tasks["r"]["jitter"] == 0
    assert iso.tasks["d"]["completion_cycles"] > 0


def test_empty_variant_list_runs_isolated_only():
    doc = small_doc()
    doc.pop("variants")
    results = run_experiment(resolve(doc))
    assert list(results) == ["isolated"]


def test_variant_filter_keeps_isolated():
    results = run_experiment(resolve(small_doc()), variant_names=["shaped"])
    assert set(results) == {"isolated", "shaped"}


def test_timeout_variant_flagged_with_partial_metrics():
    doc = small_doc()
    doc["run_limit"] = 60  # far too short for the reader
    results = run_experiment(resolve(doc))
    contended = results["contended"]
    assert "r" in contended.timeout_tasks
    assert contended.tasks["r"]["timeout"] == 1
    assert contended.tasks["r"]["accesses"] >= 0


def test_interferer_loop_stops_when_measured_tasks_finish():
    doc = small_doc()
    doc["tasks"]["d"]["loop"] = True
    doc["tasks"]["d"]["measured"] = False
    results = run_experiment(resolve(doc))
    res = results["contended"]
    assert res.tasks["r"]["timeout"] == 0
    assert res.tasks["d"]["timeout"] == 0  # interferers cannot time out


def test_mid_sim_tsu_reconfiguration_event():
    doc = small_doc()
    doc["variants"] = [{"name": "contended"}]
    doc["events"] = [{"cycle": 100, "kind": "set_tsu", "initiator": "d",
                      "tsu": {"gbs_on": True, "split_beats": 4}}]
    results = run_experiment(resolve(doc))
    events = results["contended"].events
    assert any(e["kind"] == "reconfig" and e["component"] == "tsu.d" for e in events)


def test_decode_error_counted_per_initiator():
    doc = small_doc()
    # stride wraps outside the mapped window after a few accesses
    doc["tasks"]["r"]["base"] = SPM_BASE + (1 << 20) - 128
    doc["tasks"]["r"]["count"] = 8
    doc["variants"] = [{"name": "contended"}]
    results = run_experiment(resolve(doc))
    assert results["contended"].initiators["r"]["decode_errors"] == 6


def test_runtime_repartition_event_flags_unflushed_lines():
    doc = {
        "name": "rp",
        "run_limit": 100_000,
        "topology": {
            "llc": {"ways": 8,
                    "partitions": {0: {"base_set": 0, "num_sets": 128},
                                   1: {"base_set": 128, "num_sets": 128}},
                    "hyperram": {"window_base": 0x80000000, "window_bytes": 1 << 24}},
            "spm": {"windows": [{"base": SPM_BASE, "mode": "interleaved"},
                                {"base": 0x7A000000, "mode": "contiguous"}]},
        },
        "tasks": {"r": {"kind": "stride_reader", "base": 0x80000000, "part_id": 1,
                        "stride": 64, "count": 64, "wrap_bytes": 1024}},
        "events": [{"cycle": 400, "kind": "set_partitions",
                    "partitions": {0: {"base_set": 0, "num_sets": 192},
                                   1: {"base_set": 192, "num_sets": 64}}}],
        "variants": [{"name": "base"}],
    }
    results = run_experiment(resolve(doc))
    events = results["base"].events
    repart = [e for e in events if e["kind"] == "repartition"]
    assert repart and 1 in repart[0]["violations"]  # lines were live, not flushed


def test_mid_sim_amr_mode_switch_costs_cycles():
    def completion(with_switch):
        doc = {
            "name": "ms",
            "run_limit": 200_000,
            "topology": {
                "spm": {"windows": [{"base": SPM_BASE, "mode": "interleaved"},
                                    {"base": 0x7A000000, "mode": "contiguous"}]},
            },
            "amr": {"mode": "DLM"},
            "tasks": {"a": {"kind": "double_buffered", "src": SPM_BASE, "tiles": 6,
                            "tile_bytes": 512, "burst_beats": 64, "units_per_tile": 720,
                            "criticality": "critical"}},
            "variants": [{"name": "base"}],
        }
        if with_switch:
            doc["events"] = [{"cycle": 100, "kind": "set_amr_mode", "mode": "TLM"}]
        res = run_experiment(resolve(doc))["base"]
        return res.tasks["a"]["completion_cycles"], res.amr

    plain, _ = completion(False)
    switched, amr = completion(True)
    assert amr["reconfigurations"] == 1
    assert amr["reconfig_cycles_total"] == 131  # DLM -> TLM
    assert switched > plain  # the stall plus slower triple-lockstep compute


def test_fault_outcomes_recorded_in_report():
    doc = {
        "name": "fo",
        "run_limit": 200_000,
        "topology": {
            "spm": {"windows": [{"base": SPM_BASE, "mode": "interleaved"},
                                {"base": 0x7A000000, "mode": "contiguous"}]},
        },
        "amr": {"mode": "DLM", "faults": [{"core": 1, "cycle": 150}]},
        "tasks": {"a": {"kind": "double_buffered", "src": SPM_BASE, "tiles": 4,
                        "tile_bytes": 512, "burst_beats": 64, "units_per_tile": 600,
                        "criticality": "critical"}},
        "variants": [{"name": "base"}],
    }
    results = run_experiment(resolve(doc))
    res = results["base"]
    assert res.amr["faults_applied"] == 1
    assert res.amr["faults_detected"] == 1
    assert any(e["kind"] == "fault_outcome" and e["outcome"] == "detected"
               for e in res.events)
    rows = report.build_rows("fo", results)
    assert any(r[3] == "faults_detected" and r[4] == "1" for r in rows)


def test_flush_event_reflects_in_counters():
    doc = {
        "name": "f",
        "run_limit": 100_000,
        "topology": {
            "llc": {"ways": 8,
                    "partitions": {0: {"base_set": 0, "num_sets": 256}},
                    "hyperram": {"window_base": 0x80000000, "window_bytes": 1 << 24}},
            "spm": {"windows": [{"base": SPM_BASE, "mode": "interleaved"},
                                {"base": 0x7A000000, "mode": "contiguous"}]},
        },
        "tasks": {"r": {"kind": "stride_reader", "base": 0x80000000,
                        "stride": 64, "count": 48, "wrap_bytes": 1024}},
        "events": [{"cycle": 300, "kind": "flush_partition", "part_id": 0}],
        "variants": [{"name": "base"}],
    }
    results = run_experiment(resolve(doc))
    base = results["base"]
    assert base.llc_counters[0]["llc_flushes"] > 0
    # the flushed lines re-miss afterwards
    assert base.llc_counters[0]["llc_misses"] > 16


# ---------------------------------------------------------------- reporting

def test_csv_schema_and_sorting(tmp_path):
    results = run_experiment(resolve(small_doc()))
    paths = report.emit_report("small", results, tmp_path)
    lines = paths["metrics"].read_text().splitlines()
    assert lines[0] == "scenario,variant,subject,metric,value,unit"
    rows = [l.split(",") for l in lines[1:]]
    assert all(len(r) == 6 for r in rows)
    keys = [(r[1], r[2], r[3]) for r in rows]
    assert keys == sorted(keys)
    # completeness: every task metric appears even when zero
    assert any(r[2] == "task:r" and r[3] == "jitter" for r in rows)
    assert any(r[2] == "bank:7" and r[3] == "spm_conflicts" for r in rows)


def test_csv_byte_identical_across_runs(tmp_path):
    a = report.emit_report("small", run_experiment(resolve(small_doc())), tmp_path / "a")
    b = report.emit_report("small", run_experiment(resolve(small_doc())), tmp_path / "b")
    assert a["metrics"].read_bytes() == b["metrics"].read_bytes()
    assert a["events"].read_bytes() == b["events"].read_bytes()


def test_events_jsonl_parses(tmp_path):
    results = run_experiment(resolve(small_doc()))
    paths = report.emit_report("small", results, tmp_path)
    lines = paths["events"].read_bytes().splitlines()
    assert lines
    for line in lines[:50]:
        obj = json.loads(line)
        assert {"variant", "cycle", "component", "kind"} <= set(obj)


def test_namespaced_output_for_multiple_scenarios(tmp_path):
    results = run_experiment(resolve(small_doc()))
    p1 = report.emit_report("alpha", results, tmp_path, namespaced=True)
    p2 = report.emit_report("beta", results, tmp_path, namespaced=True)
    assert p1["metrics"] == tmp_path / "alpha" / "metrics.csv"
    assert p2["metrics"] == tmp_path / "beta" / "metrics.csv"
    assert p1["metrics"].exists() and p2["metrics"].exists()


def test_ratios_only_with_isolated_baseline():
    results = run_experiment(resolve(small_doc()))
    rows = report.build_rows("small", results)
    ratio_rows = [r for r in rows if r[3] == "ratio_completion_vs_isolated"]
    assert ratio_rows
    assert all(r[1] != "isolated" or float(r[4]) == 1.0 for r in ratio_rows)
    no_iso = {k: v for k, v in results.items() if k != "isolated"}
    rows2 = report.build_rows("small", no_iso)
    assert not [r for r in rows2 if r[3] == "ratio_completion_vs_isolated"]


def test_empty_results_rejected(tmp_path):
    with pytest.raises(ValueError):
        report.emit_report("x", {}, tmp_path)


# ---------------------------------------------------------------- CLI

def test_cli_validate_ok_and_errors(tmp_path):
    assert cli_main(["validate", "fig7a"]) == 0
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\ntopology: {}\ntasks: {}\n")
    assert cli_main(["validate", str(bad)]) == 1
    assert cli_main(["validate", "no-such-scenario"]) == 1


def test_cli_run_writes_reports_and_exit_codes(tmp_path, capsys):
    scenario = tmp_path / "s.yaml"
    import yaml
    scenario.write_text(yaml.safe_dump(small_doc()))
    rc = cli_main(["run", str(scenario), "--out", str(tmp_path / "out")])
    assert rc == 0
    # reports are namespaced so several scenarios can share one out dir
    assert (tmp_path / "out" / "small" / "metrics.csv").exists()
    assert (tmp_path / "out" / "small" / "events.jsonl").exists()
    # timeout exit code
    doc = small_doc()
    doc["run_limit"] = 60
    scenario.write_text(yaml.safe_dump(doc))
    rc = cli_main(["run", str(scenario), "--out", str(tmp_path / "out2")])
    assert rc == 2
    capsys.readouterr()


def test_cli_list_metrics(capsys):
    assert cli_main(["list-metrics"]) == 0
    out = capsys.readouterr().out
    assert "completion_cycles" in out and "spm_conflicts" in out
