from __future__ import annotations

import json
import subprocess
import sys

import pytest
from scenarios import small_scenario

from campaign_forge import perf, resilience, storage
from campaign_forge.cli import build_parser, main
from campaign_forge.presets import FLASH, reference_scenario
from campaign_forge.render import render
from campaign_forge.reporting import aggregate_reports, build_report, compare_policies
from campaign_forge.scenario import load_scenario, save_scenario, with_field
from campaign_forge.sim import run_campaign, sweep


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "small.toml"
    save_scenario(small_scenario(), path)
    return path


def _run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_plan_checkpoint_headline(capsys):
    code, out, _ = _run(capsys, "plan-checkpoint", "--write-cost", "60s", "--mtbf", "2h", "--iter-time", "3.72s", "--format", "table")
    assert code == 0
    assert out.splitlines()[0] == "interval 929.5 s ~ 250 iterations, waste 12.9% at optimum"


def test_plan_checkpoint_json_matches_the_library(capsys):
    code, out, _ = _run(capsys, "plan-checkpoint", "--write-cost", "60s", "--mtbf", "2h", "--iter-time", "3.72s", "--format", "json")
    plan = resilience.plan_checkpoint(60, 7200, 3.72)
    assert code == 0
    assert json.loads(out) == json.loads(render("json", {"summary": plan.summary(), "sensitivity": plan.records()}))
    assert json.loads(out)["summary"]["interval_iterations"] == 250


def test_plan_load_recommends_broadcast(capsys):
    argv = ["plan-load", "--payload", "150GB", "--nodes", "256", "--tier", "flash", "--net", "25GB"]
    code, out, _ = _run(capsys, *argv, "--format", "table")
    assert code == 0
    assert out.splitlines()[0] == "recommend rank0-broadcast: 21.0 s vs 76.8 s"
    code, out, _ = _run(capsys, *argv, "--format", "json")
    assert out == render("json", storage.compare_load_strategies(150e9, 256, FLASH, 25e9))


def test_plan_tokenize(capsys):
    code, out, _ = _run(capsys, "plan-tokenize", "--rate", "70M", "--tokens", "1.5e13", "--format", "json")
    assert code == 0
    assert out == render("json", storage.plan_tokenization(1.5e13, 70e6))
    code, _, err = _run(capsys, "plan-tokenize", "--rate", "5", "--tokens", "1e12", "--format", "json")
    assert code == 1
    assert json.loads(err)["error"] == "RateOutOfRange"


def test_scaling_csv(capsys):
    code, out, _ = _run(capsys, "scaling", "--format", "csv")
    assert code == 0
    counts = [32, 64, 128, 256, 512, 1024, 2048, 4096]
    assert out == render("csv", perf.scaling_table(reference_scenario(), counts, "strong"))
    code, out, _ = _run(capsys, "scaling", "--mode", "weak", "--gpus", "32,64", "--format", "csv")
    assert out == render("csv", perf.scaling_table(reference_scenario(), [32, 64], "weak"))


def test_score(capsys, tmp_path):
    csv_path = tmp_path / "telemetry.csv"
    csv_path.write_text("timestamp,flops_rate,mem_bw,net_bw\n0,3.0366e14,1e12,1e9\n1,3.0366e14,1e12,5e9\n")
    code, out, _ = _run(capsys, "score", "--telemetry", str(csv_path), "--mem-peak", "3.35TB", "--net-peak", "25GB", "--format", "json")
    assert code == 0
    data = json.loads(out)
    assert data["bottleneck"] == "compute"
    assert data["per_resource"]["compute"] == pytest.approx(0.307, abs=1e-3)


def test_simulate_is_byte_identical(capsys, tmp_path, small_file):
    outs = []
    for name in ("a.ndjson", "b.ndjson"):
        out = tmp_path / name
        code, _, err = _run(capsys, "simulate", "--scenario", str(small_file), "--seed", "42", "--out", str(out))
        assert code == 0
        assert err.strip() == "seed: 42"
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    s = with_field(small_scenario(), "seed", 42)
    assert outs[0].decode() == run_campaign(s).to_ndjson()


def test_simulate_default_preset(capsys):
    code, out, err = _run(capsys, "simulate", "--preset", "failure-free", "--format", "csv")
    assert code == 0
    assert out.splitlines()[1] == "time,seq,kind,detail"
    assert err.startswith("seed: ")


def test_overrides_and_dump(capsys, tmp_path, small_file):
    dump = tmp_path / "effective.toml"
    code, _, _ = _run(
        capsys,
        "simulate",
        "--scenario",
        str(small_file),
        "--set",
        "checkpoint.interval_iterations=250",
        "--set",
        "scheduler.walltime=2h",
        "--seed",
        "7",
        "--dump-scenario",
        str(dump),
        "--out",
        str(tmp_path / "t.ndjson"),
    )
    assert code == 0
    s = load_scenario(dump)
    assert s.checkpoint.interval_iterations == 250
    assert s.scheduler.walltime == 7200.0
    assert s.seed == 7


def test_sweep_matches_the_library(capsys, small_file):
    argv = ["sweep", "--scenario", str(small_file), "--param", "checkpoint.interval_iterations"]
    code, out, err = _run(capsys, *argv, "--values", "100,200", "--seeds", "1,2", "--format", "csv")
    assert code == 0
    assert err.strip() == "seed: 1,2"
    assert out == render("csv", sweep(small_scenario(), "checkpoint.interval_iterations", ["100", "200"], [1, 2]))


def test_report_matches_the_library(capsys, tmp_path, small_file):
    s = small_scenario()
    code, out, _ = _run(capsys, "report", "--scenario", str(small_file), "--seeds", "0,1", "--format", "json")
    assert code == 0
    reports = [build_report(run_campaign(with_field(s, "seed", sd)), with_field(s, "seed", sd)) for sd in (0, 1)]
    assert out == render("json", aggregate_reports(reports))

    trace_path = tmp_path / "t.ndjson"
    main(["simulate", "--scenario", str(small_file), "--seed", "3", "--out", str(trace_path)])
    capsys.readouterr()
    code, out, _ = _run(capsys, "report", "--scenario", str(small_file), "--trace", str(trace_path), "--format", "json")
    run = with_field(s, "seed", 3)
    assert out == render("json", build_report(run_campaign(run), run))


def test_report_compares_policies(capsys, small_file):
    argv = ["report", "--scenario", str(small_file), "--seeds", "0"]
    argv += ["--policy", "short:checkpoint.interval_iterations=50", "--policy", "long:checkpoint.interval_iterations=400"]
    code, out, _ = _run(capsys, *argv, "--format", "csv")
    assert code == 0
    s = small_scenario()

    def rep(k):
        v = with_field(s, "checkpoint.interval_iterations", k)
        return aggregate_reports([build_report(run_campaign(v), v)])

    assert out == render("csv", compare_policies([("short", rep(50)), ("long", rep(400))]))
    assert out.splitlines()[0] == "label,tokens_per_s,gpu_hours,delta_vs_best"


def test_validation_errors_exit_1_with_json_on_stderr(capsys, small_file):
    code, out, err = _run(capsys, "simulate", "--scenario", str(small_file), "--set", "comm.overlap=2", "--format", "json")
    assert code == 1
    assert out == ""
    payload = json.loads(err)
    assert payload["error"] == "ValidationError"
    assert "comm.overlap" in payload["fields"]


def test_input_errors_exit_1(capsys, tmp_path):
    assert _run(capsys, "simulate", "--scenario", str(tmp_path / "missing.toml"))[0] == 1
    bad = tmp_path / "bad.toml"
    bad.write_text("[cluster\n")
    code, _, err = _run(capsys, "simulate", "--scenario", str(bad), "--format", "table")
    assert code == 1
    assert "ParseError" in err
    assert _run(capsys, "simulate", "--set", "cluster.warp=1")[0] == 1
    assert _run(capsys, "render", "--format", "json")[0] == 2


def test_usage_errors_exit_2(capsys):
    assert _run(capsys)[0] == 2
    assert _run(capsys, "bogus")[0] == 2
    assert _run(capsys, "scaling", "--format", "yaml")[0] == 2
    assert _run(capsys, "sweep", "--values", "1")[0] == 2
    assert _run(capsys, "simulate", "--scenario", "a", "--preset", "reference")[0] == 2


def _flags(parser) -> set[str]:
    return {opt for action in parser._actions for opt in action.option_strings}


def test_help_lists_every_flag(capsys):
    parser = build_parser()
    sub = next(a for a in parser._actions if hasattr(a, "choices") and isinstance(a.choices, dict))
    assert set(sub.choices) == {"simulate", "sweep", "plan-checkpoint", "plan-load", "plan-tokenize", "scaling", "score", "report"}
    for name, subparser in sub.choices.items():
        code, out, _ = _run(capsys, name, "--help")
        assert code == 0
        for flag in _flags(subparser):
            assert flag in out, f"{name} --help omits {flag}"
    code, out, _ = _run(capsys, "--help")
    assert code == 0
    for flag in _flags(parser):
        assert flag in out


def test_module_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "campaign_forge", "plan-checkpoint", "--write-cost", "60s", "--mtbf", "2h", "--iter-time", "3.72s"],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0
    assert json.loads(res.stdout)["summary"]["interval_iterations"] == 250
    res = subprocess.run([sys.executable, "-m", "campaign_forge", "nonsense"], capture_output=True, text=True)
    assert res.returncode == 2
    assert "Traceback" not in res.stderr

