import json
import subprocess
import sys
from pathlib import Path

from disputesim.cli import main, parse_duration, parse_int_list


def run(tmp_path, *argv):
    return main([argv[0], "--out", str(tmp_path / "out"), "--no-timestamp", *argv[1:]])


def only_run_dir(tmp_path, command):
    runs = list((tmp_path / "out" / command).iterdir())
    assert len(runs) == 1
    return runs[0]


SIM_ARGS = [
    "simulate",
    "--t-c", "4h",
    "--t-m", "600",
    "--t-g", "1h",
    "--group-size", "2",
    "--tree-height", "3",
    "--n-claims", "4",
    "--adversary", "stall",
    "--seed", "11",
]


def test_parse_duration_units():
    assert parse_duration("7200") == 7200
    assert parse_duration("2h") == 7200
    assert parse_duration("1.5d") == 129600
    assert parse_duration("1w") == 604800
    assert parse_int_list("2,4,8") == [2, 4, 8]


def test_simulate_writes_result_and_exits_zero(tmp_path):
    assert run(tmp_path, *SIM_ARGS, "--transcripts") == 0
    out = only_run_dir(tmp_path, "simulate")
    result = json.loads((out / "result.json").read_text())
    assert result["honest_won"] is True
    assert result["winner"] == "h"
    report = json.loads((out / "report.json").read_text())
    assert report["command"] == "simulate"
    assert "generated_at" not in report
    transcript = (out / "transcript.jsonl").read_text().strip().splitlines()
    assert all(json.loads(line)["action"] for line in transcript)
    assert (out / "config.echo").read_text().startswith("adversary=stall")


def test_simulate_is_byte_deterministic(tmp_path):
    run(tmp_path, *SIM_ARGS)
    out = only_run_dir(tmp_path, "simulate")
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    for p in out.iterdir():
        p.unlink()
    run(tmp_path, *SIM_ARGS)
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second


def test_simulate_reads_config_file(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "t-c = 4h\nt-m = 600\nt-g = 1h\ngroup-size = 2\n"
        "tree-height = 3\nn-claims = 2\nseed = 3\n"
    )
    assert run(tmp_path, "simulate", "--config", str(cfg)) == 0
    out = only_run_dir(tmp_path, "simulate")
    assert json.loads((out / "result.json").read_text())["rounds"] == 4  # K rounds


def test_unknown_config_key_is_usage_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("t-c = 4h\nmystery-knob = 7\n")
    assert run(tmp_path, "simulate", "--config", str(cfg)) == 2


def test_bad_duration_is_usage_error(tmp_path):
    assert run(tmp_path, "simulate", "--t-c", "sideways") == 2


def test_tables_reproduce_published_cells(tmp_path):
    code = run(
        tmp_path,
        "tables",
        "--table", "all",
        "--g-values", "4",
        "--n-exponents", "4,8",
        "--fixed-k", "21",
        "--with-economics",
    )
    assert code == 0
    out = only_run_dir(tmp_path, "tables")
    opt = (out / "schedule_opt.csv").read_text().strip().splitlines()
    assert "4,16,14.0,21.25,12,17,35.00" in opt
    assert "4,256,5.8,26.61,29,47,42.46" in opt
    fixed = (out / "schedule_fixed.csv").read_text().strip().splitlines()
    assert "4,16,8.0,21.75,21,29,36.75" in fixed
    cont = (out / "continuous.csv").read_text().strip().splitlines()
    assert "4,16,8.0,12.08,21,29,20.42" in cont
    econ = (out / "economics.csv").read_text().strip().splitlines()
    assert econ[0].startswith("G,K,N")


def test_curve_and_fit_and_search(tmp_path):
    assert run(tmp_path, "curve", "--k", "3", "--g", "2", "--n-max", "500") == 0
    out = only_run_dir(tmp_path, "curve")
    lines = (out / "delay_curve.csv").read_text().strip().splitlines()
    assert len(lines) > 2

    assert (
        run(
            tmp_path,
            "search",
            "--k-values", "3",
            "--g-values", "2,3",
            "--n-max", "10",
        )
        == 0
    )
    report = json.loads(
        (only_run_dir(tmp_path, "search") / "report.json").read_text()
    )
    assert report["ok"] is True and report["mismatches"] == []

    assert (
        run(
            tmp_path,
            "fit",
            "--k-values", "6",
            "--g-values", "2",
            "--n-max", str(1 << 14),
        )
        == 0
    )
    fit_csv = (only_run_dir(tmp_path, "fit") / "fit.csv").read_text().splitlines()
    assert fit_csv[0] == "K,G,alpha,beta,gamma,rms,max_abs_err"


def test_search_rejects_oversized_space_with_error_exit(tmp_path):
    assert (
        run(tmp_path, "search", "--k-values", "9", "--g-values", "2", "--n-max", "4")
        == 1
    )


def test_search_witness_export(tmp_path):
    code = run(
        tmp_path,
        "search",
        "--k-values", "3",
        "--g-values", "2",
        "--n-max", "4",
        "--witness",
    )
    assert code == 0
    witnesses = json.loads(
        (only_run_dir(tmp_path, "search") / "witness.json").read_text()
    )
    path = witnesses[0]["path"]
    assert path[0]["distribution"] == [4, 0, 0]
    assert sum(path[-1]["distribution"]) == 1
    assert len(path) - 1 == 6  # rounds of the longest dispute at K=3, G=2, N=4


def test_verify_bounds_small_grid(tmp_path):
    code = run(
        tmp_path,
        "verify-bounds",
        "--k-values", "3,6",
        "--g-values", "2,4",
        "--n-max", str(1 << 12),
        "--trace-k-values", "3,4",
        "--trace-g-values", "2",
        "--trace-n-max", "12",
        "--hoeffding-samples", "50",
    )
    assert code == 0
    report = json.loads(
        (only_run_dir(tmp_path, "verify-bounds") / "report.json").read_text()
    )
    assert report["ok"] is True
    assert {c["check"] for c in report["checks"]} == {
        "delay-under-fitted-and-proven-bounds",
        "per-round-recurrence",
        "ramp-bound",
        "slope4-ramp-at-threshold",
        "hoeffding-tail",
    }


def test_economics_command(tmp_path):
    assert run(tmp_path, "economics", "--n-exponents", "1,20") == 0
    out = only_run_dir(tmp_path, "economics")
    lines = (out / "economics.csv").read_text().strip().splitlines()
    assert lines[1].startswith("4,21,2,0.05,3,3.15,3.00,")
    assert lines[2].startswith("4,21,1048576,0.05,3,7.05,3145725.00,")


def test_jobs_flag_parallel_results_match_serial(tmp_path):
    serial = run(
        tmp_path, "search", "--k-values", "3,4", "--g-values", "2", "--n-max", "8"
    )
    out = only_run_dir(tmp_path, "search")
    serial_report = (out / "report.json").read_bytes()
    for p in out.iterdir():
        p.unlink()
    parallel = main(
        [
            "search",
            "--out", str(tmp_path / "out"),
            "--no-timestamp",
            "--jobs", "2",
            "--k-values", "3,4",
            "--g-values", "2",
            "--n-max", "8",
        ]
    )
    assert serial == parallel == 0
    assert (out / "report.json").read_bytes() == serial_report


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "disputesim.cli", "tables", "--table", "fixed",
         "--g-values", "4", "--n-exponents", "4", "--out", str(tmp_path / "o"),
         "--no-timestamp"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "tables: wrote" in proc.stdout
