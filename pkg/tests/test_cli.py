import json

import pytest

from codedfog.main import build_parser, main


def run_json(capsys, *argv):
    code = main([*argv, "--format", "json"])
    return code, json.loads(capsys.readouterr().out)


def test_every_command_is_registered():
    parser = build_parser()
    for command in ("mbc-load", "mbc-verify", "mbc-stages", "mlc-sim", "unified", "rstar", "matmul"):
        assert parser.parse_args([command]).command == command


def test_mbc_load_curve(capsys):
    code, document = run_json(capsys, "mbc-load", "--nodes", "10")

    assert code == 0
    rows = {row["r"]: row for row in document["rows"]}
    assert rows[2]["coded"] == pytest.approx(0.4)
    assert rows[2]["uncoded_fraction"] == "4/5"
    assert rows[5]["coded_fraction"] == "1/10"
    assert rows[2]["reduction_vs_uncoded_r1_pct"] == pytest.approx(55.5555555, abs=1e-4)
    assert document["config"]["command"] == "mbc-load"


def test_mbc_verify_passes(capsys, seed):
    code, document = run_json(
        capsys,
        "mbc-verify", "--nodes", "4", "--load", "2", "--files", "12", "--functions", "4",
        "--value-bits", "64", "--seed", str(seed),
    )

    assert code == 0
    assert document["passed"] is True
    coded = document["rows"][0]
    assert coded["scheme"] == "coded"
    assert coded["normalized_load_fraction"] == "1/4"
    assert document["config"]["seed"] == seed


def test_mbc_verify_writes_csv_and_sidecars(tmp_path, capsys):
    out = tmp_path / "verify.csv"
    trace = tmp_path / "trace.jsonl"
    plan = tmp_path / "plan.json"

    code = main(["mbc-verify", "--per-recipient", "--out", str(out), "--trace", str(trace), "--plan-out", str(plan)])

    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# ")
    assert "coded-per-recipient" in out.read_text()
    assert json.loads((tmp_path / "verify_summary.json").read_text())["passed"] is True
    assert len(trace.read_text().splitlines()) == 3
    assert json.loads(plan.read_text())["k"] == 3


def test_mbc_stages(capsys):
    code, document = run_json(capsys, "mbc-stages", "--net-bps", "1e9")

    assert code == 0
    assert document["shuffle_reduction"] == 5
    assert "shuffle_seconds" in document["rows"][0]


def test_infeasible_placement_exits_with_two(capsys):
    code = main(["mbc-verify", "--nodes", "4", "--load", "2", "--files", "5"])

    assert code == 2
    error = json.loads(capsys.readouterr().out)
    assert error["error"] == "placement-infeasible"
    assert error["details"]["suggestion"]["N"] == 6


def test_invalid_flags_exit_with_two(capsys):
    code = main(["mbc-load", "--nodes", "0"])

    assert code == 2
    assert json.loads(capsys.readouterr().out)["error"] == "invalid-argument"


def test_mlc_sim(capsys, seed):
    code, document = run_json(capsys, "mlc-sim", "--nodes", "2,4", "--trials", "20000", "--seed", str(seed))

    assert code == 0
    assert {row["scheme"] for row in document["rows"]} == {"uncoded", "repetition", "mds"}
    assert all(row["within_tolerance"] for row in document["rows"])
    assert [entry["n"] for entry in document["optimal_mds"]] == [2, 4]


def test_unified_sweep(capsys, seed):
    code, document = run_json(
        capsys, "unified", "--nodes", "6", "--mu", "1/2", "--q", "4", "--trials", "2000", "--seed", str(seed)
    )

    assert code == 0
    assert [row["q"] for row in document["rows"]] == [2, 4, 6]
    assert document["rows"][-1]["normalized_load_fraction"] == "1/6"
    summary = document["summary"]
    assert summary["checks"] == {"map_latency_increasing": True, "endpoint_load_matches": True}
    assert summary["tasks"] == 20
    assert summary["plan"]["coverage_minimum"] == 28
    assert summary["q_star"] in (2, 4, 6)


def test_unified_reports_index_coding_gap_on_tiny_clusters(capsys, seed):
    code, document = run_json(capsys, "unified", "--nodes", "3", "--mu", "2/3", "--trials", "2000", "--seed", str(seed))

    assert code == 0
    (gap,) = document["summary"]["index_coding"]
    assert gap["q"] == 3
    assert gap["optimal_units"] == "1/2"
    assert gap["greedy_units"] == "1/2"
    assert gap["greedy_ratio"] == 1


def test_unified_skips_index_coding_on_larger_clusters(capsys, seed):
    _, document = run_json(capsys, "unified", "--nodes", "6", "--mu", "1/2", "--trials", "2000", "--seed", str(seed))

    assert "index_coding" not in document["summary"]


def test_unified_rejects_out_of_range_fraction(capsys):
    code = main(["unified", "--nodes", "6", "--mu", "2"])

    assert code == 2
    assert json.loads(capsys.readouterr().out)["error"] == "invalid-argument"


def test_rstar(capsys):
    code, document = run_json(capsys, "rstar", "--t-task", "1", "--t-data", "100", "--nodes", "20")

    assert code == 0
    row = document["rows"][0]
    assert row["r_star"] == 10
    assert row["speedup"] == pytest.approx(5.05, abs=0.01)


def test_matmul_demo(capsys, seed):
    code = main(["matmul", "--stragglers", "2", "--preset", "single-parity", "--seed", str(seed)])

    assert code == 0
    document = json.loads(capsys.readouterr().out)
    assert document["passed"] is True
    assert document["tasks"][1]["status"] == "cancelled"
    assert document["decode_indices"] == [0, 2]


def test_matmul_total_failure(capsys):
    code = main(["matmul", "--failures", "1,2"])

    assert code == 2
    assert json.loads(capsys.readouterr().out)["error"] == "job-failed"
