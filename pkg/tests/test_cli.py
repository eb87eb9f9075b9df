import csv
import json
import subprocess
import sys

import pytest

from birkhoff_gibbs import cli


def run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def records(path):
    return [json.loads(line) for line in (path / "results.jsonl").read_text().splitlines()]


def test_check_identities(tmp_path):
    assert run(tmp_path, "check-identities", "--alpha", "1", "--n", "8", "--seed", "7") == 0
    recs = records(tmp_path)
    assert recs[0]["quantity"] == "homological_residual" and recs[0]["estimate"] < 1e-10
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["gate_passed"] and man["params"] == {"alpha": 1.0, "sigma": 1, "N": 8, "R": 1.0}
    rows = list(csv.reader((tmp_path / "summary.csv").open()))
    assert rows[0][:3] == ["experiment", "quantity", "estimate"] and len(rows) == 3
    assert b"\r\n" not in (tmp_path / "results.jsonl").read_bytes()


def test_transport_verify_example(tmp_path):
    code = run(tmp_path, "transport-verify", "--alpha", "1", "--n", "2", "--t", "1",
               "--count", "100000", "--set", "re(u0)>0.1", "--seed", "1")
    assert code == 0
    recs = records(tmp_path)
    assert {r["side"] for r in recs} == {"lhs", "rhs"}
    assert recs[0]["z_score"] <= 3 and recs[0]["predicate"] == "re(u0)>0.1"
    for key in ("experiment", "params", "t", "predicate", "estimate", "stderr", "n_samples",
                "acceptance", "seed", "integrator_cfg", "artifact_version"):
        assert key in recs[0]


def test_missing_key_names_it(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("alpha: 1.0\nseed: 3\n")
    assert run(tmp_path, "evolve", "--config", str(cfg)) == 1
    assert "n_trunc" in capsys.readouterr().err


def test_bad_key_reports_line(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("alpha: 1.0\nn_trunc: 2\nseed: 3\nintegrator:\n  rel_tol: fast\n")
    assert run(tmp_path, "evolve", "--config", str(cfg)) == 1
    err = capsys.readouterr().err
    assert "integrator.rel_tol" in err and "line 5" in err
    cfg.write_text("alpha: 1.0\nn_trunc: 2\nseed: 3\nbogus: 1\n")
    assert run(tmp_path, "evolve", "--config", str(cfg)) == 1
    assert "bogus" in capsys.readouterr().err


def test_operational_error_carries_seed(tmp_path, capsys):
    assert run(tmp_path, "check-identities", "--alpha", "0.3", "--n", "2", "--seed", "99") == 1
    assert "seed=99" in capsys.readouterr().err


def test_config_file_and_flags(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("alpha: 0.95\nsigma: -1\nn_trunc: 3\nseed: 5\nt: 0.5\n"
                   "integrator:\n  method: rk4_fixed\n  dt: 0.005\n")
    assert run(tmp_path / "o", "evolve", "--config", str(cfg), "--t", "0.25") == 0
    rec = records(tmp_path / "o")[0]
    assert rec["t"] == 0.25 and rec["integrator_cfg"]["method"] == "rk4_fixed"
    assert rec["mass_drift"] <= 1e-8
    assert (tmp_path / "o" / "trajectory.jsonl").exists()


def test_sample_writes_binary(tmp_path):
    assert run(tmp_path, "sample", "--alpha", "1", "--n", "2", "--seed", "1",
               "--count", "64") == 0
    assert (tmp_path / "states.bin").stat().st_size == 64 * 8 * 11
    side = json.loads((tmp_path / "states.bin.json").read_text())
    assert side["count"] == 64


def test_gate_failure_exit_code(tmp_path):
    # lambda = 0 estimates the ball probability, which shrinks with N
    code = run(tmp_path, "exp-moment", "--alpha", "1", "--n", "8", "--seed", "1",
               "--lambda", "0", "--n-list", "8,16", "--count", "20000")
    assert code == 2
    assert json.loads((tmp_path / "manifest.json").read_text())["gate_passed"] is False


@pytest.mark.parametrize("argv", [
    ["moments", "--alpha", "1", "--n", "4", "--count", "3000", "--p-list", "2,4"],
    ["decay", "--alpha", "1", "--n", "8", "--count", "3000", "--m-list", "2,4"],
    ["exp-moment", "--alpha", "1", "--sigma", "-1", "--n", "4", "--count", "3000",
     "--n-list", "2,4"],
    ["transport-verify", "--alpha", "1", "--n", "1", "--count", "3000", "--set", "l4<=0.3",
     "--t", "0.5"],
])
def test_replay_with_other_worker_count_is_bitwise(tmp_path, argv):
    run(tmp_path / "a", *argv, "--seed", "4", "--workers", "1")
    man = tmp_path / "a" / "manifest.json"
    assert cli.main(["replay", str(man), "--workers", "3", "--out", str(tmp_path / "b")]) in (0, 2)
    first = (tmp_path / "a" / "results.jsonl").read_bytes()
    assert first == (tmp_path / "b" / "results.jsonl").read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("BIRKHOFF_GIBBS_OUT", str(tmp_path))
    assert cli.main(["jacobian", "--alpha", "1", "--n", "1", "--seed", "2", "--count", "2",
                     "--t", "0.25"]) == 0
    assert (tmp_path / "jacobian" / "results.jsonl").exists()


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "birkhoff_gibbs", "check-identities", "--alpha",
                          "0.92", "--n", "2", "--seed", "1", "--count", "3",
                          "--out", str(tmp_path)], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert "gate: PASS" in out.stdout
