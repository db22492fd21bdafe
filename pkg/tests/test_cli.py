import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from pmdlab.cli import main
from pmdlab.optimizers import CSV_HEADER


def read_trace(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_chain_writes_trace_and_summary(tmp_path, capsys):
    code = main(["run", "--kind", "chain", "--length", "4", "--steps", "50",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    rows = read_trace(tmp_path / "trace.csv")
    assert rows[0] == CSV_HEADER
    assert len(rows) == 52
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["status"] in ("completed", "converged")
    assert summary["master_seed"] == 0
    assert "status=" in capsys.readouterr().out


def test_single_action_ppg_is_flat(tmp_path):
    assert main(["run", "--algorithm", "ppg", "--num-states", "3", "--num-actions", "1",
                 "--steps", "5", "--out-dir", str(tmp_path)]) == 0
    rows = read_trace(tmp_path / "trace.csv")
    col = rows[0].index("v_rho")
    assert len({r[col] for r in rows[1:]}) == 1


def test_zero_noise_inexact_matches_exact(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--steps", "30", "--out-dir", str(a)])
    main(["run", "--algorithm", "inexact-pmd", "--tau", "0", "--steps", "30", "--out-dir", str(b)])
    ta, tb = read_trace(a / "trace.csv"), read_trace(b / "trace.csv")
    col = ta[0].index("v_rho")
    assert [r[col] for r in ta] == [r[col] for r in tb]


def test_rollout_oracle_needs_horizon_and_batch(tmp_path, capsys):
    code = main(["run", "--algorithm", "inexact-pmd", "--oracle", "rollout",
                 "--out-dir", str(tmp_path)])
    assert code == 2
    assert "--horizon" in capsys.readouterr().err


def test_rollout_thread_count_invariant(tmp_path):
    base = ["run", "--algorithm", "inexact-pmd", "--oracle", "rollout", "--horizon", "20",
            "--batch", "50", "--num-states", "3", "--num-actions", "2", "--steps", "5",
            "--seed", "4"]
    main(base + ["--threads", "1", "--out-dir", str(tmp_path / "a")])
    main(base + ["--threads", "3", "--out-dir", str(tmp_path / "b")])
    assert (tmp_path / "a" / "trace.csv").read_text() == (tmp_path / "b" / "trace.csv").read_text()


def test_generate_then_run_from_file(tmp_path):
    inst = tmp_path / "mdp.json"
    assert main(["generate", "--num-states", "4", "--num-actions", "2", "--instance-seed", "3",
                 "--with-uniform-rho", "--out", str(inst)]) == 0
    assert main(["run", "--instance", str(inst), "--rho", "from-file", "--steps", "10",
                 "--out-dir", str(tmp_path)]) == 0


def test_from_file_without_rho_is_config_error(tmp_path):
    inst = tmp_path / "mdp.json"
    main(["generate", "--out", str(inst)])
    assert main(["run", "--instance", str(inst), "--rho", "from-file",
                 "--out-dir", str(tmp_path)]) == 2


def test_bad_instance_is_config_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["solve", "--instance", str(bad), "--out-dir", str(tmp_path)]) == 2
    assert "bad.json:1:2" in capsys.readouterr().err


def test_solve_rho_star(tmp_path, capsys):
    assert main(["solve", "--rho", "rho-star", "--out-dir", str(tmp_path)]) == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["c_star_rho"] == pytest.approx(1.0, abs=1e-8)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["greedy_actions"]) == 5


def test_rate_fit_on_geometric_run(tmp_path, capsys):
    main(["run", "--num-states", "6", "--num-actions", "3", "--instance-seed", "0",
          "--steps", "200", "--out-dir", str(tmp_path)])
    capsys.readouterr()
    assert main(["rate-fit", str(tmp_path / "trace.csv")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["asserted"] is True
    assert doc["within_theory"] is True
    assert doc["n_points"] >= 10


def test_rate_fit_constant_schedule_not_asserted(tmp_path, capsys):
    main(["run", "--geometry", "euclidean", "--schedule", "constant", "--steps", "200",
          "--out-dir", str(tmp_path)])
    capsys.readouterr()
    code = main(["rate-fit", str(tmp_path / "trace.csv")])
    doc = json.loads(capsys.readouterr().out)
    assert doc["asserted"] is False
    assert code == 0


def test_plan(capsys):
    assert main(["plan", "--eps", "0.1", "--delta", "0.05", "--gamma", "0.9",
                 "--theta-rho", "10", "--num-sa", "15"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert (doc["K"], doc["H"]) == (60, 120)


def test_plan_overflow(capsys):
    code = main(["plan", "--eps", "0.01", "--delta", "0.05", "--gamma", "0.99",
                 "--theta-rho", "500", "--num-sa", "100"])
    assert code == 2
    assert "H=" in capsys.readouterr().err


def test_verify_quick_and_mutation(tmp_path):
    assert main(["verify", "--out-dir", str(tmp_path / "ok")]) == 0
    assert json.loads((tmp_path / "ok" / "verify.json").read_text())["passed"] is True
    assert main(["verify", "--mutation", "kl-sign", "--out-dir", str(tmp_path / "bad")]) == 4
    assert list((tmp_path / "bad").glob("counterexample-*.json"))


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "pmdlab.cli", "plan", "--eps", "0.1",
                          "--delta", "0.1", "--gamma", "0.5", "--theta-rho", "2",
                          "--num-sa", "4"], capture_output=True, text=True)
    assert out.returncode == 0
    assert json.loads(out.stdout)["K"] >= 1


def test_unknown_flag_exits_with_usage():
    with pytest.raises(SystemExit) as info:
        main(["run", "--frobnicate"])
    assert info.value.code == 2
