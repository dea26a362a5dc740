import filecmp
import io
import os

import numpy as np
import pytest

from rfhlab import cli
from rfhlab.rsindex import rotation_path, save_path_csv


def run(argv):
    return cli.main(argv)


def test_index_theta_prints_zero(capsys):
    assert run(["index", "--theta", "tau=1", "hp=1", "hpp=1"]) == 0
    assert "mu_rs = 0" in capsys.readouterr().out


def test_index_theta_perturbed(capsys):
    assert run(["index", "--theta", "tau=6.28", "hp=1", "hpp=1", "--delta", "1e-3"]) == 0
    assert "mu_rs = -1" in capsys.readouterr().out


def test_grade_constants_prints_one_minus_n(capsys):
    assert run(["grade", "--constants", "n=2"]) == 0
    assert "mu(K) = -1" in capsys.readouterr().out


def test_index_csv_input(tmp_path, capsys):
    path = rotation_path(1, 2 * np.pi, n_samples=257)
    csv = tmp_path / "rot.csv"
    save_path_csv(path, str(csv))
    assert run(["index", "--csv", str(csv)]) == 0
    assert "mu_rs = 2" in capsys.readouterr().out


def test_config_errors_exit_two(capsys):
    assert run(["index", "--theta", "tau=1", "hp=1"]) == 2  # missing hpp
    assert run(["index"]) == 2  # neither source
    assert run(["grade", "--constants", "n=7"]) == 2  # unsupported dimension
    assert run(["complex", "--instance", "/nonexistent/file.txt"]) == 2
    capsys.readouterr()


def test_numerical_failure_exits_three(tmp_path, capsys):
    # a path whose interior crossing has a degenerate form: the index
    # engine refuses and the front end maps that to exit code 3
    jmat = np.array([[0.0, -1.0], [1.0, 0.0]])

    def ev(t):
        th = 8 * np.pi * t * (1 - t)
        return np.cos(th) * np.eye(2) + np.sin(th) * jmat

    from rfhlab.rsindex import SymplecticPath

    ts = np.linspace(0, 1, 1025)
    p = SymplecticPath(ts, np.array([ev(t) for t in ts]), evaluator=ev)
    csv = tmp_path / "touch.csv"
    save_path_csv(p, str(csv))
    assert run(["index", "--csv", str(csv)]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_invariant_violation_exits_four(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("gen a degree 1 action 1\ngen b degree 0 action 2\nbnd a b\n")
    assert run(["complex", "--instance", str(bad)]) == 4
    err = capsys.readouterr().err
    assert "invariant violated" in err and "Filtration" in err


def test_complex_subcommand_reports_homology(tmp_path, capsys):
    inst = tmp_path / "inst.txt"
    inst.write_text(
        "gen a degree 2 action 3\ngen b degree 1 action 2\n"
        "gen c degree 1 action 1.5\ngen d degree 0 action 1\n"
        "gen e degree 1 action 1.2\n"
        "bnd a b\nbnd a c\nbnd b d\nbnd c d\n"
    )
    out = tmp_path / "report.csv"
    assert run(["complex", "--instance", str(inst), "--out", str(out)]) == 0
    text = out.read_text()
    assert "degree,betti" in text
    assert "1,1" in text


def test_flow_subcommand_writes_diagnostics(tmp_path):
    out = tmp_path / "diag.csv"
    snap = tmp_path / "loop.json"
    code = run(["flow", "--start", "orbit", "--amplitude", "1e-5", "--seed", "4",
                "--out", str(out), "--snapshot", str(snap)])
    assert code == 0
    header = out.read_text().splitlines()[0]
    assert header == ("step,s,action,grad_norm,energy_cum,eta_avg_residual,"
                      "zeta_drift,max_abs_H,containment")
    assert snap.exists()


def test_flow_outputs_are_deterministic(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"diag_{tag}.csv"
        assert run(["flow", "--start", "orbit", "--amplitude", "1e-5",
                    "--seed", "11", "--out", str(out)]) == 0
        outs.append(str(out))
    assert filecmp.cmp(outs[0], outs[1], shallow=False)


def test_hybrid_subcommand(tmp_path):
    out = tmp_path / "hyb.csv"
    assert run(["hybrid", "--start", "orbit", "--amplitude", "3e-6",
                "--sigma", "0.5", "--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert header.startswith("side,step,s,action,grad_norm")


def test_selftest_quick_subset(tmp_path, capsys):
    out = tmp_path / "st"
    assert run(["selftest", "--only", "1,2", "--seed", "0", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert text.count("[PASS]") == 2
    assert (out / "selftest_report.csv").exists()
    assert (out / "selftest_details.json").exists()


def test_selftest_rejects_unknown_criterion(capsys):
    assert run(["selftest", "--only", "42"]) == 2
    capsys.readouterr()


def test_threads_env_validation(monkeypatch, capsys):
    monkeypatch.setenv("RFHLAB_THREADS", "zero")
    assert run(["grade", "--constants", "n=1"]) == 2
    monkeypatch.setenv("RFHLAB_THREADS", "2")
    assert run(["grade", "--constants", "n=1"]) == 0
    capsys.readouterr()


def test_grade_component_table_roundtrip(tmp_path):
    from rfhlab.grading import components_to_json, model_components
    from rfhlab.model import make_model

    comps = model_components(make_model(n=2), ks=(1,))
    table = tmp_path / "table.json"
    table.write_text(components_to_json(comps))
    out = tmp_path / "report.csv"
    assert run(["grade", "--components", str(table), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("id,kind,action")
    assert any(line.startswith("orbit+1,") for line in lines)
