import json
import subprocess
import sys

import pytest
import yaml

from gplap import __version__
from gplap.cli import bundled_configs, load_config, main


def write_cfg(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if name.endswith(".json") else yaml.safe_dump(cfg))
    return str(path)


def report(out, name):
    return json.loads((out / name).read_text())


def test_bundled_configs_validate():
    names = bundled_configs()
    assert {"affine", "radial-gamma1", "radial-singular", "w22-singular", "cordes-family"} <= set(names)
    for n in names:
        load_config(n)


def test_affine_solve_one_iteration(tmp_path, capsys):
    assert main(["solve", "--config", "affine", "--out", str(tmp_path)]) == 0
    rep = report(tmp_path, "solve_report.json")
    assert rep["result"]["outer_iters"] == 1
    assert rep["result"]["error_vs_exact"]["sup"] <= 1e-9
    assert rep["artifact"]["version"] == __version__
    assert rep["config"]["problem"]["gamma"] == -0.5 and "output" not in rep["config"]
    assert (tmp_path / "solution.field").exists() and (tmp_path / "residual.csv").exists()


def test_malformed_config_reports_schema_path(tmp_path, capsys):
    cfg = load_config("affine")
    cfg["problem"]["gama"] = 1.0
    assert main(["solve", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "gama" in err and "problem" in err and "schema path" in err
    assert not (tmp_path / "o" / "solve_report.json").exists()


def test_wrong_type_and_unknown_command(tmp_path, capsys):
    cfg = load_config("affine")
    cfg["solver"]["h"] = "fine"
    assert main(["solve", "--config", write_cfg(tmp_path, cfg, "run.yaml"), "--out", str(tmp_path)]) == 1
    assert "solver/h" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_missing_oracle_exit_1(tmp_path, capsys):
    cfg = load_config("affine")
    del cfg["problem"]["exact"]
    assert main(["convergence", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 1
    assert "exact" in capsys.readouterr().err


def test_affine_convergence_at_rounding(tmp_path, capsys):
    cfg = load_config("affine")
    cfg["analysis"] = {"h_list": [0.25, 0.125, 0.0625]}
    assert main(["convergence", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    res = report(tmp_path, "convergence.json")["result"]
    assert max(r["sup_error"] for r in res["runs"]) <= 1e-10
    assert (tmp_path / "convergence.svg").read_text().startswith("<svg")


def cordes_run(tmp_path, block, capsys):
    path = write_cfg(tmp_path, {"cordes": block})
    code = main(["cordes", "--config", path, "--out", str(tmp_path)])
    return code, report(tmp_path, "cordes_report.json")["result"], capsys.readouterr().out


def test_cordes_identity(tmp_path, capsys):
    code, res, _ = cordes_run(tmp_path, {"identity": {"n": 3}}, capsys)
    assert code == 0 and res["report"]["delta"] == 1.0 and res["report"]["satisfied"]


def test_cordes_family_p4_n3(tmp_path, capsys):
    code, res, _ = cordes_run(tmp_path, {"family": {"p": 4.0, "n": 3}}, capsys)
    assert code == 0 and res["report"]["delta"] == pytest.approx(3 / 11, abs=1e-12)


def test_cordes_family_p6_not_satisfied(tmp_path, capsys):
    code, res, out = cordes_run(tmp_path, {"family": {"p": 6.0, "n": 3}}, capsys)
    assert code == 0 and not res["report"]["satisfied"]
    assert "not satisfied" in out and "worst node" in out


def test_cordes_threshold_table(tmp_path, capsys):
    code, res, _ = cordes_run(tmp_path, {"threshold": [3, 4, 5]}, capsys)
    for row in res["threshold"]:
        assert row["empirical"] == pytest.approx(3 + 2 / (row["n"] - 2), abs=1e-9)


def test_cordes_field_file(tmp_path, capsys):
    import numpy as np
    from gplap.field import GridSpec, SymMatrixField, write_field

    g = GridSpec.cube(2, -1, 1, 0.5)
    path = tmp_path / "A.field"
    write_field(path, SymMatrixField.constant(g, np.diag([2.0, 1.0])))
    assert main(["cordes", "--field", str(path), "--out", str(tmp_path)]) == 0
    assert report(tmp_path, "cordes_report.json")["result"]["report"]["delta"] == pytest.approx(0.8)


def test_oracle_command(tmp_path, capsys):
    assert main(["oracle", "--config", "oracle-gamma1", "--out", str(tmp_path)]) == 0
    res = report(tmp_path, "oracle_report.json")["result"]
    assert res["s"] == 1.5 and res["f_const"] == pytest.approx(-3.375)


def test_regularity_small_outputs(tmp_path, capsys):
    cfg = {"analysis": {"counterexample": {"beta": 1.4, "intervals": [1024, 4096, 16384]},
                        "band": [{"gamma": 0.1, "p": 2.1, "beta": 0.5}, {"gamma": 0.1, "p": 3.0, "beta": 0.5}]}}
    assert main(["regularity", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 0
    res = report(tmp_path, "regularity.json")["result"]
    assert [b["inside"] for b in res["band"]] == [True, False]
    assert (tmp_path / "counterexample.csv").exists() and (tmp_path / "band.csv").exists()


def test_deterministic_outputs(tmp_path, capsys):
    cfg = load_config("comparison-random")
    cfg["solver"]["h"] = 0.125
    path = write_cfg(tmp_path, cfg)
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["solve", "--config", path, "--out", str(out), "--seed", "7", "--single-thread"]) == 0
        outs.append(out)
    for name in ("solve_report.json", "residual.csv", "solution.field"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    other = tmp_path / "run-seed8"
    main(["solve", "--config", path, "--out", str(other), "--seed", "8", "--single-thread"])
    assert (other / "solution.field").read_bytes() != (outs[0] / "solution.field").read_bytes()


def test_solver_failure_exit_2(tmp_path, capsys):
    cfg = load_config("comparison-random")
    cfg["solver"].update(h=0.125, outer_max_iter=1)
    assert main(["solve", "--config", write_cfg(tmp_path, cfg), "--out", str(tmp_path)]) == 2
    assert (tmp_path / "solve_report.json").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "gplap", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
