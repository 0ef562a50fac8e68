import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from inexopt import cli
from inexopt.errors import InvalidArgument, InvalidConfig

from conftest import CONFIG_DIR, SHIPPED


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


SMALL_IPG = """
[problem]
kind = sparse_regression
n_rows = 10
n_cols = 8
sparsity = 3
reg_weight = 0.1
seed = 11

[solver]
kind = ipg
max_iters = 300

[noise]
kind = power_law
C = 0.1
alpha = 2
seed = 1
"""


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIG_DIR.glob("*.ini")))
def test_shipped_configs_parse(name):
    cfg = cli.load_config(CONFIG_DIR / name)
    problem, solve, config = cli.build(cfg)
    assert config.max_iters > 0


def test_run_shipped_ipg(tmp_path):
    out = tmp_path / "ipg"
    code = cli.main(["run", "--config", str(CONFIG_DIR / SHIPPED["ipg"]), "--out", str(out)])
    assert code == 0
    rows = read_csv(out / "trace.csv")
    assert rows[0] == list(cli.BASE_COLUMNS)
    assert len(rows) == 5002
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "converged"


def test_divergence_demo(tmp_path):
    out = tmp_path / "div"
    code = cli.main(["run", "--config", str(CONFIG_DIR / "divergence.ini"), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "diverged"
    assert report["path_length_partial"][-1] >= 8.7


def test_divergence_without_expectation_fails(tmp_path):
    text = (CONFIG_DIR / "divergence.ini").read_text().replace("expect_divergence = true", "")
    code = cli.main(["run", "--config", write(tmp_path, "d.ini", text), "--out", str(tmp_path / "o")])
    assert code == 1


def test_bad_pairing_exit_2(tmp_path, capsys):
    text = (CONFIG_DIR / "admm_quadratic.ini").read_text().replace("kind = iadmm", "kind = pire")
    code = cli.main(["run", "--config", write(tmp_path, "bad.ini", text), "--out", str(tmp_path)])
    assert code == 2
    assert "cannot run" in capsys.readouterr().err


@pytest.mark.parametrize("text", [
    "[solver]\nkind = ipg\n",
    "[problem]\nkind = zero\n[solver]\nkind = ipg\nbogus = 1\n",
    "[problem]\nkind = nothing\n[solver]\nkind = ipg\n",
    "[problem]\nkind = zero\n[solver]\nkind = sgd\n",
    "not an ini file",
])
def test_config_errors(text):
    with pytest.raises(InvalidConfig):
        cli.parse_config(text)


def test_step_out_of_range_exit_2(tmp_path):
    text = SMALL_IPG.replace("max_iters = 300", "max_iters = 300\nstep_fraction = 1.5")
    assert cli.main(["run", "--config", write(tmp_path, "s.ini", text), "--out", str(tmp_path)]) == 2


@pytest.mark.filterwarnings("ignore:overflow encountered")
def test_numeric_failure_exit_3(tmp_path):
    text = SMALL_IPG.replace("kind = power_law\nC = 0.1\nalpha = 2", "kind = constant\nvalue = 1e300")
    out = tmp_path / "nf"
    code = cli.main(["run", "--config", write(tmp_path, "nf.ini", text), "--out", str(out)])
    assert code == 3
    assert (out / "trace.csv").exists() and (out / "error.json").exists()


def test_verify_reproduces_report(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["run", "--config", write(tmp_path, "c.ini", SMALL_IPG), "--out", str(out)]) == 0
    again = tmp_path / "again.json"
    code = cli.main(["verify", str(out / "trace.csv"), str(out / "constants.json"),
                     "--out", str(again)])
    assert code == 0
    assert again.read_bytes() == (out / "report.json").read_bytes()


def test_verify_detects_perturbed_objective(tmp_path):
    out = tmp_path / "run"
    cli.main(["run", "--config", write(tmp_path, "c.ini", SMALL_IPG), "--out", str(out)])
    rows = read_csv(out / "trace.csv")
    rows[11][1] = "%.17g" % (float(rows[11][1]) + 1.0)  # iterate 10
    with open(out / "trace.csv", "w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)
    report = cli.cmd_verify(str(out / "trace.csv"), str(out / "constants.json"))
    assert [k for k, _ in report.descent_violations] == [9]
    assert cli.main(["verify", str(out / "trace.csv"), str(out / "constants.json"),
                     "--out", str(tmp_path / "r.json")]) == 1


def test_verify_truncated_file_exit_2(tmp_path):
    out = tmp_path / "run"
    cli.main(["run", "--config", write(tmp_path, "c.ini", SMALL_IPG), "--out", str(out)])
    text = (out / "trace.csv").read_text()
    cut = tmp_path / "cut.csv"
    cut.write_text(text[: len(text) // 2])
    assert cli.main(["verify", str(cut), str(out / "constants.json")]) == 2
    whole_lines = tmp_path / "lines.csv"
    whole_lines.write_text("".join(text.splitlines(keepends=True)[:100]))
    assert cli.main(["verify", str(whole_lines), str(out / "constants.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert cli.main(["verify", str(out / "trace.csv"), str(bad)]) == 2


def test_trace_roundtrip_is_lossless(tmp_path):
    out = tmp_path / "run"
    cli.main(["run", "--config", str(CONFIG_DIR / SHIPPED["iadmm"]), "--out", str(out)])
    d, constants, schedule, tol = cli.read_constants(out / "constants.json")
    trace = cli.read_trace(out / "trace.csv", d["scheme"], schedule, d["noise_offset"])
    problem, solve, config = cli.build(cli.load_config(CONFIG_DIR / SHIPPED["iadmm"]))
    fresh, _ = solve(problem, config)
    assert trace.obj == fresh.obj and trace.eta == fresh.eta
    assert trace.extras["dual_step"] == fresh.extras["dual_step"]
    header = read_csv(out / "trace.csv")[0]
    assert header[len(cli.BASE_COLUMNS):][0] == "dual_step"


def test_trace_xi_column_matches_lyapunov(tmp_path):
    out = tmp_path / "run"
    cli.main(["run", "--config", write(tmp_path, "c.ini", SMALL_IPG), "--out", str(out)])
    rows = np.array([[float(v) for v in r[:7]] for r in read_csv(out / "trace.csv")[1:]])
    xi = rows[:, 6]
    assert np.all(np.diff(xi) <= 1e-12)
    np.testing.assert_allclose(xi, rows[:, 1] + rows[:, 5] ** 2 / 2, rtol=1e-15)


def test_ctheta_examples():
    rows = cli.cmd_ctheta(1.1, 5, 40)
    assert len(rows) == 40
    assert rows[0][1] == 6.0 and rows[-1][1] == 1.125
    assert all(b[1] < a[1] for a, b in zip(rows, rows[1:]))
    two = cli.cmd_ctheta(2, 2.000001, 2)
    assert len(two) == 2 and two[0][1] == 1.5 and two[1][1] == pytest.approx(1.5, abs=1e-6)
    with pytest.raises(InvalidArgument):
        cli.cmd_ctheta(1.0, 5, 10)
    with pytest.raises(InvalidArgument):
        cli.cmd_ctheta(1.5, 5, 1)


def test_ctheta_command_output(tmp_path, capsys):
    assert cli.main(["ctheta", "--theta-min", "1.1", "--theta-max", "5", "--points", "40"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "theta,c_theta" and lines[1].endswith(",6") and lines[-1] == "5,1.125"
    assert cli.main(["ctheta", "--theta-min", "0.9"]) == 2
    target = tmp_path / "c.csv"
    assert cli.main(["ctheta", "--out", str(target)]) == 0
    assert len(target.read_text().splitlines()) == 41


def test_alpha_sweep_verdicts(tmp_path):
    rows = cli.cmd_alpha_sweep(str(CONFIG_DIR / "alpha_sweep.ini"), [0.5, 1, 1.5, 2, 3],
                               str(tmp_path))
    assert [r["verdict"] for r in rows] == ["diverged", "diverged", "converged", "converged",
                                            "converged"]
    summary = read_csv(tmp_path / "summary.csv")
    assert summary[0] == ["alpha", "path_length", "final_witness_norm", "verdict"]
    assert len(summary) == 6
    assert (tmp_path / cli.sweep_dir_name(2, 1.5) / "trace.csv").exists()


def test_alpha_sweep_single_and_empty(tmp_path, capsys):
    base = write(tmp_path, "b.ini", SMALL_IPG)
    rows = cli.cmd_alpha_sweep(base, [2.0], str(tmp_path / "one"))
    assert len(rows) == 1
    with pytest.raises(InvalidArgument):
        cli.cmd_alpha_sweep(base, [], str(tmp_path / "none"))
    assert cli.main(["alpha-sweep", "--config", base, "--alphas", "", "--out", str(tmp_path)]) == 2
    assert cli.main(["alpha-sweep", "--config", base, "--alphas", "x", "--out", str(tmp_path)]) == 2


def test_alpha_sweep_parallel_matches_sequential(tmp_path):
    base = write(tmp_path, "b.ini", SMALL_IPG)
    seq = cli.cmd_alpha_sweep(base, [1.5, 2.0, 3.0], str(tmp_path / "seq"))
    par = cli.cmd_alpha_sweep(base, [1.5, 2.0, 3.0], str(tmp_path / "par"), parallel=2)
    assert seq == par
    for i, a in enumerate([1.5, 2.0, 3.0]):
        name = cli.sweep_dir_name(i, a)
        assert ((tmp_path / "seq" / name / "report.json").read_bytes()
                == (tmp_path / "par" / name / "report.json").read_bytes())


def test_usage_errors():
    assert cli.main([]) == 2
    assert cli.main(["run"]) == 2
    assert cli.main(["run", "--config", "/nonexistent.ini", "--out", "/tmp/x"]) == 2


def test_main_module_entry():
    res = subprocess.run([sys.executable, "-m", "inexopt", "ctheta", "--points", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("theta,c_theta")
