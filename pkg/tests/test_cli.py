import subprocess
import sys

import numpy as np
import pytest

from primo.cli import main
from primo.harness import read_csv, synthetic_haplotypes

SIM = ["simulate", "--n", "150", "--d", "6", "--l", "2,4", "--eps", "2", "--mech", "gauss,proj,naive", "--trials", "2"]


def test_simulate_writes_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert main(SIM + ["--seed", "7", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 2 * 3 * 2
    assert all(r.status == "ok" and r.delta == pytest.approx(1 / 150**2) for r in rows)


def test_simulate_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(SIM + ["--seed", "3", "--out", str(a)]) == 0
    assert main(SIM + ["--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sweep_subsample(tmp_path):
    out = tmp_path / "s.csv"
    args = ["sweep-subsample", "--s", "20,60,150", "--n", "150", "--d", "5", "--l", "3", "--trials", "2",
            "--out", str(out)]
    assert main(args) == 0
    assert sorted({r.s for r in read_csv(out)}) == [20, 60, 150]


def test_simulate_from_genotype_file(tmp_path):
    geno = tmp_path / "g.csv"
    np.savetxt(geno, synthetic_haplotypes(200, 20, np.random.default_rng(0)), delimiter=",", fmt="%d")
    out = tmp_path / "r.csv"
    assert main(["simulate", "--geno", str(geno), "--n", "100", "--d", "8", "--l", "2", "--trials", "1",
                 "--mech", "gauss", "--out", str(out)]) == 0
    assert len(read_csv(out)) == 1


def test_config_errors_exit_2(tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    assert main(["simulate", "--mech", "bogus", "--out", out]) == 2
    assert main(["simulate", "--eps", "-1", "--out", out]) == 2
    assert main(["sweep-subsample", "--n", "100", "--s", "200", "--out", out]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--n", "abc", "--out", out])
    assert exc.value.code == 2
    assert "configuration error" in capsys.readouterr().err


def _write_fit_inputs(tmp_path, n=200, d=5, l=3):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((n, d))
    y = x @ rng.standard_normal((d, l)) + 0.1 * rng.standard_normal((n, l))
    xp, yp = tmp_path / "x.csv", tmp_path / "y.csv"
    np.savetxt(xp, x, delimiter=",")
    np.savetxt(yp, y, delimiter=",")
    return xp, yp


@pytest.mark.parametrize("mech", ["proj", "gauss", "naive", "none"])
def test_fit(tmp_path, mech):
    xp, yp = _write_fit_inputs(tmp_path)
    out = tmp_path / "w.csv"
    args = ["fit", "--x", str(xp), "--y", str(yp), "--eps", "1e9", "--delta", "1e-3", "--lambda", "0.01",
            "--mech", mech, "--x-bound", "100", "--y-bound", "100", "--out", str(out)]
    assert main(args) == 0
    w = np.loadtxt(out, delimiter=",")
    assert w.shape == (5, 3) and np.all(np.isfinite(w))


def test_fit_with_subsample(tmp_path):
    xp, yp = _write_fit_inputs(tmp_path)
    out = tmp_path / "w.csv"
    assert main(["fit", "--x", str(xp), "--y", str(yp), "--eps", "2", "--delta", "1e-5", "--x-bound", "3",
                 "--y-bound", "3", "--s", "100", "--out", str(out)]) == 0
    assert main(["fit", "--x", str(xp), "--y", str(yp), "--eps", "2", "--delta", "1e-5", "--x-bound", "3",
                 "--y-bound", "3", "--s", "500", "--out", str(out)]) == 2


def test_fit_data_errors_exit_3(tmp_path):
    xp, _ = _write_fit_inputs(tmp_path)
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    short = tmp_path / "short.csv"
    np.savetxt(short, np.ones((10, 2)), delimiter=",")
    common = ["--eps", "1", "--delta", "1e-5", "--x-bound", "1", "--y-bound", "1", "--out", str(tmp_path / "w.csv")]
    assert main(["fit", "--x", str(xp), "--y", str(bad)] + common) == 3
    assert main(["fit", "--x", str(xp), "--y", str(short)] + common) == 3
    assert main(["fit", "--x", str(tmp_path / "nope.csv"), "--y", str(short)] + common) == 3


def test_fit_bad_budget_exit_2(tmp_path):
    xp, yp = _write_fit_inputs(tmp_path)
    assert main(["fit", "--x", str(xp), "--y", str(yp), "--eps", "1", "--delta", "2", "--x-bound", "1",
                 "--y-bound", "1", "--out", str(tmp_path / "w.csv")]) == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "r.csv"
    proc = subprocess.run([sys.executable, "-m", "primo"] + SIM + ["--out", str(out)], capture_output=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
