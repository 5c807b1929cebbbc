import csv
import math
import shutil
from pathlib import Path

import numpy as np
import pytest

from sgldscale import cli, rng
from sgldscale.io import ConfigError, parse_config, read_ensemble, read_model_file, write_model_file
from sgldscale.models import gradient, model_constants

DATA = Path(__file__).parent / "data"


def run(cmd, cfg_path, out, *extra):
    return cli.run([cmd, "--config", str(cfg_path), "--out", str(out), *extra])


def write_cfg(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_golden_simulate(tmp_path):
    assert run("simulate", DATA / "golden_simulate.cfg", tmp_path) == 0
    assert (tmp_path / "Y.csv").read_bytes() == (DATA / "golden_Y.csv").read_bytes()
    assert (tmp_path / "Y.png").exists()
    ens = read_ensemble(tmp_path / "Y.csv")
    assert ens.R == 1 and ens.alpha == 4


def test_golden_first_step_by_hand():
    model = read_model_file(DATA / "golden_model.txt")
    const = model_constants(model)
    seed, h, b, beta_inv, w = 20240611, 0.1, 2, 0.05, 2.0
    s = rng.CounterStream(seed, [0])
    idx = s.integers(rng.BATCH, [0, 1], model.n)[0]
    xi = s.normal(rng.GAUSS, [0])[0, 0]
    g = sum(gradient(model, int(i), const.theta_hat) for i in idx)
    y1 = w * (h / b * g + math.sqrt(2 * h * beta_inv) * xi)
    golden = np.loadtxt(DATA / "golden_Y.csv", delimiter=",", skiprows=1)
    assert golden[1, 1] == pytest.approx(y1, rel=1e-13)


def test_manifest_reproduces_and_threads_do_not_matter(tmp_path):
    cfg = write_cfg(tmp_path / "m.cfg", "family = logistic\nn = 40\nscale = 2\nsetting = numerical\n"
                    "h = 0.0625\nbeta_inv = 0.0625\nreplicates = 300\neps_grid = 0.05,0.1,0.2,0.4,0.8\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("metrics", cfg, a, "--seed", "5") == 0
    assert run("metrics", a / "manifest.txt", b, "--threads", "8") == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    man = parse_config((a / "manifest.txt").read_text())
    assert man["seed"] == "5" and "realized_alpha" in (a / "manifest.txt").read_text()


def test_compare_rows(tmp_path):
    cfg = write_cfg(tmp_path / "c.cfg", "family = linear\nn = 20\nsetting = raw\nh = 0.05\nb = 1\n"
                    "beta_inv = 0.05\nalpha = 10\nw = 2\nreplicates = 500\n")
    assert run("compare", cfg, tmp_path / "o") == 0
    r = rows(tmp_path / "o" / "distances.csv")
    assert [x["method"] for x in r] == ["gap_g1", "gap_g2"]
    assert all(x["labelA"] == "Y" and x["labelB"] == "ou_Z" and x["replicates"] == "500" for x in r)


def test_bounds_echoes_C_R(tmp_path):
    model = tmp_path / "model.txt"
    model.write_text("family=logistic intercept=0\n3,1\n-1,1\n")
    cfg = write_cfg(tmp_path / "b.cfg", "model_file = model.txt\nsetting = numerical\nh = 0.01\n"
                    "beta_inv = 0.01\nK1 = 1\nK3 = 1\n")
    assert run("bounds", cfg, tmp_path / "o", "--explain") == 0
    (row,) = rows(tmp_path / "o" / "bounds.csv")
    assert float(row["C_R"]) == pytest.approx(1 / 3, rel=1e-15)
    assert float(row["total"]) > 0 and float(row["K1"]) == 1.0


def test_bounds_auto_constants(tmp_path):
    cfg = write_cfg(tmp_path / "b.cfg", "family = logistic\nn = 30\nsetting = numerical\nh = 0.05\n"
                    "beta_inv = 0.05\nassumption_replicates = 200\n")
    assert run("bounds", cfg, tmp_path / "o") == 0
    (row,) = rows(tmp_path / "o" / "bounds.csv")
    assert 0 < float(row["K1"]) < 10


def test_rate_study_linear_smoke(tmp_path):
    cfg = write_cfg(tmp_path / "r.cfg", "family = linear\nn = 50\nh_grid = 2^-4,2^-5,2^-6,2^-7,2^-8,2^-9\n"
                    "replicates = 50\n")
    assert run("rate-study", cfg, tmp_path / "o") == 0
    (row,) = rows(tmp_path / "o" / "rate_slope.csv")
    assert math.isfinite(float(row["slope"]))
    assert len(rows(tmp_path / "o" / "rate_study.csv")) == 6
    assert (tmp_path / "o" / "rate_study.png").exists()


def test_ou_verify_and_var_avg(tmp_path):
    cfg = write_cfg(tmp_path / "v.cfg", "a_grid = 1, 2\nA_grid = 1\np_grid = 1, 2\ngrid_size = 50\n"
                    "replicates = 500\n")
    assert run("ou-verify", cfg, tmp_path / "o") == 0
    r = rows(tmp_path / "o" / "max_ineq.csv")
    assert len(r) == 4 and all(float(x["implied_cp"]) > 0 for x in r)
    assert (tmp_path / "o" / "implied_cp.png").exists()
    cfg = write_cfg(tmp_path / "w.cfg", "family = logistic\nn = 40\nh_grid = 2^-4, 2^-5\nreplicates = 200\n"
                    "eps = 0.1\n")
    assert run("var-avg", cfg, tmp_path / "p") == 0
    r = rows(tmp_path / "p" / "var_avg.csv")
    assert len(r) == 2 and float(r[0]["rhs_bound"]) > 0


@pytest.mark.parametrize("text", [
    "family = logistic\nn = 20\nbogus = 1\n",  # unknown key
    "family = logistic\nn = 20\nn = 30\n",  # duplicate
    "n = 20\n",  # no model source
    "family = logistic\nn = 20\nh = abc\n",
    "family = logistic\nn = 20\nh_grid = 0.01, 0.02, 0.005\n",
    "model_file = missing.txt\n",
])
def test_config_errors_exit_2(tmp_path, text, capsys):
    cfg = write_cfg(tmp_path / "bad.cfg", text)
    cmd = "rate-study" if "h_grid" in text else "simulate"
    assert run(cmd, cfg, tmp_path / "o", "--seed", "1") == 2
    assert capsys.readouterr().err.strip().startswith("config error")


def test_missing_config_file_exit_2(tmp_path):
    assert run("simulate", tmp_path / "nope.cfg", tmp_path / "o") == 2


def test_numeric_failure_exit_3(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "x.cfg", "family = linear\nn = 20\nscale = 10\nsetting = raw\nh = 5\nb = 1\n"
                    "beta_inv = 0\nalpha = 400\nw = 1\nreplicates = 10\n")
    assert run("simulate", cfg, tmp_path / "o") == 3
    assert "numeric failure" in capsys.readouterr().err


def test_parse_config_comments():
    assert parse_config("# c\na = 1 # trailing\n\nb=x y\n") == {"a": "1", "b": "x y"}
    with pytest.raises(ConfigError):
        parse_config("novalue\n")


def test_model_file_round_trip(tmp_path):
    model = read_model_file(DATA / "golden_model.txt")
    write_model_file(tmp_path / "m.txt", model)
    again = read_model_file(tmp_path / "m.txt")
    np.testing.assert_array_equal(model.x, again.x)
    assert again.intercept == model.intercept and again.family == model.family


def test_synth_data_reexported():
    assert cli.synth_data is not None
