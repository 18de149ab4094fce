import csv
import shutil

import numpy as np
import pytest

from mrfrf.cli import main
from mrfrf.config import load_config
from mrfrf.exceptions import InvalidConfigError

BASE = """
[experiment]
fast_sampling_time = 0.0005
downsampling_factor = {F}
number_of_input_samples = {N}
methods = {methods}
output_dir = "out"

[plant]
modes = [[120.0, 0.02, 1.0], [520.0, 0.01, -0.5]]

[excitation]
rms = 1.44
seed = 0
{excitation}

[noise]
{noise}

[estimator]
window_size = {n_w}
"""


def write_config(tmp_path, F=3, N=1200, methods='["LRM", "LPM", "SA"]', noise="snr_db = 45.0",
                 n_w=18, excitation="", name="exp.toml"):
    p = tmp_path / name
    p.write_text(BASE.format(F=F, N=N, methods=methods, noise=noise, n_w=n_w, excitation=excitation))
    return p


def read_column(path, col):
    with open(path, newline="") as fh:
        return [row[col] for row in csv.DictReader(fh)]


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    cfg = write_config(d)
    assert main(["simulate", "--config", str(cfg)]) == 0
    return d, cfg


def test_simulate_writes_benchmark_geometry(simulated):
    d, _ = simulated
    out = d / "out"
    assert len(read_column(out / "u_h.csv", "value")) == 1200
    assert len(read_column(out / "y_h.csv", "value")) == 1200
    assert len(read_column(out / "y_l.csv", "value")) == 400
    assert len(read_column(out / "true_frf.csv", "g_re")) == 1200
    assert (out / "plant.toml").exists()


def test_simulate_is_deterministic(tmp_path, simulated):
    d, cfg = simulated
    other = tmp_path / "again"
    assert main(["simulate", "--config", str(cfg), "--out", str(other)]) == 0
    for name in ("u_h.csv", "y_h.csv", "y_l.csv", "true_frf.csv", "plant.toml"):
        assert (other / name).read_bytes() == (d / "out" / name).read_bytes()


def test_seed_override_changes_data(tmp_path, simulated):
    d, cfg = simulated
    other = tmp_path / "seed"
    assert main(["simulate", "--config", str(cfg), "--out", str(other), "--seed", "9"]) == 0
    assert (other / "u_h.csv").read_bytes() != (d / "out" / "u_h.csv").read_bytes()


def test_single_rate_output_equals_fast_output(tmp_path):
    cfg = write_config(tmp_path, F=1, N=400, noise="variance = 0.0", n_w=12)
    assert main(["simulate", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "y_l.csv").read_bytes() == (out / "y_h.csv").read_bytes()


def test_identify_ranks_lrm_first(tmp_path, simulated, capsys):
    d, cfg = simulated
    out = tmp_path / "id"
    shutil.copytree(d / "out", out)
    assert main(["identify", "--config", str(cfg), "--out", str(out), "--threads", "2"]) == 0
    for m in ("lrm", "lpm", "sa"):
        assert (out / f"frf_{m}.csv").exists() and (out / f"variance_{m}.csv").exists()
    assert (out / "transient_lrm.csv").exists()
    ranking = read_column(out / "ranking.csv", "method")
    assert ranking == ["LRM", "LPM", "SA"]
    assert "1. LRM" in capsys.readouterr().out


def test_identify_noiseless_std_is_zero(tmp_path):
    cfg = write_config(tmp_path, noise="variance = 0.0", methods='["LRM"]')
    assert main(["simulate", "--config", str(cfg)]) == 0
    assert main(["identify", "--config", str(cfg)]) == 0
    out = tmp_path / "out"
    std = np.array(read_column(out / "variance_lrm.csv", "std"), float)
    g = np.array(read_column(out / "true_frf.csv", "g_re"), float) + 1j * np.array(
        read_column(out / "true_frf.csv", "g_im"), float)
    assert np.max(std) < 1e-4 * np.max(np.abs(g))


@pytest.mark.slow
def test_identify_refinement_writes_traces(tmp_path, simulated):
    d, cfg = simulated
    out = tmp_path / "ref"
    shutil.copytree(d / "out", out)
    assert main(["identify", "--config", str(cfg), "--out", str(out), "--methods", "LRM+SK+LM"]) == 0
    with open(out / "traces_lrm_sk_lm.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"bin", "iteration", "phase", "J_SK", "J_LS"}
    mu = np.array(read_column(out / "mean_costs_lrm_sk_lm.csv", "mu_OE"), float)
    assert mu[-1] <= mu[0]


def test_compare_reports_absent_and_zero_curve(tmp_path, simulated, capsys):
    d, cfg = simulated
    out = tmp_path / "cmp"
    shutil.copytree(d / "out", out)
    shutil.copy(out / "true_frf.csv", out / "frf_lrm.csv")
    rc = main(["compare", "--config", str(cfg), "--out", str(out), "--methods", "LRM,LRM+SK"])
    assert rc == 0
    rows = list(csv.DictReader(open(out / "comparison.csv", newline="")))
    lrm = [float(r["cumulative_error"]) for r in rows if r["method"] == "LRM"]
    assert lrm and max(lrm) == 0.0
    assert [r["cumulative_error"] for r in rows if r["method"] == "LRM+SK"] == ["absent"]
    assert "absent" in capsys.readouterr().out


def test_compare_grid_mismatch_is_numerical_failure(tmp_path, simulated):
    d, cfg = simulated
    out = tmp_path / "bad"
    shutil.copytree(d / "out", out)
    lines = (out / "true_frf.csv").read_text().splitlines()
    (out / "frf_lrm.csv").write_text("\n".join(lines[:-7]) + "\n")
    assert main(["compare", "--config", str(cfg), "--out", str(out), "--methods", "LRM"]) == 3


def test_identify_missing_data_is_io_error(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["identify", "--config", str(cfg)]) == 4


def test_validate_accepts_benchmark(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "27 parameters <= 37 window points <= 400" in capsys.readouterr().out


@pytest.mark.parametrize(
    "kwargs,label",
    [
        (dict(n_w=10), "32a"),
        (dict(n_w=250), "32b"),
        (dict(excitation="excited_bins = [5]"), "32c"),
    ],
)
def test_validate_rejects_with_label(tmp_path, capsys, kwargs, label):
    cfg = write_config(tmp_path, methods='["LRM"]', **kwargs)
    assert main(["validate", "--config", str(cfg)]) == 2
    assert f"({label}) violated" in capsys.readouterr().out


def test_simulate_writes_nothing_on_validation_failure(tmp_path):
    cfg = write_config(tmp_path, methods='["LRM"]', n_w=10)
    assert main(["simulate", "--config", str(cfg)]) == 2
    assert not (tmp_path / "out").exists()


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[experiment]\nnumber_of_input_samples = 1201\n")
    with pytest.raises(InvalidConfigError):
        load_config(bad)
    assert main(["validate", "--config", str(bad)]) == 2
    bad.write_text("[experiment]\nmethods = ['XYZ']\n")
    assert main(["validate", "--config", str(bad)]) == 2
    bad.write_text("[noise]\nsnr = 3\n")
    assert main(["validate", "--config", str(bad)]) == 2


def test_config_reads_benchmark_keys(tmp_path):
    cfg = load_config(write_config(tmp_path))
    assert cfg.fast_sampling_time == 0.0005 and cfg.downsampling_factor == 3
    assert cfg.estimator.n_w == 18 and cfg.number_of_output_samples == 400
    assert cfg.output_dir == str(tmp_path / "out")
