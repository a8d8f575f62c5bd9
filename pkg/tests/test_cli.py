import json

import numpy as np
import pytest

from lattice_efimov.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, ConfigError, main, parse_config


def run(tmp_path, capsys, command, config=None, extra=()):
    argv = [command, "--json", "--out", str(tmp_path / "out")]
    if config is not None:
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        argv += ["--config", str(path)]
    code = main(argv + list(extra))
    out = capsys.readouterr()
    return code, out


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# config_hash=")
    header = lines[1].split(",")
    rows = [line.split(",") for line in lines[2:]]
    return header, rows


def test_lambda0_json(tmp_path, capsys):
    code, out = run(tmp_path, capsys, "lambda0")
    assert code == EXIT_OK
    data = json.loads(out.out)
    assert {"lambda0", "half_slope", "full_slope", "residual"} <= set(data)
    assert data["lambda0"] == pytest.approx(1.00624, abs=1e-5)
    assert data["residual"] <= 1e-12
    first = (tmp_path / "out" / "lambda0.json").read_bytes()
    run(tmp_path, capsys, "lambda0")
    assert (tmp_path / "out" / "lambda0.json").read_bytes() == first


def test_resonance(tmp_path, capsys):
    code, out = run(tmp_path, capsys, "resonance", {"grid": 6})
    assert code == EXIT_OK
    assert json.loads(out.out)["mu_star"] == pytest.approx(3.9568, abs=1e-4)


def test_dispersion_csv(tmp_path, capsys):
    config = {"k_list": [[0, 0, 0], [0.2, 0, 0], [0.6, 0, 0], [1.2, 0, 0]]}
    code, _ = run(tmp_path, capsys, "dispersion", config)
    assert code == EXIT_OK
    path = tmp_path / "out" / "dispersion.csv"
    header, rows = read_csv(path)
    assert header == ["k1", "k2", "k3", "z", "E_min"]
    z = [float(r[3]) for r in rows]
    assert z[0] == 0.0 and all(v > 0 for v in z[1:])
    first = path.read_bytes()
    run(tmp_path, capsys, "dispersion", config, extra=["--threads", "2"])
    assert path.read_bytes() == first


def test_tau_csv(tmp_path, capsys):
    code, _ = run(tmp_path, capsys, "tau", {"K_list": [[0, 0, 0], [1, 0, 0]], "eval_grid": 4})
    assert code == EXIT_OK
    header, rows = read_csv(tmp_path / "out" / "tau.csv")
    assert header[3:5] == ["tau", "branch"]
    assert rows[0][4] == "two-body-branch" and float(rows[0][3]) == 0.0
    assert all(float(r[3]) <= float(r[5]) for r in rows)


def test_count_tiny_rows_agree(tmp_path, capsys):
    config = {"coupling_factor": 3.0, "z_list": [-7.0, -9.0], "K_list": [[0, 0, 0]]}
    code, out = run(tmp_path, capsys, "count-tiny", config)
    assert code == EXIT_OK and json.loads(out.out)["all_equal"]
    _, rows = read_csv(tmp_path / "out" / "count_tiny.csv")
    assert all(r[4] == r[5] for r in rows)


def test_count_model_and_slope_sr(tmp_path, capsys):
    code, out = run(tmp_path, capsys, "count-model", {"rho_list": list(np.logspace(-6, -18, 7))})
    assert code == EXIT_OK
    data = json.loads(out.out)
    assert data["rows"] == 7 and data["slope"] > 0
    code, out = run(tmp_path, capsys, "slope-sr", {"r_list": [10.0, 20.0, 30.0]})
    assert code == EXIT_OK
    _, rows = read_csv(tmp_path / "out" / "slope_sr.csv")
    assert [float(r[0]) for r in rows] == [10.0, 20.0, 30.0]


def test_plain_text_output(capsys):
    assert main(["lambda0"]) == EXIT_OK
    assert "lambda0: 1.00623" in capsys.readouterr().out


@pytest.mark.parametrize(
    "config, field",
    [
        ({"k_list": []}, "k_list"),
        ({"rho_list": [1e-6, -1.0]}, "rho_list"),
        ({"grid": 1000}, "grid"),
        ({"tiny_grid": 6}, "tiny_grid"),
        ({"xtol": 0}, "xtol"),
        ({"potential": {"type": "nope"}}, "potential"),
        ({"K_list": [[0, 0]]}, "K_list[0]"),
        ({"bogus": 1}, "bogus"),
    ],
)
def test_config_errors(tmp_path, capsys, config, field):
    with pytest.raises(ConfigError) as exc:
        parse_config(config)
    assert exc.value.path == field
    code, out = run(tmp_path, capsys, "dispersion", config)
    assert code == EXIT_CONFIG and field in out.err


def test_bad_config_file(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["lambda0", "--config", str(tmp_path / "bad.json")]) == EXIT_CONFIG
    assert main(["lambda0", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["lambda0", "--threads", "0"]) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path, capsys):
    # z above the channel threshold
    code, out = run(tmp_path, capsys, "count-tiny", {"z_list": [5.0]})
    assert code == EXIT_NUMERIC and "ThresholdError" in out.err
