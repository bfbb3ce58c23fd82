import json

import numpy as np
import pytest

from stablesheet.cli import RunConfig, _map_indexed, load_config, main


def run_cli(args):
    return main(list(args))


def test_dims_closed_forms(capsys):
    assert run_cli(["dims", "--alpha", "1.5", "--H", "0.6,0.8", "--d", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc == {"range": 1.0, "graph": 2.4}
    assert run_cli(["dims", "--alpha", "1.5", "--H", "0.6,0.8", "--d", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["range"] == pytest.approx(35.0 / 12.0, abs=1e-12)
    assert doc["graph"] == pytest.approx(35.0 / 12.0, abs=1e-12)


def test_dims_rejects_unsorted_H(capsys):
    assert run_cli(["dims", "--H", "0.8,0.6", "--d", "1"]) == 2
    assert "nondecreasing" in capsys.readouterr().err


def test_simulate_reruns_byte_identical(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    args = ["simulate", "--H", "0.8,0.9", "--grid", "8x8", "--seed", "7",
            "--spacing", "0.015625"]
    assert run_cli(args + ["--out", str(a)]) == 0
    assert run_cli(args + ["--out", str(b)]) == 0
    assert (a / "field.csv").read_bytes() == (b / "field.csv").read_bytes()
    assert (a / "field.json").read_bytes() == (b / "field.json").read_bytes()
    side = json.loads((a / "field.json").read_text())
    assert side["schema"] == 1
    header = (a / "field.csv").read_text().splitlines()[0]
    assert header == "t_1,t_2,x_1"


def test_simulate_seed_changes_values(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    base = ["simulate", "--H", "0.8", "--grid", "16", "--spacing", "0.03125"]
    assert run_cli(base + ["--seed", "1", "--out", str(a)]) == 0
    assert run_cli(base + ["--seed", "2", "--out", str(b)]) == 0
    assert (a / "field.csv").read_bytes() != (b / "field.csv").read_bytes()


def test_simulate_rejects_inadmissible_pair(tmp_path, capsys):
    code = run_cli(["simulate", "--alpha", "1.2", "--H", "0.5,0.9",
                    "--grid", "4x4", "--out", str(tmp_path)])
    assert code == 2
    assert "1/alpha" in capsys.readouterr().err


def test_simulate_wavelet_exact_spacing_gate(tmp_path, capsys):
    code = run_cli(["simulate", "--method", "wavelet-exact", "--H", "0.8",
                    "--n", "6", "--spacing", "0.0078125", "--grid", "8",
                    "--out", str(tmp_path)])
    assert code == 2
    err = capsys.readouterr().err
    assert "too coarse" in err and "0.00195312" in err


def test_wavelet_methods_run(tmp_path):
    out = tmp_path / "we"
    assert run_cli(["simulate", "--method", "wavelet-exact", "--H", "0.8",
                    "--n", "3", "--spacing", "0.015625", "--grid", "8",
                    "--seed", "9", "--out", str(out)]) == 0
    vals = np.loadtxt(out / "field.csv", delimiter=",", skiprows=1)
    assert vals.shape == (8, 2) and np.all(np.isfinite(vals))
    out2 = tmp_path / "wi"
    assert run_cli(["simulate", "--method", "wavelet-iid", "--H", "0.8",
                    "--n", "3", "--grid", "8", "--seed", "9",
                    "--out", str(out2)]) == 0


def test_config_file_with_flag_override(tmp_path):
    cfgfile = tmp_path / "run.cfg"
    cfgfile.write_text(
        "alpha = 1.5\nH = 0.8,0.9\ngrid = 4x4\nseed = 3\n"
        "spacing = 0.03125  # comment\n\ntol_scale = 0.2\n")
    out = tmp_path / "o"
    assert run_cli(["simulate", "--config", str(cfgfile), "--seed", "4",
                    "--out", str(out)]) == 0
    side = json.loads((out / "field.json").read_text())
    assert side["provenance"]["seed"] == 4
    cfg = load_config(str(cfgfile), {"seed": "4"})
    assert cfg.seed == 4 and cfg.grid == (4, 4) and cfg.tol["scale"] == 0.2


def test_config_file_rejects_unknown_key(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("alhpa = 1.5\n")
    assert run_cli(["simulate", "--config", str(bad)]) == 2


def test_analyze_reports_exponent(tmp_path):
    out = tmp_path / "f"
    assert run_cli(["simulate", "--H", "0.8", "--grid", "4096",
                    "--spacing", str(2.0 ** -12), "--seed", "11",
                    "--out", str(out)]) == 0
    lags = ",".join(str(2.0 ** -e) for e in range(10, 4, -1))
    assert run_cli(["analyze", "--input", str(out), "--out", str(out),
                    "--statistic", "median", "--lags", lags]) == 0
    doc = json.loads((out / "analysis.json").read_text())
    assert doc["kind"] == "exponent-report"
    assert 0.5 < doc["estimate"] < 1.1
    assert doc["theory"] == pytest.approx(0.8 - 1.0 / 1.5)


def test_analyze_missing_input_is_io_error(tmp_path):
    assert run_cli(["analyze", "--input", str(tmp_path / "nope"),
                    "--out", str(tmp_path)]) == 4


def test_verify_dims_suite(tmp_path, capsys):
    assert run_cli(["verify", "--suite", "dims", "--out", str(tmp_path)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["pass"] is True and doc["suite"] == "dims"
    names = [r["name"] for r in doc["checks"]]
    assert "dims_d1_graph" in names and len(names) == 6
    again = json.loads((tmp_path / "verify_dims.json").read_text())
    assert again == doc


def test_verify_unknown_suite(tmp_path, capsys):
    assert run_cli(["verify", "--suite", "bogus", "--out", str(tmp_path)]) == 2
    assert "unknown suite" in capsys.readouterr().err


def test_verify_tolerance_failure_exits_3(tmp_path, capsys):
    code = run_cli(["verify", "--suite", "exponent", "--tol",
                    "exponent=0.000001", "--out", str(tmp_path)])
    assert code == 3
    doc = json.loads((tmp_path / "verify_exponent.json").read_text())
    assert doc["pass"] is False
    assert all(r["pass"] is False for r in doc["checks"])


def test_rng_check_quick(capsys):
    assert run_cli(["rng-check", "--alpha", "1.2", "--draws", "200000"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["checks"][0]["pass"] is True
    assert run_cli(["rng-check", "--alpha", "2.0", "--draws", "200000"]) == 0


def test_coeffs_dump(tmp_path, capsys):
    args = ["coeffs", "--H", "0.8,0.9", "--n", "2", "--M", "0.5",
            "--seed", "5", "--out", str(tmp_path)]
    assert run_cli(args) == 0
    capsys.readouterr()
    lines = (tmp_path / "coeffs.csv").read_text().splitlines()
    assert lines[0] == "j_1,j_2,k_1,k_2,eps"
    side = json.loads((tmp_path / "coeffs.json").read_text())
    assert side["schema"] == 1 and side["mode"] == "exact"
    assert side["rows"] == len(lines) - 1 == 2025
    first = (tmp_path / "coeffs.csv").read_bytes()
    assert run_cli(args) == 0
    assert (tmp_path / "coeffs.csv").read_bytes() == first


def test_wavelet_dump(tmp_path, capsys):
    assert run_cli(["wavelet-dump", "--direction", "nope",
                    "--out", str(tmp_path)]) == 2
    capsys.readouterr()
    assert run_cli(["wavelet-dump", "--direction", "derivative", "--H", "0.8",
                    "--out", str(tmp_path)]) == 0
    side = json.loads((tmp_path / "wavelet.json").read_text())
    assert side["direction"] == "derivative" and side["schema"] == 1
    assert (tmp_path / "wavelet.csv").read_text().startswith("x,value\n")


def test_map_indexed_order_independent_of_workers():
    fn = lambda i: i * i - 3
    assert _map_indexed(fn, 17, 1) == _map_indexed(fn, 17, 5)
    assert _map_indexed(fn, 1, 8) == [fn(0)]


def test_runconfig_defaults_admissible():
    cfg = RunConfig()
    hv = cfg.validate()
    assert hv.N == 2 and cfg.tol["scale"] == 0.1
