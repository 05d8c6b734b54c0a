"""Command-line surface: exact output formats, exit codes, config merging.

main() is called in-process with argv lists; stdout/stderr are captured
through capsys and files go to tmp_path.  Numeric output is pinned where
the underlying quantity is deterministic (kernel parameters) and checked
structurally elsewhere (CSV shape, JSON schema, byte stability).
"""

import json
import math

import numpy as np
import pytest

from fracode.cli import main, parse_config_file
from fracode.soe import read_soe


# --- kernel -----------------------------------------------------------


def test_kernel_prints_parameters(capsys):
    rc = main(["kernel", "--alpha", "0.5", "--eps", "1e-6", "--t-end", "1000"])
    assert rc == 0
    out = capsys.readouterr().out
    # delta = (Gamma(1.5) * 1e-6)^2, checked against the closed form
    assert "delta 7.8539816339744807e-13" in out
    assert "h     0.59655394744572943" in out
    assert "M     -59" in out
    assert "N     52" in out
    assert "terms 111" in out
    line = [l for l in out.splitlines() if l.startswith("max relative error")][0]
    assert float(line.rsplit(" ", 1)[1]) <= 3e-6


def test_kernel_writes_table(tmp_path, capsys):
    out = tmp_path / "k.soe"
    rc = main(
        ["kernel", "--alpha", "0.7", "--eps", "1e-8", "--t-end", "50",
         "--out", str(out)]
    )
    assert rc == 0
    capsys.readouterr()
    soe, params = read_soe(str(out))
    assert params.alpha == 0.7
    assert len(soe.weights) == params.n_terms


def test_kernel_rejects_alpha_out_of_range(capsys):
    rc = main(["kernel", "--alpha", "1.5", "--eps", "1e-6", "--t-end", "10"])
    assert rc == 2
    err = capsys.readouterr().err
    assert (
        "error: alpha must lie in (0,1); use the solver's split for alpha>1"
        in err
    )


# --- list -------------------------------------------------------------


def test_list_human(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for name in ("example1", "brusselator", "multiterm", "pde1d",
                 "reaction_diffusion"):
        assert name in out
    assert out.count("parameters:") == 5
    assert out.count("truth:") == 5


def test_list_json(capsys):
    assert main(["list", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert [d["name"] for d in data] == [
        "brusselator", "example1", "multiterm", "pde1d", "reaction_diffusion",
    ]
    for d in data:
        assert set(d) == {
            "name", "parameters", "constants", "truth", "description",
        }


# --- solve ------------------------------------------------------------


def _solve_example1(tmp_path, tag, extra=()):
    csv = tmp_path / f"sol_{tag}.csv"
    stats = tmp_path / f"stats_{tag}.json"
    rc = main(
        ["solve", "--problem", "example1", "--tol", "1e-6", "--outputs", "5",
         "--out-csv", str(csv), "--out-stats", str(stats), *extra]
    )
    return rc, csv, stats


def test_solve_example1_csv_and_stats(tmp_path, capsys):
    rc, csv, stats = _solve_example1(tmp_path, "a")
    assert rc == 0
    out = capsys.readouterr().out
    assert "problem example1 (head 1, terms 1" in out
    assert "status success" in out
    assert "endpoint t=1:" in out
    assert "wall time" in out

    lines = csv.read_text().splitlines()
    assert lines[0] == "t,y_1,err"
    assert len(lines) == 6
    rows = np.array([[float(v) for v in l.split(",")] for l in lines[1:]])
    np.testing.assert_allclose(rows[:, 0], np.linspace(0.2, 1.0, 5), rtol=1e-15)
    # exact solution (1.5 sqrt(sqrt(t)) - t^4)^2, reproduced to tolerance
    ex = (1.5 * rows[:, 0] ** 0.25 - rows[:, 0] ** 4) ** 2
    assert np.abs(rows[:, 1] - ex).max() < 1e-4
    assert rows[:, 2].max() < 1e-4

    data = json.loads(stats.read_text())
    assert set(data) == {
        "problem", "parameters", "config", "backend", "dimensions", "soe",
        "counters", "status", "message", "wall_time", "error",
    }
    assert data["problem"] == "example1"
    assert data["status"] == "success"
    assert data["backend"] in ("cython", "python")
    assert data["config"]["tol"] == 1e-6
    assert data["config"]["eps"] == 1e-6  # defaulted to tol
    assert data["dimensions"]["head"] == 1
    assert data["dimensions"]["total"] == 1 + data["dimensions"]["auxiliary"]
    soe = data["soe"]["0.5"]
    assert soe["terms"] == soe["N"] - soe["M"]
    for key in ("nstep", "naccpt", "nrejct", "nfcn", "njac", "ndec", "nsol"):
        assert data["counters"][key] >= 0
    assert data["error"]["measure"] == "max relative deviation over outputs"
    assert data["error"]["value"] < 1e-4
    assert data["wall_time"] > 0.0


def test_solve_outputs_are_byte_stable(tmp_path, capsys):
    rc1, csv1, stats1 = _solve_example1(tmp_path, "r1")
    rc2, csv2, stats2 = _solve_example1(tmp_path, "r2")
    capsys.readouterr()
    assert rc1 == rc2 == 0
    assert csv1.read_bytes() == csv2.read_bytes()
    d1 = json.loads(stats1.read_text())
    d2 = json.loads(stats2.read_text())
    d1.pop("wall_time"), d2.pop("wall_time")
    assert d1 == d2


def test_solve_reference_error_measure(tmp_path, capsys):
    stats = tmp_path / "brus.json"
    rc = main(
        ["solve", "--problem", "brusselator", "--tol", "1e-4",
         "--out-stats", str(stats)]
    )
    capsys.readouterr()
    assert rc == 0
    data = json.loads(stats.read_text())
    assert data["error"]["measure"] == (
        "norm of componentwise relative deviation at reference"
    )
    assert data["error"]["value"] < 0.1
    # two distinct kernel orders, one table entry each
    assert set(data["soe"]) == {"0.3", "0.8"}


def test_solve_unknown_problem(capsys):
    rc = main(["solve", "--problem", "nope", "--tol", "1e-6"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "unknown problem 'nope'" in err
    assert "brusselator" in err and "reaction_diffusion" in err


def test_solve_rejects_foreign_parameter(capsys):
    rc = main(["solve", "--problem", "multiterm", "--beta", "2.0"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "problem multiterm does not take beta" in err
    assert "accepted parameters: alpha, t_end" in err


def test_solve_parameter_forwarding(tmp_path, capsys):
    stats = tmp_path / "mt.json"
    rc = main(
        ["solve", "--problem", "multiterm", "--alpha", "0.4", "--t-end", "10",
         "--tol", "1e-6", "--out-stats", str(stats)]
    )
    capsys.readouterr()
    assert rc == 0
    data = json.loads(stats.read_text())
    assert data["parameters"]["alpha"] == 0.4
    assert data["config"]["t_end"] == 10.0
    assert set(data["soe"]) == {"0.6"}  # both terms share order 1 - alpha


def test_solve_validates_tol(capsys):
    rc = main(["solve", "--problem", "example1", "--tol", "5.0"])
    assert rc == 2
    assert "tol must lie in (0, 1)" in capsys.readouterr().err


# --- config files -----------------------------------------------------


def test_config_file_roundtrip(tmp_path, capsys):
    csv = tmp_path / "from_cfg.csv"
    stats = tmp_path / "from_cfg.json"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "# endpoint check at loose tolerance\n"
        "problem = example1\n"
        "tol = 1e-5\n"
        "outputs = 2\n"
        f"out_csv = {csv}\n"
        f"out_stats = {stats}\n"
        "\n"
    )
    rc = main(["solve", "--problem", str(cfg)])
    capsys.readouterr()
    assert rc == 0
    assert len(csv.read_text().splitlines()) == 3
    assert json.loads(stats.read_text())["config"]["tol"] == 1e-5


def test_config_flags_override_file(tmp_path, capsys):
    stats = tmp_path / "o.json"
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"problem = example1\ntol = 1e-5\nout_stats = {stats}\n")
    rc = main(["solve", "--problem", str(cfg), "--tol", "1e-4", "--outputs", "4"])
    capsys.readouterr()
    assert rc == 0
    data = json.loads(stats.read_text())
    assert data["config"]["tol"] == 1e-4
    assert data["config"]["outputs"] == 4


def test_config_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("problem = example1\ntolx = 1e-5\n")
    rc = main(["solve", "--problem", str(cfg)])
    assert rc == 2
    err = capsys.readouterr().err
    assert f"{cfg}:2: unknown config key 'tolx'" in err
    assert "known keys:" in err


def test_config_malformed_line(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("problem example1\n")
    rc = main(["solve", "--problem", str(cfg)])
    assert rc == 2
    assert f"{cfg}:1: expected key=value" in capsys.readouterr().err


def test_config_bad_value(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("problem = example1\n# note\ntol = fast\n")
    rc = main(["solve", "--problem", str(cfg)])
    assert rc == 2
    assert f"{cfg}:3: cannot parse 'fast' as float for key 'tol'" in (
        capsys.readouterr().err
    )


def test_parse_config_file_direct(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("tol=1e-3 # inline comment\ngrid_d = 50\n")
    vals = parse_config_file(str(cfg))
    assert vals == {"tol": 1e-3, "grid_d": 50}
    assert isinstance(vals["grid_d"], int)


# --- bench ------------------------------------------------------------


def test_bench_example1(capsys):
    rc = main(
        ["bench", "--problem", "example1", "--tol", "1e-5", "--repeat", "1"]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "dense" in out and "structured" in out
    assert "speedup" in out
    line = [l for l in out.splitlines() if "trajectory agreement" in l][0]
    agree = float(line.split()[2])
    assert agree <= 1e-10
    sp_line = [l for l in out.splitlines() if l.startswith("speedup")][0]
    assert math.isfinite(float(sp_line.split()[1].rstrip("x")))
