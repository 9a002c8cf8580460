import random

import numpy as np
import pytest

from degvisc import __version__, cli
from degvisc.config import (ConfigError, RunConfig, config_from_dict, describe_defaults, parse_config,
                            parse_config_text, serialize)
from degvisc.io import atomic_write, csv_text, fmt, read_csv

HEAT = """
[scenario]
name = "heat"
[grid]
half_width = 4.0
cells_per_axis = 400
[time]
T = 0.5
snapshots = 5
[viscosity]
eps = 0.1
"""

LINEAR = """
[scenario]
name = "custom_table"
params = { table_u = [0.0, 1.0], table_f = [0.0, 1.0] }
"""

SHOCK_SWEEP = """
[scenario]
name = "greenshields_lwr"
params = { datum = "riemann", ul = 0.0, ur = 1.0 }
[grid]
cells_per_axis = 200
[sweep]
eps_ladder = [0.08, 0.04, 0.02]
"""


def write(tmp_path, text, name="run.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# configuration --------------------------------------------------------------

def test_minimal_config_fills_defaults():
    cfg = parse_config_text('[scenario]\nname = "greenshields_lwr"\n')
    assert cfg.grid.cells_per_axis == 800 and cfg.grid.half_width == 2.0
    assert cfg.viscosity.cfl == 0.4 and cfg.mollification.ladder == [0.04, 0.02, 0.01]
    assert cfg.output_times() == pytest.approx([0.1 * k for k in range(1, 11)])
    echo = describe_defaults(cfg)
    assert "cells_per_axis = 800" in echo and "C_tol = 1.0" in echo


def test_cells_below_minimum_is_range_error():
    with pytest.raises(ConfigError, match=r"\[grid\] cells_per_axis \(line 3\).*range \[8"):
        parse_config_text("[grid]\nhalf_width = 2.0\ncells_per_axis = 4\n")


def test_ladder_must_decrease():
    with pytest.raises(ConfigError, match="strictly decreasing"):
        parse_config_text("[mollification]\nladder = [0.01, 0.02, 0.04]\n")
    with pytest.raises(ConfigError, match="at least 3"):
        parse_config_text("[sweep]\neps_ladder = [0.04, 0.02]\n")


def test_unknown_keys_and_sections_are_fatal():
    with pytest.raises(ConfigError, match=r"\[grid\] cels \(line 2\): unknown key"):
        parse_config_text("[grid]\ncels = 100\n")
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config_text("[gird]\ncells_per_axis = 100\n")


def test_type_choice_and_cross_checks():
    bad = ['[grid]\nboundary = "reflecting"\n', "[viscosity]\neps = \"big\"\n", "[time]\nsnapshots = 2.5\n",
           "[time]\nT = 1.0\noutput_times = [0.5, 0.2]\n", "[diagnostics]\nwindow = [-3.0, 1.0]\n",
           "[diagnostics]\nresiduals = 1\n", "[scenario]\nname = \"traffic\"\n", "not toml ["]
    for text in bad:
        with pytest.raises(ConfigError):
            parse_config_text(text)
    with pytest.raises(ConfigError, match="does not exist"):
        parse_config("/nonexistent/run.toml")


def test_serialize_round_trip():
    cfg = parse_config_text(SHOCK_SWEEP)
    again = parse_config_text(serialize(cfg))
    assert again.to_dict() == cfg.to_dict() and again.digest() == cfg.digest()
    assert config_from_dict({}).digest() == RunConfig().digest()


# io -----------------------------------------------------------------------------

def test_atomic_write_replaces_and_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "a.txt"
    atomic_write(p, "one")
    atomic_write(p, "two")
    assert p.read_text() == "two"
    assert [q.name for q in p.parent.iterdir()] == ["a.txt"]


def test_csv_formatting_and_header():
    text = csv_text(["x", "ok"], [(0.1, True), (3, np.False_)], ["config_sha256: abc"])
    assert text == "# config_sha256: abc\nx,ok\n0.10000000000000001,true\n3,false\n"
    assert fmt(np.float64(1.0) / 3) == "%.17g" % (1 / 3)


# commands -------------------------------------------------------------------------

def test_verify_heat_passes_with_headers(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["verify", "--config", write(tmp_path, HEAT), "--out", str(out)]) == 0
    comments, rows = read_csv(out / "report.csv")
    assert rows and all(r["pass"] == "true" for r in rows)
    assert comments[0].startswith("config_sha256: ") and len(comments[0].split()[-1]) == 64
    assert comments[1] == f"version: degvisc {__version__}"
    assert comments[2].startswith("anchors: ") and "max_principle" in comments[2]
    _, res = read_csv(out / "residuals.csv")
    assert len(res) == 60 and all(r["pass"] == "true" for r in res)
    assert "entropy_residual" in capsys.readouterr().out


def test_verify_is_bit_identical(tmp_path):
    cfg = write(tmp_path, HEAT)
    for d in ("a", "b"):
        assert cli.main(["verify", "--config", cfg, "--out", str(tmp_path / d), "--seedless"]) == 0
    for name in ("report.csv", "residuals.csv", "report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_validate_linear_flux_warns_but_exits_zero(tmp_path, capsys):
    assert cli.main(["validate", "--config", write(tmp_path, LINEAR), "--out", str(tmp_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert any(l.startswith("H5: FAIL") for l in lines)
    assert any(l.startswith("WARNING: H5") for l in lines)


def test_sweep_and_report(tmp_path, capsys):
    cfg = write(tmp_path, SHOCK_SWEEP)
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "verdict: PASS" in capsys.readouterr().out
    comments, rows = read_csv(tmp_path / "sweep.csv")
    assert len(rows) == 3 * 2 * 10 and set(rows[0]) == set(cli.SWEEP_COLUMNS)
    assert any("runtime_s" in c for c in comments)
    assert cli.main(["report", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert "verdict: PASS" in (tmp_path / "summary.txt").read_text()


def test_run_and_reference_write_trajectories(tmp_path):
    cfg = write(tmp_path, SHOCK_SWEEP.replace("cells_per_axis = 200", "cells_per_axis = 50"))
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert cli.main(["reference", "--config", cfg, "--out", str(tmp_path)]) == 0
    # the reference lives on the 4x finer grid
    for name, cells in (("trajectory.csv", 50), ("reference.csv", 200)):
        _, rows = read_csv(tmp_path / name)
        assert len(rows) == 11 * cells


def test_verify_failure_names_first_record(tmp_path, capsys):
    # a 0|1 Riemann datum is not integrable: on the truncated domain the right state keeps
    # flowing in through the outflow edge, so the L2 budget of the integrable theory is exceeded
    text = SHOCK_SWEEP.replace("[sweep]\neps_ladder = [0.08, 0.04, 0.02]\n", "[diagnostics]\nresiduals = false\n")
    assert cli.main(["verify", "--config", write(tmp_path, text), "--out", str(tmp_path)]) == 1
    assert capsys.readouterr().err.startswith("FAILED: l2_energy")
    _, rows = read_csv(tmp_path / "report.csv")
    assert {r["estimate_id"] for r in rows if r["pass"] == "false"} == {"l2_energy", "contraction"}


def test_exit_codes(tmp_path, capsys, monkeypatch):
    assert cli.main(["verify", "--config", write(tmp_path, "[grid]\ncells_per_axis = 4\n")]) == 2
    assert "line 2" in capsys.readouterr().err
    assert cli.main(["verify", "--config", write(tmp_path, HEAT), "--jobs", "0"]) == 2

    def noisy(cfg, out, jobs=1):
        np.random.default_rng(0)
        return 0

    monkeypatch.setitem(cli.COMMANDS, "run", noisy)
    assert cli.main(["run", "--config", write(tmp_path, HEAT), "--out", str(tmp_path), "--seedless"]) == 3
    assert cli.main(["run", "--config", write(tmp_path, HEAT), "--out", str(tmp_path)]) == 0
    # the guard restores the generators afterwards
    assert random.random() is not None and np.random.default_rng(1) is not None


def test_echo_config(tmp_path, capsys):
    assert cli.main(["validate", "--config", write(tmp_path, LINEAR), "--out", str(tmp_path), "--echo-config"]) == 0
    assert "[sweep]" in capsys.readouterr().out
