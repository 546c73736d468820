import json
import math

import numpy as np
import pytest

from sideband_entangler import __version__
from sideband_entangler.cli import emit_series, format_value, main, run_scenario, verify_checks
from sideband_entangler.config import Scenario, parse_config, parse_grid
from sideband_entangler.errors import ParseError, ValidationError
from sideband_entangler.model import Generator, Shape
from sideband_entangler.protocol import ObservableSeries, ScenarioResult

COLUMN_HEADER = "t,C12,EN_AB,Pgg,w2_plus,w2_minus,EN_2plus,EN_2minus,edge_leakage,norm_drift"


def test_fig1_defaults():
    cfg = parse_config("scenario = fig1\n")
    p = cfg.params
    assert cfg.scenario is Scenario.FIG1
    assert (p.omega, p.omega0, cfg.samples) == (1.0, 1.0, 400)
    assert p.envelope_A.area == pytest.approx(math.pi / 4)
    assert p.envelope_A.duration == 10.0
    assert (p.window.n_min, p.window.n_max) == (-10, 10)
    assert cfg.generator is Generator.RWA


def test_generator_default_follows_scenario():
    assert parse_config("scenario = leakage").generator is Generator.FULL
    assert parse_config("scenario = leakage\ngenerator = rwa").generator is Generator.RWA


def test_alpha_out_of_range():
    with pytest.raises(ValidationError):
        parse_config("alpha = 1.5")


def test_gaussian_default_sigma_is_echoed():
    cfg = parse_config("envelope.shape = gaussian")
    assert cfg.params.envelope_A.shape is Shape.GAUSSIAN
    assert cfg.params.envelope_A.sigma_fraction == 0.15
    assert "envelope_A.sigma_fraction = 0.15" in cfg.echo_lines()


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ParseError, match="line 3"):
        parse_config("# comment\nscenario = fig1\nbogus = 1\n")
    with pytest.raises(ParseError, match="line 1"):
        parse_config("no equals sign")
    with pytest.raises(ParseError, match="duplicate"):
        parse_config("alpha = 0.1\nalpha = 0.2")


def test_value_errors():
    for text in ("scenario = fig9", "envelope.shape = triangle", "samples = 2.5", "omega = 2 +", "window.half_width = 1", "alpha = __import__('os')"):
        with pytest.raises(ValidationError):
            parse_config(text)


def test_expressions_and_overrides():
    cfg = parse_config("envelope.area = pi/8  # half\nenvelope_B.duration = 2*10\nphi = -pi/2")
    assert cfg.params.envelope_A.area == pytest.approx(math.pi / 8)
    assert cfg.params.envelope_B.duration == 20.0 and cfg.params.envelope_A.duration == 10.0
    assert cfg.params.phi == pytest.approx(-math.pi / 2)


def test_grids():
    assert np.allclose(parse_grid("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    assert np.allclose(parse_grid("1:100:3:log"), [1, 10, 100])
    assert np.allclose(parse_grid("0, pi"), [0, math.pi])


@pytest.mark.parametrize(
    "text",
    ["", "scenario = fig2\nalpha = 0.3\nphi = 0.1", "envelope.shape = gaussian\nenvelope_B.area = 1/3\nwindow.n_min = -7\nsamples = 33", "scenario = leakage\ngrid.T = 10:100:4:log"],
)
def test_echo_is_lossless(text):
    cfg = parse_config(text)
    again = parse_config("\n".join(cfg.echo_lines()))
    assert again.params == cfg.params
    assert again.raw == cfg.raw
    assert all(np.array_equal(again.grids[k], cfg.grids[k]) for k in cfg.grids)


def test_format_value():
    assert format_value(float("nan")) == ""
    assert format_value(0.1) == "0.1"
    assert float(format_value(1 / 3)) == 1 / 3
    assert format_value(3) == "3"


def test_emit_series_layout(tmp_path):
    series = ObservableSeries.from_rows([{"t": 0.0, "C12": 1.0, "Pgg": 0.0}, {"t": 1.0, "C12": 0.5}])
    res = ScenarioResult("demo", None, series, {"x": 1.5, "bad": float("nan")}, {"extra.csv": (("a", "b"), [(1.0, float("nan"))])})
    written = emit_series(res, tmp_path / "demo.csv", ["alpha = 0.5"])
    text = (tmp_path / "demo.csv").read_bytes().decode()
    lines = text.split("\n")
    assert lines[0] == f"# sideband-entangler v{__version__}"
    assert lines[1] == "# config:" and lines[2] == "#   alpha = 0.5"
    assert lines[3] == COLUMN_HEADER
    assert lines[4] == "0.0,1.0,,0.0,,,,,,"
    assert "\r" not in text and text.endswith("\n")
    assert (tmp_path / "extra.csv").read_text().splitlines()[-1] == "1.0,"
    summary = json.loads((tmp_path / "demo.summary.json").read_text())
    assert summary["summary"] == {"bad": None, "x": 1.5}
    assert len(written) == 3


def test_fig1_run_rows_and_determinism(tmp_path):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text("scenario = custom\nsamples = 21\n")
    for out in ("a", "b"):
        assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / out), "--quiet"]) == 0
    a = (tmp_path / "a" / "custom_rwa.csv").read_bytes()
    assert a == (tmp_path / "b" / "custom_rwa.csv").read_bytes()
    rows = [r for r in a.decode().splitlines() if not r.startswith("#")]
    assert rows[0] == COLUMN_HEADER
    first = rows[1].split(",")
    assert float(first[1]) == 1.0 and float(first[3]) == 0.0
    assert len(rows) == 22


def test_fig2_companion_table(tmp_path):
    cfg = parse_config("scenario = fig2\ngrid.alpha = 0, 0.5\ngrid.phi = 0")
    results = run_scenario(cfg)
    emit_series(results[0], tmp_path / "fig2.csv", cfg.echo_lines())
    lines = [r for r in (tmp_path / "transfer.csv").read_text().splitlines() if not r.startswith("#")]
    assert lines[0] == "alpha,phi,C12_0,EN_numeric,EN_analytic"
    assert len(lines) == 3


def test_sweep_writes_one_directory_per_value(tmp_path):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text("scenario = fig2\ngrid.alpha = 0.5\ngrid.phi = 0")
    assert main(["sweep", "--config", str(cfg_path), "--key", "envelope.area", "--values", "0.5, 0.7", "--out", str(tmp_path), "--quiet"]) == 0
    assert (tmp_path / "envelope.area=0.5" / "transfer.csv").exists()
    assert (tmp_path / "envelope.area=0.7" / "transfer.csv").exists()


def test_cli_reports_config_errors(tmp_path, capsys):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text("alpha = 1.5\n")
    assert main(["run", "--config", str(cfg_path)]) == 2
    assert "ValidationError" in capsys.readouterr().err


def test_verify_default_passes():
    checks = verify_checks(parse_config(""), x_states=50)
    assert all(c.ok for c in checks), [c.name for c in checks if not c.ok]


def test_verify_degraded_integrator_fails_richardson(tmp_path, capsys):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text("integrator.step_fraction = 0.5\n")
    assert main(["verify", "--config", str(cfg_path), "--quiet"]) == 1
    assert "Richardson" in capsys.readouterr().err


def test_verify_narrow_window_fails_edge_leakage(tmp_path, capsys):
    cfg_path = tmp_path / "c.cfg"
    cfg_path.write_text("generator = full\nwindow.half_width = 2\n")
    assert main(["verify", "--config", str(cfg_path), "--quiet"]) == 1
    assert "edge leakage" in capsys.readouterr().err
