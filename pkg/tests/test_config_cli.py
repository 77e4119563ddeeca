import json

import pytest

from conftest import SMALL_CONFIG, write_config
from gaobeam import cli
from gaobeam.config import ConfigError, load_config, loads_config, parse_config


class TestConfig:
    def test_demo_parses(self, demo_config):
        assert demo_config.grid.nx == 2801 and demo_config.axis.nt == 1000
        assert demo_config.ladder == (0.2, 0.1, 0.05)
        assert demo_config.regularization.lambda_mode == "auto"
        assert demo_config.window == (-3.0, 3.0)

    def test_defaults(self):
        cfg = loads_config(SMALL_CONFIG, "small")
        assert cfg.outputs.stem == "small" and not cfg.outputs.checkpoint
        assert cfg.margin == pytest.approx(1.2)
        assert cfg.scenario.mass_term_enabled

    def test_dotted_keys_equal_tables(self):
        dotted = SMALL_CONFIG.replace("[grid]\nx_min", "grid.x_min").replace("\nx_max", "\ngrid.x_max", 1)
        dotted = dotted.replace("\nnx = 1201", "\ngrid.nx = 1201", 1)
        a = loads_config(SMALL_CONFIG, "a")
        b = loads_config(dotted, "b")
        assert a.grid == b.grid

    @pytest.mark.parametrize("text, fragment", [
        (SMALL_CONFIG + "\n[extra]\nx = 1\n", "unknown block"),
        (SMALL_CONFIG.replace("nu = 1.0", "nu = 1.0\nmu = 2.0"), "unknown key"),
        (SMALL_CONFIG.replace("[time]\nT = 0.25\nnt = 40\n", ""), "missing block"),
        (SMALL_CONFIG.replace("ladder = [0.3, 0.25, 0.2]", "ladder = [0.2, 0.3]"), "decreasing"),
        (SMALL_CONFIG.replace("ladder = [0.3, 0.25, 0.2]", "ladder = [0.3]\nepsilon = 0.3"), "epsilon"),
        (SMALL_CONFIG.replace("nx = 1201", "nx = 12.5"), "integer"),
    ])
    def test_rejected(self, text, fragment):
        with pytest.raises(ConfigError, match=fragment):
            loads_config(text, "bad")

    def test_malformed_expression_has_position(self):
        with pytest.raises(ConfigError) as info:
            loads_config(SMALL_CONFIG.replace('"0.5*t - 0.1"', '"0.5*t -* 0.1"'), "bad")
        assert "scenario.zeta" in str(info.value) and "^" in str(info.value)

    def test_parse_plain_dict(self):
        cfg = parse_config({"grid": {"x_min": -1, "x_max": 1, "nx": 101}, "time": {"T": 1, "nt": 10},
                            "scenario": {}, "regularization": {"epsilon": 0.1}}, "dict")
        assert cfg.ladder == (0.1,)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nothing.toml")


class TestCli:
    def test_validate(self, tmp_path, capsys):
        assert cli.main(["validate", str(write_config(tmp_path))]) == 0
        assert "ok" in capsys.readouterr().out
        assert cli.main(["validate", "moving_mass_demo"]) == 0

    def test_validate_catches_margin(self, tmp_path, capsys):
        bad = SMALL_CONFIG.replace('u0 = "0.1*bump((x + 2)/1.5)"', 'u0 = "0.1*bump((x + 11)/1.5)"')
        assert cli.main(["validate", str(write_config(tmp_path, bad))]) == cli.EXIT_CONFIG
        assert "u0" in capsys.readouterr().err

    def test_malformed_expression_exit_code(self, tmp_path, capsys):
        bad = SMALL_CONFIG.replace('p = "0.3*bump(x/3)"', 'p = "0.3*bump(x/3"')
        assert cli.main(["run", str(write_config(tmp_path, bad)), "--out-dir", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert "unbalanced parentheses" in err and "scenario.p" in err
        assert not list(tmp_path.glob("*.json"))

    def test_zero_scenario_run(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.WORKERS_ENV, "1")
        zero = SMALL_CONFIG.replace('P = "-exp(-(8*t - 2)^2)"', 'P = "0"').replace(
            'u0 = "0.1*bump((x + 2)/1.5)"', 'u0 = "0"')
        assert cli.main(["run", str(write_config(tmp_path, zero)), "--out-dir", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "small.report.json").read_text())
        assert report["status"] == "ok"
        for m in report["sweep"]["members"]:
            assert max(m["weak39_residuals"]) == 0.0 and max(m["weak13_residuals"]) == 0.0
            assert m["energy_final"]["max_abs_tau_residual"] == 0.0
        assert (tmp_path / "small.energy.csv").read_text().startswith("step,time,kinetic")
        assert len((tmp_path / "small.sweep.csv").read_text().splitlines()) == 3

    def test_sweep_overrides_ladder(self, tmp_path):
        assert cli.main(["sweep", str(write_config(tmp_path)), "--epsilons", "0.3,0.2", "--out-dir",
                         str(tmp_path)]) == 0
        report = json.loads((tmp_path / "small.report.json").read_text())
        assert report["sweep"]["ladder"] == [0.3, 0.2]
        assert report["sweep"]["uniform_bound_ratio"] is None

    def test_sweep_rejects_garbage(self, tmp_path):
        assert cli.main(["sweep", str(write_config(tmp_path)), "--epsilons", "a,b"]) == cli.EXIT_CONFIG

    @pytest.mark.parametrize("value", ["zero", "0"])
    def test_bad_worker_count(self, tmp_path, monkeypatch, value):
        monkeypatch.setenv(cli.WORKERS_ENV, value)
        assert cli.main(["run", str(write_config(tmp_path)), "--out-dir", str(tmp_path)]) == cli.EXIT_CONFIG

    def test_failed_member_exit_code(self, tmp_path):
        tight = SMALL_CONFIG.replace("picard_tol = 1e-8", "picard_tol = 1e-8\npicard_max_iter = 1")
        assert cli.main(["run", str(write_config(tmp_path, tight)), "--out-dir", str(tmp_path)]) == \
            cli.EXIT_MEMBER_FAILED
        report = json.loads((tmp_path / "small.report.json").read_text())
        assert report["status"] == "member_failure"
        assert report["sweep"]["failed_members"] == [0.3, 0.25, 0.2]
        assert "PicardNonConvergence" in report["sweep"]["members"][0]["failure"]

    def test_checkpoints_written(self, tmp_path):
        text = SMALL_CONFIG.replace('stem = "small"', 'stem = "small"\ncheckpoint = true')
        assert cli.main(["sweep", str(write_config(tmp_path, text)), "--epsilons", "0.3", "--out-dir",
                         str(tmp_path)]) == 0
        assert (tmp_path / "small.member0.gbsh").read_bytes()[:4] == b"GBSH"
