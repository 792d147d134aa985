import csv
import io
import json

import numpy as np
import pytest

from sme_entropy import cli
from sme_entropy.cli import (
    EXIT_ABORT,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_PROPERTY,
    TIMESERIES_COLUMNS,
    RunConfig,
    dumps,
    fmt_float,
    main,
    parse_config,
    run,
    run_property_suite,
)
from sme_entropy.errors import ConfigError


def small_config(tmp_path, **over):
    cfg = {"model_name": "qubit_decay_homodyne", "trajectories": 20, "dt": 1e-3,
           "t_final": 0.1, "base_seed": 7, "window": 10}
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


class TestConfig:
    def test_json_error_position(self):
        with pytest.raises(ConfigError, match=r"cfg:2:\d+"):
            parse_config('{\n  "dt": ,\n}', "cfg")

    @pytest.mark.parametrize("field,value", [
        ("trajectories", 0), ("trajectories", 1.5), ("window", 0), ("dt", -1e-3),
        ("dt", 2.0), ("floor_epsilon", 0.1), ("model_name", "x"), ("emit", ["plots"]),
        ("base_seed", -1),
    ])
    def test_field_errors(self, field, value):
        text = json.dumps({field: value})
        with pytest.raises(ConfigError, match=field):
            parse_config(text, "cfg")

    def test_unknown_field(self):
        with pytest.raises(ConfigError, match="unknown field"):
            parse_config('{"trajectorys": 3}')

    def test_unknown_sanitize_key(self):
        with pytest.raises(ConfigError, match="sanitize"):
            parse_config('{"sanitize": {"clip": true}}')

    def test_defaults(self):
        cfg = parse_config("{}")
        assert cfg == RunConfig()

    def test_shipped_configs_parse(self):
        from pathlib import Path
        root = Path(__file__).resolve().parents[1] / "configs"
        names = sorted(p.stem for p in root.glob("*.json"))
        assert names == ["oscillator_truncated", "qubit_decay_homodyne",
                         "qubit_feedback", "qubit_hermitian_L"]
        for p in root.glob("*.json"):
            cfg = cli.load_config(p)
            assert cfg.model_name == p.stem
            assert cfg.trajectories == 4000

    def test_bad_initial_state(self, tmp_path):
        cfg = parse_config(json.dumps({"initial_state": {"real": [[1, 0, 0], [0, 0, 0],
                                                                  [0, 0, 0]]},
                                       "trajectories": 2, "t_final": 0.01}))
        with pytest.raises(ConfigError, match="initial_state"):
            run(cfg, tmp_path)


class TestFormatting:
    def test_round_trip_digits(self):
        for x in (0.1, 1 / 3, -2.5e-17, 123456789.123456789):
            assert float(fmt_float(x)) == x

    def test_dumps_nonfinite(self):
        out = json.loads(dumps({"a": float("nan"), "b": [1.0, float("inf")], "c": 1 / 3}))
        assert out == {"a": None, "b": [1.0, None], "c": 1 / 3}


class TestRun:
    def test_outputs(self, tmp_path):
        cfg = cli.load_config(small_config(tmp_path))
        summary = run(cfg, tmp_path / "out")
        assert summary.exit_code == EXIT_OK
        assert summary.n_verdicts == 9
        rows = list(csv.reader(io.StringIO((tmp_path / "out" / "timeseries.csv").read_text())))
        assert tuple(rows[0]) == TIMESERIES_COLUMNS
        assert len(rows) == 10
        verdicts = json.loads((tmp_path / "out" / "verdicts.json").read_text())
        assert len(verdicts) == 9
        saved = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert "wall_time" not in saved and "backend" not in saved
        assert saved["n_violations"] == 0

    def test_reruns_byte_identical(self, tmp_path):
        cfg = cli.load_config(small_config(tmp_path))
        run(cfg, tmp_path / "a")
        run(cfg, tmp_path / "b")
        for f in ("timeseries.csv", "verdicts.json", "summary.json"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_backends_write_same_bytes(self, tmp_path):
        from sme_entropy.kernels import HAVE_NUMBA
        if not HAVE_NUMBA:
            pytest.skip("numba not installed")
        cfg = cli.load_config(small_config(tmp_path))
        run(cfg, tmp_path / "np", backend="numpy")
        run(cfg, tmp_path / "nb", backend="numba")
        a = np.loadtxt(tmp_path / "np" / "timeseries.csv", delimiter=",", skiprows=1)
        b = np.loadtxt(tmp_path / "nb" / "timeseries.csv", delimiter=",", skiprows=1)
        assert np.allclose(a, b, rtol=1e-9, atol=1e-9)

    def test_emit_subset(self, tmp_path):
        cfg = cli.load_config(small_config(tmp_path, emit=["summary"]))
        run(cfg, tmp_path / "o")
        assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["summary.json"]

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.ENV_OUTPUT_DIR, str(tmp_path / "env"))
        cfg = cli.load_config(small_config(tmp_path, output_dir=str(tmp_path / "cfg")))
        run(cfg)
        assert (tmp_path / "env" / "summary.json").exists()
        assert not (tmp_path / "cfg").exists()
        run(cfg, tmp_path / "arg")
        assert (tmp_path / "arg" / "summary.json").exists()

    def test_abort_exit_code(self, tmp_path):
        # two Euler steps of size 0.5 drive the pure excited state negative
        cfg = cli.load_config(small_config(
            tmp_path, dt=0.5, t_final=1.0, allow_large_dt=True, trajectories=3,
            model_params={"gamma": 4.0}, initial_state={"real": [[1, 0], [0, 0]]}))
        summary = run(cfg, tmp_path / "o")
        assert summary.n_aborted > 0
        assert summary.exit_code == EXIT_ABORT

    def test_large_dt_rejected(self, tmp_path):
        assert main(["run", "--config", str(small_config(tmp_path, dt=0.05)),
                     "--output", str(tmp_path / "o")]) == EXIT_CONFIG

    def test_oscillator_truncation_reported(self, tmp_path):
        cfg = cli.load_config(small_config(tmp_path, model_name="oscillator_truncated",
                                           trajectories=4))
        s = run(cfg, tmp_path / "o")
        assert s.truncation["level"] == 9
        assert s.truncation["flagged"] is False


class TestMain:
    def test_run_and_override(self, tmp_path, capsys):
        code = main(["run", "--config", str(small_config(tmp_path)), "--trajectories", "5",
                     "--seed", "3", "--output", str(tmp_path / "o")])
        assert code == EXIT_OK
        printed = json.loads(capsys.readouterr().out)
        assert printed["n_trajectories"] == 5
        assert printed["config"]["base_seed"] == 3

    def test_config_errors(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
        assert main(["run", "--config", str(small_config(tmp_path)),
                     "--trajectories", "0"]) == EXIT_CONFIG
        assert "trajectories" in capsys.readouterr().err

    def test_props(self, tmp_path, capsys):
        code = main(["props", "--dims", "2,3", "--samples", "100", "--output", str(tmp_path)])
        assert code == EXIT_OK
        saved = json.loads((tmp_path / "props_summary.json").read_text())
        assert saved["passed"] is True
        assert saved["max_ito_residual"] <= 1e-10

    @pytest.mark.parametrize("argv", [["props", "--samples", "0"],
                                      ["props", "--dims", "6"],
                                      ["props", "--dims", "1,2"]])
    def test_props_validation(self, argv):
        assert main(argv) == EXIT_CONFIG

    def test_props_failure_exit(self, monkeypatch):
        monkeypatch.setattr(cli, "ITO_RESIDUAL_MAX", -1.0)
        assert main(["props", "--dims", "2", "--samples", "100"]) == EXIT_PROPERTY

    def test_property_suite_values(self):
        s = run_property_suite([2, 4], 100, seed=1)
        assert s.passed
        assert s.min_genvar >= 0
        assert s.min_abe_slack_hermitian >= -1e-9
        assert s.max_commuting_gap <= 1e-10
