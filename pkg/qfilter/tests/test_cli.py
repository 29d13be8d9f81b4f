"""
Tests for the command-line surface: config parsing, run records and the subcommands.

Covers:
- Flat key=value config: defaults, aliases, comments, line-numbered errors
- Environment overrides
- Each subcommand end to end on small configs
- Byte-determinism of outputs for a fixed config
- Exit statuses (0 pass, 1 tolerance failure, 2 error)
"""

import numpy as np
import pytest

from qfilter.errors import InvalidParameter, ParseError, UnknownKey
from qfilter.riccati import omega_stationary

from app.core.config import get_settings
from app.core.config_file import load_config, parse_config, with_seed
from app.core.orchestrator import EXIT_ERROR, EXIT_OK, EXIT_TOLERANCE, run_subcommand
from app.core.run_record import RECORD_FILE, RunRecord, RunStatus, file_sha256
from app.io.csv_io import read_table
from main import main


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("QFILTER_SEED", "QFILTER_WORKERS", "QFILTER_OUTPUT_DIR", "QFILTER_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


def _record_text(out_dir) -> str:
    return (out_dir / RECORD_FILE).read_text()


# =============================================================================
# Config parsing
# =============================================================================


class TestParseConfig:

    def test_defaults(self):
        config = parse_config("")
        assert config.params.m == 1.0
        assert config.params.lam == 1.0
        assert config.params.dim == 1
        assert config.run.dt == 1e-4
        assert config.run.t_end == 5.0
        assert config.run.seed == 42
        assert config.grid is None
        assert config.n_steps == 50000

    def test_overrides(self):
        config = parse_config("params.lambda=2\npacket.p=1\n")
        assert config.params.lam == 2.0
        assert config.packet.p == 1.0

    def test_comments_and_whitespace(self):
        config = parse_config("# header\n\n  run.seed = 7   # pinned\n")
        assert config.run.seed == 7

    def test_mass_alias(self):
        assert parse_config("params.m=3").params.m == 3.0

    def test_explicit_grid(self):
        config = parse_config("grid.x_min=-10\ngrid.x_max=10\ngrid.n_points=256")
        assert config.grid.n_points == 256
        assert config.grid.x_min == -10.0

    def test_bad_value_reports_line(self):
        with pytest.raises(ParseError) as exc:
            parse_config("params.mass=abc")
        assert exc.value.line == 1
        assert exc.value.code == "PARSE_ERROR"

    def test_bad_value_on_later_line(self):
        with pytest.raises(ParseError) as exc:
            parse_config("run.seed=1\n# comment\nrun.dt=fast\n")
        assert exc.value.line == 3

    def test_missing_separator(self):
        with pytest.raises(ParseError):
            parse_config("params.mass 2")

    def test_duplicate_key(self):
        with pytest.raises(ParseError) as exc:
            parse_config("run.seed=1\nrun.seed=2")
        assert exc.value.line == 2

    def test_unknown_key(self):
        with pytest.raises(UnknownKey) as exc:
            parse_config("run.seed=1\nparams.charge=1")
        assert exc.value.code == "UNKNOWN_KEY"
        assert "params.charge" in exc.value.message

    def test_invalid_mass_names_field(self):
        with pytest.raises(InvalidParameter) as exc:
            parse_config("params.mass=-1")
        assert exc.value.field == "m"

    def test_half_grid_rejected(self):
        with pytest.raises(InvalidParameter):
            parse_config("grid.x_min=-5")

    def test_snapshot_is_reparseable(self):
        config = parse_config("params.lambda=0.5\noutputs.emit_w=true\n")
        snapshot = config.snapshot()
        assert "params.lambda=0.5" in snapshot
        # None-valued keys are written empty, which the parser rejects, so drop them
        lines = [line for line in snapshot.splitlines() if not line.endswith("=")]
        assert parse_config("\n".join(lines)).snapshot() == snapshot

    def test_load_without_path_is_defaults(self):
        assert load_config(None) == parse_config("")


class TestEnvironment:

    def test_seed_override(self):
        config = with_seed(parse_config("run.seed=1"), 9)
        assert config.run.seed == 9
        assert with_seed(config, None) is config

    def test_negative_seed_rejected(self):
        with pytest.raises(InvalidParameter):
            with_seed(parse_config(""), -3)

    def test_settings_read_environment(self, monkeypatch):
        monkeypatch.setenv("QFILTER_SEED", "7")
        monkeypatch.setenv("QFILTER_WORKERS", "3")
        settings = get_settings()
        assert settings.SEED == 7
        assert settings.WORKERS == 3


# =============================================================================
# Run record
# =============================================================================


class TestRunRecord:

    def test_lifecycle(self):
        record = RunRecord(subcommand="riccati", config_snapshot="run.seed=1\n")
        assert record.status is RunStatus.CREATED
        record.start()
        record.add_summary("max_deviation", "1e-12", passed=True)
        record.add_summary("tau_q2_limit", "0.7")
        record.complete()
        assert record.status is RunStatus.COMPLETED
        assert record.all_passed
        assert record.get_wall_time_seconds() >= 0.0

    def test_failed_checks(self):
        record = RunRecord(subcommand="grid", config_snapshot="")
        record.add_summary("a", "1", passed=True)
        record.add_summary("b", "2", passed=False)
        assert not record.all_passed
        assert record.failed_checks() == ["b"]

    def test_dict_round_trip(self, tmp_path):
        out = tmp_path / "x.csv"
        out.write_text("t\n0\n")
        record = RunRecord(subcommand="trajectory", config_snapshot="run.seed=1\n")
        record.start()
        record.add_file(out, tmp_path)
        record.add_summary("heisenberg_min_ratio", "1.0", passed=True)
        record.fail("error code=BLOW_UP message=x")
        restored = RunRecord.from_dict(record.to_dict())
        assert restored.run_id == record.run_id
        assert restored.status is RunStatus.FAILED
        assert restored.files[0].sha256 == file_sha256(out)
        assert restored.checks == {"heisenberg_min_ratio": True}


# =============================================================================
# Subcommands
# =============================================================================


class TestRiccatiCommand:

    def test_converges_to_stationary_width(self, tmp_path):
        config = parse_config("run.dt=1e-3")
        assert run_subcommand("riccati", config, tmp_path) == EXIT_OK
        header, table = read_table(tmp_path / "riccati.csv")
        assert header[:3] == ["t", "re_omega", "im_omega"]
        alpha = omega_stationary(config.params).omega
        assert abs(table[-1, 1] - alpha.real) < 1e-9
        assert abs(table[-1, 2] - alpha.imag) < 1e-9
        text = _record_text(tmp_path)
        assert "status: completed" in text
        assert "riccati.csv" in text
        assert (tmp_path / "config.txt").read_text() == config.snapshot()

    def test_free_spreading(self, tmp_path):
        config = parse_config("params.lambda=0\nrun.dt=1e-3\nrun.t_end=2")
        assert run_subcommand("riccati", config, tmp_path) == EXIT_OK
        assert "free_spreading_rel_error" in _record_text(tmp_path)

    def test_coarse_step_fails_tolerance(self, tmp_path):
        config = parse_config("run.dt=0.5")
        assert run_subcommand("riccati", config, tmp_path) == EXIT_TOLERANCE
        text = _record_text(tmp_path)
        assert "max_deviation" in text and "FAIL" in text
        assert "error: error code=TOLERANCE_FAILED" in text


class TestTrajectoryCommand:

    CONFIG = "run.dt=1e-3\nrun.t_end=0.1\npacket.p=1\noutputs.every=10\n"

    def test_outputs_are_byte_deterministic(self, tmp_path):
        config = parse_config(self.CONFIG)
        assert run_subcommand("trajectory", config, tmp_path / "a") == EXIT_OK
        assert run_subcommand("trajectory", config, tmp_path / "b") == EXIT_OK
        a = (tmp_path / "a" / "trajectory.csv").read_bytes()
        b = (tmp_path / "b" / "trajectory.csv").read_bytes()
        assert a == b
        assert file_sha256(tmp_path / "a" / "trajectory.csv") in _record_text(tmp_path / "b")

    def test_row_stride_keeps_last_step(self, tmp_path):
        run_subcommand("trajectory", parse_config(self.CONFIG), tmp_path)
        header, table = read_table(tmp_path / "trajectory.csv")
        assert header[0] == "t"
        np.testing.assert_allclose(table[:, 0], np.linspace(0.0, 0.1, 11), atol=1e-12)

    def test_emit_w(self, tmp_path):
        run_subcommand("trajectory", parse_config(self.CONFIG + "outputs.emit_w=true\n"), tmp_path)
        header, _ = read_table(tmp_path / "trajectory_w.csv")
        assert header == ["t", "re_w_1", "im_w_1"]

    def test_seed_changes_output(self, tmp_path):
        run_subcommand("trajectory", parse_config(self.CONFIG + "run.seed=1\n"), tmp_path / "a")
        run_subcommand("trajectory", parse_config(self.CONFIG + "run.seed=2\n"), tmp_path / "b")
        assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "b" / "trajectory.csv").read_bytes()


class TestEnsembleCommand:

    def test_free_particle_mean_law(self, tmp_path):
        config = parse_config("params.lambda=0\npacket.p=1\nrun.dt=1e-2\nrun.t_end=1\nrun.n_traj=8\noutputs.every=10")
        assert run_subcommand("ensemble", config, tmp_path) == EXIT_OK
        header, table = read_table(tmp_path / "ensemble.csv")
        assert header[:2] == ["t", "mean_qhat_1"]
        np.testing.assert_allclose(table[:, 1], table[:, 0], atol=1e-9)

    def test_writes_statistics(self, tmp_path):
        config = parse_config("packet.p=1\nrun.dt=1e-3\nrun.t_end=0.2\nrun.n_traj=300\noutputs.every=20")
        run_subcommand("ensemble", config, tmp_path, workers=2)
        _, table = read_table(tmp_path / "ensemble.csv")
        assert table.shape == (11, 5)
        assert "qhat_final_stderrs" in _record_text(tmp_path)

    def test_single_trajectory_is_an_error(self, tmp_path):
        with pytest.raises(InvalidParameter):
            run_subcommand("ensemble", parse_config("run.t_end=0.1\nrun.dt=1e-2"), tmp_path)
        assert "status: failed" in _record_text(tmp_path)


class TestGridCommands:

    GRID = "grid.x_min=-12\ngrid.x_max=12\ngrid.n_points=512\nrun.dt=1e-3\n"

    def test_grid_with_snapshots(self, tmp_path):
        config = parse_config(self.GRID + "run.t_end=0.05\noutputs.every=10\noutputs.snapshot_every=25\n")
        assert run_subcommand("grid", config, tmp_path) == EXIT_OK
        for step in (0, 25, 50):
            header, table = read_table(tmp_path / f"grid_snapshot_{step}.csv")
            assert header == ["x", "re_psi", "im_psi", "density"]
            assert table.shape == (512, 4)
        header, table = read_table(tmp_path / "grid_moments.csv")
        assert header[-1] == "likelihood"
        assert table.shape[0] == 6

    def test_compare(self, tmp_path):
        config = parse_config(self.GRID + "run.t_end=0.2\noutputs.every=20\n")
        assert run_subcommand("compare", config, tmp_path) == EXIT_OK
        header, _ = read_table(tmp_path / "compare.csv")
        assert header[1:3] == ["qhat_grid", "qhat_gauss"]
        assert (tmp_path / "compare_summary.txt").read_text().startswith("max_rel_qhat=")

    def test_martingale(self, tmp_path):
        config = parse_config(self.GRID + "run.t_end=0.1\nrun.n_traj=50\n")
        run_subcommand("martingale", config, tmp_path)
        lines = (tmp_path / "martingale.txt").read_text().splitlines()
        assert lines[0].startswith("mean=")
        assert lines[1].startswith("stderr=")

    def test_auto_sized_grid_is_recorded(self, tmp_path):
        config = parse_config("run.dt=1e-3\nrun.t_end=0.02\ngrid.n_points=512\n")
        run_subcommand("grid", config, tmp_path)
        assert "grid = x_min=" in _record_text(tmp_path)


# =============================================================================
# Entry point
# =============================================================================


class TestMain:

    def test_parse_error_exit_and_message(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("params.mass=abc\n")
        code = main(["riccati", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert code == EXIT_ERROR
        assert capsys.readouterr().err.startswith("error code=PARSE_ERROR")

    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["riccati", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)])
        assert code == EXIT_ERROR
        assert capsys.readouterr().err.startswith("error code=IO_ERROR")

    def test_martingale_needs_two_trajectories(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("run.t_end=0.01\nrun.dt=1e-3\n")
        code = main(["martingale", "--config", str(cfg), "--out", str(tmp_path / "out")])
        assert code == EXIT_ERROR
        assert "code=INVALID_PARAMETER" in capsys.readouterr().err

    def test_environment_seed_is_recorded(self, tmp_path, monkeypatch):
        monkeypatch.setenv("QFILTER_SEED", "123")
        cfg = tmp_path / "run.cfg"
        cfg.write_text("run.t_end=0.01\nrun.dt=1e-3\n")
        assert main(["trajectory", "--config", str(cfg), "--out", str(tmp_path / "out")]) == EXIT_OK
        assert "run.seed=123" in (tmp_path / "out" / "config.txt").read_text()

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            main(["bogus"])

    @pytest.mark.slow
    def test_default_compare(self, tmp_path):
        assert main(["compare", "--out", str(tmp_path)]) == EXIT_OK
