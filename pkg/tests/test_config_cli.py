"""Tests for configuration parsing and the command-line interface."""

import filecmp
import os

import pytest

from pagd.cli import main
from pagd.config import (
    ConfigError,
    apply_updates,
    coerce_bool,
    coerce_float,
    coerce_float_list,
    coerce_int,
    coerce_int_list,
    parse_kv_file,
)
from pagd.experiments import ManufacturedConfig


class TestKvFile:
    def test_parsing(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "# comment line\n"
            "\n"
            "alpha = 0.5\n"
            "grid_sizes = 16, 32   # trailing comment\n"
            "rhs = exp-forcing\n"
        )
        raw = parse_kv_file(path)
        assert raw == {"alpha": "0.5", "grid_sizes": "16, 32", "rhs": "exp-forcing"}

    def test_missing_equals(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("alpha 0.5\n")
        with pytest.raises(ConfigError):
            parse_kv_file(path)

    def test_coercions(self):
        assert coerce_float("1e-3") == 1e-3
        assert coerce_int("512") == 512
        assert coerce_bool("Yes") is True
        assert coerce_bool("off") is False
        assert coerce_float_list("0.1, 0.2,0.3") == (0.1, 0.2, 0.3)
        assert coerce_int_list("16,32") == (16, 32)
        for bad, fn in (("x", coerce_float), ("1.5", coerce_int), ("maybe", coerce_bool)):
            with pytest.raises(ConfigError):
                fn(bad)

    def test_unknown_key_lists_known(self):
        with pytest.raises(ConfigError) as excinfo:
            apply_updates({}, {"bogus": "1"}, ManufacturedConfig.FIELDS)
        assert "alpha" in str(excinfo.value)


class TestCli:
    def test_manufactured_success(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main([
            "manufactured", "--n", "16", "--max-iters", "10",
            "--out", str(out), "--no-plots",
        ])
        assert code == 0
        assert (out / "summary.csv").exists()
        listed = capsys.readouterr().out.strip().split("\n")
        assert str(out / "summary.csv") in listed

    def test_config_file_plus_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = 16\nmax_iters = 10\n")
        out = tmp_path / "out"
        code = main([
            "manufactured", "--config", str(cfg), "--max-iters", "5",
            "--out", str(out), "--no-plots",
        ])
        assert code == 0
        manifest = (out / "manifest.txt").read_text()
        assert "max_iters = 5" in manifest
        assert "n = 16" in manifest

    def test_bad_value_exits_2(self, tmp_path, capsys):
        code = main([
            "manufactured", "--n", "many", "--out", str(tmp_path / "o"),
        ])
        assert code == 2
        assert "configuration error" in capsys.readouterr().err

    def test_unknown_config_key_exits_2(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("granularity = 3\n")
        code = main([
            "manufactured", "--config", str(cfg), "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_missing_config_file_exits_2(self, tmp_path):
        code = main([
            "manufactured", "--config", str(tmp_path / "absent.cfg"),
            "--out", str(tmp_path / "o"),
        ])
        assert code == 2

    def test_io_error_exits_3(self, tmp_path, capsys):
        blocker = tmp_path / "blocked"
        blocker.write_text("a file, not a directory")
        code = main([
            "manufactured", "--n", "16", "--max-iters", "5",
            "--out", str(blocker), "--no-plots",
        ])
        assert code == 3
        assert "I/O error" in capsys.readouterr().err

    def test_param_sweep_subcommand(self, tmp_path):
        out = tmp_path / "sweep"
        code = main([
            "param-sweep", "--alpha-values", "0.5", "--n", "8",
            "--nu-values", "0.9,1.2", "--s-values", "0.2,0.5",
            "--tol", "1e-5", "--out", str(out), "--no-plots",
        ])
        assert code == 0
        lines = (out / "summary.csv").read_text().strip().split("\n")
        assert len(lines) == 3  # header + pgd + pagd

    def test_resolution_sweep_subcommand(self, tmp_path):
        out = tmp_path / "res"
        code = main([
            "resolution-sweep", "--grid-sizes", "8,16",
            "--lipschitz-plain-values", "300", "--max-iters", "500",
            "--out", str(out), "--no-plots",
        ])
        assert code == 0
        assert (out / "iterations_vs_n.csv").exists()

    def test_ode_study_subcommand(self, tmp_path):
        out = tmp_path / "flow"
        code = main([
            "ode-study", "--t-end", "1.0", "--dt", "0.01",
            "--window-hi", "30", "--out", str(out), "--no-plots",
        ])
        assert code == 0
        assert (out / "trajectory.csv").exists()
        rates = (out / "rate_match.csv").read_text().strip().split("\n")
        assert rates[0] == "label,fitted,target,rel_deviation"
        assert len(rates) == 4


class TestDeterminism:
    def _csv_files(self, directory):
        return sorted(
            name for name in os.listdir(directory) if name.endswith(".csv")
        )

    def test_repeated_manufactured_runs_byte_identical(self, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            assert main([
                "manufactured", "--n", "16", "--max-iters", "20",
                "--out", str(out), "--no-plots",
            ]) == 0
            outs.append(out)
        names = self._csv_files(outs[0])
        assert names == self._csv_files(outs[1])
        for name in names:
            assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False), name

    def test_worker_count_does_not_change_bytes(self, tmp_path):
        outs = []
        for tag, workers in (("w1", "1"), ("w2", "2")):
            out = tmp_path / tag
            assert main([
                "param-sweep", "--alpha-values", "0.5", "--n", "8",
                "--nu-values", "0.9,1.2", "--s-values", "0.2,0.5",
                "--tol", "1e-5", "--workers", workers,
                "--out", str(out), "--no-plots",
            ]) == 0
            outs.append(out)
        for name in self._csv_files(outs[0]):
            assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False), name
