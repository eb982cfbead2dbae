"""CLI surface: exit codes, artifacts, determinism, config rejection."""

from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from backupcbf import __version__
from backupcbf.benchmarks import di_bundle
from backupcbf.cli import main
from backupcbf.config import (
    ConfigError,
    load_config,
    scan_job_from_config,
    scenario_from_config,
    validate_job_from_config,
)
from backupcbf.sets import di_viability_oracle


def write_cfg(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def sim_cfg(tmp_path, out, **extra):
    payload = {"bundle": "double_integrator", "variant": "bcbf",
               "x0": [-0.5, 0.0], "duration": 0.05, "dt": 0.01,
               "out": str(out)}
    payload.update(extra)
    return write_cfg(tmp_path, "job.json", payload)


class TestSimulateCommand:
    def test_writes_trajectory_and_meta(self, tmp_path, capsys):
        out = tmp_path / "run"
        rc = main(["simulate", sim_cfg(tmp_path, out)])
        assert rc == 0
        lines = (out / "trajectory.csv").read_text().splitlines()
        assert len(lines) == 1 + 6  # header + duration/dt + 1 rows
        meta = json.loads((out / "meta.json").read_text())
        assert meta["version"] == __version__
        assert meta["rows"] == 6 and meta["completed"]
        assert meta["config"]["variant"] == "bcbf"
        assert "runtime_seconds" in meta
        assert "wrote" in capsys.readouterr().out

    def test_quiet_silences_stdout(self, tmp_path, capsys):
        rc = main(["simulate", sim_cfg(tmp_path, tmp_path / "r"), "--quiet"])
        assert rc == 0
        assert capsys.readouterr().out == ""

    def test_deterministic_csv_bytes(self, tmp_path):
        rc1 = main(["simulate", sim_cfg(tmp_path, tmp_path / "a"), "--quiet"])
        rc2 = main(["simulate", sim_cfg(tmp_path, tmp_path / "b"), "--quiet"])
        assert rc1 == rc2 == 0
        a = (tmp_path / "a" / "trajectory.csv").read_bytes()
        b = (tmp_path / "b" / "trajectory.csv").read_bytes()
        assert a == b

    def test_cli_out_flag_wins(self, tmp_path):
        cfg = sim_cfg(tmp_path, tmp_path / "from_config")
        rc = main(["simulate", cfg, "--out", str(tmp_path / "flag"), "--quiet"])
        assert rc == 0
        assert (tmp_path / "flag" / "trajectory.csv").exists()
        assert not (tmp_path / "from_config").exists()

    def test_env_var_default_out(self, tmp_path, monkeypatch):
        monkeypatch.setenv("BACKUPCBF_OUT", str(tmp_path / "envout"))
        payload = {"bundle": "double_integrator", "variant": "bcbf",
                   "x0": [-0.5, 0.0], "duration": 0.02, "dt": 0.01}
        rc = main(["simulate", write_cfg(tmp_path, "job.json", payload),
                   "--quiet"])
        assert rc == 0
        assert (tmp_path / "envout" / "trajectory.csv").exists()

    def test_seed_flag_lands_in_meta(self, tmp_path):
        out = tmp_path / "seeded"
        rc = main(["simulate", sim_cfg(tmp_path, out), "--seed", "7", "--quiet"])
        assert rc == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["config"]["seed"] == 7


class TestConfigRejection:
    def test_unknown_key_exits_2_and_writes_nothing(self, tmp_path, capsys):
        out = tmp_path / "never"
        cfg = sim_cfg(tmp_path, out, dtt=0.01)
        assert main(["simulate", cfg]) == 2
        assert "unknown config keys: dtt" in capsys.readouterr().err
        assert not out.exists()

    def test_unknown_override_key_lists_it(self, tmp_path, capsys):
        cfg = sim_cfg(tmp_path, tmp_path / "never",
                      overrides={"rho": 0.15, "walls": 2})
        assert main(["simulate", cfg]) == 2
        assert "unknown override keys for double_integrator: walls" \
            in capsys.readouterr().err

    def test_malformed_json_exits_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["simulate", str(bad)]) == 2
        assert "not valid JSON" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert main(["simulate", str(tmp_path / "ghost.json")]) == 2
        assert "not found" in capsys.readouterr().err

    def test_invalid_override_value_exits_2(self, tmp_path, capsys):
        # schema-valid name, physically invalid value: bundle factory rejects
        cfg = sim_cfg(tmp_path, tmp_path / "never", overrides={"rho": 0.2})
        assert main(["simulate", cfg]) == 2
        assert "saturates inside the backup set" in capsys.readouterr().err

    def test_bad_variant_and_missing_keys(self, tmp_path):
        assert main(["simulate", write_cfg(tmp_path, "v.json", {
            "bundle": "double_integrator", "variant": "gbx",
            "x0": [0, 0], "duration": 1.0})]) == 2
        assert main(["simulate", write_cfg(tmp_path, "d.json", {
            "bundle": "double_integrator", "variant": "gb",
            "x0": [0, 0]})]) == 2
        assert main(["simulate", write_cfg(tmp_path, "b.json", {
            "variant": "gb", "x0": [0, 0], "duration": 1.0})]) == 2


class TestScanSetCommand:
    def scan_cfg(self, tmp_path, out, **extra):
        payload = {"bundle": "double_integrator", "resolution": [7, 7],
                   "out": str(out)}
        payload.update(extra)
        return write_cfg(tmp_path, "scan.json", payload)

    def test_emits_three_grids_and_meta(self, tmp_path):
        out = tmp_path / "scan"
        rc = main(["scan-set", self.scan_cfg(tmp_path, out), "--quiet"])
        assert rc == 0
        names = ["grid_bcbf.csv", "grid_gb-linear.csv", "grid_gb-timeopt.csv"]
        for name in names:
            assert (out / name).exists()
        meta = json.loads((out / "meta.json").read_text())
        assert meta["artifacts"] == names
        assert set(meta["inside_counts"]) == {"bcbf", "gb-linear", "gb-timeopt"}

    def test_kernel_and_level_columns_match(self, tmp_path):
        out = tmp_path / "scan"
        main(["scan-set", self.scan_cfg(tmp_path, out), "--quiet"])
        with (out / "grid_bcbf.csv").open() as fh:
            rows = list(csv.reader(fh))[1:]
        states = np.array([[float(r[0]), float(r[1])] for r in rows])
        h_b = np.array([float(r[2]) for r in rows])
        kernel = np.array([int(r[6]) for r in rows], dtype=bool)
        np.testing.assert_array_equal(kernel, di_viability_oracle(states, 1.0))
        np.testing.assert_array_equal(h_b, np.asarray(di_bundle().barrier.value(states)))

    def test_deterministic_grid_bytes(self, tmp_path):
        main(["scan-set", self.scan_cfg(tmp_path, tmp_path / "s1"), "--quiet"])
        main(["scan-set", self.scan_cfg(tmp_path, tmp_path / "s2"), "--quiet"])
        for name in ("grid_bcbf.csv", "grid_gb-linear.csv", "grid_gb-timeopt.csv"):
            assert (tmp_path / "s1" / name).read_bytes() \
                == (tmp_path / "s2" / name).read_bytes()

    def test_rejects_quadrotor(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "scan.json", {"bundle": "quadrotor"})
        assert main(["scan-set", cfg]) == 2
        assert "double_integrator bundle only" in capsys.readouterr().err

    def test_rejects_bad_window(self, tmp_path):
        assert main(["scan-set", write_cfg(tmp_path, "w.json", {
            "bundle": "double_integrator", "window": [[1.0, -1.0], [-2, 2]],
        })]) == 2


class TestValidateBackupCommand:
    def test_shipped_pair_passes(self, tmp_path, capsys):
        out = tmp_path / "audit"
        cfg = write_cfg(tmp_path, "v.json", {
            "bundle": "double_integrator", "samples": 150, "out": str(out)})
        assert main(["validate-backup", cfg]) == 0
        meta = json.loads((out / "meta.json").read_text())
        assert meta["report"]["passed"] is True
        assert meta["report"]["failures"] == []
        assert "passed" in capsys.readouterr().out

    def test_inflated_level_set_fails_with_report(self, tmp_path, capsys):
        out = tmp_path / "audit"
        cfg = write_cfg(tmp_path, "v.json", {
            "bundle": "double_integrator", "samples": 150,
            "rho_scale": 100.0, "out": str(out)})
        assert main(["validate-backup", cfg]) == 2
        meta = json.loads((out / "meta.json").read_text())
        assert meta["report"]["passed"] is False
        assert any("saturates" in f for f in meta["report"]["failures"])
        assert "FAILED" in capsys.readouterr().out

    def test_invalid_constants_exit_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, "v.json", {
            "bundle": "quadrotor",
            "overrides": {"backup_gains": [8.0, 0.2, 0.09, 0.6, 0.5, 0.05]}})
        assert main(["validate-backup", cfg]) == 2
        assert "not Hurwitz" in capsys.readouterr().err


class TestVersionCommand:
    def test_prints_version(self, capsys):
        assert main(["version"]) == 0
        assert capsys.readouterr().out.strip() == __version__


class TestConfigHelpers:
    def test_load_config_requires_object(self, tmp_path):
        path = tmp_path / "list.json"
        path.write_text("[1, 2]")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(path)

    def test_scenario_type_errors(self):
        base = {"bundle": "double_integrator", "variant": "gb",
                "x0": [0.0, 0.0], "duration": 1.0}
        with pytest.raises(ConfigError, match="'dt' must be a number"):
            scenario_from_config({**base, "dt": "fast"})
        with pytest.raises(ConfigError, match="'x0' must be a list of 2"):
            scenario_from_config({**base, "x0": [0.0, "a"]})
        with pytest.raises(ConfigError, match="'seed' must be an integer"):
            scenario_from_config({**base, "seed": 1.5})
        with pytest.raises(ConfigError, match="only meaningful for the agb"):
            scenario_from_config({**base, "theta0": [60.0, 48.0]})

    def test_scenario_defaults(self):
        s = scenario_from_config({"bundle": "quadrotor", "variant": "gb",
                                  "x0": [-1, 3, 0, 0, 0, 0], "duration": 0.1})
        assert s.dt == 0.02 and s.seed == 0 and s.overrides == {}

    def test_scan_defaults(self):
        job = scan_job_from_config({"bundle": "double_integrator"})
        assert job.window == ((-1.2, 1.2), (-2.0, 2.0))
        assert job.resolution == (201, 201)

    def test_scan_resolution_type(self):
        with pytest.raises(ConfigError, match="two integers"):
            scan_job_from_config({"bundle": "double_integrator",
                                  "resolution": [201.0, 201]})

    def test_validate_bounds(self):
        with pytest.raises(ConfigError, match="at least 1"):
            validate_job_from_config({"bundle": "quadrotor", "samples": 0})
        with pytest.raises(ConfigError, match="must be positive"):
            validate_job_from_config({"bundle": "quadrotor", "rho_scale": -1.0})

    def test_shipped_configs_match_builders(self):
        # configs/ mirrors scenarios.py; keep them honest
        from pathlib import Path

        from backupcbf.scenarios import shipped_scenario

        configs = Path(__file__).resolve().parents[1] / "configs"
        pairs = [("di_wall_bcbf.json", "di-wall-bcbf"),
                 ("di_wall_gb.json", "di-wall-gb"),
                 ("di_wall_agb.json", "di-wall-agb"),
                 ("quad_landing_bcbf.json", "quad-landing-bcbf"),
                 ("quad_landing_gb.json", "quad-landing-gb"),
                 ("quad_landing_agb.json", "quad-landing-agb")]
        for fname, name in pairs:
            cfg = load_config(configs / fname)
            built = scenario_from_config(cfg)
            want = shipped_scenario(name)
            assert built.bundle_id == want.bundle_id
            assert built.variant == want.variant
            np.testing.assert_array_equal(built.x0, want.x0)
            assert built.dt == want.dt and built.duration == want.duration
            assert built.gamma == want.gamma
