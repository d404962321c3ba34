import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from chaosctrl.cli import main
from chaosctrl.config import (
    ConfigError,
    load_preset,
    parse_config,
    preset_names,
    validate,
)
from chaosctrl.runner import run


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


BASE_FIXED_POINT = {
    "experiment": "fixed-point",
    "kappa": 0.42,
    "gamma": 0.42,
    "p_values": [0.4, 0.8],
    "L_values": [4],
    "bins_per_octave": 4,
    "tol": 1e-6,
    "seed": 3,
}


class TestConfig:
    def test_round_trip_identity(self):
        cfg = parse_config(dict(BASE_FIXED_POINT))
        again = parse_config(json.loads(cfg.serialize()))
        assert again.data == cfg.data
        assert again.content_hash() == cfg.content_hash()

    def test_unknown_keys_rejected(self):
        bad = dict(BASE_FIXED_POINT, typo_key=1)
        with pytest.raises(ConfigError, match="typo_key"):
            parse_config(bad)

    def test_unknown_experiment_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"experiment": "nonsense"})

    def test_out_dir_not_hashed(self):
        a = parse_config(dict(BASE_FIXED_POINT))
        b = parse_config(dict(BASE_FIXED_POINT, out_dir="elsewhere"))
        assert a.content_hash() == b.content_hash()

    def test_validate_diagnostics(self):
        diags = validate(
            {
                "experiment": "catmap",
                "N_values": [63],
                "theta": 0.8,
                "p_values": [1.4],
            }
        )
        msgs = [m for _, m in diags]
        assert any("even" in m for m in msgs)
        assert any("outside [0, 1]" in m for m in msgs)

    def test_validate_warns_off_lattice_shift(self):
        diags = validate(dict(BASE_FIXED_POINT))
        assert any(level == "warning" for level, _ in diags)
        # an aligned strength stays quiet: 2 kappa = two bins of ln2/4
        aligned = dict(BASE_FIXED_POINT, kappa=float(np.log(2.0)) / 4.0)
        assert not any(level == "warning" for level, _ in validate(aligned))

    def test_empty_sweep_rejected(self):
        bad = dict(BASE_FIXED_POINT, p_values=[])
        with pytest.raises(ConfigError, match="non-empty"):
            parse_config(bad)

    def test_fit_requires_time_series(self):
        bad = dict(BASE_FIXED_POINT, fit={"t_window": [10, 100]})
        with pytest.raises(ConfigError, match="time_series"):
            parse_config(bad)

    def test_presets_all_parse(self):
        for name in preset_names():
            cfg = load_preset(name)
            assert cfg.experiment in (
                "fixed-point",
                "catmap",
                "trajectories",
            )


class TestRunner:
    def test_fixed_point_run_layout_and_determinism(self, tmp_path):
        cfg = parse_config(dict(BASE_FIXED_POINT, out_dir=str(tmp_path / "out")))
        res1 = run(cfg)
        data1 = (res1.run_dir / "data.csv").read_bytes()
        manifest = json.loads((res1.run_dir / "manifest.json").read_text())
        assert manifest["experiment"] == "fixed-point"
        assert manifest["results"]["p_c"] == 0.5
        res2 = run(cfg)
        assert res2.run_dir == res1.run_dir
        assert (res2.run_dir / "data.csv").read_bytes() == data1

    def test_csv_header_schema(self, tmp_path):
        cfg = parse_config(dict(BASE_FIXED_POINT, out_dir=str(tmp_path / "out")))
        res = run(cfg)
        header = (res.run_dir / "data.csv").read_text().splitlines()[0]
        assert header == "p,L,t,rho00,residual,clamped_mass"

    def test_equivalence_run(self, tmp_path):
        cfg = parse_config(
            {
                "experiment": "equivalence",
                "kappa": 0.42,
                "gamma_ou": 0.45,
                "D_ou": 0.225,
                "p": 0.7,
                "n_traj": 8,
                "n_steps": 50,
                "seed": 1,
                "out_dir": str(tmp_path / "out"),
            }
        )
        res = run(cfg)
        assert res.manifest["results"]["matched"] is True
        assert res.manifest["results"]["max_deviation"] <= 1e-12

    def test_failure_leaves_no_run_dir(self, tmp_path):
        cfg = parse_config(
            dict(
                BASE_FIXED_POINT,
                tol=1e-14,
                max_iter=2,
                out_dir=str(tmp_path / "out"),
            )
        )
        from chaosctrl.distribution import ConvergenceError

        with pytest.raises(ConvergenceError):
            run(cfg)
        out_root = tmp_path / "out" / "fixed-point"
        leftovers = [p for p in out_root.iterdir()] if out_root.exists() else []
        assert all(not p.name.startswith(".tmp") for p in leftovers)
        assert cfg.content_hash() not in [p.name for p in leftovers]


class TestCli:
    def test_exit_code_config_error(self, tmp_path):
        path = write_config(tmp_path, {"experiment": "fixed-point", "bogus": 1})
        assert main(["fixed-point", "--config", str(path)]) == 2

    def test_exit_code_numerical_failure(self, tmp_path):
        data = dict(BASE_FIXED_POINT, tol=1e-14, max_iter=2, out_dir=str(tmp_path))
        path = write_config(tmp_path, data)
        assert main(["fixed-point", "--config", str(path)]) == 3

    def test_validate_subcommand(self, tmp_path):
        bad = write_config(
            tmp_path,
            {"experiment": "catmap", "N_values": [63], "theta": 0.8, "p_values": [0.5]},
            name="bad.json",
        )
        assert main(["validate", "--config", str(bad)]) == 2
        good = write_config(tmp_path, BASE_FIXED_POINT, name="good.json")
        assert main(["validate", "--config", str(good)]) == 0

    def test_flag_overrides_and_run(self, tmp_path, capsys):
        rc = main(
            [
                "fp-predict",
                "--kappa", "0.2",
                "--gamma", "0.2",
                "--p", "0.6",
                "--n-max", "3",
                "--seed", "1",
                "--out", str(tmp_path / "out"),
            ]
        )
        assert rc == 0
        run_dir = Path(capsys.readouterr().out.strip())
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["results"]["xi"] == pytest.approx(1.0416666, rel=1e-5)

    def test_catmap_spec_flags(self, tmp_path, capsys):
        rc = main(
            [
                "catmap",
                "--n", "16",
                "--theta", "0.8",
                "--p", "0.55",
                "--traj", "10",
                "--steps", "12",
                "--seed", "7",
                "--out", str(tmp_path / "out"),
            ]
        )
        assert rc == 0
        run_dir = Path(capsys.readouterr().out.strip())
        header = (run_dir / "data.csv").read_text().splitlines()[0]
        assert header == "N,theta,p,t,rho00_mean,var_log_n"
        manifest = json.loads((run_dir / "manifest.json").read_text())
        assert manifest["results"]["defects"]["16"]["hbar"] > 0

    def test_console_script_entry_point(self):
        proc = subprocess.run(
            [sys.executable, "-m", "chaosctrl.cli", "--list-presets"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "fig1" in proc.stdout
