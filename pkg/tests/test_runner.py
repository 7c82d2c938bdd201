import json

import numpy as np
import pytest

from freeclt import ConfigError, parse_config, run
from freeclt.cli import main as cli_main


def _berry_config(out, n_list=(2, 4, 8, 16), replicas=8, seed=5):
    return {
        "version": 1,
        "experiment": "berry",
        "ensemble": {"kind": "FreeSumSigns", "dim": 32, "extent": 16, "seed": seed},
        "n_list": list(n_list),
        "gamma_grid": [{"x": 0.0, "nu": 1.0}],
        "replicas": replicas,
        "seed": seed,
        "out": str(out),
    }


class TestParseConfig:
    def test_minimal_spectrum_defaults(self):
        cfg = parse_config(
            json.dumps(
                {
                    "version": 1,
                    "experiment": "spectrum",
                    "ensemble": {"kind": "GUE", "dim": 8, "extent": 2, "seed": 1},
                    "replicas": 2,
                    "seed": 1,
                }
            )
        )
        assert cfg.out == "out"
        assert cfg.radius_lag == 0
        assert cfg.ensemble.kind == "GUE"

    def test_zero_nu_named_in_error(self):
        bad = {
            "version": 1,
            "experiment": "berry",
            "ensemble": {"kind": "GUE", "dim": 8, "extent": 2, "seed": 1},
            "n_list": [2],
            "gamma_grid": [{"x": 0.0, "nu": 0}],
            "replicas": 2,
            "seed": 1,
        }
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(bad))
        assert any("gamma_grid[0].nu" in v and "> 0" in v for v in err.value.violations)

    def test_duplicate_key_rejected(self):
        text = '{"version": 1, "version": 1, "experiment": "spectrum"}'
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert any("duplicate key" in v for v in err.value.violations)

    def test_unknown_key_rejected(self):
        bad = {
            "version": 1,
            "experiment": "spectrum",
            "ensemble": {"kind": "GUE", "dim": 8, "extent": 2, "seed": 1},
            "replicas": 2,
            "seed": 1,
            "surprise": True,
        }
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(bad))
        assert any("unknown key 'surprise'" in v for v in err.value.violations)

    def test_violations_aggregate(self):
        bad = {
            "version": 3,
            "experiment": "nope",
            "ensemble": {"kind": "nope", "dim": 8, "extent": 2, "seed": 1},
            "replicas": 0,
            "seed": 1,
        }
        with pytest.raises(ConfigError) as err:
            parse_config(json.dumps(bad))
        assert len(err.value.violations) >= 3


class TestRunDeterminism:
    def test_identical_config_identical_bytes(self, tmp_path):
        cfg_a = parse_config(json.dumps(_berry_config(tmp_path / "a")))
        cfg_b = parse_config(json.dumps(_berry_config(tmp_path / "b")))
        run(cfg_a, threads=1)
        run(cfg_b, threads=1)
        for name in ("berry.csv", "berry_grid.csv", "fit.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_thread_count_invariance(self, tmp_path):
        cfg_a = parse_config(json.dumps(_berry_config(tmp_path / "t1")))
        cfg_b = parse_config(json.dumps(_berry_config(tmp_path / "t8")))
        run(cfg_a, threads=1)
        run(cfg_b, threads=8)
        for name in ("berry.csv", "berry_grid.csv", "fit.csv"):
            assert (tmp_path / "t1" / name).read_bytes() == (tmp_path / "t8" / name).read_bytes()

    def test_manifest_written(self, tmp_path):
        cfg = parse_config(json.dumps(_berry_config(tmp_path / "m")))
        manifest = run(cfg, threads=2)
        on_disk = json.loads((tmp_path / "m" / "manifest.json").read_text())
        assert on_disk["status"] == "ok"
        assert on_disk["config_hash"] == manifest.config_hash
        assert set(on_disk["outputs"]) == {"berry.csv", "berry_grid.csv", "fit.csv", "berry.svg"}

    def test_failed_run_keeps_partial_manifest(self, tmp_path):
        raw = {
            "version": 1,
            "experiment": "mixing",
            "ensemble": {"kind": "GUE", "dim": 8, "extent": 3, "seed": 1},
            "b_list": [5],
            "kinds": ["s"],
            "replicas": 3,
            "seed": 1,
            "out": str(tmp_path / "fail"),
        }
        cfg = parse_config(json.dumps(raw))
        with pytest.raises(Exception):
            run(cfg, threads=1)
        on_disk = json.loads((tmp_path / "fail" / "manifest.json").read_text())
        assert on_disk["status"] == "failed"
        assert on_disk["error"]


class TestCsvSchemas:
    def test_berry_columns(self, tmp_path):
        cfg = parse_config(json.dumps(_berry_config(tmp_path / "s")))
        run(cfg, threads=1)
        header = (tmp_path / "s" / "berry.csv").read_text().splitlines()[0]
        assert header == "ensemble,m,n,gamma_re,gamma_im,delta,stderr,replicas,seed"
        header = (tmp_path / "s" / "fit.csv").read_text().splitlines()[0]
        assert header == "ensemble,gamma_re,gamma_im,slope,intercept,residual,n_points"

    def test_radius_columns(self, tmp_path):
        raw = {
            "version": 1,
            "experiment": "radius",
            "ensemble": {"kind": "StationaryWishartField", "dim": 12, "extent": 8, "seed": 2, "rho": 0.4},
            "replicas": 5,
            "seed": 2,
            "radius_lag": 2,
            "out": str(tmp_path / "r"),
        }
        run(parse_config(json.dumps(raw)), threads=1)
        lines = (tmp_path / "r" / "radius.csv").read_text().splitlines()
        assert lines[0] == "ensemble,m,n,lag,contribution,sigma2_hat,stderr,replicas,seed"
        assert len(lines) == 4

    def test_svg_emitted(self, tmp_path):
        raw = {
            "version": 1,
            "experiment": "spectrum",
            "ensemble": {"kind": "FreeSumSigns", "dim": 24, "extent": 1, "seed": 3},
            "replicas": 4,
            "seed": 3,
            "out": str(tmp_path / "svg"),
        }
        run(parse_config(json.dumps(raw)), threads=1)
        text = (tmp_path / "svg" / "spectrum.svg").read_text()
        assert text.startswith("<svg") and text.endswith("</svg>")


class TestCli:
    def test_ok_exit(self, tmp_path):
        cfg = _berry_config(tmp_path / "cli")
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        assert cli_main(["berry", "--config", str(p)]) == 0

    def test_config_error_exit(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text('{"version": 2}')
        assert cli_main(["spectrum", "--config", str(p)]) == 2

    def test_experiment_mismatch_is_config_error(self, tmp_path):
        cfg = _berry_config(tmp_path / "mm")
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        assert cli_main(["spectrum", "--config", str(p)]) == 2

    def test_noise_floor_exit(self, tmp_path):
        cfg = _berry_config(tmp_path / "nf", n_list=(2, 4), replicas=6)
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        assert cli_main(["berry", "--config", str(p)]) == 4

    def test_missing_config_file(self, tmp_path):
        assert cli_main(["berry", "--config", str(tmp_path / "absent.json")]) == 2

    def test_seed_override_changes_hash(self, tmp_path):
        cfg = _berry_config(tmp_path / "so", n_list=(2, 4, 8, 16), replicas=4)
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(cfg))
        assert cli_main(["berry", "--config", str(p), "--seed", "99", "--out", str(tmp_path / "so2")]) == 0
        a = json.loads((tmp_path / "so2" / "manifest.json").read_text())
        assert a["seed"] == 99
