import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from isacsim.cli import main as cli_main
from isacsim.config import ConfigError, load_config
from isacsim.runner import (
    packaged_golden_dir,
    read_cir_json,
    run_analyze,
    run_simulate,
    run_sounder_roundtrip,
    run_validate,
    simulate_channels,
    write_cir_json,
)

CONFIG_DIR = Path(__file__).parents[1] / "demos" / "configs"


def scen1_like(tmp_path, **overrides) -> Path:
    """A 28 GHz / 0.6 GHz bi-static corridor scenario with a metal-plate target."""
    doc = {
        "name": "scen1_like",
        "carrier_freq_hz": 28e9,
        "bandwidth_hz": 0.6e9,
        "sensing_mode": "bi_static",
        "tx": {"position_m": [0, 0, 1.5], "antenna": {"kind": "omni"}},
        "rx": {"position_m": [7.45, 0, 1.5],
               "antenna": {"kind": "horn", "hpbw_deg": 10.31, "peak_gain_db": 25.0}},
        "targets": [{
            "position_m": [4.45, 1.0, 1.5],
            "rcs": {"variant": "constant", "sigma_dbsm": 40.0},
            "sublink": {"n_clusters": 2, "rays_per_cluster": 3, "delay_scale_ns": 10.0,
                        "angle_spread_deg": 5.0, "k_factor_db": 6.0},
        }],
        "background": {"mode": "statistical",
                       "profile": {"n_clusters": 5, "rays_per_cluster": 4,
                                   "delay_scale_ns": 30.0}},
        "pcf": {"condition": "los_los"},
        "scan": {"start_deg": 0.0, "stop_deg": 360.0, "step_deg": 5.0},
        "seed": 42,
        "outputs": str(tmp_path / "out"),
    }
    doc.update(overrides)
    p = tmp_path / "scenario.json"
    p.write_text(json.dumps(doc))
    return p


class TestLoadConfig:
    def test_table1_style_config_valid(self, tmp_path):
        cfg = load_config(scen1_like(tmp_path))
        assert cfg.carrier_freq_hz == 28e9
        assert cfg.bandwidth_hz == 0.6e9
        assert cfg.sensing_mode == "bi_static"
        assert len(cfg.scan_angles_deg()) == 72

    def test_step_must_divide_range(self, tmp_path):
        path = scen1_like(tmp_path, scan={"start_deg": 0.0, "stop_deg": 360.0,
                                          "step_deg": 7.0})
        with pytest.raises(ConfigError, match="does not divide"):
            load_config(path)

    def test_monostatic_position_mismatch(self, tmp_path):
        path = scen1_like(tmp_path, sensing_mode="mono_static")
        with pytest.raises(ConfigError, match="tx.position_m == rx.position_m"):
            load_config(path)

    def test_all_violations_collected(self, tmp_path):
        path = scen1_like(tmp_path, bandwidth_hz=0.0, seed="not-an-int",
                          scan={"start_deg": 0.0, "stop_deg": 360.0, "step_deg": 7.0})
        with pytest.raises(ConfigError) as err:
            load_config(path)
        assert len(err.value.violations) == 3

    def test_pcf_value_range(self, tmp_path):
        path = scen1_like(tmp_path, pcf={"value": 2.0})
        with pytest.raises(ConfigError, match="outside"):
            load_config(path)

    def test_background_mode_tied_to_sensing_mode(self, tmp_path):
        path = scen1_like(tmp_path, background={
            "mode": "geometric",
            "scatterers": [{"position_m": [3.0, 0.0, 1.5]}]})
        with pytest.raises(ConfigError, match="bi_static sensing requires"):
            load_config(path)

    def test_demo_configs_all_valid(self):
        for cfg_path in sorted(CONFIG_DIR.glob("*.json")):
            if "scene" in cfg_path.name:
                continue
            load_config(cfg_path)


class TestSimulateChannels:
    def test_target_cardinality_pre_merge(self, tmp_path):
        # sub-links carry 1 LOS + 2x3 cluster rays = 7 rays each;
        # the concatenated target channel pairs all of them
        cfg = load_config(scen1_like(tmp_path))
        sim = simulate_channels(cfg)
        assert len(sim.target_cir) == 7 * 7

    def test_no_targets_leaves_background_only(self, tmp_path):
        cfg = load_config(scen1_like(tmp_path, targets=[]))
        sim = simulate_channels(cfg)
        assert len(sim.target_cir) == 0
        assert len(sim.background_cir) > 0
        assert sim.pl_tar_db == ()

    def test_pcf_scales_background_power(self, tmp_path):
        base = simulate_channels(load_config(scen1_like(tmp_path, pcf={"value": 1.0})))
        scaled = simulate_channels(load_config(scen1_like(tmp_path, pcf={"value": 0.5})))
        ratio = scaled.background_cir.total_power() / base.background_cir.total_power()
        assert ratio == pytest.approx(0.5, rel=1e-12)

    def test_target_doppler_from_velocity(self, tmp_path):
        path = scen1_like(tmp_path, targets=[{
            "position_m": [4.45, 1.0, 1.5],
            "velocity_mps": [3.0, 0.0, 0.0],
            "rcs": {"variant": "constant", "sigma_dbsm": 10.0},
            "sublink": {"n_clusters": 0},
        }])
        sim = simulate_channels(load_config(path))
        assert len(sim.target_cir) == 1
        assert sim.target_cir.paths[0].doppler != 0.0


class TestRunSimulate:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = load_config(scen1_like(tmp_path))
        r1 = run_simulate(cfg, out_dir=tmp_path / "a")
        r2 = run_simulate(cfg, out_dir=tmp_path / "b")
        assert r1.manifest == r2.manifest
        for name in ("target.json", "background.json", "padp.csv", "report.json"):
            assert (tmp_path / "a" / name).exists()

    def test_seed_changes_output(self, tmp_path):
        r1 = run_simulate(load_config(scen1_like(tmp_path)), out_dir=tmp_path / "a")
        r2 = run_simulate(load_config(scen1_like(tmp_path, seed=43)),
                          out_dir=tmp_path / "b")
        assert r1.manifest != r2.manifest

    def test_empty_target_run(self, tmp_path):
        cfg = load_config(scen1_like(tmp_path, targets=[]))
        run_simulate(cfg, out_dir=tmp_path / "k0")
        doc = json.loads((tmp_path / "k0" / "target.json").read_text())
        assert doc["paths"] == []
        bg = json.loads((tmp_path / "k0" / "background.json").read_text())
        assert len(bg["paths"]) > 0

    def test_output_root_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("ISACSIM_OUTPUT_ROOT", str(tmp_path / "root"))
        cfg = load_config(scen1_like(tmp_path))
        report = run_simulate(cfg)
        assert Path(report.out_dir) == tmp_path / "root" / "scen1_like"
        assert (tmp_path / "root" / "scen1_like" / "padp.csv").exists()

    def test_cir_json_round_trip(self, tmp_path):
        cfg = load_config(scen1_like(tmp_path))
        sim = simulate_channels(cfg)
        write_cir_json(tmp_path / "t.json", sim.target_cir)
        back = read_cir_json(tmp_path / "t.json")
        assert len(back) == len(sim.target_cir)
        for p, q in zip(back.paths, sim.target_cir.paths):
            assert p.amp == q.amp
            assert p.delay == q.delay
            assert p.origin == q.origin


class TestRunValidate:
    def test_packaged_golden_passes(self):
        report = run_validate()
        assert report.ok
        assert len(report.rows) == 46

    def test_perturbed_golden_fails_that_row_only(self, tmp_path):
        golden = packaged_golden_dir()
        for f in golden.glob("*.csv"):
            shutil.copy(f, tmp_path / f.name)
        t2 = tmp_path / "concatenated_power_checks.csv"
        text = t2.read_text().replace("-106.39", "-109.39")
        t2.write_text(text)
        report = run_validate(tmp_path)
        assert not report.ok
        failed = [r.name for r in report.rows if not r.passed]
        # the perturbed concatenated power breaks its row and the
        # dependent delta-P rows for 1-A
        assert any("1-A" in n for n in failed)
        assert all("1-A" in n or "delta-P" in n for n in failed)

    def test_missing_golden_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            run_validate(tmp_path)


class TestRunAnalyze:
    def test_analyze_finds_direct_path(self, tmp_path):
        # strong constant-RCS target, LOS-only sub-links: analyze tags
        # the concatenated direct path and the scene classifies it
        path = scen1_like(tmp_path, targets=[{
            "position_m": [4.45, 1.0, 1.5],
            "rcs": {"variant": "constant", "sigma_dbsm": 40.0},
            "sublink": {"n_clusters": 0},
        }])
        cfg = load_config(path)
        run_simulate(cfg, out_dir=tmp_path / "run")
        scene = tmp_path / "scene.json"
        scene.write_text(json.dumps({
            "tx_m": [0, 0, 1.5], "rx_m": [7.45, 0, 1.5],
            "target_m": [4.45, 1.0, 1.5], "reflectors": [],
        }))
        paths = run_analyze(tmp_path / "run", scene_path=scene,
                            peak_threshold_db=80.0)
        assert len(paths) >= 1
        direct = [p for p in paths if p["bounce_order"] == 0]
        assert len(direct) == 1
        assert (tmp_path / "run" / "paths.json").exists()


class TestSounderRoundtripPipeline:
    def test_reports_full_recovery(self, tmp_path):
        path = scen1_like(tmp_path, targets=[{
            "position_m": [4.45, 1.0, 1.5],
            "rcs": {"variant": "constant", "sigma_dbsm": 40.0},
            "sublink": {"n_clusters": 0},
        }], background={"mode": "geometric", "scatterers": [
            {"position_m": [12.0, -6.0, 1.5], "label": "wall"}]},
            sensing_mode="mono_static",
            rx={"position_m": [0, 0, 1.5], "antenna": {"kind": "omni"}},
            tx={"position_m": [0, 0, 1.5], "antenna": {"kind": "omni"}})
        cfg = load_config(path)
        doc = run_sounder_roundtrip(cfg, out_dir=tmp_path / "snd")
        assert doc["n_recovered"] == doc["n_resolvable"]
        assert all(m["matched_truth_ns"] is not None for m in doc["recovered"])
        assert (tmp_path / "snd" / "capture.bin").exists()
        assert (tmp_path / "snd" / "capture.bin.json").exists()


class TestCli:
    def test_simulate_and_analyze(self, tmp_path, capsys):
        cfg_path = scen1_like(tmp_path)
        assert cli_main(["simulate", str(cfg_path), "--out", str(tmp_path / "run")]) == 0
        assert cli_main(["analyze", str(tmp_path / "run"), "--threshold-db", "90"]) == 0
        out = capsys.readouterr().out
        assert "sha256" in out
        assert "paths.json" in out

    def test_validate_exit_codes(self, tmp_path, capsys):
        assert cli_main(["validate"]) == 0
        golden = packaged_golden_dir()
        for f in golden.glob("*.csv"):
            shutil.copy(f, tmp_path / f.name)
        t2 = tmp_path / "concatenated_power_checks.csv"
        t2.write_text(t2.read_text().replace("-106.39", "-109.39"))
        assert cli_main(["validate", str(tmp_path)]) == 1

    def test_bad_config_exit_code(self, tmp_path, capsys):
        cfg_path = scen1_like(tmp_path, bandwidth_hz=-1.0)
        assert cli_main(["simulate", str(cfg_path)]) == 2
        assert "bandwidth_hz" in capsys.readouterr().err

    def test_sounder_roundtrip_command(self, tmp_path, capsys):
        cfg_path = scen1_like(tmp_path)
        assert cli_main(["sounder-roundtrip", str(cfg_path),
                         "--out", str(tmp_path / "snd")]) == 0
        assert "chip-resolvable" in capsys.readouterr().out
