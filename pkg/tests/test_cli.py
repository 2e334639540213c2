import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from coastaltwin.cli import main
from coastaltwin.config import ScenarioGridConfig, config_from_dict, load_config
from coastaltwin.errors import ConfigError
from coastaltwin.synth import generate_scene


def run_twin(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "coastaltwin.cli", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
    )


TINY = {
    "synth": {
        "seed": 3,
        "n_buildings": 3,
        "extent_m": 70.0,
        "density_pts_per_m2": 6.0,
        "n_trees": 1,
        "n_roads": 2,
    }
}


class TestConfig:
    def test_defaults_give_24_scenarios(self):
        g = ScenarioGridConfig()
        assert len(g.time_horizons) == 3
        assert len(g.weather_conditions) == 8
        assert g.time_horizons == [2022, 2040, 2070]
        assert "EWL10R" in g.weather_conditions and "Cat1" in g.weather_conditions
        assert g.wse_for(2022, "Cat1") == 2.1336  # 7 ft exactly

    def test_unknown_keys_all_listed(self):
        with pytest.raises(ConfigError) as err:
            config_from_dict({"anchor": {"lon0": 1, "latitude": 2}, "bogus": {}, "synth": {"n": 1}})
        assert sorted(err.value.keys) == ["anchor.latitude", "bogus", "synth.n"]

    def test_mismatched_grid_lengths_rejected(self):
        with pytest.raises(ConfigError):
            config_from_dict({"scenario_grid": {"time_horizons": [2022], "year_offsets": [0, 1]}})

    def test_load_config_resolves_paths(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(TINY))
        cfg = load_config(p)
        assert cfg.path("las") == tmp_path / "cloud.las"


class TestExitCodes:
    def test_invalid_config_exits_3(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"nonsense": 1}))
        r = run_twin(["classify", "--config", str(p)], tmp_path)
        assert r.returncode == 3
        assert "nonsense" in r.stderr

    def test_missing_input_exits_2_with_path(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(TINY))
        r = run_twin(["assess", "--config", str(p)], tmp_path)
        assert r.returncode == 2
        assert "dem.asc" in r.stderr

    def test_classify_before_synth_exits_2(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(TINY))
        r = run_twin(["classify", "--config", str(p)], tmp_path)
        assert r.returncode == 2
        assert "cloud.las" in r.stderr

    def test_machine_parseable_summaries(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(TINY))
        r = run_twin(["synth", "--config", str(p)], tmp_path)
        assert r.returncode == 0
        line = r.stdout.strip().splitlines()[-1]
        fields = dict(kv.split("=", 1) for kv in line.split())
        assert fields["stage"] == "synth"
        assert int(fields["n_buildings"]) == 3
        assert float(fields["elapsed_s"]) >= 0


class TestPipeline:
    def test_all_then_stage_rerun_byte_identical(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(TINY))
        assert main(["synth", "--config", str(p)]) == 0
        assert main(["all", "--config", str(p)]) == 0
        artifacts = [
            "classified.las",
            "dem.asc",
            "footprints.geojson",
            "buildings.geojson",
            "buildings_lod2.json",
            "tileset/tileset.json",
            "scenarios.json",
            "flood/2022/Cat1.asc",
            "summaries/2070/Cat4.json",
        ]
        before = {a: (tmp_path / a).read_bytes() for a in artifacts}
        # delete one stage's outputs and rerun: resumable and reproducible
        (tmp_path / "dem.asc").unlink()
        assert main(["dem", "--config", str(p)]) == 0
        assert main(["all", "--config", str(p)]) == 0
        for a, body in before.items():
            assert (tmp_path / a).read_bytes() == body, f"{a} changed across reruns"

    def test_all_produces_24_summaries(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(TINY))
        assert main(["synth", "--config", str(p)]) == 0
        assert main(["all", "--config", str(p)]) == 0
        files = sorted((tmp_path / "summaries").glob("*/*.json"))
        assert len(files) == 24
        tiles = list((tmp_path / "tileset" / "tiles").glob("*.ctb"))
        assert tiles


class TestSynth:
    def test_same_seed_byte_identical(self, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        for d in (a, b):
            d.mkdir()
            (d / "cfg.json").write_text(json.dumps(TINY))
            assert main(["synth", "--config", str(d / "cfg.json")]) == 0
        for name in ("cloud.las", "truth.json", "assets.geojson", "roads.geojson", "adaptations.geojson"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_no_buildings_terrain_only(self):
        scene = generate_scene(1, 0, 50.0, 4.0, n_trees=0, n_roads=1)
        assert (scene.labels == 0).all()
        assert scene.truth_doc()["buildings"] == []

    def test_truth_footprint_count(self):
        scene = generate_scene(2, 5, 100.0, 4.0)
        assert len(scene.truth_doc()["buildings"]) == 5

    def test_asset_categories_at_least_four(self):
        scene = generate_scene(4, 2, 80.0, 4.0)
        assert len({a["category"] for a in scene.assets}) >= 4

    def test_point_noise_present(self):
        scene = generate_scene(5, 0, 40.0, 6.0, n_trees=0)
        z = scene.cloud.xyz[:, 2]
        detrended = z - scene.terrain.elevation(scene.cloud.xyz[:, 0], scene.cloud.xyz[:, 1])
        assert 0.01 < float(np.std(detrended)) < 0.08
