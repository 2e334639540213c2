import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles module

from coastaltwin.cli import (
    stage_assess,
    stage_classify,
    stage_dem,
    stage_flood,
    stage_footprints,
    stage_reconstruct,
    stage_synth,
    stage_tile,
)
from coastaltwin.config import load_config

SMALL_TOWN = {
    "synth": {
        "seed": 7,
        "n_buildings": 8,
        "extent_m": 120.0,
        "density_pts_per_m2": 8.0,
        "n_trees": 2,
        "n_roads": 3,
    }
}


@pytest.fixture(scope="session")
def small_town_dir(tmp_path_factory) -> Path:
    """A fully built small scene bundle shared by scene/server/CLI tests."""
    root = tmp_path_factory.mktemp("small_town")
    cfg_path = root / "twin.json"
    cfg_path.write_text(json.dumps(SMALL_TOWN))
    cfg = load_config(cfg_path)
    stage_synth(cfg)
    for stage in (
        stage_classify,
        stage_dem,
        stage_footprints,
        stage_reconstruct,
        stage_tile,
        stage_flood,
        stage_assess,
    ):
        stage(cfg)
    return root


@pytest.fixture(scope="session")
def small_bundle(small_town_dir):
    from coastaltwin.server import load_bundle

    return load_bundle(small_town_dir)


@pytest.fixture(scope="session")
def client(small_bundle):
    from fastapi.testclient import TestClient

    from coastaltwin.server import create_app

    return TestClient(create_app(small_bundle))
