"""Deterministic fixture tileset + camera dolly shared with the dashboard tests.

The golden files under tests/golden/selection/ are generated from these
builders by scripts/make_goldens.py and consumed by both the Python suite
and the frontend's traversal tests.
"""

from __future__ import annotations

import numpy as np

from coastaltwin.geocore import Polygon, Raster, SceneAnchor
from coastaltwin.scene import Footprint, reconstruct_lod2
from coastaltwin.tiling import Camera, ScenePoint, Tileset, build_tileset

FIXTURE_SEED = 17
FIXTURE_THRESHOLD = 16.0


def _rect(cx, cy, w, h):
    return np.array(
        [
            [cx - w / 2, cy - h / 2],
            [cx + w / 2, cy - h / 2],
            [cx + w / 2, cy + h / 2],
            [cx - w / 2, cy + h / 2],
            [cx - w / 2, cy - h / 2],
        ]
    )


def build_fixture_tileset() -> Tileset:
    """24 flat-roofed buildings on a jittered grid; quadtree depth >= 2."""
    rng = np.random.default_rng(FIXTURE_SEED)
    dem = Raster(xll=-10.0, yll=-10.0, cell=2.0, values=np.zeros((80, 80)))
    buildings = []
    bid = 0
    for gy in range(4):
        for gx in range(6):
            cx = 12.0 + gx * 20.0 + rng.uniform(-3, 3)
            cy = 15.0 + gy * 28.0 + rng.uniform(-3, 3)
            w = rng.uniform(8, 12)
            h = rng.uniform(8, 12)
            top = rng.uniform(5, 11)
            fp = Footprint(bid, Polygon(_rect(cx, cy, w, h)))
            xs = np.arange(cx - w / 2, cx + w / 2 + 0.25, 0.5)
            ys = np.arange(cy - h / 2, cy + h / 2 + 0.25, 0.5)
            mx, my = np.meshgrid(xs, ys)
            roof = np.column_stack([mx.ravel(), my.ravel(), np.full(mx.size, top)])
            buildings.append(reconstruct_lod2(fp, roof, dem))
            bid += 1
    anchor = SceneAnchor(-83.03, 29.14, "selection fixture")
    return build_tileset(buildings, anchor, max_per_leaf=4, max_depth=4)


def fixture_cameras() -> list[Camera]:
    """A straight dolly along -x toward the scene center, plus one looking away."""
    center_y, height = 66.0, 40.0
    cams = []
    for d in (15000.0, 8000.0, 4000.0, 2000.0, 300.0):
        cams.append(
            Camera(
                position=ScenePoint(140.0 + d, center_y, height),
                forward=(-1.0, 0.0, 0.0),
                up=(0.0, 0.0, 1.0),
                fov_y=np.pi / 3.0,
                viewport_height=1080,
            )
        )
    cams.append(
        Camera(
            position=ScenePoint(3000.0, center_y, height),
            forward=(1.0, 0.0, 0.0),
            up=(0.0, 0.0, 1.0),
            fov_y=np.pi / 3.0,
            viewport_height=1080,
        )
    )
    return cams


def camera_doc(cam: Camera) -> dict:
    return {
        "position": [cam.position.x, cam.position.y, cam.position.z],
        "forward": list(cam.forward),
        "up": list(cam.up),
        "fov_y": cam.fov_y,
        "viewport_height": cam.viewport_height,
    }
