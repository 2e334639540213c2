#!/usr/bin/env python3
"""Measure tile-selection throughput on randomized tilesets.

Selection is the per-frame hot path for viewers, so it should stay well
under a millisecond per call at town scale.
"""

import time

import numpy as np

from coastaltwin.geocore import Polygon, SceneAnchor
from coastaltwin.scene import Footprint, prism_building
from coastaltwin.tiling import Camera, ScenePoint, build_tileset, select_tiles


def rect(cx, cy, w, h):
    return np.array(
        [
            [cx - w / 2, cy - h / 2],
            [cx + w / 2, cy - h / 2],
            [cx + w / 2, cy + h / 2],
            [cx - w / 2, cy + h / 2],
            [cx - w / 2, cy - h / 2],
        ]
    )


def main():
    rng = np.random.default_rng(0)
    anchor = SceneAnchor(-83.03, 29.14)
    for n in (50, 200, 800):
        buildings = [
            prism_building(
                i,
                Footprint(i, Polygon(rect(*rng.uniform(0, 2000, 2), *rng.uniform(6, 16, 2)))),
                0.0,
                8.0,
            )
            for i in range(n)
        ]
        ts = build_tileset(buildings, anchor, max_per_leaf=8)
        n_tiles = sum(1 for _ in ts.root.walk())
        cams = [
            Camera(
                position=ScenePoint(d, 1000.0, 200.0),
                forward=(-1.0, 0.0, 0.0),
                up=(0.0, 0.0, 1.0),
                fov_y=np.pi / 3,
                viewport_height=1080,
            )
            for d in np.linspace(2500, 40000, 64)
        ]
        t0 = time.perf_counter()
        reps = 20
        for _ in range(reps):
            for cam in cams:
                select_tiles(ts, cam)
        per_call = (time.perf_counter() - t0) / (reps * len(cams))
        print(f"{n:4d} buildings, {n_tiles:4d} tiles: {per_call * 1e6:8.1f} us/selection")


if __name__ == "__main__":
    main()
