#!/usr/bin/env python3
"""Regenerate the committed golden fixtures under tests/golden/.

The tile-payload golden is assembled field by field, independently of the
codec, so the codec is checked against a hand computation rather than
against itself. The selection goldens freeze the tile-traversal results for
the fixture camera dolly; the dashboard asserts against the same files.
"""

import json
import math
import struct
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from coastaltwin.tiling import screen_space_error, select_tiles, tileset_manifest
from tileset_fixture import (
    FIXTURE_THRESHOLD,
    build_fixture_tileset,
    camera_doc,
    fixture_cameras,
)


def golden_triangle_payload() -> bytes:
    """One triangle, one feature (building 7), empty attributes: 88 bytes."""
    out = bytearray()
    out += b"CTB1"
    out += struct.pack("<I", 1)  # version
    out += struct.pack("<I", 3)  # vertex_count
    out += struct.pack("<I", 3)  # index_count
    out += struct.pack("<I", 1)  # feature_count
    out += struct.pack("<I", 0)  # attr_len
    for x, y, z in ((0.0, 0.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)):
        out += struct.pack("<3f", x, y, z)
    out += struct.pack("<3I", 0, 1, 2)
    out += struct.pack("<QII", 7, 0, 3)
    assert len(out) == 88
    return bytes(out)


def main():
    golden = ROOT / "tests" / "golden"
    golden.mkdir(parents=True, exist_ok=True)
    (golden / "triangle.ctb").write_bytes(golden_triangle_payload())

    sel = golden / "selection"
    sel.mkdir(exist_ok=True)
    ts = build_fixture_tileset()
    (sel / "tileset.json").write_text(tileset_manifest(ts))

    cams = fixture_cameras()
    expected = []
    for cam in cams:
        # guard against knife-edge SSE decisions that could diverge across
        # float libraries (the dashboard recomputes this traversal)
        for tile in ts.root.walk():
            margin = abs(screen_space_error(tile, cam) - FIXTURE_THRESHOLD)
            assert margin > 1e-6, f"tile {tile.id} sse is within 1e-6 of the threshold"
        expected.append(select_tiles(ts, cam, FIXTURE_THRESHOLD))
    (sel / "cameras.json").write_text(
        json.dumps(
            {"sse_threshold": FIXTURE_THRESHOLD, "cameras": [camera_doc(c) for c in cams]},
            indent=2,
        )
        + "\n"
    )
    (sel / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    n_tiles = sum(1 for _ in ts.root.walk())
    print(f"goldens written: 88-byte payload, {n_tiles}-tile fixture, {len(cams)} cameras")
    for cam, uris in zip(cams, expected):
        print(f"  camera x={cam.position.x:7.0f}: {len(uris)} tiles")


if __name__ == "__main__":
    main()
