import json
import math
import struct
from pathlib import Path

import numpy as np
import pytest

from coastaltwin.errors import DegenerateInputError, TileCodecError
from coastaltwin.geocore import Polygon, Raster, SceneAnchor
from coastaltwin.scene import Footprint, reconstruct_lod2
from coastaltwin.tiling import (
    Camera,
    ScenePoint,
    TilePayload,
    build_tileset,
    decode_tile,
    encode_payload,
    encode_tile,
    parse_manifest,
    select_tiles,
    tileset_manifest,
)
from tileset_fixture import (
    FIXTURE_THRESHOLD,
    build_fixture_tileset,
    fixture_cameras,
)

GOLDEN = Path(__file__).parent / "golden"
ANCHOR = SceneAnchor(-83.03, 29.14, "t")


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


def _building(bid, cx, cy, w=8.0, h=8.0, top=6.0):
    dem = Raster(xll=cx - 50, yll=cy - 50, cell=5.0, values=np.zeros((20, 20)))
    fp = Footprint(bid, Polygon(_rect(cx, cy, w, h)))
    xs = np.arange(cx - w / 2, cx + w / 2 + 0.5, 1.0)
    ys = np.arange(cy - h / 2, cy + h / 2 + 0.5, 1.0)
    mx, my = np.meshgrid(xs, ys)
    roof = np.column_stack([mx.ravel(), my.ravel(), np.full(mx.size, top)])
    return reconstruct_lod2(fp, roof, dem)


def _tile_level(tid):
    return int(tid.split("-")[0])


def _parent_id(tid):
    level, x, y = (int(v) for v in tid.split("-"))
    return f"{level - 1}-{x // 2}-{y // 2}" if level > 0 else None


def _ancestors(tid):
    out = set()
    cur = _parent_id(tid)
    while cur is not None:
        out.add(cur)
        cur = _parent_id(cur)
    return out


class TestBuildTileset:
    def test_single_building_root_leaf(self):
        ts = build_tileset([_building(0, 10, 10)], ANCHOR)
        assert ts.root.children == []
        assert ts.root.content_uri == "tiles/0-0-0.ctb"
        assert ts.building_index == {0: "0-0-0"}
        payload = decode_tile(ts.payloads["0-0-0"])
        assert [f[0] for f in payload.features] == [0]

    def test_zero_buildings_rejected(self):
        with pytest.raises(DegenerateInputError):
            build_tileset([], ANCHOR)

    def test_hundred_buildings_partition(self):
        rng = np.random.default_rng(1)
        buildings = [
            _building(i, rng.uniform(10, 490), rng.uniform(10, 490)) for i in range(100)
        ]
        ts = build_tileset(buildings, ANCHOR, max_per_leaf=10)
        leaves = [t for t in ts.root.walk() if not t.children]
        assert max(_tile_level(t.id) for t in leaves) >= 2
        seen = []
        for t in leaves:
            if t.id in ts.payloads:
                seen += [f[0] for f in decode_tile(ts.payloads[t.id]).features]
        assert sorted(seen) == list(range(100))  # disjoint union = everything
        assert set(ts.building_index) == set(range(100))

    def test_coincident_centroids_respect_depth_cap(self):
        buildings = [_building(i, 50, 50) for i in range(100)]
        ts = build_tileset(buildings, ANCHOR, max_per_leaf=16, max_depth=3)
        holder = ts.building_index[0]
        assert _tile_level(holder) == 3
        assert all(v == holder for v in ts.building_index.values())
        payload = decode_tile(ts.payloads[holder])
        assert len(payload.features) == 100

    def test_children_none_or_four(self):
        ts = build_fixture_tileset()
        for t in ts.root.walk():
            assert len(t.children) in (0, 4)

    def test_invariants_on_random_scenes(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            n = int(rng.integers(5, 40))
            buildings = [
                _building(i, rng.uniform(0, 300), rng.uniform(0, 300)) for i in range(n)
            ]
            ts = build_tileset(buildings, ANCHOR, max_per_leaf=4, max_depth=5)
            root = ts.root
            # square plan at the root
            assert (root.bbox[3] - root.bbox[0]) == pytest.approx(root.bbox[4] - root.bbox[1])
            for t in root.walk():
                for c in t.children:
                    # child box inside parent box, error exactly halved
                    for k in range(3):
                        assert c.bbox[k] >= t.bbox[k] - 1e-9
                        assert c.bbox[k + 3] <= t.bbox[k + 3] + 1e-9
                    assert c.geometric_error == pytest.approx(t.geometric_error / 2.0)
                if t.id in ts.payloads:
                    payload = decode_tile(ts.payloads[t.id])
                    v = payload.vertices
                    for k, (lo, hi) in enumerate(((0, 3), (1, 4), (2, 5))):
                        assert (v[:, k] >= t.bbox[lo] - 1e-6).all()
                        assert (v[:, k] <= t.bbox[hi] + 1e-6).all()


@pytest.fixture(scope="module")
def fixture_ts():
    return build_fixture_tileset()


class TestSelectTiles:

    def test_camera_behind_looking_away(self, fixture_ts):
        cam = fixture_cameras()[-1]
        assert select_tiles(fixture_ts, cam) == []

    def test_far_camera_emits_root_only(self, fixture_ts):
        cam = fixture_cameras()[0]
        assert select_tiles(fixture_ts, cam, FIXTURE_THRESHOLD) == ["tiles/0-0-0.ctb"]

    def test_dolly_never_coarsens(self, fixture_ts):
        # no tile emitted close-in may be a strict ancestor of one emitted farther out
        cams = fixture_cameras()[:-1]
        selections = [select_tiles(fixture_ts, c, FIXTURE_THRESHOLD) for c in cams]
        ids = [{u.split("/")[1].split(".")[0] for u in sel} for sel in selections]
        for far, near in zip(ids, ids[1:]):
            far_ancestors = set()
            for tid in far:
                far_ancestors |= _ancestors(tid)
            assert not (near & far_ancestors), f"coarsened: {near & far_ancestors}"

    def test_matches_golden_traversal(self, fixture_ts):
        cams_doc = json.loads((GOLDEN / "selection" / "cameras.json").read_text())
        expected = json.loads((GOLDEN / "selection" / "expected.json").read_text())
        assert (GOLDEN / "selection" / "tileset.json").read_text() == tileset_manifest(fixture_ts)
        for cam_doc, want in zip(cams_doc["cameras"], expected):
            cam = Camera(
                position=ScenePoint(*cam_doc["position"]),
                forward=tuple(cam_doc["forward"]),
                up=tuple(cam_doc["up"]),
                fov_y=cam_doc["fov_y"],
                viewport_height=cam_doc["viewport_height"],
            )
            assert select_tiles(fixture_ts, cam, cams_doc["sse_threshold"]) == want

    def test_camera_inside_scene_emits_leaves(self, fixture_ts):
        cam = Camera(
            position=ScenePoint(60.0, 66.0, 20.0),
            forward=(1.0, 0.0, 0.0),
            up=(0.0, 0.0, 1.0),
            fov_y=math.pi / 3,
            viewport_height=1080,
        )
        sel = select_tiles(fixture_ts, cam, FIXTURE_THRESHOLD)
        assert sel  # something ahead of the camera renders
        for uri in sel:
            assert _tile_level(uri.split("/")[1].split(".")[0]) == 2

    def test_output_sorted_by_tile_id(self, fixture_ts):
        cam = fixture_cameras()[2]
        sel = select_tiles(fixture_ts, cam, FIXTURE_THRESHOLD)
        keys = [tuple(int(v) for v in u.split("/")[1].split(".")[0].split("-")) for u in sel]
        assert keys == sorted(keys)


class TestCodec:
    def test_golden_payload_byte_for_byte(self):
        # the same 88 bytes assembled long-hand, field by field
        want = bytearray()
        want += b"CTB1"
        want += struct.pack("<I", 1)
        want += struct.pack("<I", 3)
        want += struct.pack("<I", 3)
        want += struct.pack("<I", 1)
        want += struct.pack("<I", 0)
        want += struct.pack("<3f", 0.0, 0.0, 0.0)
        want += struct.pack("<3f", 1.0, 0.0, 0.0)
        want += struct.pack("<3f", 0.0, 1.0, 0.0)
        want += struct.pack("<3I", 0, 1, 2)
        want += struct.pack("<QII", 7, 0, 3)
        assert bytes(want) == (GOLDEN / "triangle.ctb").read_bytes()

        from coastaltwin.scene import TriangleMesh

        mesh = TriangleMesh(
            np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
            np.array([[0, 1, 2]]),
        )
        assert encode_tile([(7, mesh)]) == bytes(want)

    def test_round_trip_random_payloads(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n_feat = int(rng.integers(1, 5))
            meshes = []
            attrs = {}
            for bid in range(n_feat):
                nv = int(rng.integers(3, 40))
                nt = int(rng.integers(1, 30))
                from coastaltwin.scene import TriangleMesh

                verts = rng.uniform(-100, 100, (nv, 3)).astype(np.float32).astype(np.float64)
                tris = rng.integers(0, nv, (nt, 3))
                meshes.append((bid, TriangleMesh(verts, tris)))
                attrs[bid] = {"county": "x", "hazard_tags": [f"t{bid}"]}
            data = encode_tile(meshes, attrs)
            payload = decode_tile(data)
            assert encode_payload(payload) == data  # full fixed point
            assert [f[0] for f in payload.features] == list(range(n_feat))
            for bid, mesh in meshes:
                got = payload.feature_mesh(bid)
                np.testing.assert_array_equal(
                    got.vertices[got.indices.ravel()],
                    mesh.vertices.astype(np.float32)[mesh.indices.ravel()],
                )
            assert payload.attributes() == {str(k): v for k, v in attrs.items()}

    def test_truncation_every_byte(self):
        data = (GOLDEN / "triangle.ctb").read_bytes()
        for n in range(len(data)):
            with pytest.raises(TileCodecError) as err:
                decode_tile(data[:n])
            assert err.value.section in ("magic", "header", "vertices", "indices", "features", "attributes")
            assert isinstance(err.value.offset, int)

    def test_truncation_in_index_section_named(self):
        data = (GOLDEN / "triangle.ctb").read_bytes()
        with pytest.raises(TileCodecError) as err:
            decode_tile(data[: 24 + 36 + 4])  # mid index buffer
        assert err.value.section == "indices"

    def test_bad_magic_and_version(self):
        data = bytearray((GOLDEN / "triangle.ctb").read_bytes())
        with pytest.raises(TileCodecError, match="magic"):
            decode_tile(b"XXXX" + bytes(data[4:]))
        bad_version = bytes(data[:4]) + struct.pack("<I", 9) + bytes(data[8:])
        with pytest.raises(TileCodecError, match="version"):
            decode_tile(bad_version)

    def test_index_count_multiple_of_three(self):
        payload = TilePayload(
            vertices=np.zeros((3, 3), dtype=np.float32),
            indices=np.array([0, 1], dtype=np.uint32),
            features=[],
        )
        with pytest.raises(Exception):
            encode_payload(payload)


class TestManifest:
    def test_single_leaf_document(self):
        ts = build_tileset([_building(0, 10, 10)], ANCHOR)
        doc = json.loads(tileset_manifest(ts))
        assert doc["root"]["id"] == "0-0-0"
        assert doc["root"]["children"] == []
        assert doc["root"]["refine"] == "REPLACE"
        assert doc["anchor"]["lon0"] == ANCHOR.lon0

    def test_serialize_parse_serialize_fixed_point(self):
        ts = build_fixture_tileset()
        text = tileset_manifest(ts)
        again = tileset_manifest(parse_manifest(text))
        assert text == again

    def test_node_count_matches_traversal(self):
        rng = np.random.default_rng(9)
        buildings = [_building(i, rng.uniform(0, 400), rng.uniform(0, 400)) for i in range(100)]
        ts = build_tileset(buildings, ANCHOR, max_per_leaf=8)
        doc = json.loads(tileset_manifest(ts))

        def count(node):
            return 1 + sum(count(c) for c in node["children"])

        assert count(doc["root"]) == sum(1 for _ in ts.root.walk())

    def test_deterministic_manifest(self):
        a = tileset_manifest(build_fixture_tileset())
        b = tileset_manifest(build_fixture_tileset())
        assert a == b
