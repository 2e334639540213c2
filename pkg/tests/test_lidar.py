import struct

import numpy as np
import pytest

from coastaltwin.errors import (
    LasFormatError,
    LasRangeError,
    LasTruncationError,
    LasUnsupportedError,
)
from coastaltwin.lidar import (
    BuildingFilterParams,
    GroundFilterParams,
    PointClass,
    PointCloud,
    classify_buildings,
    classify_ground,
    parse_las,
    write_las,
)
from coastaltwin.scene import build_dem
from coastaltwin.synth import generate_scene


def _hand_built_las(magic=b"LASF", scale=(0.01, 0.01, 0.01), records=((100, 200, 50),)):
    """Minimal LAS 1.2 format-0 file assembled field by field."""
    header = bytearray(227)
    header[0:4] = magic
    header[24] = 1
    header[25] = 2
    struct.pack_into("<HI", header, 94, 227, 227)
    header[104] = 0
    struct.pack_into("<H", header, 105, 20)
    struct.pack_into("<I", header, 107, len(records))
    struct.pack_into("<3d", header, 131, *scale)
    struct.pack_into("<3d", header, 155, 0.0, 0.0, 0.0)
    body = bytearray()
    for x, y, z in records:
        rec = bytearray(20)
        struct.pack_into("<3i", rec, 0, x, y, z)
        rec[15] = 2  # ground
        body += rec
    return bytes(header) + bytes(body)


_FMT_SIZES = {0: 20, 1: 28, 2: 26, 3: 34, 6: 30}


def _las_with_format(fmt, version_minor, records, record_len=None, vlr_pad=0):
    """LAS 1.2 or 1.4 file with the given point format and (x, y, z, class) records."""
    header_size = 227 if version_minor == 2 else 375
    record_len = record_len or _FMT_SIZES[fmt]
    header = bytearray(header_size)
    header[0:4] = b"LASF"
    header[24] = 1
    header[25] = version_minor
    struct.pack_into("<HI", header, 94, header_size, header_size + vlr_pad)
    header[104] = fmt
    struct.pack_into("<H", header, 105, record_len)
    if version_minor == 2:
        struct.pack_into("<I", header, 107, len(records))
    else:
        struct.pack_into("<I", header, 107, 0)  # legacy count zeroed per 1.4 practice
        struct.pack_into("<Q", header, 247, len(records))
    struct.pack_into("<3d", header, 131, 0.001, 0.001, 0.001)
    struct.pack_into("<3d", header, 155, 100.0, 200.0, -5.0)
    body = bytearray()
    for x, y, z, cls in records:
        rec = bytearray(record_len)
        struct.pack_into("<3i", rec, 0, x, y, z)
        struct.pack_into("<H", rec, 12, 321)
        if fmt == 6:
            rec[16] = cls
        else:
            rec[15] = cls
        body += rec
    return bytes(header) + b"\x00" * vlr_pad + bytes(body)


class TestParse:
    def test_scale_offset_arithmetic(self):
        cloud = parse_las(_hand_built_las(records=((100, 200, 50), (0, 0, 0), (1, 2, 3))))
        assert len(cloud) == 3
        np.testing.assert_allclose(cloud.xyz[0], [1.0, 2.0, 0.5])
        assert cloud.classification[0] == PointClass.GROUND

    def test_bad_magic(self):
        with pytest.raises(LasFormatError):
            parse_las(_hand_built_las(magic=b"LASX"))

    def test_unsupported_version(self):
        data = bytearray(_hand_built_las())
        data[25] = 3  # 1.3
        with pytest.raises(LasUnsupportedError):
            parse_las(bytes(data))

    def test_unsupported_format(self):
        data = bytearray(_hand_built_las())
        data[104] = 5
        with pytest.raises(LasUnsupportedError):
            parse_las(bytes(data))

    def test_truncated_records(self):
        data = _hand_built_las(records=((1, 2, 3), (4, 5, 6)))
        with pytest.raises(LasTruncationError) as err:
            parse_las(data[:-10])
        assert err.value.offset == len(data) - 10

    def test_classification_code_mapping(self):
        data = bytearray(_hand_built_las(records=((0, 0, 0),) * 4))
        for i, code in enumerate((2, 6, 7, 13)):
            data[227 + 20 * i + 15] = code
        cloud = parse_las(bytes(data))
        assert list(cloud.classification) == [
            PointClass.GROUND,
            PointClass.BUILDING,
            PointClass.NOISE,
            PointClass.UNCLASSIFIED,
        ]

    def test_classification_flag_bits_ignored(self):
        data = bytearray(_hand_built_las())
        data[227 + 15] = 2 | 0x40  # key-point flag set
        assert parse_las(bytes(data)).classification[0] == PointClass.GROUND

    @pytest.mark.parametrize("fmt", [0, 1, 2, 3, 6])
    @pytest.mark.parametrize("minor", [2, 4])
    def test_all_supported_formats_and_versions(self, fmt, minor):
        records = [(1000, 2000, 3000, 2), (0, 0, 0, 6), (-500, 500, 100, 7)]
        cloud = parse_las(_las_with_format(fmt, minor, records))
        assert len(cloud) == 3
        np.testing.assert_allclose(cloud.xyz[0], [101.0, 202.0, -2.0])
        np.testing.assert_allclose(cloud.xyz[2], [99.5, 200.5, -4.9])
        assert list(cloud.classification) == [
            PointClass.GROUND,
            PointClass.BUILDING,
            PointClass.NOISE,
        ]
        assert cloud.intensity[0] == 321

    def test_las14_uses_64bit_count(self):
        data = _las_with_format(6, 4, [(0, 0, 0, 2)] * 5)
        assert struct.unpack_from("<I", data, 107)[0] == 0  # legacy field empty
        assert len(parse_las(data)) == 5

    def test_extra_record_bytes_skipped(self):
        data = _las_with_format(0, 2, [(10, 20, 30, 2)], record_len=27)
        cloud = parse_las(data)
        np.testing.assert_allclose(cloud.xyz[0], [100.01, 200.02, -4.97])

    def test_vlr_space_skipped(self):
        cloud = parse_las(_las_with_format(1, 2, [(10, 20, 30, 6)], vlr_pad=90))
        assert cloud.classification[0] == PointClass.BUILDING

    def test_las14_truncated_header(self):
        data = _las_with_format(6, 4, [(0, 0, 0, 2)])
        with pytest.raises(LasTruncationError):
            parse_las(data[:300])

    def test_compressed_flag_rejected(self):
        data = bytearray(_hand_built_las())
        data[104] = 0x80
        with pytest.raises(LasUnsupportedError):
            parse_las(bytes(data))


class TestWriteRoundTrip:
    def test_empty_cloud(self):
        cloud = PointCloud(np.zeros((0, 3)), np.zeros(0, dtype=np.uint8))
        data = write_las(cloud)
        assert len(data) == 227
        assert len(parse_las(data)) == 0

    def test_single_point(self):
        cloud = PointCloud(
            np.array([[12.345, -6.789, 3.1415]]),
            np.array([int(PointClass.BUILDING)], dtype=np.uint8),
        )
        back = parse_las(write_las(cloud))
        np.testing.assert_allclose(back.xyz, cloud.xyz, atol=0.005)
        assert back.classification[0] == PointClass.BUILDING

    def test_large_random_cloud_round_trip(self):
        rng = np.random.default_rng(5)
        n = 100_000
        xyz = np.column_stack(
            [rng.uniform(0, 500, n), rng.uniform(0, 500, n), rng.uniform(-10, 40, n)]
        )
        cls = rng.choice(
            [int(c) for c in PointClass], size=n, p=[0.2, 0.5, 0.25, 0.05]
        ).astype(np.uint8)
        cloud = PointCloud(xyz, cls, intensity=rng.integers(0, 1000, n).astype(np.uint16))
        back = parse_las(write_las(cloud))
        assert len(back) == n
        np.testing.assert_allclose(back.xyz, cloud.xyz, atol=0.005 + 1e-12)
        assert np.array_equal(back.classification, cloud.classification)
        assert np.array_equal(back.intensity, cloud.intensity)

    def test_synthetic_town_class_histogram(self):
        scene = generate_scene(3, 4, 80.0, 6.0, n_trees=1, n_roads=2)
        cloud = scene.cloud.with_classification(
            np.where(scene.labels == 0, int(PointClass.GROUND), int(PointClass.BUILDING)).astype(
                np.uint8
            )
        )
        back = parse_las(write_las(cloud))
        assert np.array_equal(
            np.bincount(back.classification, minlength=4),
            np.bincount(cloud.classification, minlength=4),
        )

    def test_coordinate_overflow(self):
        cloud = PointCloud(
            np.array([[1e9, 0.0, 0.0]]),
            np.zeros(1, dtype=np.uint8),
            source_scale=(0.01, 0.01, 0.01),
        )
        with pytest.raises(LasRangeError):
            write_las(cloud)


def _flat_cloud(rng, n=4000, extent=50.0, z=5.0):
    xyz = np.column_stack(
        [
            rng.uniform(0, extent, n),
            rng.uniform(0, extent, n),
            np.full(n, z) + rng.normal(0, 0.02, n),
        ]
    )
    return PointCloud(xyz, np.zeros(n, dtype=np.uint8))


class TestGroundFilter:
    def test_flat_plane_all_ground(self):
        cloud = classify_ground(_flat_cloud(np.random.default_rng(0)))
        assert cloud.mask(PointClass.GROUND).all()

    def test_box_on_plane(self):
        scene = generate_scene(11, 1, 60.0, 8.0, n_trees=0, n_roads=0)
        cloud = classify_ground(scene.cloud)
        ground_true = scene.labels == 0
        roof_true = scene.labels > 0
        pred = cloud.mask(PointClass.GROUND)
        assert (pred & ground_true).sum() / ground_true.sum() >= 0.99
        assert (pred & roof_true).sum() / roof_true.sum() <= 0.01

    def test_tilted_plane_stays_ground(self):
        rng = np.random.default_rng(1)
        n = 6000
        x = rng.uniform(0, 60, n)
        y = rng.uniform(0, 60, n)
        z = 0.1 * x + rng.normal(0, 0.02, n)
        cloud = PointCloud(np.column_stack([x, y, z]), np.zeros(n, dtype=np.uint8))
        out = classify_ground(cloud, GroundFilterParams(slope=0.15))
        assert out.mask(PointClass.GROUND).mean() >= 0.99

    def test_idempotent(self):
        scene = generate_scene(12, 2, 60.0, 6.0, n_trees=1, n_roads=0)
        once = classify_ground(scene.cloud)
        twice = classify_ground(once)
        assert np.array_equal(
            once.mask(PointClass.GROUND), twice.mask(PointClass.GROUND)
        )

    def test_empty_cloud_passthrough(self):
        cloud = PointCloud(np.zeros((0, 3)), np.zeros(0, dtype=np.uint8))
        assert len(classify_ground(cloud)) == 0

    def test_relabels_never_deletes(self):
        scene = generate_scene(13, 2, 60.0, 6.0)
        out = classify_ground(scene.cloud)
        assert len(out) == len(scene.cloud)
        np.testing.assert_array_equal(out.xyz, scene.cloud.xyz)


@pytest.fixture(scope="module")
def classified_scene():
    scene = generate_scene(21, 4, 90.0, 8.0, n_trees=3, n_roads=0)
    cloud = classify_ground(scene.cloud)
    dem = build_dem(cloud, 1.0)
    return scene, classify_buildings(cloud, dem), dem


class TestBuildingFilter:

    def test_roofs_marked_building(self, classified_scene):
        scene, cloud, _ = classified_scene
        roof_true = scene.labels > 0
        pred = cloud.mask(PointClass.BUILDING)
        assert (pred & roof_true).sum() / roof_true.sum() >= 0.95

    def test_trees_rejected(self, classified_scene):
        scene, cloud, _ = classified_scene
        tree_true = scene.labels == -1
        assert (cloud.mask(PointClass.BUILDING) & tree_true).sum() == 0

    def test_never_relabels_ground(self, classified_scene):
        scene, cloud, dem = classified_scene
        again = classify_buildings(cloud, dem)
        assert not (again.mask(PointClass.GROUND) & again.mask(PointClass.BUILDING)).any()
        ground_before = classify_ground(scene.cloud).mask(PointClass.GROUND)
        assert np.array_equal(ground_before, again.mask(PointClass.GROUND))

    def test_no_candidates_is_noop(self):
        cloud = classify_ground(_flat_cloud(np.random.default_rng(2)))
        dem = build_dem(cloud, 1.0)
        out = classify_buildings(cloud, dem)
        assert np.array_equal(out.classification, cloud.classification)

    def test_points_outside_dem_skipped_with_warning(self, caplog):
        import logging

        rng = np.random.default_rng(14)
        ground = _flat_cloud(rng, n=2000, extent=30.0, z=0.0)
        outlier = np.array([[500.0, 500.0, 20.0]])  # far off the DEM
        xyz = np.vstack([ground.xyz, outlier])
        cls = np.concatenate(
            [np.full(len(ground), int(PointClass.GROUND), dtype=np.uint8), np.array([0], np.uint8)]
        )
        dem = build_dem(PointCloud(ground.xyz, np.full(len(ground), 1, np.uint8)), 1.0)
        with caplog.at_level(logging.WARNING):
            out = classify_buildings(PointCloud(xyz, cls), dem)
        assert "outside the DEM" in caplog.text
        assert out.classification[-1] == PointClass.UNCLASSIFIED

    def test_tree_cone_alone_rejected(self):
        rng = np.random.default_rng(9)
        ground = _flat_cloud(rng, n=3000, extent=30.0, z=0.0)
        n = 400
        r = 3.0 * np.sqrt(rng.uniform(0, 1, n))
        th = rng.uniform(0, 2 * np.pi, n)
        canopy = 7.0 * (1 - r / 3.0)
        z = np.maximum(0.5, canopy - rng.uniform(0, 2.5, n)) + 0.0
        tree = np.column_stack([15 + r * np.cos(th), 15 + r * np.sin(th), z])
        xyz = np.vstack([ground.xyz, tree])
        cloud = PointCloud(xyz, np.zeros(len(xyz), dtype=np.uint8))
        cloud = classify_ground(cloud)
        dem = build_dem(cloud, 1.0)
        out = classify_buildings(cloud, dem, BuildingFilterParams())
        assert out.mask(PointClass.BUILDING).sum() == 0
