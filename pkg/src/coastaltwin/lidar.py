"""LAS point cloud I/O and ground/building classification.

Parsing covers LAS 1.2 and 1.4 with point record formats 0, 1, 2, 3, and 6;
writing always emits LAS 1.2 point format 0. Classification relabels points
in place (never deletes): a progressive morphological filter finds ground,
then clustering plus a local plane-roughness test finds building roofs.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, replace
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .errors import (
    DegenerateInputError,
    LasFormatError,
    LasRangeError,
    LasTruncationError,
    LasUnsupportedError,
)
from .geocore import Raster


class PointClass(IntEnum):
    UNCLASSIFIED = 0
    GROUND = 1
    BUILDING = 2
    NOISE = 3


# ASPRS class codes <-> internal classes
_LAS_TO_CLASS = {2: PointClass.GROUND, 6: PointClass.BUILDING, 7: PointClass.NOISE}
_CLASS_TO_LAS = {
    PointClass.UNCLASSIFIED: 1,
    PointClass.GROUND: 2,
    PointClass.BUILDING: 6,
    PointClass.NOISE: 7,
}


@dataclass
class PointCloud:
    """Classified points in the scene frame, stored as parallel arrays."""

    xyz: np.ndarray  # (N, 3) float64
    classification: np.ndarray  # (N,) uint8 of PointClass values
    intensity: np.ndarray | None = None  # (N,) uint16
    source_scale: tuple[float, float, float] = (0.01, 0.01, 0.01)
    source_offset: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        self.classification = np.asarray(self.classification, dtype=np.uint8)
        if len(self.classification) != len(self.xyz):
            raise ValueError("classification length must match point count")
        if not np.isfinite(self.xyz).all():
            raise ValueError("point coordinates must be finite")
        if self.intensity is not None:
            self.intensity = np.asarray(self.intensity, dtype=np.uint16)

    def __len__(self) -> int:
        return len(self.xyz)

    def mask(self, cls: PointClass) -> np.ndarray:
        return self.classification == int(cls)

    def with_classification(self, classification: np.ndarray) -> "PointCloud":
        return replace(self, classification=np.asarray(classification, dtype=np.uint8))


@dataclass
class GroundFilterParams:
    """Progressive morphological filter parameters."""

    cell: float = 1.0
    max_window: float = 20.0
    slope: float = 0.15
    initial_threshold: float = 0.3
    max_threshold: float = 2.5

    def __post_init__(self):
        for name in ("cell", "max_window", "slope", "initial_threshold", "max_threshold"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_window < self.cell:
            raise ValueError("max_window must be >= cell")


@dataclass
class BuildingFilterParams:
    """Roof-cluster extraction parameters."""

    min_height: float = 2.5
    min_points: int = 50
    cluster_cell: float = 1.0
    max_roughness: float = 0.35

    def __post_init__(self):
        for name in ("min_height", "min_points", "cluster_cell", "max_roughness"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


_HEADER_12_SIZE = 227
_HEADER_14_SIZE = 375
_POINT_SIZES = {0: 20, 1: 28, 2: 26, 3: 34, 6: 30}


def parse_las(data: bytes) -> PointCloud:
    """Parse a LAS 1.2 or 1.4 byte stream into a PointCloud.

    Variable-length records are skipped. Point record formats 0-3 and 6 are
    supported; extra per-point bytes beyond the standard layout are ignored.
    """
    if len(data) < 4 or data[:4] != b"LASF":
        raise LasFormatError(f"bad file signature {data[:4]!r}, expected b'LASF'")
    if len(data) < _HEADER_12_SIZE:
        raise LasTruncationError("public header block truncated", len(data))
    major, minor = data[24], data[25]
    if (major, minor) not in ((1, 2), (1, 4)):
        raise LasUnsupportedError(f"LAS version {major}.{minor} not supported (1.2 and 1.4 only)")
    header_size, point_offset = struct.unpack_from("<HI", data, 94)
    fmt_id = data[104]
    if fmt_id & 0x80:
        raise LasUnsupportedError("compressed (LAZ) point data is not supported")
    record_len = struct.unpack_from("<H", data, 105)[0]
    legacy_count = struct.unpack_from("<I", data, 107)[0]
    if fmt_id not in _POINT_SIZES:
        raise LasUnsupportedError(f"point data format {fmt_id} not supported")
    if record_len < _POINT_SIZES[fmt_id]:
        raise LasFormatError(
            f"point record length {record_len} smaller than format {fmt_id} minimum {_POINT_SIZES[fmt_id]}"
        )
    scale = struct.unpack_from("<3d", data, 131)
    offset = struct.unpack_from("<3d", data, 155)
    count = legacy_count
    if (major, minor) == (1, 4):
        if len(data) < _HEADER_14_SIZE or header_size < _HEADER_14_SIZE:
            raise LasTruncationError("LAS 1.4 header block truncated", min(len(data), header_size))
        count64 = struct.unpack_from("<Q", data, 247)[0]
        if count64:
            count = count64
    end = point_offset + count * record_len
    if end > len(data):
        raise LasTruncationError(
            f"point data ends early: need {count} records of {record_len} bytes", len(data)
        )

    raw = np.frombuffer(data, dtype=np.uint8, count=count * record_len, offset=point_offset)
    raw = raw.reshape(count, record_len)
    ixyz = raw[:, :12].copy().view("<i4").reshape(count, 3)
    xyz = ixyz.astype(np.float64) * np.asarray(scale) + np.asarray(offset)
    intensity = raw[:, 12:14].copy().view("<u2").ravel()
    if fmt_id == 6:
        las_class = raw[:, 16].copy()
    else:
        las_class = raw[:, 15] & 0x1F  # low 5 bits; high bits are flags
    classification = np.full(count, int(PointClass.UNCLASSIFIED), dtype=np.uint8)
    for code, cls in _LAS_TO_CLASS.items():
        classification[las_class == code] = int(cls)
    return PointCloud(
        xyz=xyz,
        classification=classification,
        intensity=intensity,
        source_scale=tuple(scale),
        source_offset=tuple(offset),
    )


def write_las(cloud: PointCloud) -> bytes:
    """Serialize a PointCloud as LAS 1.2, point format 0."""
    scale = np.asarray(cloud.source_scale, dtype=np.float64)
    offset = np.asarray(cloud.source_offset, dtype=np.float64)
    n = len(cloud)
    if n:
        scaled = np.round((cloud.xyz - offset) / scale)
        if scaled.min() < -(2**31) or scaled.max() > 2**31 - 1:
            raise LasRangeError(
                "coordinates do not fit 32-bit scaled integers with "
                f"scale {tuple(scale)} and offset {tuple(offset)}"
            )
        ixyz = scaled.astype(np.int64).astype(np.int32)
        mins = cloud.xyz.min(axis=0)
        maxs = cloud.xyz.max(axis=0)
    else:
        ixyz = np.zeros((0, 3), dtype=np.int32)
        mins = maxs = np.zeros(3)

    header = bytearray(_HEADER_12_SIZE)
    header[0:4] = b"LASF"
    header[24] = 1
    header[25] = 2
    header[26:58] = b"coastaltwin".ljust(32, b"\x00")
    header[58:90] = b"coastaltwin writer".ljust(32, b"\x00")
    struct.pack_into("<HH", header, 90, 1, 2000)  # fixed creation day/year for determinism
    struct.pack_into("<HI", header, 94, _HEADER_12_SIZE, _HEADER_12_SIZE)
    struct.pack_into("<I", header, 100, 0)  # no VLRs
    header[104] = 0
    struct.pack_into("<H", header, 105, _POINT_SIZES[0])
    struct.pack_into("<I", header, 107, n)
    struct.pack_into("<5I", header, 111, n, 0, 0, 0, 0)
    struct.pack_into("<3d", header, 131, *scale)
    struct.pack_into("<3d", header, 155, *offset)
    struct.pack_into("<6d", header, 179, maxs[0], mins[0], maxs[1], mins[1], maxs[2], mins[2])

    records = np.zeros((n, _POINT_SIZES[0]), dtype=np.uint8)
    if n:
        records[:, :12] = ixyz.astype("<i4").view(np.uint8).reshape(n, 12)
        intensity = cloud.intensity if cloud.intensity is not None else np.zeros(n, dtype=np.uint16)
        records[:, 12:14] = intensity.astype("<u2").view(np.uint8).reshape(n, 2)
        records[:, 14] = 0x09  # return 1 of 1
        las_class = np.empty(n, dtype=np.uint8)
        for cls, code in _CLASS_TO_LAS.items():
            las_class[cloud.classification == int(cls)] = code
        records[:, 15] = las_class
    return bytes(header) + records.tobytes()


def _grid_shape(xyz: np.ndarray, cell: float):
    x0 = float(xyz[:, 0].min())
    y0 = float(xyz[:, 1].min())
    ncols = int(np.floor((xyz[:, 0].max() - x0) / cell)) + 1
    nrows = int(np.floor((xyz[:, 1].max() - y0) / cell)) + 1
    col = np.minimum(((xyz[:, 0] - x0) / cell).astype(np.int64), ncols - 1)
    row = np.minimum(((xyz[:, 1] - y0) / cell).astype(np.int64), nrows - 1)
    return col, row, ncols, nrows


def _fill_from_nearest(grid: np.ndarray, empty: np.ndarray) -> np.ndarray:
    if not empty.any():
        return grid
    if empty.all():
        raise DegenerateInputError("no occupied grid cells")
    _, (ri, ci) = ndimage.distance_transform_edt(empty, return_indices=True)
    return grid[ri, ci]


def classify_ground(cloud: PointCloud, params: GroundFilterParams | None = None) -> PointCloud:
    """Mark ground points with a progressive morphological filter.

    A minimum-elevation surface gridded at ``params.cell`` is opened with
    growing square windows w_k = cell * 2**k (stopping once w_k exceeds
    ``max_window``); cells dropping more than the stage threshold
    t_k = min(initial_threshold + slope * (w_k - w_{k-1}), max_threshold)
    are treated as objects. Points within ``initial_threshold`` above the
    final approved surface become GROUND; previously-GROUND points that no
    longer qualify revert to UNCLASSIFIED. Other labels are preserved.
    """
    params = params or GroundFilterParams()
    if len(cloud) == 0:
        return cloud.with_classification(cloud.classification.copy())
    col, row, ncols, nrows = _grid_shape(cloud.xyz, params.cell)
    surface = np.full((nrows, ncols), np.inf)
    np.minimum.at(surface, (row, col), cloud.xyz[:, 2])
    surface = _fill_from_nearest(surface, ~np.isfinite(surface))

    prev_w = params.cell
    k = 1
    while True:
        w = params.cell * (2**k)
        if w > params.max_window:
            break
        size = max(2, int(round(w / params.cell)))
        t_k = min(params.initial_threshold + params.slope * (w - prev_w), params.max_threshold)
        opened = ndimage.grey_opening(surface, size=(size, size), mode="nearest")
        surface = np.where(surface - opened > t_k, opened, surface)
        prev_w = w
        k += 1

    ground_mask = cloud.xyz[:, 2] <= surface[row, col] + params.initial_threshold
    if not ground_mask.any():
        raise DegenerateInputError("ground filter rejected every point")
    classification = cloud.classification.copy()
    classification[ground_mask] = int(PointClass.GROUND)
    stale = ~ground_mask & (cloud.classification == int(PointClass.GROUND))
    classification[stale] = int(PointClass.UNCLASSIFIED)
    return cloud.with_classification(classification)


@dataclass
class _ClusterStats:
    """Per-cluster record kept for diagnostics in tests."""

    n_points: int
    roughness: float
    accepted: bool


def classify_buildings(
    cloud: PointCloud,
    dem: Raster,
    params: BuildingFilterParams | None = None,
    _stats: list | None = None,
) -> PointCloud:
    """Mark building-roof points among the non-ground returns.

    Non-ground points at least ``min_height`` above the DEM are gridded at
    ``cluster_cell`` and merged by 8-connectivity; a cluster is accepted as
    a building when it has >= ``min_points`` points and the median local
    plane-fit roughness of its top surface is <= ``max_roughness`` (this is
    what rejects vegetation). Ground labels are never overwritten.
    """
    params = params or BuildingFilterParams()
    classification = cloud.classification.copy()
    nonground = cloud.classification != int(PointClass.GROUND)
    if not nonground.any():
        return cloud.with_classification(classification)

    pts = cloud.xyz[nonground]
    dem_col, dem_row = dem.cell_index(pts[:, 0], pts[:, 1])
    covered = dem.in_bounds(dem_col, dem_row)
    n_uncovered = int((~covered).sum())
    if n_uncovered:
        logging.getLogger(__name__).warning(
            "%d non-ground points fall outside the DEM and were skipped", n_uncovered
        )
    dem_z = np.full(len(pts), -np.inf)
    dem_z[covered] = dem.values[dem_row[covered], dem_col[covered]]
    dem_ok = covered & (dem_z != dem.nodata)
    high = dem_ok & (pts[:, 2] - dem_z >= params.min_height)
    if not high.any():
        return cloud.with_classification(classification)

    high_pts = pts[high]
    col, row, ncols, nrows = _grid_shape(high_pts, params.cluster_cell)
    occupied = np.zeros((nrows, ncols), dtype=bool)
    occupied[row, col] = True
    labels, n_labels = ndimage.label(occupied, structure=np.ones((3, 3), dtype=int))
    point_label = labels[row, col]

    top = np.full((nrows, ncols), -np.inf)
    np.maximum.at(top, (row, col), high_pts[:, 2])

    accepted_labels = []
    for lab in range(1, n_labels + 1):
        members = point_label == lab
        n_pts = int(members.sum())
        if n_pts < params.min_points:
            if _stats is not None:
                _stats.append(_ClusterStats(n_pts, np.nan, False))
            continue
        rough = _top_surface_roughness(top, labels == lab)
        ok = bool(rough <= params.max_roughness)
        if ok:
            accepted_labels.append(lab)
        if _stats is not None:
            _stats.append(_ClusterStats(n_pts, rough, ok))

    if accepted_labels:
        accept = np.isin(point_label, accepted_labels)
        nonground_idx = np.flatnonzero(nonground)
        building_idx = nonground_idx[np.flatnonzero(high)[accept]]
        classification[building_idx] = int(PointClass.BUILDING)
    return cloud.with_classification(classification)


def _top_surface_roughness(top: np.ndarray, cluster_mask: np.ndarray) -> float:
    """Median over cluster cells of the residual std-dev to a 3x3 local plane fit."""
    rows, cols = np.nonzero(cluster_mask)
    stds = []
    nrows, ncols = top.shape
    for r, c in zip(rows, cols):
        r0, r1 = max(0, r - 1), min(nrows, r + 2)
        c0, c1 = max(0, c - 1), min(ncols, c + 2)
        win = top[r0:r1, c0:c1]
        sel = cluster_mask[r0:r1, c0:c1] & np.isfinite(win)
        if sel.sum() < 3:
            continue
        rr, cc = np.nonzero(sel)
        z = win[rr, cc]
        A = np.column_stack([cc.astype(float), rr.astype(float), np.ones(len(z))])
        coef, *_ = np.linalg.lstsq(A, z, rcond=None)
        resid = z - A @ coef
        stds.append(float(np.std(resid)))
    if not stds:
        return float("inf")
    return float(np.median(np.asarray(stds)))
