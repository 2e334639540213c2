"""Coordinate frames, raster grids, and 2D/3D geometry primitives.

All internal geometry lives in a single planar Cartesian "scene" frame:
meters east/north of a geographic anchor point, elevations in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay as _QhullDelaunay

from .errors import AsciiGridError, DegenerateInputError, DomainError

EARTH_RADIUS_M = 6378137.0
MERCATOR_MAX_LAT = 85.051129
SCENE_MAX_RADIUS_M = 50_000.0


@dataclass(frozen=True)
class ScenePoint:
    """A point in the scene frame: meters east, meters north, meters elevation."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise DomainError(f"non-finite scene point ({self.x}, {self.y}, {self.z})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class SceneAnchor:
    """Geographic anchor binding the scene frame to lon/lat."""

    lon0: float
    lat0: float
    description: str = ""

    def __post_init__(self):
        if not -180.0 <= self.lon0 <= 180.0:
            raise DomainError(f"anchor longitude {self.lon0} outside [-180, 180]")
        if not -90.0 < self.lat0 < 90.0:
            raise DomainError(f"anchor latitude {self.lat0} outside (-90, 90)")


def lonlat_to_mercator(lon: float, lat: float) -> tuple[float, float]:
    """Spherical Web Mercator forward projection."""
    if abs(lat) >= MERCATOR_MAX_LAT:
        raise DomainError(f"latitude {lat} outside Mercator domain (|lat| < {MERCATOR_MAX_LAT})")
    x = EARTH_RADIUS_M * math.radians(lon)
    # atanh(sin(lat)) == ln(tan(pi/4 + lat/2)), exact at lat = 0
    y = EARTH_RADIUS_M * math.atanh(math.sin(math.radians(lat)))
    return x, y


def mercator_to_lonlat(x: float, y: float) -> tuple[float, float]:
    """Inverse of lonlat_to_mercator."""
    lon = math.degrees(x / EARTH_RADIUS_M)
    lat = math.degrees(2.0 * math.atan(math.exp(y / EARTH_RADIUS_M)) - math.pi / 2.0)
    return lon, lat


def lonlat_to_scene(anchor: SceneAnchor, lon: float, lat: float) -> tuple[float, float]:
    """Local equirectangular plane about the anchor; valid within 50 km."""
    x, y = _lonlat_to_scene_unchecked(anchor, lon, lat)
    r = math.hypot(x, y)
    if r > SCENE_MAX_RADIUS_M:
        raise DomainError(
            f"point ({lon}, {lat}) is {r / 1000.0:.1f} km from the anchor; "
            f"local frame is valid within {SCENE_MAX_RADIUS_M / 1000.0:.0f} km"
        )
    return x, y


def _lonlat_to_scene_unchecked(anchor: SceneAnchor, lon, lat):
    """Same projection without the distance guard (raster tile sampling reaches far outside)."""
    coslat0 = math.cos(math.radians(anchor.lat0))
    x = EARTH_RADIUS_M * np.radians(np.asarray(lon) - anchor.lon0) * coslat0
    y = EARTH_RADIUS_M * np.radians(np.asarray(lat) - anchor.lat0)
    return x, y


def scene_to_lonlat(anchor: SceneAnchor, x: float, y: float) -> tuple[float, float]:
    """Inverse of lonlat_to_scene."""
    coslat0 = math.cos(math.radians(anchor.lat0))
    lon = anchor.lon0 + np.degrees(np.asarray(x) / (EARTH_RADIUS_M * coslat0))
    lat = anchor.lat0 + np.degrees(np.asarray(y) / EARTH_RADIUS_M)
    return lon, lat


@dataclass
class Raster:
    """Row-major grid anchored at the lower-left corner of the lower-left cell.

    Row 0 is the northernmost row; ``values`` has shape (nrows, ncols).
    """

    xll: float
    yll: float
    cell: float
    values: np.ndarray
    nodata: float = -9999.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1 or self.values.shape[1] < 1:
            raise DomainError("raster values must be a 2D array with at least one cell")
        if not self.cell > 0:
            raise DomainError(f"raster cell size must be positive, got {self.cell}")

    @property
    def nrows(self) -> int:
        return self.values.shape[0]

    @property
    def ncols(self) -> int:
        return self.values.shape[1]

    def cell_center(self, col: int, row: int) -> tuple[float, float]:
        """Scene coordinates of the center of cell (col, row); row 0 = north."""
        x = self.xll + (col + 0.5) * self.cell
        y = self.yll + (self.nrows - 1 - row + 0.5) * self.cell
        return x, y

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (xs of shape [ncols], ys of shape [nrows]) of cell-center coordinates."""
        xs = self.xll + (np.arange(self.ncols) + 0.5) * self.cell
        ys = self.yll + (self.nrows - 1 - np.arange(self.nrows) + 0.5) * self.cell
        return xs, ys

    def cell_index(self, x, y):
        """(col, row) of the cell containing scene point(s); may be out of bounds."""
        col = np.floor((np.asarray(x) - self.xll) / self.cell).astype(np.int64)
        row_south = np.floor((np.asarray(y) - self.yll) / self.cell).astype(np.int64)
        return col, self.nrows - 1 - row_south

    def in_bounds(self, col, row):
        col = np.asarray(col)
        row = np.asarray(row)
        return (col >= 0) & (col < self.ncols) & (row >= 0) & (row < self.nrows)

    def value_at(self, x: float, y: float) -> float:
        """Nearest-cell value; nodata outside the raster."""
        col, row = self.cell_index(x, y)
        if not self.in_bounds(col, row):
            return self.nodata
        return float(self.values[row, col])

    def sample_bilinear(self, x, y):
        """Bilinear interpolation between cell centers, vectorized.

        Returns NaN where a sample falls outside the raster or all four
        neighbor cells are nodata; where only some neighbors are nodata the
        nearest valid neighbor cell value is used instead.
        """
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        gx = (x - self.xll) / self.cell - 0.5
        gy = (y - self.yll) / self.cell - 0.5  # in rows-from-south space
        c0 = np.floor(gx).astype(np.int64)
        r0 = np.floor(gy).astype(np.int64)
        fx = gx - c0
        fy = gy - r0

        out = np.full(x.shape, np.nan)
        valid = (c0 >= -1) & (c0 <= self.ncols - 1) & (r0 >= -1) & (r0 <= self.nrows - 1)
        if not valid.any():
            return out

        vals_south = self.values[::-1, :]  # row 0 = south for index arithmetic
        corner_v = np.empty((4,) + x.shape)
        corner_ok = np.zeros((4,) + x.shape, dtype=bool)
        corner_d2 = np.full((4,) + x.shape, np.inf)
        weights = np.empty((4,) + x.shape)
        offsets = ((0, 0), (1, 0), (0, 1), (1, 1))
        for k, (dc, dr) in enumerate(offsets):
            c = c0 + dc
            r = r0 + dr
            ok = (c >= 0) & (c < self.ncols) & (r >= 0) & (r < self.nrows)
            v = np.where(ok, vals_south[np.clip(r, 0, self.nrows - 1), np.clip(c, 0, self.ncols - 1)], np.nan)
            has_data = ok & (v != self.nodata) & ~np.isnan(v)
            corner_v[k] = v
            corner_ok[k] = has_data
            wx = fx if dc == 1 else 1.0 - fx
            wy = fy if dr == 1 else 1.0 - fy
            weights[k] = wx * wy
            corner_d2[k] = np.where(has_data, (gx - c) ** 2 + (gy - r) ** 2, np.inf)

        n_ok = corner_ok.sum(axis=0)
        all_ok = n_ok == 4
        if all_ok.any():
            out[all_ok] = np.einsum("k...,k...->...", weights, np.nan_to_num(corner_v))[all_ok]
        partial = (n_ok > 0) & ~all_ok
        if partial.any():
            nearest = np.argmin(corner_d2, axis=0)
            out[partial] = np.take_along_axis(corner_v, nearest[None], axis=0)[0][partial]
        return out


def read_ascii_grid(text: str) -> Raster:
    """Parse an ESRI ASCII grid (ncols/nrows/xllcorner/yllcorner/cellsize/NODATA_value)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header: dict[str, float] = {}
    i = 0
    while i < len(lines):
        parts = lines[i].split()
        if len(parts) == 2 and parts[0].lower() in (
            "ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value",
        ):
            try:
                header[parts[0].lower()] = float(parts[1])
            except ValueError as exc:
                raise AsciiGridError(f"header key {parts[0]} has non-numeric value {parts[1]!r}") from exc
            i += 1
        else:
            break
    for key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if key not in header:
            raise AsciiGridError(f"header key {key} is missing")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols < 1 or nrows < 1:
        raise AsciiGridError("header key ncols/nrows must be >= 1")
    if header["cellsize"] <= 0:
        raise AsciiGridError("header key cellsize must be positive")
    nodata = header.get("nodata_value", -9999.0)
    body = " ".join(lines[i:])
    try:
        flat = np.array(body.split(), dtype=np.float64)
    except ValueError as exc:
        raise AsciiGridError(f"grid body contains a non-numeric token: {exc}") from exc
    if flat.size != ncols * nrows:
        raise AsciiGridError(f"grid body has {flat.size} values, expected {ncols * nrows}")
    return Raster(
        xll=header["xllcorner"],
        yll=header["yllcorner"],
        cell=header["cellsize"],
        values=flat.reshape(nrows, ncols),
        nodata=nodata,
    )


def write_ascii_grid(raster: Raster) -> str:
    """Serialize a Raster as an ESRI ASCII grid with round-trip-exact floats."""
    out = [
        f"ncols {raster.ncols}",
        f"nrows {raster.nrows}",
        f"xllcorner {raster.xll!r}",
        f"yllcorner {raster.yll!r}",
        f"cellsize {raster.cell!r}",
        f"NODATA_value {raster.nodata!r}",
    ]
    for row in raster.values:
        out.append(" ".join(repr(v) for v in row.tolist()))
    return "\n".join(out) + "\n"


def _ensure_ring(ring) -> np.ndarray:
    ring = np.asarray(ring, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[1] != 2:
        raise DomainError("ring must be an (N, 2) array of 2D points")
    if not np.allclose(ring[0], ring[-1]):
        ring = np.vstack([ring, ring[0]])
    if len(np.unique(ring[:-1], axis=0)) < 3:
        raise DomainError("ring needs at least 3 distinct vertices")
    return ring


def ring_area(ring: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise rings."""
    x, y = ring[:-1, 0], ring[:-1, 1]
    xn, yn = ring[1:, 0], ring[1:, 1]
    return float(0.5 * np.sum(x * yn - xn * y))


def ring_centroid(ring: np.ndarray) -> tuple[float, float]:
    """Area centroid of a simple closed ring."""
    x, y = ring[:-1, 0], ring[:-1, 1]
    xn, yn = ring[1:, 0], ring[1:, 1]
    cross = x * yn - xn * y
    a = 0.5 * np.sum(cross)
    if abs(a) < 1e-12:
        return float(np.mean(x)), float(np.mean(y))
    cx = float(np.sum((x + xn) * cross) / (6.0 * a))
    cy = float(np.sum((y + yn) * cross) / (6.0 * a))
    return cx, cy


def _ring_self_intersects(ring: np.ndarray) -> bool:
    """O(n^2) proper-crossing test between non-adjacent edges."""
    n = len(ring) - 1
    p = ring[:-1]
    q = ring[1:]
    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # first and last edge share a vertex
            if _segments_cross(p[i], q[i], p[j], q[j]):
                return True
    return False


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) and (o3 * o4 < 0)


@dataclass
class Polygon:
    """Simple polygon: closed CCW exterior ring plus zero or more CW hole rings."""

    exterior: np.ndarray
    holes: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        self.exterior = _ensure_ring(self.exterior)
        if ring_area(self.exterior) < 0:
            self.exterior = self.exterior[::-1].copy()
        fixed = []
        for h in self.holes:
            h = _ensure_ring(h)
            if ring_area(h) > 0:
                h = h[::-1].copy()
            fixed.append(h)
        self.holes = fixed

    @property
    def area(self) -> float:
        """Exterior area minus hole areas."""
        return ring_area(self.exterior) + sum(ring_area(h) for h in self.holes)

    def centroid(self) -> tuple[float, float]:
        return ring_centroid(self.exterior)

    def bounds(self) -> tuple[float, float, float, float]:
        xs, ys = self.exterior[:, 0], self.exterior[:, 1]
        return float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max())

    def is_valid(self) -> bool:
        """Full validity: closure, orientation, vertex count, no self-intersection."""
        try:
            if ring_area(self.exterior) <= 0:
                return False
            if _ring_self_intersects(self.exterior):
                return False
            for h in self.holes:
                if ring_area(h) >= 0 or _ring_self_intersects(h):
                    return False
        except DomainError:
            return False
        return True


@dataclass
class Polyline:
    """Open path of 2D vertices with consecutive vertices distinct."""

    vertices: np.ndarray

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2 or len(self.vertices) < 2:
            raise DomainError("polyline needs at least 2 2D vertices")
        seg = np.diff(self.vertices, axis=0)
        if np.any(np.hypot(seg[:, 0], seg[:, 1]) == 0.0):
            raise DomainError("polyline has coincident consecutive vertices")

    @property
    def length(self) -> float:
        seg = np.diff(self.vertices, axis=0)
        return float(np.sum(np.hypot(seg[:, 0], seg[:, 1])))


_EDGE_EPS = 1e-9


def _on_ring_boundary(px, py, ring, eps=_EDGE_EPS):
    """Vectorized point-on-ring-segment test (distance to segment <= eps)."""
    ax, ay = ring[:-1, 0], ring[:-1, 1]
    bx, by = ring[1:, 0], ring[1:, 1]
    dx, dy = bx - ax, by - ay
    L2 = dx * dx + dy * dy
    px = np.asarray(px, dtype=np.float64)[..., None]
    py = np.asarray(py, dtype=np.float64)[..., None]
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / np.where(L2 == 0, 1.0, L2), 0.0, 1.0)
    qx = ax + t * dx
    qy = ay + t * dy
    d2 = (px - qx) ** 2 + (py - qy) ** 2
    return np.any(d2 <= eps * eps, axis=-1)


def _crossings(px, py, ring):
    """Vectorized even-odd crossing count of a horizontal ray to the right."""
    ax, ay = ring[:-1, 0], ring[:-1, 1]
    bx, by = ring[1:, 0], ring[1:, 1]
    px = np.asarray(px, dtype=np.float64)[..., None]
    py = np.asarray(py, dtype=np.float64)[..., None]
    cond = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (py - ay) * (bx - ax) / (by - ay)
    hits = cond & (px < xint)
    return hits.sum(axis=-1)


def point_in_polygon(p, poly: Polygon) -> bool:
    """Even-odd containment; points on any ring boundary count as inside."""
    return bool(points_in_polygon(np.asarray([p], dtype=np.float64), poly)[0])


def points_in_polygon(points, poly: Polygon) -> np.ndarray:
    """Vectorized even-odd containment for an (N, 2) array of points."""
    points = np.asarray(points, dtype=np.float64)
    px, py = points[:, 0], points[:, 1]
    crossings = _crossings(px, py, poly.exterior)
    boundary = _on_ring_boundary(px, py, poly.exterior)
    for h in poly.holes:
        crossings = crossings + _crossings(px, py, h)
        boundary = boundary | _on_ring_boundary(px, py, h)
    return boundary | (crossings % 2 == 1)


_SNAP = 1e-6  # duplicate-point snap before triangulation, in meters


def snapped_unique(points: np.ndarray) -> np.ndarray:
    """Indices of first occurrences after snapping to the 1e-6 m grid, in input order."""
    snapped = np.round(np.asarray(points, dtype=np.float64) / _SNAP) * _SNAP
    _, first_idx = np.unique(snapped, axis=0, return_index=True)
    return np.sort(first_idx)


def _check_triangulable(points: np.ndarray):
    if len(points) < 3:
        raise DegenerateInputError(f"need at least 3 distinct points, got {len(points)}")
    centered = points - points.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9 * max(1.0, np.abs(centered).max())) < 2:
        raise DegenerateInputError("all points are collinear")


def delaunay_2d(points) -> np.ndarray:
    """Delaunay triangulation; returns an (M, 3) array of indices into ``points``.

    Duplicate points are snapped together at 1e-6 m before triangulating;
    returned indices refer to the first occurrence in the input order.
    Triangles are normalized to CCW orientation and sorted for determinism.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DomainError("delaunay_2d expects an (N, 2) array")
    first_idx = snapped_unique(points)
    unique_pts = points[first_idx]
    _check_triangulable(unique_pts)
    tri = _QhullDelaunay(unique_pts)
    out = first_idx[tri.simplices]
    xa, ya = points[out[:, 0], 0], points[out[:, 0], 1]
    xb, yb = points[out[:, 1], 0], points[out[:, 1], 1]
    xc, yc = points[out[:, 2], 0], points[out[:, 2], 1]
    cross = (xb - xa) * (yc - ya) - (yb - ya) * (xc - xa)
    flip = cross < 0
    out[flip] = out[flip][:, [0, 2, 1]]
    order = np.lexsort((out[:, 2], out[:, 1], out[:, 0]))
    return out[order]
