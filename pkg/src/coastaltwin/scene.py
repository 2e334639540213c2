"""Scene reconstruction: DEM, building footprints, LOD2/LOD1 buildings.

The reconstruction chain is: ground points -> TIN-interpolated DEM raster;
building points -> occupancy grid -> traced footprint polygons; roof points
per footprint -> roof TIN + wall quads + base fan. Externally produced
meshes can be georeferenced into the same scene frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import LinearNDInterpolator
from scipy.spatial import Delaunay as _QhullDelaunay
from scipy.spatial import QhullError, cKDTree

from .errors import DegenerateInputError, DomainError
from .geocore import (
    Polygon,
    Raster,
    SceneAnchor,
    _lonlat_to_scene_unchecked,
    lonlat_to_scene,
    points_in_polygon,
    ring_area,
    scene_to_lonlat,
    snapped_unique,
)
from .lidar import PointClass, PointCloud

ATTRIBUTE_KEYS = ("county", "municipality", "hazard_tags")
LOD1_FALLBACK_TAG = "lod1-fallback"


@dataclass
class TriangleMesh:
    """Indexed triangle mesh; vertices are scene-frame (x, y, z)."""

    vertices: np.ndarray  # (N, 3) float64
    indices: np.ndarray  # (M, 3) int64

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1, 3)

    @classmethod
    def empty(cls) -> "TriangleMesh":
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))

    def __len__(self) -> int:
        return len(self.indices)

    def concat(self, other: "TriangleMesh") -> "TriangleMesh":
        if len(other.vertices) == 0:
            return TriangleMesh(self.vertices.copy(), self.indices.copy())
        return TriangleMesh(
            np.vstack([self.vertices, other.vertices]),
            np.vstack([self.indices, other.indices + len(self.vertices)]),
        )


@dataclass
class Footprint:
    id: int
    polygon: Polygon

    @property
    def area(self) -> float:
        return self.polygon.area


@dataclass
class Lod2Building:
    id: int
    footprint: Footprint
    base_elevation: float
    roof_mesh: TriangleMesh
    wall_mesh: TriangleMesh  # includes the closing base fan
    attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        attrs = {"county": "", "municipality": "", "hazard_tags": []}
        for k in self.attributes:
            if k not in ATTRIBUTE_KEYS:
                raise DomainError(f"unknown building attribute {k!r}")
        attrs.update(self.attributes)
        self.attributes = attrs

    def combined_mesh(self) -> TriangleMesh:
        return self.roof_mesh.concat(self.wall_mesh)

    @property
    def max_roof_z(self) -> float:
        if len(self.roof_mesh.vertices):
            return float(self.roof_mesh.vertices[:, 2].max())
        return self.base_elevation


@dataclass
class Lod1Building:
    id: int
    footprint: Footprint
    base_elevation: float
    roof_elevation: float


def build_dem(cloud: PointCloud, cell: float) -> Raster:
    """DEM raster from ground points: TIN linear interpolation at cell centers.

    Cells outside the ground convex hull take the nearest ground elevation.
    The extent is the ground bounding box padded by one cell.
    """
    if cell <= 0:
        raise DomainError("cell must be positive")
    ground = cloud.xyz[cloud.mask(PointClass.GROUND)]
    if len(ground) < 3:
        raise DegenerateInputError(f"need >= 3 ground points, got {len(ground)}")
    keep = snapped_unique(ground[:, :2])
    pts = ground[keep]
    if len(pts) < 3:
        raise DegenerateInputError("fewer than 3 distinct ground locations")
    centered = pts[:, :2] - pts[:, :2].mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9 * max(1.0, np.abs(centered).max())) < 2:
        raise DegenerateInputError("ground points are collinear")

    xll = float(pts[:, 0].min()) - cell
    yll = float(pts[:, 1].min()) - cell
    ncols = int(np.ceil((pts[:, 0].max() + cell - xll) / cell))
    nrows = int(np.ceil((pts[:, 1].max() + cell - yll) / cell))
    xs = xll + (np.arange(ncols) + 0.5) * cell
    ys = yll + (np.arange(nrows) + 0.5) * cell  # south to north
    gx, gy = np.meshgrid(xs, ys)

    tri = _QhullDelaunay(pts[:, :2])
    interp = LinearNDInterpolator(tri, pts[:, 2])
    z = interp(gx, gy)
    missing = np.isnan(z)
    if missing.any():
        tree = cKDTree(pts[:, :2])
        _, nearest = tree.query(np.column_stack([gx[missing], gy[missing]]))
        z[missing] = pts[nearest, 2]
    return Raster(xll=xll, yll=yll, cell=cell, values=z[::-1, :])  # flip: row 0 = north


# ---------------------------------------------------------------------------
# footprint extraction


def _trace_rings(mask: np.ndarray):
    """Trace boundary loops of a cell mask along cell edges.

    Vertices are integer lattice corners (i=col, j=row-from-south). Each
    directed edge keeps the interior on its left, so exterior loops come out
    CCW and hole loops CW. At pinch vertices the walk prefers the left turn
    (staying on the same cell); when a walk revisits a vertex, the enclosed
    sub-cycle is pinched off as its own ring, so every emitted ring is
    strictly simple.
    """
    nrows, ncols = mask.shape
    padded = np.zeros((nrows + 2, ncols + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    filled = padded[1:-1, 1:-1]
    south_open = filled & ~padded[:-2, 1:-1]
    north_open = filled & ~padded[2:, 1:-1]
    west_open = filled & ~padded[1:-1, :-2]
    east_open = filled & ~padded[1:-1, 2:]

    out_edges: dict[tuple[int, int], list[tuple[int, int]]] = {}

    def add(a, b):
        out_edges.setdefault(a, []).append(b)

    for j, i in zip(*np.nonzero(south_open)):
        add((int(i), int(j)), (int(i) + 1, int(j)))
    for j, i in zip(*np.nonzero(east_open)):
        add((int(i) + 1, int(j)), (int(i) + 1, int(j) + 1))
    for j, i in zip(*np.nonzero(north_open)):
        add((int(i) + 1, int(j) + 1), (int(i), int(j) + 1))
    for j, i in zip(*np.nonzero(west_open)):
        add((int(i), int(j) + 1), (int(i), int(j)))
    for v in out_edges.values():
        v.sort()

    def take(frm, direction):
        """Pop the outgoing edge preferring left turn, then straight, then right."""
        options = out_edges.get(frm)
        if not options:
            return None
        if len(options) == 1 or direction is None:
            nxt = options[0]
        else:
            best, best_rank = None, None
            for cand in options:
                d = (cand[0] - frm[0], cand[1] - frm[1])
                cross = direction[0] * d[1] - direction[1] * d[0]
                dot = direction[0] * d[0] + direction[1] * d[1]
                rank = 0 if cross > 0 else (1 if dot > 0 else 2)  # left, straight, right
                if best_rank is None or rank < best_rank:
                    best, best_rank = cand, rank
            nxt = best
        options.remove(nxt)
        if not options:
            del out_edges[frm]
        return nxt

    rings = []
    while out_edges:
        start = min(out_edges)
        loop = [start]
        seen = {start: 0}
        cur = take(start, None)
        direction = (cur[0] - start[0], cur[1] - start[1])
        while cur != start:
            if cur in seen:
                k = seen[cur]
                sub = loop[k:] + [cur]
                rings.append(np.asarray(sub, dtype=np.float64))
                for v in loop[k:]:
                    del seen[v]
                del loop[k:]
            seen[cur] = len(loop)
            loop.append(cur)
            nxt = take(cur, direction)
            direction = (nxt[0] - cur[0], nxt[1] - cur[1])
            cur = nxt
        loop.append(start)
        rings.append(np.asarray(loop, dtype=np.float64))
    return rings


def _simplify_ring(ring: np.ndarray, tol: float) -> np.ndarray:
    """Douglas-Peucker on a closed ring, split at the two mutually farthest anchors."""
    if tol <= 0 or len(ring) <= 4:
        return ring
    open_ring = ring[:-1]
    d0 = np.sum((open_ring - open_ring[0]) ** 2, axis=1)
    far = int(np.argmax(d0))
    if far == 0:
        return ring
    a = _douglas_peucker(open_ring[: far + 1], tol)
    b = _douglas_peucker(np.vstack([open_ring[far:], open_ring[:1]]), tol)
    simple = np.vstack([a[:-1], b[:-1]])
    if len(simple) < 3:
        return ring
    closed = np.vstack([simple, simple[:1]])
    return closed


def _douglas_peucker(chain: np.ndarray, tol: float) -> np.ndarray:
    n = len(chain)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        seg = chain[hi] - chain[lo]
        L2 = float(seg @ seg)
        rel = chain[lo + 1 : hi] - chain[lo]
        if L2 == 0.0:
            d = np.sqrt(np.sum(rel**2, axis=1))
        else:
            d = np.abs(rel[:, 0] * seg[1] - rel[:, 1] * seg[0]) / np.sqrt(L2)
        worst = int(np.argmax(d))
        if d[worst] > tol:
            mid = lo + 1 + worst
            keep[mid] = True
            stack.append((lo, mid))
            stack.append((mid, hi))
    return chain[keep]


def extract_footprints(
    cloud: PointCloud, cell: float, min_area: float, simplify_tol: float
) -> list[Footprint]:
    """Building-point occupancy grid -> closed -> traced -> simplified polygons.

    Components (8-connected after one 3x3 morphological closing) smaller than
    ``min_area`` are dropped; so are individual exterior rings below it when a
    diagonal pinch splits a component into several simple rings. The traced
    boundary is inset by half a cell (2x upsample + one fine-cell erosion):
    the raw union of occupied cells overestimates the true outline by about
    half a cell on every side, since any cell touched by one point counts.
    """
    building = cloud.xyz[cloud.mask(PointClass.BUILDING)]
    if len(building) == 0:
        return []
    x0 = float(building[:, 0].min()) - cell
    y0 = float(building[:, 1].min()) - cell
    ncols = int(np.ceil((building[:, 0].max() + cell - x0) / cell)) + 1
    nrows = int(np.ceil((building[:, 1].max() + cell - y0) / cell)) + 1
    col = np.clip(((building[:, 0] - x0) / cell).astype(np.int64), 0, ncols - 1)
    row = np.clip(((building[:, 1] - y0) / cell).astype(np.int64), 0, nrows - 1)
    occupied = np.zeros((nrows, ncols), dtype=bool)
    occupied[row, col] = True
    occupied = ndimage.binary_closing(occupied, structure=np.ones((3, 3), dtype=bool))

    labels, n_labels = ndimage.label(occupied, structure=np.ones((3, 3), dtype=int))
    fine = cell / 2.0
    footprints: list[Footprint] = []
    next_id = 0
    for lab in range(1, n_labels + 1):
        comp = labels == lab
        if comp.sum() * cell * cell < min_area:
            continue
        comp_fine = np.repeat(np.repeat(comp, 2, axis=0), 2, axis=1)
        # L1 (plus-shaped) erosion insets straight edges half a coarse cell
        # without clipping the staircase corners of rotated outlines
        plus = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
        comp_fine = ndimage.binary_erosion(comp_fine, structure=plus)
        if not comp_fine.any():
            continue
        rings = _trace_rings(comp_fine)
        exteriors: list[np.ndarray] = []
        holes: list[np.ndarray] = []
        for ring in rings:
            scaled = np.empty_like(ring)
            scaled[:, 0] = x0 + ring[:, 0] * fine
            scaled[:, 1] = y0 + ring[:, 1] * fine
            simplified = _simplify_ring(scaled, simplify_tol)
            poly_check = Polygon(simplified if ring_area(simplified) > 0 else simplified[::-1])
            if not poly_check.is_valid():
                simplified = scaled
            (exteriors if ring_area(ring) > 0 else holes).append(simplified)
        for ext in sorted(exteriors, key=lambda r: (r[:, 0].min(), r[:, 1].min())):
            if abs(ring_area(ext)) < min_area:
                continue
            ext_poly = Polygon(ext)
            own_holes = [
                h
                for h in holes
                if points_in_polygon((h[:1] + h[1:2]) / 2.0, ext_poly)[0]
            ]
            footprints.append(Footprint(id=next_id, polygon=Polygon(ext, own_holes)))
            next_id += 1
    footprints.sort(key=lambda f: f.polygon.centroid())
    for i, f in enumerate(footprints):
        f.id = i
    return footprints


# ---------------------------------------------------------------------------
# LOD2 reconstruction


def _dem_cells_in_footprint(dem: Raster, poly: Polygon) -> np.ndarray:
    """Values of DEM cells whose centers fall inside the polygon."""
    xmin, ymin, xmax, ymax = poly.bounds()
    c0, r1 = dem.cell_index(xmin, ymin)
    c1, r0 = dem.cell_index(xmax, ymax)
    c0, c1 = max(int(c0), 0), min(int(c1), dem.ncols - 1)
    r0, r1 = max(int(r0), 0), min(int(r1), dem.nrows - 1)
    if c0 > c1 or r0 > r1:
        return np.empty(0)
    cols, rows = np.meshgrid(np.arange(c0, c1 + 1), np.arange(r0, r1 + 1))
    cols, rows = cols.ravel(), rows.ravel()
    xs = dem.xll + (cols + 0.5) * dem.cell
    ys = dem.yll + (dem.nrows - 1 - rows + 0.5) * dem.cell
    inside = points_in_polygon(np.column_stack([xs, ys]), poly)
    vals = dem.values[rows[inside], cols[inside]]
    return vals[vals != dem.nodata]


def base_elevation_for(footprint: Footprint, dem: Raster) -> float:
    """5th percentile of DEM cells under the footprint (robust to noise and slope)."""
    vals = _dem_cells_in_footprint(dem, footprint.polygon)
    if len(vals) == 0:
        cx, cy = footprint.polygon.centroid()
        col, row = dem.cell_index(cx, cy)
        col = int(np.clip(col, 0, dem.ncols - 1))
        row = int(np.clip(row, 0, dem.nrows - 1))
        return float(dem.values[row, col])
    return float(np.percentile(vals, 5.0))


def _wall_and_base_mesh(ring: np.ndarray, base: float, top_z: np.ndarray) -> TriangleMesh:
    """Walls along an exterior ring up to per-vertex top heights, plus a base fan."""
    n = len(ring) - 1
    verts = []
    tris = []
    for k in range(n):
        p1, p2 = ring[k], ring[k + 1]
        z1, z2 = top_z[k], top_z[(k + 1) % n]
        i0 = len(verts)
        verts.extend(
            [
                (p1[0], p1[1], base),
                (p2[0], p2[1], base),
                (p2[0], p2[1], z2),
                (p1[0], p1[1], z1),
            ]
        )
        tris.append((i0, i0 + 1, i0 + 2))
        tris.append((i0, i0 + 2, i0 + 3))
    # base fan, wound downward
    i0 = len(verts)
    verts.extend((ring[k, 0], ring[k, 1], base) for k in range(n))
    for k in range(1, n - 1):
        tris.append((i0, i0 + k + 1, i0 + k))
    return TriangleMesh(np.asarray(verts), np.asarray(tris, dtype=np.int64))


def _flat_prism(footprint: Footprint, base: float, top: float) -> tuple[TriangleMesh, TriangleMesh]:
    """Flat roof fan + walls/base for a constant-height building."""
    ring = footprint.polygon.exterior
    n = len(ring) - 1
    roof_verts = np.column_stack([ring[:-1, 0], ring[:-1, 1], np.full(n, top)])
    roof_tris = [(0, k, k + 1) for k in range(1, n - 1)]
    roof = TriangleMesh(roof_verts, np.asarray(roof_tris, dtype=np.int64))
    walls = _wall_and_base_mesh(ring, base, np.full(n, top))
    return roof, walls


def _roof_tin(roof_points: np.ndarray, poly: Polygon) -> TriangleMesh:
    """Delaunay TIN of roof points, keeping triangles whose centroid is inside the polygon."""
    if len(roof_points) < 3:
        raise DegenerateInputError("fewer than 3 roof points")
    keep = snapped_unique(roof_points[:, :2])
    pts = roof_points[keep]
    if len(pts) < 3:
        raise DegenerateInputError("roof points collapse to fewer than 3 locations")
    centered = pts[:, :2] - pts[:, :2].mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-9 * max(1.0, np.abs(centered).max())) < 2:
        raise DegenerateInputError("roof points are collinear")
    tri = _QhullDelaunay(pts[:, :2])
    simplices = tri.simplices
    centroids = pts[simplices, :2].mean(axis=1)
    inside = points_in_polygon(centroids, poly)
    simplices = simplices[inside]
    if len(simplices) == 0:
        raise DegenerateInputError("no roof triangle lies inside the footprint")
    # CCW in plan so roof normals point up
    xa, ya = pts[simplices[:, 0], 0], pts[simplices[:, 0], 1]
    xb, yb = pts[simplices[:, 1], 0], pts[simplices[:, 1], 1]
    xc, yc = pts[simplices[:, 2], 0], pts[simplices[:, 2], 1]
    flip = (xb - xa) * (yc - ya) - (yb - ya) * (xc - xa) < 0
    simplices[flip] = simplices[flip][:, [0, 2, 1]]
    used = np.unique(simplices)
    remap = np.full(len(pts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriangleMesh(pts[used], remap[simplices])


def reconstruct_lod2(
    footprint: Footprint,
    roof_points: np.ndarray,
    dem: Raster,
    attributes: dict | None = None,
) -> Lod2Building:
    """Roof TIN clipped to the footprint + walls to per-edge roof heights.

    Degenerate roof point sets (fewer than 3 distinct, or collinear) fall
    back to a flat prism at the median roof elevation, tagged
    ``lod1-fallback`` in hazard_tags.
    """
    roof_points = np.asarray(roof_points, dtype=np.float64).reshape(-1, 3)
    attrs = dict(attributes or {})
    base = base_elevation_for(footprint, dem)
    ring = footprint.polygon.exterior

    try:
        roof_mesh = _roof_tin(roof_points, footprint.polygon)
    except (DegenerateInputError, QhullError):
        median_z = float(np.median(roof_points[:, 2])) if len(roof_points) else base + 3.0
        roof, walls = _flat_prism(footprint, base, max(median_z, base))
        tags = list(attrs.get("hazard_tags", []))
        if LOD1_FALLBACK_TAG not in tags:
            tags.append(LOD1_FALLBACK_TAG)
        attrs["hazard_tags"] = tags
        return Lod2Building(footprint.id, footprint, base, roof, walls, attrs)

    roof_vertices = roof_mesh.vertices
    roof_vertices[:, 2] = np.maximum(roof_vertices[:, 2], base)  # invariant: roof z >= base
    tree = cKDTree(roof_vertices[:, :2])
    _, nearest = tree.query(ring[:-1])
    top_z = roof_vertices[nearest, 2]
    walls = _wall_and_base_mesh(ring, base, top_z)
    return Lod2Building(footprint.id, footprint, base, roof_mesh, walls, attrs)


def simplify_to_lod1(b: Lod2Building) -> Lod1Building:
    """Flat-roof simplification at the plan-area-weighted mean roof elevation."""
    v = b.roof_mesh.vertices
    idx = b.roof_mesh.indices
    if len(idx) == 0:
        roof_z = b.base_elevation
    else:
        a, bb, c = v[idx[:, 0]], v[idx[:, 1]], v[idx[:, 2]]
        plan_area = 0.5 * np.abs(
            (bb[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (bb[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0])
        )
        centroid_z = (a[:, 2] + bb[:, 2] + c[:, 2]) / 3.0
        total = float(plan_area.sum())
        if total <= 0:
            roof_z = float(centroid_z.mean())
        else:
            roof_z = float((plan_area * centroid_z).sum() / total)
    return Lod1Building(b.id, b.footprint, b.base_elevation, roof_z)


def lod1_mesh(b: Lod1Building) -> TriangleMesh:
    roof, walls = _flat_prism(b.footprint, b.base_elevation, b.roof_elevation)
    return roof.concat(walls)


def prism_building(
    bid: int,
    footprint: Footprint,
    base_elevation: float,
    roof_elevation: float,
    attributes: dict | None = None,
) -> Lod2Building:
    """Flat-roofed building straight from a footprint; handy for fixtures."""
    roof, walls = _flat_prism(footprint, base_elevation, roof_elevation)
    return Lod2Building(bid, footprint, base_elevation, roof, walls, dict(attributes or {}))


def georeference_mesh(
    mesh: TriangleMesh,
    anchor: SceneAnchor,
    anchor_point: tuple[float, float, float],
    rotation_deg: float,
    scale: float,
) -> TriangleMesh:
    """Place a local-frame mesh into the scene: rotate about vertical, scale, translate."""
    if scale <= 0:
        raise DomainError("scale must be positive")
    if not np.isfinite(mesh.vertices).all():
        raise DomainError("mesh has non-finite vertices")
    lon, lat, z = anchor_point
    tx, ty = lonlat_to_scene(anchor, lon, lat)
    theta = np.radians(rotation_deg)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    placed = (scale * mesh.vertices) @ rot.T + np.array([tx, ty, z])
    return TriangleMesh(placed, mesh.indices.copy())


# ---------------------------------------------------------------------------
# GeoJSON / artifact serialization


def _ring_to_lonlat(anchor: SceneAnchor, ring: np.ndarray) -> list[list[float]]:
    lon, lat = scene_to_lonlat(anchor, ring[:, 0], ring[:, 1])
    return [[float(a), float(b)] for a, b in zip(lon, lat)]


def buildings_to_geojson(anchor: SceneAnchor, buildings: list[Lod2Building]) -> str:
    """FeatureCollection of footprints in lon/lat with the exported property set."""
    feats = []
    for b in sorted(buildings, key=lambda bb: bb.id):
        rings = [_ring_to_lonlat(anchor, b.footprint.polygon.exterior)]
        rings += [_ring_to_lonlat(anchor, h) for h in b.footprint.polygon.holes]
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": rings},
                "properties": {
                    "id": b.id,
                    "base_elevation": b.base_elevation,
                    "roof_height": b.max_roof_z - b.base_elevation,
                    "area": b.footprint.area,
                    "county": b.attributes.get("county", ""),
                    "municipality": b.attributes.get("municipality", ""),
                    "hazard_tags": b.attributes.get("hazard_tags", []),
                },
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=2)


def footprints_to_geojson(anchor: SceneAnchor, footprints: list[Footprint]) -> str:
    feats = []
    for f in sorted(footprints, key=lambda ff: ff.id):
        rings = [_ring_to_lonlat(anchor, f.polygon.exterior)]
        rings += [_ring_to_lonlat(anchor, h) for h in f.polygon.holes]
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": rings},
                "properties": {"id": f.id, "area": f.area},
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=2)


def geojson_polygon_to_scene(anchor: SceneAnchor, coordinates: list) -> Polygon:
    """Inverse of the exporters: lon/lat rings -> scene-frame Polygon."""
    rings = []
    for ring in coordinates:
        arr = np.asarray(ring, dtype=np.float64)
        x, y = _lonlat_to_scene_unchecked(anchor, arr[:, 0], arr[:, 1])
        rings.append(np.column_stack([x, y]))
    return Polygon(rings[0], rings[1:])
