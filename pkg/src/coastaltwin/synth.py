"""Deterministic synthetic coastal-town generator.

Produces a LiDAR-like point cloud (gently sloped terrain, rectangular
buildings with flat or gable roofs, scattered trees), ground-truth records
for every building, plus critical-asset points, a road network, and an
adaptations overlay. Everything is a pure function of the seed, so repeated
runs are byte-identical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .geocore import Polygon, SceneAnchor, scene_to_lonlat
from .lidar import PointClass, PointCloud

GROUND_LABEL = 0
TREE_LABEL = -1

ASSET_CATEGORIES = (
    "transportation",
    "water-sewer",
    "emergency-services",
    "commercial",
    "community",
)

POINT_NOISE_SD = 0.03


@dataclass
class TerrainModel:
    """Gently sloped plane with a mild smooth undulation."""

    z0: float
    slope_x: float
    slope_y: float
    amplitude: float
    wavelength: float

    def elevation(self, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        wave = self.amplitude * np.sin(2 * np.pi * x / self.wavelength) * np.cos(
            2 * np.pi * y / self.wavelength
        )
        return self.z0 + self.slope_x * x + self.slope_y * y + wave

    def to_doc(self) -> dict:
        return {
            "z0": self.z0,
            "slope_x": self.slope_x,
            "slope_y": self.slope_y,
            "amplitude": self.amplitude,
            "wavelength": self.wavelength,
        }


@dataclass
class BuildingTruth:
    id: int
    center: tuple[float, float]
    width: float
    length: float
    rotation_deg: float
    roof_type: str  # "flat" | "gable"
    eave_z: float
    ridge_z: float  # equals eave_z for flat roofs

    def corners(self) -> np.ndarray:
        """Footprint corners, CCW, unclosed."""
        hw, hl = self.width / 2.0, self.length / 2.0
        local = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
        th = math.radians(self.rotation_deg)
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        return local @ rot.T + np.asarray(self.center)

    def polygon(self) -> Polygon:
        c = self.corners()
        return Polygon(np.vstack([c, c[:1]]))

    def ridge_segment(self) -> np.ndarray | None:
        if self.roof_type != "gable":
            return None
        hl = self.length / 2.0
        th = math.radians(self.rotation_deg)
        d = np.array([math.cos(th), math.sin(th)])
        c = np.asarray(self.center)
        return np.vstack([c - hl * d, c + hl * d])

    def roof_z_at(self, x, y):
        """Roof surface elevation at plan positions inside the footprint."""
        th = math.radians(self.rotation_deg)
        dx = np.asarray(x) - self.center[0]
        dy = np.asarray(y) - self.center[1]
        v = -dx * math.sin(th) + dy * math.cos(th)  # across-ridge coordinate
        if self.roof_type == "flat":
            return np.full_like(np.asarray(v, dtype=np.float64), self.eave_z)
        hw = self.width / 2.0
        return self.ridge_z - (np.abs(v) / hw) * (self.ridge_z - self.eave_z)

    def to_doc(self) -> dict:
        ridge = self.ridge_segment()
        return {
            "id": self.id,
            "center": [self.center[0], self.center[1]],
            "width": self.width,
            "length": self.length,
            "rotation_deg": self.rotation_deg,
            "roof_type": self.roof_type,
            "eave_z": self.eave_z,
            "ridge_z": self.ridge_z,
            "corners": self.corners().tolist(),
            "ridge": ridge.tolist() if ridge is not None else None,
            "area": self.width * self.length,
        }


@dataclass
class SynthScene:
    seed: int
    extent_m: float
    density: float
    terrain: TerrainModel
    buildings: list[BuildingTruth]
    cloud: PointCloud
    labels: np.ndarray  # per-point: 0 ground, id+1 roof of building id, -1 tree
    assets: list[dict] = field(default_factory=list)  # {id, name, category, x, y}
    roads: list[dict] = field(default_factory=list)  # {id, name, vertices}
    adaptations: list[dict] = field(default_factory=list)

    def truth_doc(self) -> dict:
        return {
            "seed": self.seed,
            "extent_m": self.extent_m,
            "density_pts_per_m2": self.density,
            "terrain": self.terrain.to_doc(),
            "n_points": len(self.cloud),
            "buildings": [b.to_doc() for b in self.buildings],
        }


def _place_buildings(rng: np.random.Generator, n: int, extent: float, terrain: TerrainModel):
    buildings: list[BuildingTruth] = []
    margin = 12.0
    min_gap = 6.0
    attempts = 0
    while len(buildings) < n and attempts < 20000:
        attempts += 1
        cx = rng.uniform(margin, extent - margin)
        cy = rng.uniform(margin, extent - margin)
        width = rng.uniform(8.0, 12.0)
        length = rng.uniform(width, 14.0)
        rot = rng.uniform(0.0, 180.0)
        reach = math.hypot(width, length) / 2.0
        ok = True
        for b in buildings:
            other_reach = math.hypot(b.width, b.length) / 2.0
            d = math.hypot(cx - b.center[0], cy - b.center[1])
            if d < reach + other_reach + min_gap:
                ok = False
                break
        if not ok:
            continue
        ground = float(terrain.elevation(cx, cy))
        eave = ground + rng.uniform(5.0, 8.0)
        if rng.uniform() < 0.5:
            roof_type, ridge = "flat", eave
        else:
            roof_type, ridge = "gable", eave + rng.uniform(1.5, 3.0)
        buildings.append(
            BuildingTruth(
                id=len(buildings),
                center=(cx, cy),
                width=width,
                length=length,
                rotation_deg=rot,
                roof_type=roof_type,
                eave_z=eave,
                ridge_z=ridge,
            )
        )
    return buildings


def _sample_roof(rng: np.random.Generator, b: BuildingTruth, density: float):
    """Uniform interior samples plus a perimeter ring and (for gables) ridge samples."""
    n_interior = max(8, int(round(density * b.width * b.length)))
    hw, hl = b.width / 2.0, b.length / 2.0
    u = rng.uniform(-hl, hl, n_interior)
    v = rng.uniform(-hw, hw, n_interior)

    edge_spacing = 0.35
    ring_uv = []
    for n_steps, fixed, axis in (
        (int(np.ceil(b.length / edge_spacing)), hw, "u"),
        (int(np.ceil(b.width / edge_spacing)), hl, "v"),
    ):
        ts = np.linspace(-1.0, 1.0, max(2, n_steps))
        if axis == "u":
            ring_uv.append(np.column_stack([ts * hl, np.full_like(ts, fixed)]))
            ring_uv.append(np.column_stack([ts * hl, np.full_like(ts, -fixed)]))
        else:
            ring_uv.append(np.column_stack([np.full_like(ts, fixed), ts * hw]))
            ring_uv.append(np.column_stack([np.full_like(ts, -fixed), ts * hw]))
    ring = np.vstack(ring_uv)
    uv = np.vstack([np.column_stack([u, v]), ring])

    if b.roof_type == "gable":
        n_ridge = max(2, int(np.ceil(b.length / 0.4)))
        ridge_u = np.linspace(-hl, hl, n_ridge)
        uv = np.vstack([uv, np.column_stack([ridge_u, np.zeros(n_ridge)])])

    th = math.radians(b.rotation_deg)
    rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    xy = uv @ rot.T + np.asarray(b.center)
    z = b.roof_z_at(xy[:, 0], xy[:, 1]) + rng.normal(0.0, POINT_NOISE_SD, len(xy))
    return np.column_stack([xy, z])


def _sample_trees(rng: np.random.Generator, n_trees: int, extent: float,
                  buildings: list[BuildingTruth], terrain: TerrainModel, density: float):
    pts = []
    placed = 0
    attempts = 0
    while placed < n_trees and attempts < 2000:
        attempts += 1
        cx = rng.uniform(10.0, extent - 10.0)
        cy = rng.uniform(10.0, extent - 10.0)
        radius = rng.uniform(1.8, 3.0)
        height = rng.uniform(4.0, 8.0)
        clear = True
        for b in buildings:
            reach = math.hypot(b.width, b.length) / 2.0
            if math.hypot(cx - b.center[0], cy - b.center[1]) < reach + radius + 4.0:
                clear = False
                break
        if not clear:
            continue
        n_pts = max(60, int(round(density * math.pi * radius * radius)))
        r = radius * np.sqrt(rng.uniform(0.0, 1.0, n_pts))
        theta = rng.uniform(0.0, 2 * np.pi, n_pts)
        x = cx + r * np.cos(theta)
        y = cy + r * np.sin(theta)
        canopy = height * (1.0 - r / radius)
        depth = rng.uniform(0.0, 2.5, n_pts)  # foliage penetration scatter
        z = terrain.elevation(x, y) + np.maximum(0.5, canopy - depth)
        pts.append(np.column_stack([x, y, z]))
        placed += 1
    if pts:
        return np.vstack(pts)
    return np.zeros((0, 3))


def generate_scene(
    seed: int,
    n_buildings: int,
    extent_m: float,
    density_pts_per_m2: float,
    n_trees: int = 6,
    n_roads: int = 5,
) -> SynthScene:
    """Build the full synthetic scene; deterministic for a given seed."""
    if n_buildings < 0 or extent_m <= 0 or density_pts_per_m2 <= 0:
        raise ValueError("n_buildings >= 0, extent and density positive required")
    rng = np.random.default_rng(seed)
    terrain = TerrainModel(
        z0=rng.uniform(0.8, 1.4),
        slope_x=rng.uniform(0.002, 0.005),
        slope_y=rng.uniform(0.001, 0.004),
        amplitude=rng.uniform(0.1, 0.25),
        wavelength=rng.uniform(120.0, 220.0),
    )
    buildings = _place_buildings(rng, n_buildings, extent_m, terrain)

    n_ground = int(round(density_pts_per_m2 * extent_m * extent_m))
    gx = rng.uniform(0.0, extent_m, n_ground)
    gy = rng.uniform(0.0, extent_m, n_ground)
    outside = np.ones(n_ground, dtype=bool)
    for b in buildings:
        c = b.corners()
        th = math.radians(b.rotation_deg)
        dx = gx - b.center[0]
        dy = gy - b.center[1]
        u = dx * math.cos(th) + dy * math.sin(th)
        v = -dx * math.sin(th) + dy * math.cos(th)
        outside &= ~((np.abs(u) <= b.length / 2.0) & (np.abs(v) <= b.width / 2.0))
        del c
    gx, gy = gx[outside], gy[outside]
    gz = terrain.elevation(gx, gy) + rng.normal(0.0, POINT_NOISE_SD, len(gx))
    chunks = [np.column_stack([gx, gy, gz])]
    labels = [np.zeros(len(gx), dtype=np.int32)]

    for b in buildings:
        roof = _sample_roof(rng, b, density_pts_per_m2)
        chunks.append(roof)
        labels.append(np.full(len(roof), b.id + 1, dtype=np.int32))

    trees = _sample_trees(rng, n_trees, extent_m, buildings, terrain, density_pts_per_m2)
    if len(trees):
        chunks.append(trees)
        labels.append(np.full(len(trees), TREE_LABEL, dtype=np.int32))

    xyz = np.vstack(chunks)
    all_labels = np.concatenate(labels)
    cloud = PointCloud(
        xyz=xyz,
        classification=np.zeros(len(xyz), dtype=np.uint8),
        intensity=np.zeros(len(xyz), dtype=np.uint16),
        source_scale=(0.01, 0.01, 0.01),
        source_offset=(0.0, 0.0, 0.0),
    )

    assets = _make_assets(rng, extent_m, buildings)
    roads = _make_roads(rng, extent_m, n_roads)
    adaptations = _make_adaptations(rng, extent_m)
    return SynthScene(
        seed=seed,
        extent_m=extent_m,
        density=density_pts_per_m2,
        terrain=terrain,
        buildings=buildings,
        cloud=cloud,
        labels=all_labels,
        assets=assets,
        roads=roads,
        adaptations=adaptations,
    )


def _make_assets(rng: np.random.Generator, extent: float, buildings: list[BuildingTruth]):
    assets = []
    aid = 0
    for category in ASSET_CATEGORIES:
        for k in range(int(rng.integers(4, 8))):
            assets.append(
                {
                    "id": aid,
                    "name": f"{category}-{k}",
                    "category": category,
                    "x": float(rng.uniform(5.0, extent - 5.0)),
                    "y": float(rng.uniform(5.0, extent - 5.0)),
                }
            )
            aid += 1
    return assets


def _make_roads(rng: np.random.Generator, extent: float, n_roads: int):
    roads = []
    for rid in range(n_roads):
        horizontal = rid % 2 == 0
        base = float(rng.uniform(0.15, 0.85) * extent)
        stations = np.linspace(0.0, extent, 6)
        jitter = rng.normal(0.0, 3.0, len(stations))
        if horizontal:
            verts = np.column_stack([stations, base + jitter])
        else:
            verts = np.column_stack([base + jitter, stations])
        roads.append({"id": rid, "name": f"road-{rid}", "vertices": verts.tolist()})
    return roads


def _make_adaptations(rng: np.random.Generator, extent: float):
    feats = []
    names = ("shore berm", "elevated roadway", "pump station site")
    for k, name in enumerate(names):
        cx = float(rng.uniform(0.2, 0.8) * extent)
        cy = float(rng.uniform(0.2, 0.8) * extent)
        w = float(rng.uniform(10.0, 30.0))
        h = float(rng.uniform(10.0, 30.0))
        feats.append(
            {
                "id": k,
                "name": name,
                "category": "adaptation",
                "ring": [
                    [cx - w, cy - h],
                    [cx + w, cy - h],
                    [cx + w, cy + h],
                    [cx - w, cy + h],
                    [cx - w, cy - h],
                ],
            }
        )
    return feats


# ---------------------------------------------------------------------------
# GeoJSON writers for scene side-channels


def assets_to_geojson(anchor: SceneAnchor, assets: list[dict]) -> str:
    feats = []
    for a in sorted(assets, key=lambda d: d["id"]):
        lon, lat = scene_to_lonlat(anchor, a["x"], a["y"])
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [float(lon), float(lat)]},
                "properties": {"id": a["id"], "name": a["name"], "category": a["category"]},
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=2)


def roads_to_geojson(anchor: SceneAnchor, roads: list[dict]) -> str:
    feats = []
    for r in sorted(roads, key=lambda d: d["id"]):
        verts = np.asarray(r["vertices"], dtype=np.float64)
        lon, lat = scene_to_lonlat(anchor, verts[:, 0], verts[:, 1])
        coords = [[float(a), float(b)] for a, b in zip(lon, lat)]
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {"id": r["id"], "name": r["name"]},
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=2)


def adaptations_to_geojson(anchor: SceneAnchor, adaptations: list[dict]) -> str:
    feats = []
    for a in sorted(adaptations, key=lambda d: d["id"]):
        ring = np.asarray(a["ring"], dtype=np.float64)
        lon, lat = scene_to_lonlat(anchor, ring[:, 0], ring[:, 1])
        coords = [[[float(x), float(y)] for x, y in zip(lon, lat)]]
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": coords},
                "properties": {"id": a["id"], "name": a["name"], "category": a["category"]},
            }
        )
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=2)
