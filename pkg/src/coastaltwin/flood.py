"""Flood scenario grid and exposure assessment for buildings, roads, and assets.

Depth rasters are inputs (hydrodynamic modeling happens elsewhere); the only
depth computation here is the uniform what-if flood, depth = wse - ground.
All assessors are pure functions so scenario summaries are reproducible
bit-for-bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DomainError, GridAlignmentError
from .geocore import Polyline, Raster, points_in_polygon, read_ascii_grid
from .scene import Lod2Building

log = logging.getLogger(__name__)

DEFAULT_FLOOD_THRESHOLD = 0.1  # meters of depth that count as "affected"
DEPTH_HISTOGRAM_EDGES = (0.0, 0.3, 1.0, 2.0, 3.0)  # last bin is open-ended
DEPTH_HISTOGRAM_LABELS = ("0.0-0.3", "0.3-1.0", "1.0-2.0", "2.0-3.0", ">3.0")


@dataclass
class ScenarioGrid:
    """Time-horizon x weather-condition lattice of depth rasters."""

    time_horizons: list[int]
    weather_conditions: list[str]
    rasters: dict[tuple[int, str], Raster] = field(default_factory=dict)

    def keys(self):
        for year in self.time_horizons:
            for weather in self.weather_conditions:
                yield (year, weather)

    def raster(self, year: int, weather: str) -> Raster:
        key = (int(year), str(weather))
        if key not in self.rasters:
            raise KeyError(f"scenario ({year}, {weather}) not in grid")
        return self.rasters[key]

    def __len__(self) -> int:
        return len(self.time_horizons) * len(self.weather_conditions)


@dataclass
class BuildingExposure:
    building_id: int
    max_depth: float
    mean_depth: float
    flooded: bool
    coverage: float
    flagged: bool = False  # footprint entirely outside the raster


@dataclass
class RoadExposure:
    road_id: int
    length: float
    flooded_length: float
    fraction: float
    max_depth: float
    flagged: bool = False  # no sample had data


@dataclass
class CategorySummary:
    name: str
    total: int
    affected: int


@dataclass
class VulnerabilitySummary:
    year: int | None
    weather: str | None
    categories: list[CategorySummary]
    buildings: dict
    roads: dict
    depth_histogram: dict

    def to_doc(self) -> dict:
        return {
            "year": self.year,
            "weather": self.weather,
            "categories": [
                {"name": c.name, "total": c.total, "affected": c.affected}
                for c in self.categories
            ],
            "buildings": self.buildings,
            "roads": self.roads,
            "depth_histogram": self.depth_histogram,
        }


def load_depth_raster(text: str, expected_grid: Raster) -> Raster:
    """Parse an ESRI ASCII depth grid and require the DEM's exact geometry.

    Negative depths are clamped to zero (with a logged count); nodata cells
    pass through.
    """
    raster = read_ascii_grid(text)
    for name, got, want in (
        ("ncols", raster.ncols, expected_grid.ncols),
        ("nrows", raster.nrows, expected_grid.nrows),
        ("xllcorner", raster.xll, expected_grid.xll),
        ("yllcorner", raster.yll, expected_grid.yll),
        ("cellsize", raster.cell, expected_grid.cell),
    ):
        if abs(float(got) - float(want)) > 1e-6:
            raise GridAlignmentError(f"{name} mismatch: raster has {got}, DEM grid has {want}")
    data = raster.values != raster.nodata
    negative = data & (raster.values < 0)
    n_neg = int(negative.sum())
    if n_neg:
        log.warning("clamped %d negative depth cells to 0", n_neg)
        raster.values[negative] = 0.0
    return raster


def uniform_flood(dem: Raster, wse: float) -> Raster:
    """Depth raster for a flat water surface at elevation ``wse``: max(0, wse - ground)."""
    depth = np.maximum(0.0, wse - dem.values)
    nodata_mask = dem.values == dem.nodata
    depth[nodata_mask] = dem.nodata
    return Raster(xll=dem.xll, yll=dem.yll, cell=dem.cell, values=depth, nodata=dem.nodata)


def assess_building(
    b: Lod2Building,
    depth: Raster,
    flood_threshold: float = DEFAULT_FLOOD_THRESHOLD,
) -> BuildingExposure:
    """Depth statistics over raster cells whose centers fall inside the footprint.

    A footprint smaller than one cell samples its centroid instead; a
    footprint entirely off the raster yields a flagged zero exposure.
    """
    poly = b.footprint.polygon
    xmin, ymin, xmax, ymax = poly.bounds()
    c0, r1 = depth.cell_index(xmin, ymin)
    c1, r0 = depth.cell_index(xmax, ymax)
    c0w, c1w = max(int(c0), 0), min(int(c1), depth.ncols - 1)
    r0w, r1w = max(int(r0), 0), min(int(r1), depth.nrows - 1)
    if c0w > c1w or r0w > r1w:
        return BuildingExposure(b.id, 0.0, 0.0, False, 0.0, flagged=True)

    cols, rows = np.meshgrid(np.arange(c0w, c1w + 1), np.arange(r0w, r1w + 1))
    cols, rows = cols.ravel(), rows.ravel()
    xs = depth.xll + (cols + 0.5) * depth.cell
    ys = depth.yll + (depth.nrows - 1 - rows + 0.5) * depth.cell
    inside = points_in_polygon(np.column_stack([xs, ys]), poly)
    n_sampled = int(inside.sum())
    if n_sampled == 0:
        cx, cy = poly.centroid()
        col, row = depth.cell_index(cx, cy)
        if not depth.in_bounds(col, row):
            return BuildingExposure(b.id, 0.0, 0.0, False, 0.0, flagged=True)
        vals = np.asarray([depth.values[int(row), int(col)]])
        n_sampled = 1
    else:
        vals = depth.values[rows[inside], cols[inside]]
    with_data = vals[vals != depth.nodata]
    coverage = len(with_data) / n_sampled
    if len(with_data) == 0:
        return BuildingExposure(b.id, 0.0, 0.0, False, 0.0)
    max_d = float(with_data.max())
    mean_d = float(with_data.mean())
    return BuildingExposure(b.id, max_d, mean_d, max_d >= flood_threshold, coverage)


def _sample_polyline(r: Polyline, spacing: float) -> np.ndarray:
    """Evenly spaced arc-length samples (step <= spacing) including both endpoints."""
    length = r.length
    n = max(1, int(np.ceil(length / spacing)))
    targets = np.linspace(0.0, length, n + 1)
    seg = np.diff(r.vertices, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    si = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seg_len) - 1)
    t = (targets - cum[si]) / seg_len[si]
    return r.vertices[si] + t[:, None] * seg[si]


def assess_road(
    r: Polyline,
    depth: Raster,
    sample_spacing: float = 1.0,
    flood_threshold: float = DEFAULT_FLOOD_THRESHOLD,
    road_id: int = 0,
) -> RoadExposure:
    """Flooded length from bilinear depth at arc-length samples along the road."""
    length = r.length
    if length <= 0:
        raise DegenerateInputError("zero-length polyline")
    pts = _sample_polyline(r, sample_spacing)
    depths = depth.sample_bilinear(pts[:, 0], pts[:, 1])
    valid = ~np.isnan(depths)
    if not valid.any():
        return RoadExposure(road_id, length, 0.0, 0.0, 0.0, flagged=True)
    flooded = valid & (depths >= flood_threshold)
    fraction = float(flooded.sum()) / len(pts)
    max_depth = float(np.nanmax(depths)) if valid.any() else 0.0
    return RoadExposure(road_id, length, fraction * length, fraction, max_depth)


@dataclass
class AssetPoint:
    id: int
    name: str
    category: str
    x: float
    y: float


def summarize_scenario(
    grid: ScenarioGrid,
    year: int,
    weather: str,
    buildings: list[Lod2Building],
    roads: list[tuple[int, Polyline]],
    assets: list[AssetPoint],
    flood_threshold: float = DEFAULT_FLOOD_THRESHOLD,
    road_sample_spacing: float = 1.0,
) -> VulnerabilitySummary:
    """Per-scenario exposure aggregates across asset categories, buildings, and roads."""
    depth = grid.raster(year, weather)
    return summarize_depth(
        depth, buildings, roads, assets, flood_threshold, road_sample_spacing,
        year=int(year), weather=str(weather),
    )


def summarize_depth(
    depth: Raster,
    buildings: list[Lod2Building],
    roads: list[tuple[int, Polyline]],
    assets: list[AssetPoint],
    flood_threshold: float = DEFAULT_FLOOD_THRESHOLD,
    road_sample_spacing: float = 1.0,
    year: int | None = None,
    weather: str | None = None,
) -> VulnerabilitySummary:
    """Summary against an explicit depth raster (shared by batch and what-if paths)."""
    exposures = [assess_building(b, depth, flood_threshold) for b in sorted(buildings, key=lambda b: b.id)]
    flooded = [e for e in exposures if e.flooded]
    hist = [0] * len(DEPTH_HISTOGRAM_LABELS)
    for e in flooded:
        k = int(np.searchsorted(DEPTH_HISTOGRAM_EDGES[1:], e.max_depth, side="right"))
        hist[k] += 1
    buildings_doc = {
        "total": len(exposures),
        "flooded": len(flooded),
        "max_depth": max((e.max_depth for e in exposures), default=0.0),
    }

    total_len = 0.0
    flooded_len = 0.0
    segments_affected = 0
    for rid, line in sorted(roads, key=lambda rl: rl[0]):
        e = assess_road(line, depth, road_sample_spacing, flood_threshold, road_id=rid)
        total_len += e.length
        flooded_len += e.flooded_length
        if e.flooded_length > 0:
            segments_affected += 1
    roads_doc = {
        "total_length": total_len,
        "flooded_length": flooded_len,
        "pct": (100.0 * flooded_len / total_len) if total_len > 0 else 0.0,
        "segments_total": len(roads),
        "segments_affected": segments_affected,
    }

    by_category: dict[str, list[AssetPoint]] = {}
    for a in assets:
        by_category.setdefault(a.category, []).append(a)
    categories = []
    for name in sorted(by_category):
        members = by_category[name]
        xs = np.asarray([a.x for a in members])
        ys = np.asarray([a.y for a in members])
        d = depth.sample_bilinear(xs, ys)
        affected = int(np.sum(~np.isnan(d) & (d >= flood_threshold)))
        categories.append(CategorySummary(name=name, total=len(members), affected=affected))

    return VulnerabilitySummary(
        year=year,
        weather=weather,
        categories=categories,
        buildings=buildings_doc,
        roads=roads_doc,
        depth_histogram={"bins": list(DEPTH_HISTOGRAM_LABELS), "counts": hist},
    )
