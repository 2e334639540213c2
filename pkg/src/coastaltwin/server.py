"""Read-only HTTP service over a built scene bundle.

Serves the tileset manifest and tile payloads, GeoJSON layers, slippy-map
flood raster tiles (PNG for display, raw f32 for querying), per-scenario
vulnerability summaries, per-building detail, and uniform-flood what-if
queries. All state is loaded once at startup and never mutated; every 200
response carries a strong content-hash ETag and honors If-None-Match.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import Response
from PIL import Image
from starlette.exceptions import HTTPException as StarletteHTTPException

from .flood import (
    AssetPoint,
    ScenarioGrid,
    VulnerabilitySummary,
    assess_building,
    load_depth_raster,
    summarize_depth,
    uniform_flood,
)
from .geocore import (
    EARTH_RADIUS_M,
    Polyline,
    Raster,
    SceneAnchor,
    _lonlat_to_scene_unchecked,
    read_ascii_grid,
)
from .scene import Footprint, Lod2Building, TriangleMesh, geojson_polygon_to_scene
from .tiling import Tileset, parse_manifest

MERCATOR_WORLD = EARTH_RADIUS_M * math.pi  # half-extent of the Web Mercator square
TILE_SIZE = 256
MAX_ZOOM = 22
MAX_WHATIF_WSE = 30.0

# Depth-to-color ramp served to clients; the PNG renderer reads the same data
# so server and UI can never disagree.
LEGEND_STOPS = [
    {"depth": 0.0, "color": [173, 216, 230, 0]},
    {"depth": 0.1, "color": [141, 203, 232, 110]},
    {"depth": 0.5, "color": [96, 166, 218, 150]},
    {"depth": 1.0, "color": [54, 126, 196, 185]},
    {"depth": 2.0, "color": [29, 85, 162, 215]},
    {"depth": 3.0, "color": [14, 52, 118, 240]},
    {"depth": 5.0, "color": [6, 28, 78, 255]},
]

GEOJSON_LAYERS = ("buildings", "roads", "critical-assets", "adaptations")


@dataclass
class SceneBundle:
    """Immutable snapshot the request handlers share."""

    anchor: SceneAnchor
    tileset: Tileset
    manifest_text: str
    tile_payloads: dict[str, bytes]
    dem: Raster
    buildings: list[Lod2Building]
    roads: list[tuple[int, Polyline]]
    assets: list[AssetPoint]
    layers: dict[str, str]  # layer name -> canonical GeoJSON text
    scenario_grid: ScenarioGrid
    flood_threshold: float
    road_sample_spacing: float
    roof_heights: dict[int, float] = field(default_factory=dict)
    summaries: dict[tuple[int, str], VulnerabilitySummary] = field(default_factory=dict)
    feature_depths: dict[int, list[tuple[int, str, float]]] = field(default_factory=dict)

    def finalize(self):
        """Precompute per-scenario summaries and per-building depth rows."""
        for year, weather in self.scenario_grid.keys():
            depth = self.scenario_grid.raster(year, weather)
            self.summaries[(year, weather)] = summarize_depth(
                depth,
                self.buildings,
                self.roads,
                self.assets,
                self.flood_threshold,
                self.road_sample_spacing,
                year=year,
                weather=weather,
            )
            for b in self.buildings:
                e = assess_building(b, depth, self.flood_threshold)
                self.feature_depths.setdefault(b.id, []).append((year, weather, e.max_depth))
        return self


def load_bundle(bundle_dir: str | Path) -> SceneBundle:
    """Load every artifact the pipeline wrote into one immutable snapshot."""
    root = Path(bundle_dir)

    manifest_text = (root / "tileset" / "tileset.json").read_text()
    tileset = parse_manifest(manifest_text)
    payloads = {}
    for tile in tileset.root.walk():
        if tile.content_uri:
            payloads[tile.content_uri] = (root / "tileset" / tile.content_uri).read_bytes()
    anchor = tileset.anchor

    dem = read_ascii_grid((root / "dem.asc").read_text())

    scen_doc = json.loads((root / "scenarios.json").read_text())
    grid = ScenarioGrid(
        time_horizons=[int(y) for y in scen_doc["time_horizons"]],
        weather_conditions=[str(w) for w in scen_doc["weather_conditions"]],
    )
    for year in grid.time_horizons:
        for weather in grid.weather_conditions:
            text = (root / "flood" / str(year) / f"{weather}.asc").read_text()
            grid.rasters[(year, weather)] = load_depth_raster(text, dem)

    buildings = []
    bj = json.loads((root / "buildings.geojson").read_text())
    for feat in bj["features"]:
        poly = geojson_polygon_to_scene(anchor, feat["geometry"]["coordinates"])
        props = feat["properties"]
        buildings.append(
            Lod2Building(
                id=int(props["id"]),
                footprint=Footprint(id=int(props["id"]), polygon=poly),
                base_elevation=float(props["base_elevation"]),
                roof_mesh=TriangleMesh.empty(),
                wall_mesh=TriangleMesh.empty(),
                attributes={
                    "county": props.get("county", ""),
                    "municipality": props.get("municipality", ""),
                    "hazard_tags": props.get("hazard_tags", []),
                },
            )
        )
    buildings.sort(key=lambda b: b.id)
    roof_heights = {
        int(f["properties"]["id"]): float(f["properties"].get("roof_height", 0.0))
        for f in bj["features"]
    }

    roads = []
    rj = json.loads((root / "roads.geojson").read_text())
    for feat in rj["features"]:
        coords = np.asarray(feat["geometry"]["coordinates"], dtype=np.float64)
        x, y = _lonlat_to_scene_unchecked(anchor, coords[:, 0], coords[:, 1])
        roads.append((int(feat["properties"]["id"]), Polyline(np.column_stack([x, y]))))
    roads.sort(key=lambda r: r[0])

    assets = []
    aj = json.loads((root / "assets.geojson").read_text())
    for feat in aj["features"]:
        lon, lat = feat["geometry"]["coordinates"]
        x, y = _lonlat_to_scene_unchecked(anchor, lon, lat)
        p = feat["properties"]
        assets.append(AssetPoint(int(p["id"]), str(p["name"]), str(p["category"]), float(x), float(y)))
    assets.sort(key=lambda a: a.id)

    layers = {
        "buildings": _canonical_geojson(bj),
        "roads": _canonical_geojson(rj),
        "critical-assets": _canonical_geojson(aj),
        "adaptations": _canonical_geojson(json.loads((root / "adaptations.geojson").read_text())),
    }

    return SceneBundle(
        anchor=anchor,
        tileset=tileset,
        manifest_text=manifest_text,
        tile_payloads=payloads,
        dem=dem,
        buildings=buildings,
        roads=roads,
        assets=assets,
        layers=layers,
        scenario_grid=grid,
        flood_threshold=float(scen_doc.get("flood_threshold", 0.1)),
        road_sample_spacing=float(scen_doc.get("road_sample_spacing", 1.0)),
        roof_heights=roof_heights,
    ).finalize()


def _canonical_geojson(doc: dict) -> str:
    feats = sorted(doc.get("features", []), key=lambda f: f.get("properties", {}).get("id", 0))
    return json.dumps({"type": "FeatureCollection", "features": feats}, indent=2)


# ---------------------------------------------------------------------------
# flood raster tiles


def tile_mercator_bounds(z: int, x: int, y: int):
    """(x0, y_top, span) of slippy tile (z, x, y); y grows southward."""
    n = 2**z
    span = 2.0 * MERCATOR_WORLD / n
    return -MERCATOR_WORLD + x * span, MERCATOR_WORLD - y * span, span


def sample_depth_tile(raster: Raster, anchor: SceneAnchor, z: int, x: int, y: int) -> np.ndarray:
    """(256, 256) float32 of nearest-neighbor depths at pixel centers; 0 off-raster."""
    x0, y_top, span = tile_mercator_bounds(z, x, y)
    px = x0 + (np.arange(TILE_SIZE) + 0.5) * span / TILE_SIZE
    py = y_top - (np.arange(TILE_SIZE) + 0.5) * span / TILE_SIZE
    mx, my = np.meshgrid(px, py)
    lon = np.degrees(mx / EARTH_RADIUS_M)
    lat = np.degrees(2.0 * np.arctan(np.exp(my / EARTH_RADIUS_M)) - math.pi / 2.0)
    sx, sy = _lonlat_to_scene_unchecked(anchor, lon, lat)
    col = np.floor((sx - raster.xll) / raster.cell).astype(np.int64)
    row_s = np.floor((sy - raster.yll) / raster.cell).astype(np.int64)
    row = raster.nrows - 1 - row_s
    ok = (col >= 0) & (col < raster.ncols) & (row >= 0) & (row < raster.nrows)
    out = np.zeros((TILE_SIZE, TILE_SIZE), dtype=np.float32)
    out[ok] = raster.values[row[ok], col[ok]].astype(np.float32)
    return out


def encode_depth_tile_bin(samples: np.ndarray, nodata: float) -> bytes:
    """FGT1 payload: magic, f32 nodata, 65536 little-endian f32 depths."""
    body = np.ascontiguousarray(samples, dtype="<f4").tobytes()
    return b"FGT1" + np.float32(nodata).astype("<f4").tobytes() + body


def _legend_arrays():
    depths = np.asarray([s["depth"] for s in LEGEND_STOPS], dtype=np.float64)
    colors = np.asarray([s["color"] for s in LEGEND_STOPS], dtype=np.float64)
    return depths, colors


def render_depth_tile_png(samples: np.ndarray, nodata: float) -> bytes:
    """RGBA PNG through the legend ramp; depth 0 and nodata fully transparent."""
    depths, colors = _legend_arrays()
    d = samples.astype(np.float64)
    rgba = np.zeros((TILE_SIZE, TILE_SIZE, 4), dtype=np.float64)
    for ch in range(4):
        rgba[..., ch] = np.interp(d, depths, colors[:, ch])
    invisible = (d <= 0.0) | (d == nodata) | ~np.isfinite(d)
    rgba[invisible] = 0.0
    img = Image.fromarray(np.round(rgba).astype(np.uint8), "RGBA")
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# HTTP app


@dataclass
class ServeOptions:
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    cache_max_age: int = 3600


def _etag_of(body: bytes) -> str:
    return '"' + hashlib.sha256(body).hexdigest() + '"'


def create_app(bundle: SceneBundle, options: ServeOptions | None = None) -> FastAPI:
    options = options or ServeOptions()
    app = FastAPI(title="coastaltwin scene server", docs_url=None, redoc_url=None)
    if options.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=options.cors_origins,
            allow_methods=["GET"],
            allow_headers=["*"],
        )
    render_cache: dict[tuple, bytes] = {}
    cache_lock = threading.Lock()

    def respond(request: Request, body: bytes, media_type: str) -> Response:
        etag = _etag_of(body)
        headers = {
            "ETag": etag,
            "Cache-Control": f"max-age={options.cache_max_age}",
        }
        inm = request.headers.get("if-none-match")
        if inm is not None and etag in [v.strip() for v in inm.split(",")]:
            return Response(status_code=304, headers=headers)
        return Response(content=body, media_type=media_type, headers=headers)

    def respond_json(request: Request, doc) -> Response:
        return respond(request, json.dumps(doc, indent=2).encode("utf-8"), "application/json")

    def not_found(detail: str):
        raise HTTPException(status_code=404, detail=detail)

    def bad_request(detail: str):
        raise HTTPException(status_code=400, detail=detail)

    @app.exception_handler(StarletteHTTPException)
    async def _http_error(request, exc):
        return Response(
            content=json.dumps({"error": f"http {exc.status_code}", "detail": str(exc.detail)}),
            status_code=exc.status_code,
            media_type="application/json",
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request, exc):
        return Response(
            content=json.dumps({"error": "bad request", "detail": str(exc.errors())}),
            status_code=400,
            media_type="application/json",
        )

    @app.get("/healthz")
    def healthz(request: Request):
        return respond(request, b"ok", "text/plain")

    @app.get("/api/scenarios")
    def scenarios(request: Request):
        g = bundle.scenario_grid
        doc = {
            "time_horizons": g.time_horizons,
            "weather_conditions": g.weather_conditions,
            "default": {"year": g.time_horizons[0], "weather": g.weather_conditions[0]},
            "count": len(g),
        }
        return respond_json(request, doc)

    @app.get("/api/tileset.json")
    def tileset_manifest_route(request: Request):
        return respond(request, bundle.manifest_text.encode("utf-8"), "application/json")

    @app.get("/api/tiles/{tile_id}.ctb")
    def tile_payload(request: Request, tile_id: str):
        uri = f"tiles/{tile_id}.ctb"
        body = bundle.tile_payloads.get(uri)
        if body is None:
            not_found(f"no tile {tile_id}")
        return respond(request, body, "application/octet-stream")

    @app.get("/api/assets/{layer}.geojson")
    def layer_geojson(request: Request, layer: str):
        text = bundle.layers.get(layer)
        if text is None:
            not_found(f"no layer {layer}; layers are {', '.join(GEOJSON_LAYERS)}")
        return respond(request, text.encode("utf-8"), "application/geo+json")

    @app.get("/api/flood/legend")
    def legend(request: Request):
        return respond_json(request, {"stops": LEGEND_STOPS})

    def _scenario_raster_or_404(year: int, weather: str) -> Raster:
        try:
            return bundle.scenario_grid.raster(year, weather)
        except KeyError:
            not_found(f"no scenario ({year}, {weather})")

    def _flood_tile(year: int, weather: str, z: int, x: int, y: int, kind: str) -> bytes:
        if not (0 <= z <= MAX_ZOOM):
            bad_request(f"zoom {z} outside [0, {MAX_ZOOM}]")
        n = 2**z
        if not (0 <= x < n and 0 <= y < n):
            bad_request(f"tile ({x}, {y}) invalid for zoom {z}")
        raster = _scenario_raster_or_404(year, weather)
        key = (year, weather, z, x, y, kind)
        with cache_lock:
            cached = render_cache.get(key)
        if cached is not None:
            return cached
        samples = sample_depth_tile(raster, bundle.anchor, z, x, y)
        if kind == "bin":
            body = encode_depth_tile_bin(samples, raster.nodata)
        else:
            body = render_depth_tile_png(samples, raster.nodata)
        with cache_lock:
            render_cache[key] = body
        return body

    @app.get("/api/flood/{year}/{weather}/{z}/{x}/{y}.png")
    def flood_png(request: Request, year: int, weather: str, z: int, x: int, y: int):
        return respond(request, _flood_tile(year, weather, z, x, y, "png"), "image/png")

    @app.get("/api/flood/{year}/{weather}/{z}/{x}/{y}.bin")
    def flood_bin(request: Request, year: int, weather: str, z: int, x: int, y: int):
        return respond(
            request, _flood_tile(year, weather, z, x, y, "bin"), "application/octet-stream"
        )

    @app.get("/api/summary/{year}/{weather}")
    def summary(request: Request, year: int, weather: str):
        s = bundle.summaries.get((year, weather))
        if s is None:
            not_found(f"no scenario ({year}, {weather})")
        return respond_json(request, s.to_doc())

    @app.get("/api/feature/{building_id}")
    def feature(request: Request, building_id: int):
        rows = bundle.feature_depths.get(building_id)
        if rows is None:
            not_found(f"no building {building_id}")
        b = next(bb for bb in bundle.buildings if bb.id == building_id)
        doc = {
            "id": building_id,
            "base_elevation": b.base_elevation,
            "roof_height": bundle.roof_heights.get(building_id, 0.0),
            "attributes": b.attributes,
            "depths": [
                {"year": year, "weather": weather, "max_depth": depth}
                for year, weather, depth in rows
            ],
        }
        return respond_json(request, doc)

    @app.get("/api/whatif")
    def whatif(request: Request, wse_m: float):
        if not (0.0 <= wse_m <= MAX_WHATIF_WSE):
            bad_request(f"wse_m must be within [0, {MAX_WHATIF_WSE}], got {wse_m}")
        depth = uniform_flood(bundle.dem, wse_m)
        s = summarize_depth(
            depth,
            bundle.buildings,
            bundle.roads,
            bundle.assets,
            bundle.flood_threshold,
            bundle.road_sample_spacing,
        )
        return respond_json(request, {"wse_m": wse_m, "summary": s.to_doc()})

    return app


def serve(bundle: SceneBundle, host: str, port: int, options: ServeOptions | None = None):
    """Run the service until interrupted."""
    import uvicorn

    app = create_app(bundle, options)
    uvicorn.run(app, host=host, port=port, log_level="warning")
