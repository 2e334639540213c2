"""Pipeline driver: ``twin <stage> --config <path> [--seed N]``.

Stages read their inputs from the configured paths, write their artifacts,
and print one machine-parseable key=value summary line to stdout. Logs go to
stderr. Exit codes: 0 success, 2 missing input artifact, 3 invalid config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .config import PipelineConfig, load_config
from .errors import ConfigError, TwinError
from .flood import ScenarioGrid, load_depth_raster, summarize_scenario, uniform_flood
from .geocore import (
    Polygon,
    SceneAnchor,
    read_ascii_grid,
    write_ascii_grid,
)
from .lidar import (
    BuildingFilterParams,
    GroundFilterParams,
    PointClass,
    classify_buildings,
    classify_ground,
    parse_las,
    write_las,
)
from .scene import (
    Footprint,
    Lod2Building,
    TriangleMesh,
    build_dem,
    buildings_to_geojson,
    extract_footprints,
    footprints_to_geojson,
    geojson_polygon_to_scene,
    reconstruct_lod2,
)
from .synth import (
    adaptations_to_geojson,
    assets_to_geojson,
    generate_scene,
    roads_to_geojson,
)
from .tiling import build_tileset, tileset_manifest

log = logging.getLogger("twin")

STAGES = ("synth", "classify", "dem", "footprints", "reconstruct", "tile", "flood", "assess", "serve")


class MissingInput(TwinError):
    def __init__(self, path: Path):
        super().__init__(f"missing input artifact: {path}")
        self.path = path


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingInput(path)
    return path


def _emit(stage: str, started: float, **fields):
    parts = [f"stage={stage}"]
    parts += [f"{k}={v}" for k, v in fields.items()]
    parts.append(f"elapsed_s={time.perf_counter() - started:.3f}")
    print(" ".join(parts))
    sys.stdout.flush()


def _anchor(cfg: PipelineConfig) -> SceneAnchor:
    return SceneAnchor(cfg.anchor.lon0, cfg.anchor.lat0, cfg.anchor.description)


def stage_synth(cfg: PipelineConfig, seed: int | None = None):
    t0 = time.perf_counter()
    s = cfg.synth
    scene = generate_scene(
        seed if seed is not None else s.seed,
        s.n_buildings,
        s.extent_m,
        s.density_pts_per_m2,
        n_trees=s.n_trees,
        n_roads=s.n_roads,
    )
    anchor = _anchor(cfg)
    cfg.base_dir.mkdir(parents=True, exist_ok=True)
    cfg.path("las").write_bytes(write_las(scene.cloud))
    cfg.path("truth").write_text(json.dumps(scene.truth_doc(), indent=2) + "\n")
    np.save(cfg.path("truth_labels"), scene.labels)
    cfg.path("assets").write_text(assets_to_geojson(anchor, scene.assets))
    cfg.path("roads").write_text(roads_to_geojson(anchor, scene.roads))
    cfg.path("adaptations").write_text(adaptations_to_geojson(anchor, scene.adaptations))
    _emit(
        "synth",
        t0,
        seed=scene.seed,
        n_points=len(scene.cloud),
        n_buildings=len(scene.buildings),
        n_assets=len(scene.assets),
        n_roads=len(scene.roads),
    )


def stage_classify(cfg: PipelineConfig):
    t0 = time.perf_counter()
    cloud = parse_las(_require(cfg.path("las")).read_bytes())
    gp = GroundFilterParams(**vars(cfg.ground_filter))
    bp = BuildingFilterParams(**vars(cfg.building_filter))
    cloud = classify_ground(cloud, gp)
    dem = build_dem(cloud, cfg.dem_cell)  # interim surface for the height test
    cloud = classify_buildings(cloud, dem, bp)
    cfg.path("classified_las").write_bytes(write_las(cloud))
    _emit(
        "classify",
        t0,
        n_points=len(cloud),
        ground=int(cloud.mask(PointClass.GROUND).sum()),
        building=int(cloud.mask(PointClass.BUILDING).sum()),
    )


def stage_dem(cfg: PipelineConfig):
    t0 = time.perf_counter()
    cloud = parse_las(_require(cfg.path("classified_las")).read_bytes())
    dem = build_dem(cloud, cfg.dem_cell)
    cfg.path("dem").write_text(write_ascii_grid(dem))
    _emit("dem", t0, ncols=dem.ncols, nrows=dem.nrows, cell=dem.cell)


def stage_footprints(cfg: PipelineConfig):
    t0 = time.perf_counter()
    cloud = parse_las(_require(cfg.path("classified_las")).read_bytes())
    fps = extract_footprints(
        cloud, cfg.footprint.cell, cfg.footprint.min_area, cfg.footprint.simplify_tol
    )
    cfg.path("footprints").write_text(footprints_to_geojson(_anchor(cfg), fps))
    _emit("footprints", t0, n_footprints=len(fps))


def _load_footprints(cfg: PipelineConfig) -> list[Footprint]:
    doc = json.loads(_require(cfg.path("footprints")).read_text())
    anchor = _anchor(cfg)
    out = []
    for feat in doc["features"]:
        poly = geojson_polygon_to_scene(anchor, feat["geometry"]["coordinates"])
        out.append(Footprint(id=int(feat["properties"]["id"]), polygon=poly))
    out.sort(key=lambda f: f.id)
    return out


def stage_reconstruct(cfg: PipelineConfig):
    t0 = time.perf_counter()
    cloud = parse_las(_require(cfg.path("classified_las")).read_bytes())
    dem = read_ascii_grid(_require(cfg.path("dem")).read_text())
    footprints = _load_footprints(cfg)
    building_pts = cloud.xyz[cloud.mask(PointClass.BUILDING)]
    attrs = {
        "county": cfg.attributes.county,
        "municipality": cfg.attributes.municipality,
        "hazard_tags": [],
    }
    from .geocore import points_in_polygon

    buildings = []
    n_fallback = 0
    for fp in footprints:
        xmin, ymin, xmax, ymax = fp.polygon.bounds()
        near = (
            (building_pts[:, 0] >= xmin - 1.0)
            & (building_pts[:, 0] <= xmax + 1.0)
            & (building_pts[:, 1] >= ymin - 1.0)
            & (building_pts[:, 1] <= ymax + 1.0)
        )
        cand = building_pts[near]
        inside = points_in_polygon(cand[:, :2], fp.polygon) if len(cand) else np.zeros(0, bool)
        b = reconstruct_lod2(fp, cand[inside], dem, dict(attrs))
        if "lod1-fallback" in b.attributes["hazard_tags"]:
            n_fallback += 1
        buildings.append(b)
    cfg.path("buildings").write_text(buildings_to_geojson(_anchor(cfg), buildings))
    cfg.path("building_meshes").write_text(_meshes_to_json(buildings))
    _emit("reconstruct", t0, n_buildings=len(buildings), lod1_fallbacks=n_fallback)


def _meshes_to_json(buildings: list[Lod2Building]) -> str:
    doc = {
        "buildings": [
            {
                "id": b.id,
                "base_elevation": b.base_elevation,
                "attributes": b.attributes,
                "footprint": {
                    "exterior": b.footprint.polygon.exterior.tolist(),
                    "holes": [h.tolist() for h in b.footprint.polygon.holes],
                },
                "roof": {
                    "vertices": b.roof_mesh.vertices.tolist(),
                    "indices": b.roof_mesh.indices.tolist(),
                },
                "walls": {
                    "vertices": b.wall_mesh.vertices.tolist(),
                    "indices": b.wall_mesh.indices.tolist(),
                },
            }
            for b in sorted(buildings, key=lambda bb: bb.id)
        ]
    }
    return json.dumps(doc)


def _meshes_from_json(text: str) -> list[Lod2Building]:
    doc = json.loads(text)
    out = []
    for b in doc["buildings"]:
        poly = Polygon(
            np.asarray(b["footprint"]["exterior"]),
            [np.asarray(h) for h in b["footprint"]["holes"]],
        )
        out.append(
            Lod2Building(
                id=int(b["id"]),
                footprint=Footprint(id=int(b["id"]), polygon=poly),
                base_elevation=float(b["base_elevation"]),
                roof_mesh=TriangleMesh(
                    np.asarray(b["roof"]["vertices"]), np.asarray(b["roof"]["indices"])
                ),
                wall_mesh=TriangleMesh(
                    np.asarray(b["walls"]["vertices"]), np.asarray(b["walls"]["indices"])
                ),
                attributes=b["attributes"],
            )
        )
    return out


def stage_tile(cfg: PipelineConfig):
    t0 = time.perf_counter()
    buildings = _meshes_from_json(_require(cfg.path("building_meshes")).read_text())
    ts = build_tileset(buildings, _anchor(cfg), cfg.tiling.max_per_leaf, cfg.tiling.max_depth)
    out_dir = cfg.path("tileset_dir")
    (out_dir / "tiles").mkdir(parents=True, exist_ok=True)
    (out_dir / "tileset.json").write_text(tileset_manifest(ts))
    for tile in ts.root.walk():
        if tile.content_uri:
            (out_dir / tile.content_uri).write_bytes(ts.payloads[tile.id])
    n_tiles = sum(1 for _ in ts.root.walk())
    _emit("tile", t0, n_tiles=n_tiles, n_content=len(ts.payloads))


def stage_flood(cfg: PipelineConfig):
    t0 = time.perf_counter()
    dem = read_ascii_grid(_require(cfg.path("dem")).read_text())
    g = cfg.scenario_grid
    flood_dir = cfg.path("flood_dir")
    n = 0
    for year in g.time_horizons:
        ydir = flood_dir / str(year)
        ydir.mkdir(parents=True, exist_ok=True)
        for weather in g.weather_conditions:
            depth = uniform_flood(dem, g.wse_for(year, weather))
            (ydir / f"{weather}.asc").write_text(write_ascii_grid(depth))
            n += 1
    cfg.path("scenarios").write_text(
        json.dumps(
            {
                "time_horizons": g.time_horizons,
                "weather_conditions": g.weather_conditions,
                "flood_threshold": cfg.exposure.flood_threshold,
                "road_sample_spacing": cfg.exposure.road_sample_spacing,
            },
            indent=2,
        )
        + "\n"
    )
    _emit("flood", t0, n_rasters=n)


def stage_assess(cfg: PipelineConfig):
    t0 = time.perf_counter()
    from .server import load_bundle  # reuses the exact serving-time data path

    for name in ("dem", "buildings", "roads", "assets", "adaptations", "scenarios"):
        _require(cfg.path(name))
    _require(cfg.path("tileset_dir") / "tileset.json")
    _require(cfg.path("flood_dir"))
    bundle = load_bundle(cfg.base_dir)
    out_dir = cfg.path("summaries_dir")
    n = 0
    for (year, weather), summary in sorted(bundle.summaries.items(), key=lambda kv: (kv[0][0], kv[0][1])):
        ydir = out_dir / str(year)
        ydir.mkdir(parents=True, exist_ok=True)
        (ydir / f"{weather}.json").write_text(json.dumps(summary.to_doc(), indent=2) + "\n")
        n += 1
    _emit("assess", t0, n_summaries=n)


def stage_serve(cfg: PipelineConfig):
    from .server import ServeOptions, load_bundle, serve

    for name in ("dem", "buildings", "roads", "assets", "adaptations", "scenarios"):
        _require(cfg.path(name))
    bundle = load_bundle(cfg.base_dir)
    log.info("serving on %s:%d", cfg.server.host, cfg.server.port)
    serve(
        bundle,
        cfg.server.host,
        cfg.server.port,
        ServeOptions(cors_origins=cfg.server.cors_origins, cache_max_age=cfg.server.cache_max_age),
    )


_STAGE_FUNCS = {
    "classify": stage_classify,
    "dem": stage_dem,
    "footprints": stage_footprints,
    "reconstruct": stage_reconstruct,
    "tile": stage_tile,
    "flood": stage_flood,
    "assess": stage_assess,
}

ALL_ORDER = ("classify", "dem", "footprints", "reconstruct", "tile", "flood", "assess")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="twin",
        description="LiDAR-to-tileset pipeline with flood scenario assessment",
    )
    parser.add_argument(
        "stage",
        choices=STAGES + ("all", "init"),
        help="pipeline stage to run; 'all' runs classify..assess in order, "
        "'init' prints a default config",
    )
    parser.add_argument("--config", help="path to the JSON pipeline config")
    parser.add_argument("--seed", type=int, default=None, help="override the synth seed")
    args = parser.parse_args(argv)

    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    if args.stage == "init":
        from .config import default_config_json

        print(default_config_json(), end="")
        return 0

    if not args.config:
        print("error: --config is required", file=sys.stderr)
        return 3
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        for key in exc.keys:
            print(f"  offending key: {key}", file=sys.stderr)
        return 3

    try:
        if args.stage == "synth":
            stage_synth(cfg, seed=args.seed)
        elif args.stage == "serve":
            stage_serve(cfg)
        elif args.stage == "all":
            for name in ALL_ORDER:
                _STAGE_FUNCS[name](cfg)
        else:
            _STAGE_FUNCS[args.stage](cfg)
    except MissingInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
