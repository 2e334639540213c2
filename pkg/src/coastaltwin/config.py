"""Pipeline configuration: one JSON file, strict unknown-key rejection.

Every knob for every stage lives here so reruns are reproducible from the
config alone. Unknown keys fail loudly (all offenders listed at once) rather
than being silently ignored.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError


@dataclass
class AnchorConfig:
    lon0: float = -83.03
    lat0: float = 29.14
    description: str = "synthetic coastal town"


@dataclass
class PathsConfig:
    las: str = "cloud.las"
    truth: str = "truth.json"
    truth_labels: str = "truth_labels.npy"
    classified_las: str = "classified.las"
    dem: str = "dem.asc"
    footprints: str = "footprints.geojson"
    buildings: str = "buildings.geojson"
    building_meshes: str = "buildings_lod2.json"
    tileset_dir: str = "tileset"
    flood_dir: str = "flood"
    summaries_dir: str = "summaries"
    scenarios: str = "scenarios.json"
    assets: str = "assets.geojson"
    roads: str = "roads.geojson"
    adaptations: str = "adaptations.geojson"


@dataclass
class GroundFilterConfig:
    cell: float = 1.0
    max_window: float = 20.0
    slope: float = 0.15
    initial_threshold: float = 0.3
    max_threshold: float = 2.5


@dataclass
class BuildingFilterConfig:
    min_height: float = 2.5
    min_points: int = 50
    cluster_cell: float = 1.0
    max_roughness: float = 0.35


@dataclass
class FootprintConfig:
    cell: float = 0.5
    min_area: float = 10.0
    simplify_tol: float = 0.3


@dataclass
class ScenarioGridConfig:
    """3 time horizons x 8 weather conditions by default (24 scenarios).

    Only EWL10R and Cat1 carry externally attested meaning; the other labels
    are configurable placeholders. Water-surface elevations per scenario are
    weather_wse[j] + year_offsets[i].
    """

    time_horizons: list[int] = field(default_factory=lambda: [2022, 2040, 2070])
    weather_conditions: list[str] = field(
        default_factory=lambda: [
            "EWL1R", "EWL10R", "EWL50R", "EWL100R", "Cat1", "Cat2", "Cat3", "Cat4",
        ]
    )
    year_offsets: list[float] = field(default_factory=lambda: [0.0, 0.3, 0.8])
    weather_wse: list[float] = field(
        default_factory=lambda: [0.5, 1.0, 1.5, 2.0, 2.1336, 2.7432, 3.3528, 4.0]
    )

    def wse_for(self, year: int, weather: str) -> float:
        yi = self.time_horizons.index(year)
        wi = self.weather_conditions.index(weather)
        return self.weather_wse[wi] + self.year_offsets[yi]


@dataclass
class ExposureConfig:
    flood_threshold: float = 0.1
    road_sample_spacing: float = 1.0


@dataclass
class TilingConfig:
    max_per_leaf: int = 16
    max_depth: int = 8


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 8008
    cors_origins: list[str] = field(default_factory=lambda: ["*"])
    cache_max_age: int = 3600


@dataclass
class SynthConfig:
    seed: int = 7
    n_buildings: int = 50
    extent_m: float = 250.0
    density_pts_per_m2: float = 8.0
    n_trees: int = 6
    n_roads: int = 5


@dataclass
class AttributesConfig:
    county: str = "Example County"
    municipality: str = "Seaside"


@dataclass
class PipelineConfig:
    anchor: AnchorConfig = field(default_factory=AnchorConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    ground_filter: GroundFilterConfig = field(default_factory=GroundFilterConfig)
    building_filter: BuildingFilterConfig = field(default_factory=BuildingFilterConfig)
    dem_cell: float = 1.0
    footprint: FootprintConfig = field(default_factory=FootprintConfig)
    scenario_grid: ScenarioGridConfig = field(default_factory=ScenarioGridConfig)
    exposure: ExposureConfig = field(default_factory=ExposureConfig)
    tiling: TilingConfig = field(default_factory=TilingConfig)
    server: ServerConfig = field(default_factory=ServerConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    attributes: AttributesConfig = field(default_factory=AttributesConfig)

    base_dir: Path = field(default_factory=Path, compare=False)

    def path(self, name: str) -> Path:
        return self.base_dir / getattr(self.paths, name)

    def validate(self):
        errs = []
        g = self.scenario_grid
        if len(g.time_horizons) != len(g.year_offsets):
            errs.append("scenario_grid.year_offsets must match time_horizons in length")
        if len(g.weather_conditions) != len(g.weather_wse):
            errs.append("scenario_grid.weather_wse must match weather_conditions in length")
        if len(set(g.time_horizons)) != len(g.time_horizons):
            errs.append("scenario_grid.time_horizons has duplicates")
        if len(set(g.weather_conditions)) != len(g.weather_conditions):
            errs.append("scenario_grid.weather_conditions has duplicates")
        if self.dem_cell <= 0:
            errs.append("dem_cell must be positive")
        if errs:
            raise ConfigError("; ".join(errs), keys=errs)


def _from_dict(cls, data: dict, prefix: str, bad_keys: list[str]):
    field_types = {f.name: f for f in dataclasses.fields(cls) if f.name != "base_dir"}
    kwargs = {}
    for key, value in data.items():
        dotted = f"{prefix}{key}"
        if key not in field_types:
            bad_keys.append(dotted)
            continue
        f = field_types[key]
        default = f.default_factory() if f.default_factory is not dataclasses.MISSING else f.default
        if dataclasses.is_dataclass(default):
            if not isinstance(value, dict):
                bad_keys.append(f"{dotted} (expected an object)")
                continue
            kwargs[key] = _from_dict(type(default), value, f"{dotted}.", bad_keys)
        else:
            kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    bad_keys: list[str] = []
    cfg = _from_dict(PipelineConfig, data, "", bad_keys)
    if bad_keys:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(bad_keys))}", keys=sorted(bad_keys))
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> PipelineConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    cfg = config_from_dict(data)
    cfg.base_dir = path.parent.resolve()
    return cfg


def default_config_json() -> str:
    """The full default config as JSON, for ``twin init``-style bootstrapping."""
    cfg = PipelineConfig()

    def to_plain(obj):
        if dataclasses.is_dataclass(obj):
            return {
                f.name: to_plain(getattr(obj, f.name))
                for f in dataclasses.fields(obj)
                if f.name != "base_dir"
            }
        if isinstance(obj, Path):
            return str(obj)
        if isinstance(obj, list):
            return [to_plain(v) for v in obj]
        return obj

    return json.dumps(to_plain(cfg), indent=2) + "\n"
