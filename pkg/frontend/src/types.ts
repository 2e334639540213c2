/** Documents exchanged with the scene server. */

export interface AnchorDoc {
  lon0: number;
  lat0: number;
  description: string;
}

export interface TileNode {
  id: string;
  /** [xmin, ymin, zmin, xmax, ymax, zmax] in scene meters */
  bbox: number[];
  geometric_error: number;
  refine: string;
  content_uri?: string;
  children: TileNode[];
}

export interface TilesetDoc {
  anchor: AnchorDoc;
  root: TileNode;
}

export interface ScenarioDoc {
  time_horizons: number[];
  weather_conditions: string[];
  default: { year: number; weather: string };
  count: number;
}

export interface CategoryRow {
  name: string;
  total: number;
  affected: number;
}

export interface SummaryDoc {
  year: number | null;
  weather: string | null;
  categories: CategoryRow[];
  buildings: { total: number; flooded: number; max_depth: number };
  roads: {
    total_length: number;
    flooded_length: number;
    pct: number;
    segments_total: number;
    segments_affected: number;
  };
  depth_histogram: { bins: string[]; counts: number[] };
}

export interface FeatureDepthRow {
  year: number;
  weather: string;
  max_depth: number;
}

export interface FeatureDoc {
  id: number;
  base_elevation: number;
  roof_height: number;
  attributes: { county: string; municipality: string; hazard_tags: string[] };
  depths: FeatureDepthRow[];
}

export interface LegendStop {
  depth: number;
  color: [number, number, number, number] | number[];
}

export interface LegendDoc {
  stops: LegendStop[];
}

export interface WhatIfDoc {
  wse_m: number;
  summary: SummaryDoc;
}

export type Vec3 = [number, number, number];
