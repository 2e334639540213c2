/** Server URL construction; keeps the state-to-request mapping a pure function. */

import type { ViewerState } from "./state.js";
import type { ScenarioDoc } from "./types.js";

export class Api {
  constructor(readonly base: string) {}

  scenarios(): string {
    return `${this.base}/api/scenarios`;
  }

  tileset(): string {
    return `${this.base}/api/tileset.json`;
  }

  tile(contentUri: string): string {
    return `${this.base}/api/${contentUri}`;
  }

  layer(name: string): string {
    return `${this.base}/api/assets/${name}.geojson`;
  }

  legend(): string {
    return `${this.base}/api/flood/legend`;
  }

  summary(year: number, weather: string): string {
    return `${this.base}/api/summary/${year}/${weather}`;
  }

  feature(buildingId: number): string {
    return `${this.base}/api/feature/${buildingId}`;
  }

  whatif(wseM: number | string): string {
    return `${this.base}/api/whatif?wse_m=${wseM}`;
  }

  floodTile(
    year: number,
    weather: string,
    z: number,
    x: number,
    y: number,
    ext: "png" | "bin",
  ): string {
    return `${this.base}/api/flood/${year}/${weather}/${z}/${x}/${y}.${ext}`;
  }
}

/** Every summary URL a full slider sweep visits, in grid order. */
export function sweepSummaryUrls(api: Api, scenarios: ScenarioDoc): string[] {
  const urls: string[] = [];
  for (const year of scenarios.time_horizons) {
    for (const weather of scenarios.weather_conditions) {
      urls.push(api.summary(year, weather));
    }
  }
  return urls;
}

const LAYER_URL_NAMES: Record<string, string> = {
  "critical-assets": "critical-assets",
  roads: "roads",
  adaptations: "adaptations",
};

/** Deterministic set of data URLs a given state requires (excluding
 * camera-dependent tile/flood-tile fetches, which stream separately). */
export function urlsForState(api: Api, state: ViewerState): string[] {
  const urls: string[] = [api.scenarios(), api.tileset(), api.legend()];
  for (const layer of Object.keys(LAYER_URL_NAMES).sort()) {
    if (state.visibleLayers.has(layer as never)) {
      urls.push(api.layer(LAYER_URL_NAMES[layer]));
    }
  }
  if (state.whatifWse !== null) {
    urls.push(api.whatif(formatWse(state.whatifWse)));
  } else {
    urls.push(api.summary(state.selectedYear, state.selectedWeather));
  }
  if (state.pickedFeature !== null) {
    urls.push(api.feature(state.pickedFeature));
  }
  return urls;
}

/** Canonical query-parameter form: millimeter precision, no trailing zeros. */
export function formatWse(wseM: number): string {
  return String(parseFloat(wseM.toFixed(4)));
}
