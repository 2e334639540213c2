/** Viewer state and its pure transitions.
 *
 * Every control mutates only its own slice: scenario sliders never touch the
 * camera, layer toggles never touch the scenario, and so on. Reducers return
 * fresh objects so stale async responses can be compared by identity.
 */

import type { ScenarioDoc, Vec3 } from "./types.js";

export const LAYERS = [
  "buildings3d",
  "flood",
  "critical-assets",
  "roads",
  "adaptations",
  "basemap",
] as const;

export type LayerName = (typeof LAYERS)[number];

export interface CameraState {
  position: Vec3;
  forward: Vec3;
  up: Vec3;
  fovY: number;
  viewportHeight: number;
}

export interface ViewerState {
  camera: CameraState;
  selectedYear: number;
  selectedWeather: string;
  visibleLayers: ReadonlySet<LayerName>;
  pickedFeature: number | null;
  whatifWse: number | null; // meters; null = scenario mode
}

export function initialState(scenarios: ScenarioDoc, camera: CameraState): ViewerState {
  return {
    camera,
    selectedYear: scenarios.default.year,
    selectedWeather: scenarios.default.weather,
    visibleLayers: new Set<LayerName>(["buildings3d", "flood", "critical-assets", "basemap"]),
    pickedFeature: null,
    whatifWse: null,
  };
}

export function setScenario(
  state: ViewerState,
  scenarios: ScenarioDoc,
  year: number,
  weather: string,
): ViewerState {
  if (!scenarios.time_horizons.includes(year)) {
    throw new Error(`year ${year} not in scenario grid`);
  }
  if (!scenarios.weather_conditions.includes(weather)) {
    throw new Error(`weather ${weather} not in scenario grid`);
  }
  return { ...state, selectedYear: year, selectedWeather: weather, whatifWse: null };
}

export function toggleLayer(state: ViewerState, layer: LayerName): ViewerState {
  const layers = new Set(state.visibleLayers);
  if (layers.has(layer)) layers.delete(layer);
  else layers.add(layer);
  return { ...state, visibleLayers: layers };
}

export function pickFeature(state: ViewerState, buildingId: number | null): ViewerState {
  return { ...state, pickedFeature: buildingId };
}

export function setWhatIf(state: ViewerState, wseM: number | null): ViewerState {
  return { ...state, whatifWse: wseM };
}

export function setCamera(state: ViewerState, camera: CameraState): ViewerState {
  return { ...state, camera };
}
