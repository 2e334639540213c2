import { describe, expect, it } from "vitest";

import {
  initialState,
  pickFeature,
  setScenario,
  toggleLayer,
  type CameraState,
} from "../src/state.js";
import type { ScenarioDoc } from "../src/types.js";

const SCENARIOS: ScenarioDoc = {
  time_horizons: [2022, 2040, 2070],
  weather_conditions: ["EWL1R", "EWL10R", "Cat1"],
  default: { year: 2022, weather: "EWL1R" },
  count: 9,
};

const CAM: CameraState = {
  position: [10, 20, 30],
  forward: [0, 1, 0],
  up: [0, 0, 1],
  fovY: Math.PI / 3,
  viewportHeight: 1080,
};

describe("viewer state transitions", () => {
  it("starts at the default scenario", () => {
    const s = initialState(SCENARIOS, CAM);
    expect(s.selectedYear).toBe(2022);
    expect(s.selectedWeather).toBe("EWL1R");
    expect(s.pickedFeature).toBeNull();
  });

  it("slider changes never mutate camera state", () => {
    const s0 = initialState(SCENARIOS, CAM);
    const before = JSON.stringify(s0.camera);
    const s1 = setScenario(s0, SCENARIOS, 2070, "Cat1");
    expect(s1.camera).toBe(s0.camera); // same object, untouched
    expect(JSON.stringify(s1.camera)).toBe(before);
    expect(s1.selectedYear).toBe(2070);
    expect(s0.selectedYear).toBe(2022); // original state untouched
  });

  it("layer toggles never mutate scenario state", () => {
    const s0 = initialState(SCENARIOS, CAM);
    const s1 = toggleLayer(s0, "flood");
    expect(s1.selectedYear).toBe(s0.selectedYear);
    expect(s1.selectedWeather).toBe(s0.selectedWeather);
    expect(s1.visibleLayers.has("flood")).toBe(!s0.visibleLayers.has("flood"));
    expect(toggleLayer(s1, "flood").visibleLayers).toEqual(s0.visibleLayers);
  });

  it("rejects scenarios outside the grid", () => {
    const s = initialState(SCENARIOS, CAM);
    expect(() => setScenario(s, SCENARIOS, 1999, "Cat1")).toThrow(/year/);
    expect(() => setScenario(s, SCENARIOS, 2022, "Tsunami")).toThrow(/weather/);
  });

  it("picking replaces the previous selection", () => {
    let s = initialState(SCENARIOS, CAM);
    s = pickFeature(s, 4);
    expect(s.pickedFeature).toBe(4);
    s = pickFeature(s, 9);
    expect(s.pickedFeature).toBe(9);
    s = pickFeature(s, null);
    expect(s.pickedFeature).toBeNull();
  });
});
