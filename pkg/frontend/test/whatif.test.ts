import { describe, expect, it } from "vitest";

import { Api } from "../src/urls.js";
import {
  feetToMeters,
  PRESET_FEET,
  validateFeetInput,
  wseParamForFeet,
} from "../src/whatif.js";

describe("what-if water levels", () => {
  it("the 7 ft preset sends wse_m=2.1336", () => {
    expect(wseParamForFeet(7)).toBe("2.1336");
    const api = new Api("");
    expect(api.whatif(wseParamForFeet(7))).toBe("/api/whatif?wse_m=2.1336");
  });

  it("the 11 ft preset sends wse_m=3.3528", () => {
    expect(wseParamForFeet(11)).toBe("3.3528");
  });

  it("offers the two storm presets", () => {
    expect([...PRESET_FEET]).toEqual([7, 11]);
  });

  it("converts feet to meters", () => {
    expect(feetToMeters(1)).toBeCloseTo(0.3048, 12);
    expect(feetToMeters(0)).toBe(0);
  });

  it("rejects negative input client-side", () => {
    const res = validateFeetInput("-1");
    expect(res.ok).toBe(false);
    expect(res.error).toMatch(/negative/);
  });

  it("rejects non-numeric and over-cap input", () => {
    expect(validateFeetInput("surge").ok).toBe(false);
    expect(validateFeetInput("200").ok).toBe(false); // > 30 m cap
  });

  it("accepts zero and typical values", () => {
    expect(validateFeetInput("0")).toEqual({ ok: true, wseM: 0 });
    expect(validateFeetInput("7").wseM).toBeCloseTo(2.1336, 10);
  });
});
