/** What-if water-level panel logic: feet in, meters on the wire. */

import { formatWse } from "./urls.js";

export const FEET_TO_METERS = 0.3048;

/** Quick-look storm-surge presets, in feet. */
export const PRESET_FEET = [7, 11] as const;

export const MAX_WSE_M = 30;

export function feetToMeters(feet: number): number {
  return feet * FEET_TO_METERS;
}

/** Wire value for a feet input, e.g. 7 -> "2.1336". */
export function wseParamForFeet(feet: number): string {
  return formatWse(feetToMeters(feet));
}

export interface WhatIfValidation {
  ok: boolean;
  wseM?: number;
  error?: string;
}

export function validateFeetInput(raw: string): WhatIfValidation {
  const feet = Number(raw);
  if (!Number.isFinite(feet)) return { ok: false, error: "enter a number of feet" };
  if (feet < 0) return { ok: false, error: "water level cannot be negative" };
  const wseM = feetToMeters(feet);
  if (wseM > MAX_WSE_M) {
    return { ok: false, error: `water level above the ${MAX_WSE_M} m cap` };
  }
  return { ok: true, wseM };
}
