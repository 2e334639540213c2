/** Depth-to-color mapping, driven entirely by the server's legend document. */

import type { LegendDoc } from "./types.js";

export type Rgba = [number, number, number, number];

/** Piecewise-linear ramp lookup; depth <= 0 (or nodata) is fully transparent. */
export function colorForDepth(legend: LegendDoc, depth: number, nodata?: number): Rgba {
  if (!Number.isFinite(depth) || depth <= 0 || (nodata !== undefined && depth === nodata)) {
    return [0, 0, 0, 0];
  }
  const stops = legend.stops;
  if (depth <= stops[0].depth) return stops[0].color.slice(0, 4) as Rgba;
  for (let i = 1; i < stops.length; i++) {
    if (depth <= stops[i].depth) {
      const lo = stops[i - 1];
      const hi = stops[i];
      const t = (depth - lo.depth) / (hi.depth - lo.depth);
      return [0, 1, 2, 3].map((c) =>
        Math.round(lo.color[c] + t * (hi.color[c] - lo.color[c])),
      ) as Rgba;
    }
  }
  return stops[stops.length - 1].color.slice(0, 4) as Rgba;
}

export function cssColor([r, g, b, a]: Rgba): string {
  return `rgba(${r}, ${g}, ${b}, ${(a / 255).toFixed(3)})`;
}
