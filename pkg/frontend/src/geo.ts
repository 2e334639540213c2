/** Client-side mirror of the scene coordinate conventions: anchor-based
 * local plane for scene meters, spherical Web Mercator for map tiles. */

import type { AnchorDoc } from "./types.js";

export const EARTH_RADIUS_M = 6378137;
export const MERCATOR_WORLD = EARTH_RADIUS_M * Math.PI;

const DEG = Math.PI / 180;

export function sceneToLonLat(anchor: AnchorDoc, x: number, y: number): [number, number] {
  const coslat0 = Math.cos(anchor.lat0 * DEG);
  return [anchor.lon0 + x / (EARTH_RADIUS_M * coslat0) / DEG, anchor.lat0 + y / EARTH_RADIUS_M / DEG];
}

export function lonLatToScene(anchor: AnchorDoc, lon: number, lat: number): [number, number] {
  const coslat0 = Math.cos(anchor.lat0 * DEG);
  return [EARTH_RADIUS_M * (lon - anchor.lon0) * DEG * coslat0, EARTH_RADIUS_M * (lat - anchor.lat0) * DEG];
}

export function lonLatToMercator(lon: number, lat: number): [number, number] {
  return [EARTH_RADIUS_M * lon * DEG, EARTH_RADIUS_M * Math.atanh(Math.sin(lat * DEG))];
}

export function mercatorToLonLat(x: number, y: number): [number, number] {
  return [x / EARTH_RADIUS_M / DEG, (2 * Math.atan(Math.exp(y / EARTH_RADIUS_M)) - Math.PI / 2) / DEG];
}

export interface TileAddress {
  z: number;
  x: number;
  y: number;
}

/** Mercator bounds [x0, yTop, span] of a slippy tile; y grows southward. */
export function tileBounds(t: TileAddress): [number, number, number] {
  const n = 2 ** t.z;
  const span = (2 * MERCATOR_WORLD) / n;
  return [-MERCATOR_WORLD + t.x * span, MERCATOR_WORLD - t.y * span, span];
}

export function tileAt(z: number, mx: number, my: number): TileAddress {
  const n = 2 ** z;
  const x = Math.floor(((mx + MERCATOR_WORLD) / (2 * MERCATOR_WORLD)) * n);
  const y = Math.floor(((MERCATOR_WORLD - my) / (2 * MERCATOR_WORLD)) * n);
  const clamp = (v: number) => Math.max(0, Math.min(n - 1, v));
  return { z, x: clamp(x), y: clamp(y) };
}

/** Smallest zoom (from maxZoom down) whose tile cover of the mercator box is
 * at most maxTiles, plus that cover. */
export function coverBox(
  mercMin: [number, number],
  mercMax: [number, number],
  maxTiles: number,
  maxZoom = 22,
): TileAddress[] {
  for (let z = maxZoom; z >= 0; z--) {
    const a = tileAt(z, mercMin[0], mercMax[1]); // top-left
    const b = tileAt(z, mercMax[0], mercMin[1]); // bottom-right
    const count = (b.x - a.x + 1) * (b.y - a.y + 1);
    if (count <= maxTiles) {
      const tiles: TileAddress[] = [];
      for (let y = a.y; y <= b.y; y++) {
        for (let x = a.x; x <= b.x; x++) tiles.push({ z, x, y });
      }
      return tiles;
    }
  }
  return [];
}
