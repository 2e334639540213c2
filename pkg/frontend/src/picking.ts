/** Feature picking: a ray against the decoded tile meshes resolves to the
 * building id through the per-tile feature table. */

import { featureAtIndex, type DecodedTile } from "./ctb.js";
import type { Vec3 } from "./types.js";

export interface PickHit {
  buildingId: number;
  distance: number;
  tileUri: string;
}

const EPS = 1e-9;

/** Moeller-Trumbore ray/triangle intersection; returns t or null. */
export function rayTriangle(
  origin: Vec3,
  dir: Vec3,
  a: Vec3,
  b: Vec3,
  c: Vec3,
): number | null {
  const e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
  const e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
  const p = [
    dir[1] * e2[2] - dir[2] * e2[1],
    dir[2] * e2[0] - dir[0] * e2[2],
    dir[0] * e2[1] - dir[1] * e2[0],
  ];
  const det = e1[0] * p[0] + e1[1] * p[1] + e1[2] * p[2];
  if (Math.abs(det) < EPS) return null;
  const inv = 1 / det;
  const s = [origin[0] - a[0], origin[1] - a[1], origin[2] - a[2]];
  const u = (s[0] * p[0] + s[1] * p[1] + s[2] * p[2]) * inv;
  if (u < -EPS || u > 1 + EPS) return null;
  const q = [
    s[1] * e1[2] - s[2] * e1[1],
    s[2] * e1[0] - s[0] * e1[2],
    s[0] * e1[1] - s[1] * e1[0],
  ];
  const v = (dir[0] * q[0] + dir[1] * q[1] + dir[2] * q[2]) * inv;
  if (v < -EPS || u + v > 1 + EPS) return null;
  const t = (e2[0] * q[0] + e2[1] * q[1] + e2[2] * q[2]) * inv;
  return t > EPS ? t : null;
}

/** Nearest building hit across all loaded tiles, or null for empty sky. */
export function pickBuilding(
  tiles: ReadonlyMap<string, DecodedTile>,
  origin: Vec3,
  dir: Vec3,
): PickHit | null {
  let best: PickHit | null = null;
  for (const [uri, tile] of tiles) {
    const v = tile.vertices;
    const idx = tile.indices;
    for (let i = 0; i + 2 < idx.length; i += 3) {
      const ia = idx[i] * 3;
      const ib = idx[i + 1] * 3;
      const ic = idx[i + 2] * 3;
      const t = rayTriangle(
        origin,
        dir,
        [v[ia], v[ia + 1], v[ia + 2]],
        [v[ib], v[ib + 1], v[ib + 2]],
        [v[ic], v[ic + 1], v[ic + 2]],
      );
      if (t !== null && (best === null || t < best.distance)) {
        const feature = featureAtIndex(tile, i);
        if (feature) {
          best = { buildingId: feature.buildingId, distance: t, tileUri: uri };
        }
      }
    }
  }
  return best;
}

/** Ray through a viewport pixel for a square-frustum camera. */
export function pickRay(
  camera: {
    position: Vec3;
    forward: Vec3;
    up: Vec3;
    fovY: number;
  },
  ndcX: number, // -1 .. 1, right positive
  ndcY: number, // -1 .. 1, up positive
): { origin: Vec3; dir: Vec3 } {
  const f = camera.forward;
  const u = camera.up;
  const r: Vec3 = [
    f[1] * u[2] - f[2] * u[1],
    f[2] * u[0] - f[0] * u[2],
    f[0] * u[1] - f[1] * u[0],
  ];
  const t = Math.tan(camera.fovY / 2);
  const d: Vec3 = [
    f[0] + ndcX * t * r[0] + ndcY * t * u[0],
    f[1] + ndcX * t * r[1] + ndcY * t * u[1],
    f[2] + ndcX * t * r[2] + ndcY * t * u[2],
  ];
  const len = Math.hypot(d[0], d[1], d[2]);
  return { origin: camera.position, dir: [d[0] / len, d[1] / len, d[2] / len] };
}
