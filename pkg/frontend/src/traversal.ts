/** Client-side tile selection.
 *
 * Reimplements the server's screen-space-error traversal so the viewer can
 * stream tiles without asking the server which ones to draw. The arithmetic
 * mirrors the pipeline implementation operation for operation; the shared
 * golden fixtures assert that both sides emit identical tile sets.
 */

import type { TileNode, TilesetDoc, Vec3 } from "./types.js";

export interface ViewCamera {
  position: Vec3;
  forward: Vec3; // unit
  up: Vec3; // unit, perpendicular to forward
  fovY: number; // radians
  viewportHeight: number; // pixels
}

export const DEFAULT_SSE_THRESHOLD = 16;

function cross(a: Vec3, b: Vec3): Vec3 {
  return [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
}

function bboxDistance(bbox: number[], p: Vec3): number {
  const dx = Math.max(bbox[0] - p[0], 0, p[0] - bbox[3]);
  const dy = Math.max(bbox[1] - p[1], 0, p[1] - bbox[4]);
  const dz = Math.max(bbox[2] - p[2], 0, p[2] - bbox[5]);
  return Math.sqrt(dx * dx + dy * dy + dz * dz);
}

export function screenSpaceError(tile: TileNode, cam: ViewCamera): number {
  const d = Math.max(bboxDistance(tile.bbox, cam.position), 1.0);
  return (tile.geometric_error * cam.viewportHeight) / (2.0 * d * Math.tan(cam.fovY / 2.0));
}

/** Five inward-facing plane normals (near + four sides, square viewport). */
function frustumPlanes(cam: ViewCamera): Vec3[] {
  const f = cam.forward;
  const u = cam.up;
  const r = cross(f, u);
  const t = Math.tan(cam.fovY / 2.0);
  const mix = (a: Vec3, b: Vec3, s: number): Vec3 => [
    t * a[0] + s * b[0],
    t * a[1] + s * b[1],
    t * a[2] + s * b[2],
  ];
  return [f, mix(f, r, -1), mix(f, r, 1), mix(f, u, -1), mix(f, u, 1)];
}

function bboxOutsidePlane(bbox: number[], p: Vec3, n: Vec3): boolean {
  let m = 0;
  for (let i = 0; i < 3; i++) {
    const lo = bbox[i] - p[i];
    const hi = bbox[i + 3] - p[i];
    m += Math.max(n[i] * lo, n[i] * hi);
  }
  return m < 0;
}

function tileSortKey(id: string): number[] {
  return id.split("-").map(Number);
}

/** Content URIs to render for this camera, ordered by tile id. */
export function selectTiles(
  tileset: TilesetDoc,
  cam: ViewCamera,
  sseThreshold: number = DEFAULT_SSE_THRESHOLD,
): string[] {
  const planes = frustumPlanes(cam);
  const emitted: Array<{ key: number[]; uri: string }> = [];

  const visit = (tile: TileNode): void => {
    for (const n of planes) {
      if (bboxOutsidePlane(tile.bbox, cam.position, n)) return;
    }
    if (tile.children.length > 0 && screenSpaceError(tile, cam) > sseThreshold) {
      for (const c of tile.children) visit(c);
    } else if (tile.content_uri) {
      emitted.push({ key: tileSortKey(tile.id), uri: tile.content_uri });
    }
  };

  visit(tileset.root);
  emitted.sort((a, b) => {
    for (let i = 0; i < 3; i++) {
      if (a.key[i] !== b.key[i]) return a.key[i] - b.key[i];
    }
    return 0;
  });
  return emitted.map((e) => e.uri);
}

export function* walkTiles(node: TileNode): Generator<TileNode> {
  yield node;
  for (const c of node.children) yield* walkTiles(c);
}
