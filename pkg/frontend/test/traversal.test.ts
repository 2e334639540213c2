// The golden files are generated by the pipeline test suite; the client
// traversal must emit exactly the same tile sets for the same cameras.
import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { selectTiles, walkTiles, type ViewCamera } from "../src/traversal.js";
import type { TilesetDoc } from "../src/types.js";

const GOLDEN = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "tests", "golden", "selection");

function load<T>(name: string): T {
  return JSON.parse(readFileSync(join(GOLDEN, name), "utf8")) as T;
}

interface CameraDoc {
  position: [number, number, number];
  forward: [number, number, number];
  up: [number, number, number];
  fov_y: number;
  viewport_height: number;
}

const tileset = load<TilesetDoc>("tileset.json");
const cameraFile = load<{ sse_threshold: number; cameras: CameraDoc[] }>("cameras.json");
const expected = load<string[][]>("expected.json");

function toCamera(doc: CameraDoc): ViewCamera {
  return {
    position: doc.position,
    forward: doc.forward,
    up: doc.up,
    fovY: doc.fov_y,
    viewportHeight: doc.viewport_height,
  };
}

describe("shared traversal goldens", () => {
  it("emits exactly the pipeline's tile sets for every fixture camera", () => {
    cameraFile.cameras.forEach((doc, i) => {
      expect(selectTiles(tileset, toCamera(doc), cameraFile.sse_threshold)).toEqual(expected[i]);
    });
  });

  it("covers the refinement progression root -> leaves -> culled", () => {
    const counts = expected.map((uris) => uris.length);
    expect(counts[0]).toBe(1); // farthest camera: root only
    expect(counts[counts.length - 2]).toBeGreaterThan(counts[0]);
    expect(counts[counts.length - 1]).toBe(0); // looking away
  });

  it("never coarsens as the dolly approaches", () => {
    const parent = (id: string): string | null => {
      const [l, x, y] = id.split("-").map(Number);
      return l > 0 ? `${l - 1}-${Math.floor(x / 2)}-${Math.floor(y / 2)}` : null;
    };
    const idsOf = (uris: string[]) => uris.map((u) => u.split("/")[1].split(".")[0]);
    for (let i = 0; i + 2 < expected.length; i++) {
      const far = new Set(idsOf(expected[i]));
      const ancestorsOfFar = new Set<string>();
      for (let id of far) {
        for (let p = parent(id); p; p = parent(p)) ancestorsOfFar.add(p);
      }
      for (const id of idsOf(expected[i + 1])) {
        expect(ancestorsOfFar.has(id)).toBe(false);
      }
    }
  });

  it("walks the whole fixture tree", () => {
    expect([...walkTiles(tileset.root)]).toHaveLength(21);
  });
});
