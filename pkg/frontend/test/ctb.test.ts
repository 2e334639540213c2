import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { CtbError, decodeTile, featureAtIndex, tileAttributes } from "../src/ctb.js";

const GOLDEN = join(dirname(fileURLToPath(import.meta.url)), "..", "..", "tests", "golden");

function goldenBytes(): ArrayBuffer {
  const buf = readFileSync(join(GOLDEN, "triangle.ctb"));
  return buf.buffer.slice(buf.byteOffset, buf.byteOffset + buf.byteLength);
}

describe("CTB1 decoder", () => {
  it("decodes the hand-computed golden payload", () => {
    const tile = decodeTile(goldenBytes());
    expect([...tile.vertices]).toEqual([0, 0, 0, 1, 0, 0, 0, 1, 0]);
    expect([...tile.indices]).toEqual([0, 1, 2]);
    expect(tile.features).toEqual([{ buildingId: 7, firstIndex: 0, indexCount: 3 }]);
    expect(tile.attributesText).toBe("");
    expect(tileAttributes(tile)).toEqual({});
  });

  it("raises a structured error at every truncation point", () => {
    const data = goldenBytes();
    for (let n = 0; n < data.byteLength; n++) {
      expect(() => decodeTile(data.slice(0, n))).toThrowError(CtbError);
    }
  });

  it("names the failing section", () => {
    const data = goldenBytes();
    try {
      decodeTile(data.slice(0, 24 + 36 + 4)); // mid index buffer
      expect.unreachable();
    } catch (err) {
      expect((err as CtbError).section).toBe("indices");
      expect(typeof (err as CtbError).offset).toBe("number");
    }
  });

  it("rejects a bad magic", () => {
    const data = new Uint8Array(goldenBytes());
    data[0] = 0x58;
    expect(() => decodeTile(data.buffer)).toThrowError(/magic/);
  });

  it("maps index positions to features", () => {
    const tile = decodeTile(goldenBytes());
    expect(featureAtIndex(tile, 0)?.buildingId).toBe(7);
    expect(featureAtIndex(tile, 2)?.buildingId).toBe(7);
    expect(featureAtIndex(tile, 3)).toBeNull();
  });
});
