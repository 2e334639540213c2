/** Decoder for the binary tile payload ("CTB1", little-endian). */

export interface TileFeature {
  buildingId: number;
  firstIndex: number;
  indexCount: number;
}

export interface DecodedTile {
  vertices: Float32Array; // x,y,z interleaved
  indices: Uint32Array;
  features: TileFeature[];
  attributesText: string;
}

const MAGIC = 0x31425443; // "CTB1" read as little-endian u32

export class CtbError extends Error {
  constructor(
    public section: string,
    public offset: number,
    detail: string,
  ) {
    super(`${section} section at byte ${offset}: ${detail}`);
  }
}

export function decodeTile(buf: ArrayBuffer): DecodedTile {
  const view = new DataView(buf);
  if (buf.byteLength < 4) throw new CtbError("magic", buf.byteLength, "payload too short");
  if (view.getUint32(0, true) !== MAGIC) throw new CtbError("magic", 0, "bad magic");
  if (buf.byteLength < 24) throw new CtbError("header", buf.byteLength, "header truncated");
  const version = view.getUint32(4, true);
  if (version !== 1) throw new CtbError("header", 4, `unsupported version ${version}`);
  const nVerts = view.getUint32(8, true);
  const nIdx = view.getUint32(12, true);
  const nFeat = view.getUint32(16, true);
  const attrLen = view.getUint32(20, true);

  let off = 24;
  const vBytes = nVerts * 12;
  if (buf.byteLength < off + vBytes)
    throw new CtbError("vertices", buf.byteLength, `need ${vBytes} bytes`);
  const vertices = new Float32Array(buf.slice(off, off + vBytes));
  off += vBytes;
  const iBytes = nIdx * 4;
  if (buf.byteLength < off + iBytes)
    throw new CtbError("indices", buf.byteLength, `need ${iBytes} bytes`);
  const indices = new Uint32Array(buf.slice(off, off + iBytes));
  off += iBytes;
  const fBytes = nFeat * 16;
  if (buf.byteLength < off + fBytes)
    throw new CtbError("features", buf.byteLength, `need ${fBytes} bytes`);
  const features: TileFeature[] = [];
  for (let k = 0; k < nFeat; k++) {
    const base = off + k * 16;
    features.push({
      buildingId: Number(view.getBigUint64(base, true)),
      firstIndex: view.getUint32(base + 8, true),
      indexCount: view.getUint32(base + 12, true),
    });
  }
  off += fBytes;
  if (buf.byteLength < off + attrLen)
    throw new CtbError("attributes", buf.byteLength, `need ${attrLen} bytes`);
  const attributesText = new TextDecoder().decode(new Uint8Array(buf, off, attrLen));
  return { vertices, indices, features, attributesText };
}

export function tileAttributes(tile: DecodedTile): Record<string, unknown> {
  return tile.attributesText ? JSON.parse(tile.attributesText) : {};
}

/** Which feature owns a given index-buffer position (for picked triangles). */
export function featureAtIndex(tile: DecodedTile, indexPos: number): TileFeature | null {
  for (const f of tile.features) {
    if (indexPos >= f.firstIndex && indexPos < f.firstIndex + f.indexCount) return f;
  }
  return null;
}
