"""Quadtree tileset construction, SSE-driven tile selection, and the tile codec.

Buildings are packed into a plan-square quadtree addressed "L-X-Y". Leaves
carry full-detail (LOD2) content; interior nodes carry flat-roof (LOD1)
stand-ins for everything beneath them, with Replace refinement so something
always renders. Tile payloads use the little-endian "CTB1" binary layout.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, DomainError, TileCodecError
from .geocore import SceneAnchor, ScenePoint
from .scene import Lod2Building, TriangleMesh, lod1_mesh, simplify_to_lod1


@dataclass
class Tile:
    id: str  # "L-X-Y"
    bbox: tuple[float, float, float, float, float, float]  # xmin,ymin,zmin,xmax,ymax,zmax
    geometric_error: float
    refine: str = "REPLACE"
    content_uri: str | None = None
    children: list["Tile"] = field(default_factory=list)

    @property
    def level(self) -> int:
        return int(self.id.split("-")[0])

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class Tileset:
    root: Tile
    anchor: SceneAnchor
    building_index: dict[int, str] = field(default_factory=dict)
    payloads: dict[str, bytes] = field(default_factory=dict)  # tile id -> CTB1 bytes


@dataclass
class Camera:
    position: ScenePoint
    forward: tuple[float, float, float]
    up: tuple[float, float, float]
    fov_y: float
    viewport_height: int

    def __post_init__(self):
        f = np.asarray(self.forward, dtype=np.float64)
        u = np.asarray(self.up, dtype=np.float64)
        if abs(np.linalg.norm(f) - 1.0) > 1e-6 or abs(np.linalg.norm(u) - 1.0) > 1e-6:
            raise DomainError("forward and up must be unit vectors")
        if abs(float(f @ u)) > 1e-6:
            raise DomainError("forward and up must be perpendicular")
        if not 0.0 < self.fov_y < math.pi:
            raise DomainError("fov_y must be in (0, pi)")
        if self.viewport_height < 1:
            raise DomainError("viewport_height must be >= 1")
        self.forward = tuple(float(v) for v in f)
        self.up = tuple(float(v) for v in u)


# ---------------------------------------------------------------------------
# tileset construction


@dataclass
class _Packed:
    building: Lod2Building
    centroid: tuple[float, float]
    mesh: TriangleMesh
    bbox: tuple[float, float, float, float, float, float]


def _mesh_bbox(mesh: TriangleMesh):
    v = mesh.vertices
    return (
        float(v[:, 0].min()),
        float(v[:, 1].min()),
        float(v[:, 2].min()),
        float(v[:, 0].max()),
        float(v[:, 1].max()),
        float(v[:, 2].max()),
    )


def _bbox_union(a, b):
    return (
        min(a[0], b[0]), min(a[1], b[1]), min(a[2], b[2]),
        max(a[3], b[3]), max(a[4], b[4]), max(a[5], b[5]),
    )


def build_tileset(
    buildings: list[Lod2Building],
    anchor: SceneAnchor,
    max_per_leaf: int = 16,
    max_depth: int = 8,
) -> Tileset:
    """Assign buildings to a plan-square quadtree by footprint centroid.

    A node splits into 4 equal quadrants while it holds more than
    ``max_per_leaf`` buildings and its depth is below ``max_depth``. All four
    children are materialized on a split (empty quadrants become empty
    leaves). The root geometric error is the plan diagonal of the root box,
    halving per level.
    """
    if not buildings:
        raise DegenerateInputError("cannot build a tileset for zero buildings")
    packed = []
    for b in sorted(buildings, key=lambda bb: bb.id):
        mesh = b.combined_mesh()
        packed.append(_Packed(b, b.footprint.polygon.centroid(), mesh, _mesh_bbox(mesh)))

    total = packed[0].bbox
    for p in packed[1:]:
        total = _bbox_union(total, p.bbox)
    cx = (total[0] + total[3]) / 2.0
    cy = (total[1] + total[4]) / 2.0
    half = max(total[3] - total[0], total[4] - total[1]) / 2.0
    half = max(half, 1.0)
    x0, y0 = cx - half, cy - half
    size = 2.0 * half
    root_ge = math.hypot(size, size)

    building_index: dict[int, str] = {}
    payloads: dict[str, bytes] = {}

    def make_tile(level: int, xi: int, yi: int, items: list[_Packed], parent_z) -> Tile:
        tid = f"{level}-{xi}-{yi}"
        n = 2**level
        qsize = size / n
        qx0 = x0 + xi * qsize
        qy0 = y0 + yi * qsize
        if items:
            content = items[0].bbox
            for p in items[1:]:
                content = _bbox_union(content, p.bbox)
            zmin, zmax = content[2], content[5]
            bbox = (
                min(qx0, content[0]), min(qy0, content[1]), zmin,
                max(qx0 + qsize, content[3]), max(qy0 + qsize, content[4]), zmax,
            )
        else:
            bbox = (qx0, qy0, parent_z[0], qx0 + qsize, qy0 + qsize, parent_z[1])
        ge = root_ge / (2**level)
        tile = Tile(id=tid, bbox=bbox, geometric_error=ge)

        if len(items) > max_per_leaf and level < max_depth:
            # interior: LOD1 stand-ins for the whole subtree
            tile.content_uri = f"tiles/{tid}.ctb"
            payloads[tid] = encode_tile(
                [(p.building.id, lod1_mesh(simplify_to_lod1(p.building))) for p in items],
                {p.building.id: p.building.attributes for p in items},
            )
            mx = qx0 + qsize / 2.0
            my = qy0 + qsize / 2.0
            quads: list[list[_Packed]] = [[], [], [], []]
            for p in items:
                ex = 1 if p.centroid[0] >= mx else 0
                ny = 1 if p.centroid[1] >= my else 0
                quads[ny * 2 + ex].append(p)
            zr = (bbox[2], bbox[5])
            for ny in (0, 1):
                for ex in (0, 1):
                    tile.children.append(
                        make_tile(level + 1, xi * 2 + ex, yi * 2 + ny, quads[ny * 2 + ex], zr)
                    )
        elif items:
            # leaf with full-detail content
            tile.content_uri = f"tiles/{tid}.ctb"
            payloads[tid] = encode_tile(
                [(p.building.id, p.mesh) for p in items],
                {p.building.id: p.building.attributes for p in items},
            )
            for p in items:
                building_index[p.building.id] = tid
        return tile

    root = make_tile(0, 0, 0, packed, (total[2], total[5]))
    return Tileset(root=root, anchor=anchor, building_index=building_index, payloads=payloads)


# ---------------------------------------------------------------------------
# screen-space-error tile selection


def _tile_sort_key(tid: str):
    level, x, y = tid.split("-")
    return (int(level), int(x), int(y))


def screen_space_error(tile: Tile, camera: Camera) -> float:
    """Geometric error projected to pixels at the camera's distance to the tile."""
    d = max(_bbox_distance(tile.bbox, camera.position), 1.0)
    return tile.geometric_error * camera.viewport_height / (2.0 * d * math.tan(camera.fov_y / 2.0))


def _bbox_distance(bbox, pos: ScenePoint) -> float:
    dx = max(bbox[0] - pos.x, 0.0, pos.x - bbox[3])
    dy = max(bbox[1] - pos.y, 0.0, pos.y - bbox[4])
    dz = max(bbox[2] - pos.z, 0.0, pos.z - bbox[5])
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def _frustum_planes(camera: Camera):
    """Five inward-facing plane normals through the camera position (near + sides).

    The viewport is treated as square: the horizontal half-angle equals the
    vertical one.
    """
    f = np.asarray(camera.forward)
    u = np.asarray(camera.up)
    r = np.cross(f, u)
    t = math.tan(camera.fov_y / 2.0)
    return [
        f,
        t * f - r,
        t * f + r,
        t * f - u,
        t * f + u,
    ]


def _bbox_outside_plane(bbox, pos: ScenePoint, normal) -> bool:
    """True when every corner of the box is on the negative side of the plane."""
    m = 0.0
    for i, p in enumerate((pos.x, pos.y, pos.z)):
        lo = bbox[i] - p
        hi = bbox[i + 3] - p
        n = float(normal[i])
        m += max(n * lo, n * hi)
    return m < 0.0


def select_tiles(tileset: Tileset, camera: Camera, sse_threshold: float = 16.0) -> list[str]:
    """Frustum-culled Replace-refinement traversal; returns content URIs.

    A tile refines into its children while its screen-space error exceeds the
    threshold; otherwise its own content (if any) is emitted. Output order is
    by tile id (level, x, y).
    """
    planes = _frustum_planes(camera)
    emitted: list[tuple[tuple[int, int, int], str]] = []

    def visit(tile: Tile):
        for n in planes:
            if _bbox_outside_plane(tile.bbox, camera.position, n):
                return
        if tile.children and screen_space_error(tile, camera) > sse_threshold:
            for c in tile.children:
                visit(c)
        elif tile.content_uri:
            emitted.append((_tile_sort_key(tile.id), tile.content_uri))

    visit(tileset.root)
    emitted.sort()
    return [uri for _, uri in emitted]


# ---------------------------------------------------------------------------
# CTB1 tile payload codec

_MAGIC = b"CTB1"
_VERSION = 1


@dataclass
class TilePayload:
    """Decoded tile content: shared vertex/index pools plus per-building ranges."""

    vertices: np.ndarray  # (N, 3) float32
    indices: np.ndarray  # (M,) uint32
    features: list[tuple[int, int, int]]  # (building_id, first_index, index_count)
    attributes_text: str = ""

    def attributes(self) -> dict:
        return json.loads(self.attributes_text) if self.attributes_text else {}

    def feature_mesh(self, building_id: int) -> TriangleMesh:
        for bid, first, count in self.features:
            if bid == building_id:
                idx = self.indices[first : first + count].astype(np.int64)
                return TriangleMesh(self.vertices.astype(np.float64), idx.reshape(-1, 3))
        raise KeyError(f"building {building_id} not in payload")


def encode_tile(
    meshes: list[tuple[int, TriangleMesh]],
    attributes: dict[int, dict] | None = None,
) -> bytes:
    """Pack per-building meshes into a CTB1 payload (stable feature order by id)."""
    meshes = sorted(meshes, key=lambda m: m[0])
    vertices = []
    indices = []
    features = []
    base = 0
    first = 0
    for bid, mesh in meshes:
        v = np.asarray(mesh.vertices, dtype=np.float32)
        idx = (np.asarray(mesh.indices, dtype=np.int64) + base).ravel()
        vertices.append(v)
        indices.append(idx)
        features.append((int(bid), first, len(idx)))
        base += len(v)
        first += len(idx)
    verts = np.vstack(vertices) if vertices else np.zeros((0, 3), dtype=np.float32)
    idx_all = np.concatenate(indices) if indices else np.zeros(0, dtype=np.int64)
    attr_text = (
        json.dumps({str(k): attributes[k] for k in sorted(attributes)}, sort_keys=True)
        if attributes
        else ""
    )
    return encode_payload(
        TilePayload(
            vertices=verts.astype(np.float32),
            indices=idx_all.astype(np.uint32),
            features=features,
            attributes_text=attr_text,
        )
    )


def encode_payload(payload: TilePayload) -> bytes:
    v = np.ascontiguousarray(payload.vertices, dtype="<f4")
    idx = np.ascontiguousarray(payload.indices, dtype="<u4")
    if len(v) >= 2**32:
        raise DomainError("vertex count exceeds u32")
    if idx.size % 3 != 0:
        raise DomainError("index count must be a multiple of 3")
    attr = payload.attributes_text.encode("utf-8")
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<5I", _VERSION, len(v), idx.size, len(payload.features), len(attr))
    out += v.tobytes()
    out += idx.tobytes()
    for bid, first, count in payload.features:
        out += struct.pack("<QII", bid, first, count)
    out += attr
    return bytes(out)


def decode_tile(data: bytes) -> TilePayload:
    """Parse a CTB1 payload, reporting the failing section and byte offset on error."""
    if len(data) < 4:
        raise TileCodecError("magic", len(data), "payload shorter than the 4-byte magic")
    if data[:4] != _MAGIC:
        raise TileCodecError("magic", 0, f"bad magic {data[:4]!r}, expected {_MAGIC!r}")
    if len(data) < 24:
        raise TileCodecError("header", len(data), "header truncated (needs 24 bytes)")
    version, n_verts, n_idx, n_feat, attr_len = struct.unpack_from("<5I", data, 4)
    if version != _VERSION:
        raise TileCodecError("header", 4, f"unsupported version {version}")
    off = 24
    vbytes = n_verts * 12
    if len(data) < off + vbytes:
        raise TileCodecError("vertices", len(data), f"need {vbytes} bytes of vertex data")
    verts = np.frombuffer(data, dtype="<f4", count=n_verts * 3, offset=off).reshape(n_verts, 3)
    off += vbytes
    ibytes = n_idx * 4
    if len(data) < off + ibytes:
        raise TileCodecError("indices", len(data), f"need {ibytes} bytes of index data")
    idx = np.frombuffer(data, dtype="<u4", count=n_idx, offset=off)
    off += ibytes
    fbytes = n_feat * 16
    if len(data) < off + fbytes:
        raise TileCodecError("features", len(data), f"need {fbytes} bytes of feature records")
    features = []
    for k in range(n_feat):
        bid, first, count = struct.unpack_from("<QII", data, off + 16 * k)
        features.append((bid, first, count))
    off += fbytes
    if len(data) < off + attr_len:
        raise TileCodecError("attributes", len(data), f"need {attr_len} bytes of attribute text")
    try:
        attr_text = data[off : off + attr_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise TileCodecError("attributes", off, f"attribute text is not UTF-8: {exc}") from exc
    return TilePayload(
        vertices=verts.copy(),
        indices=idx.copy(),
        features=features,
        attributes_text=attr_text,
    )


# ---------------------------------------------------------------------------
# manifest


def _tile_doc(tile: Tile) -> dict:
    doc = {
        "id": tile.id,
        "bbox": [float(v) for v in tile.bbox],
        "geometric_error": float(tile.geometric_error),
        "refine": tile.refine,
    }
    if tile.content_uri is not None:
        doc["content_uri"] = tile.content_uri
    doc["children"] = [_tile_doc(c) for c in tile.children]
    return doc


def tileset_manifest(tileset: Tileset) -> str:
    """JSON manifest of the tile tree with stable key order."""
    doc = {
        "anchor": {
            "lon0": tileset.anchor.lon0,
            "lat0": tileset.anchor.lat0,
            "description": tileset.anchor.description,
        },
        "root": _tile_doc(tileset.root),
    }
    return json.dumps(doc, indent=2) + "\n"


def parse_manifest(text: str) -> Tileset:
    """Inverse of tileset_manifest (payloads and building index are not restored)."""
    doc = json.loads(text)
    a = doc["anchor"]
    anchor = SceneAnchor(lon0=a["lon0"], lat0=a["lat0"], description=a.get("description", ""))

    def tile_from(d: dict) -> Tile:
        return Tile(
            id=d["id"],
            bbox=tuple(d["bbox"]),
            geometric_error=d["geometric_error"],
            refine=d.get("refine", "REPLACE"),
            content_uri=d.get("content_uri"),
            children=[tile_from(c) for c in d.get("children", [])],
        )

    return Tileset(root=tile_from(doc["root"]), anchor=anchor)
