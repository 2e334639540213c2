"""Independent reference implementations the tests check the library against.

Everything here is deliberately written by a different method than the code
under test (winding numbers instead of even-odd crossings, homogeneous 4x4
matrices instead of composed ops, dense sampling instead of interpolation).
"""

from __future__ import annotations

import math

import numpy as np


def winding_number_inside(px: float, py: float, rings: list[np.ndarray]) -> bool:
    """Nonzero-winding containment via signed angle accumulation, even-odd combined.

    For simple non-overlapping rings, parity of per-ring containment matches
    the even-odd rule.
    """
    crossings = 0
    for ring in rings:
        w = 0.0
        for k in range(len(ring) - 1):
            ax, ay = ring[k][0] - px, ring[k][1] - py
            bx, by = ring[k + 1][0] - px, ring[k + 1][1] - py
            w += math.atan2(ax * by - ay * bx, ax * bx + ay * by)
        if abs(w) > math.pi:  # winding +-2pi => inside this ring
            crossings += 1
    return crossings % 2 == 1


def mesh_volume(vertices: np.ndarray, indices: np.ndarray, ref=None) -> float:
    """Signed tetrahedron sum about a reference point (default: vertex centroid)."""
    v = np.asarray(vertices, dtype=np.float64)
    tri = np.asarray(indices, dtype=np.int64)
    if ref is None:
        ref = v.mean(axis=0)
    a = v[tri[:, 0]] - ref
    b = v[tri[:, 1]] - ref
    c = v[tri[:, 2]] - ref
    return float(np.sum(np.einsum("ij,ij->i", a, np.cross(b, c))) / 6.0)


def transform_mesh_4x4(vertices: np.ndarray, rotation_deg: float, scale: float, translation) -> np.ndarray:
    """Apply scale, then rotation about +z, then translation, via one 4x4 matrix."""
    th = math.radians(rotation_deg)
    c, s = math.cos(th), math.sin(th)
    m = np.array(
        [
            [scale * c, -scale * s, 0.0, translation[0]],
            [scale * s, scale * c, 0.0, translation[1]],
            [0.0, 0.0, scale, translation[2]],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )
    homo = np.hstack([vertices, np.ones((len(vertices), 1))])
    return (homo @ m.T)[:, :3]


def circumcircle_violations(points: np.ndarray, triangles: np.ndarray, slack: float = 1e-9) -> int:
    """Count (triangle, point) pairs violating the empty-circumcircle property."""
    pts = np.asarray(points, dtype=np.float64)
    bad = 0
    for a, b, c in triangles:
        ax, ay = pts[a]
        bx, by = pts[b]
        cx, cy = pts[c]
        d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
        if abs(d) < 1e-14:
            continue
        ux = ((ax**2 + ay**2) * (by - cy) + (bx**2 + by**2) * (cy - ay) + (cx**2 + cy**2) * (ay - by)) / d
        uy = ((ax**2 + ay**2) * (cx - bx) + (bx**2 + by**2) * (ax - cx) + (cx**2 + cy**2) * (bx - ax)) / d
        r2 = (ax - ux) ** 2 + (ay - uy) ** 2
        d2 = (pts[:, 0] - ux) ** 2 + (pts[:, 1] - uy) ** 2
        inside = d2 < r2 - slack * max(1.0, r2)
        inside[[a, b, c]] = False
        bad += int(inside.sum())
    return bad


def rasterize_iou(ring_a: np.ndarray, ring_b: np.ndarray, step: float = 0.1) -> float:
    """Intersection-over-union of two simple rings by fine-grid rasterization."""
    lo = np.minimum(ring_a.min(axis=0), ring_b.min(axis=0)) - step
    hi = np.maximum(ring_a.max(axis=0), ring_b.max(axis=0)) + step
    xs = np.arange(lo[0], hi[0], step) + step / 2
    ys = np.arange(lo[1], hi[1], step) + step / 2
    gx, gy = np.meshgrid(xs, ys)
    in_a = _ring_contains(gx, gy, ring_a)
    in_b = _ring_contains(gx, gy, ring_b)
    inter = np.logical_and(in_a, in_b).sum()
    union = np.logical_or(in_a, in_b).sum()
    return float(inter) / float(union) if union else 0.0


def _ring_contains(gx, gy, ring):
    ax, ay = ring[:-1, 0], ring[:-1, 1]
    bx, by = ring[1:, 0], ring[1:, 1]
    px = gx[..., None]
    py = gy[..., None]
    cond = (ay > py) != (by > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xint = ax + (py - ay) * (bx - ax) / (by - ay)
    return ((cond) & (px < xint)).sum(axis=-1) % 2 == 1


def dense_road_flooded_fraction(
    vertices: np.ndarray, depth_at, threshold: float, step: float = 0.01
) -> float:
    """Flooded fraction by brute-force 1 cm arc-length sampling.

    ``depth_at(x, y)`` is any scalar depth lookup, typically nearest-cell.
    """
    seg = np.diff(vertices, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seg_len.sum())
    n = int(math.ceil(total / step))
    ts = np.linspace(0.0, total, n + 1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    si = np.clip(np.searchsorted(cum, ts, side="right") - 1, 0, len(seg_len) - 1)
    frac = (ts - cum[si]) / seg_len[si]
    pts = vertices[si] + frac[:, None] * seg[si]
    flooded = sum(1 for x, y in pts if depth_at(x, y) >= threshold)
    return flooded / len(pts)
