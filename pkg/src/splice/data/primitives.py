"""Watertight triangle-mesh primitives used by the procedural generators."""

from __future__ import annotations

import numpy as np

# Faces of a box over the 8 corners ordered (x + 2y + 4z bits), outward CCW.
_BOX_FACES = np.array([
    [0, 2, 1], [1, 2, 3],      # z = lo
    [4, 5, 6], [5, 7, 6],      # z = hi
    [0, 1, 4], [1, 5, 4],      # y = lo
    [2, 6, 3], [3, 6, 7],      # y = hi
    [0, 4, 2], [2, 4, 6],      # x = lo
    [1, 3, 5], [3, 7, 5],      # x = hi
], dtype=np.int64)


def _corners(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    xs = [lo[0], hi[0]]
    ys = [lo[1], hi[1]]
    zs = [lo[2], hi[2]]
    return np.array([[xs[i & 1], ys[(i >> 1) & 1], zs[(i >> 2) & 1]]
                     for i in range(8)], dtype=np.float64)


def box(center, size) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned box: 8 vertices, 12 triangles."""
    center = np.asarray(center, dtype=np.float64)
    half = np.asarray(size, dtype=np.float64) / 2.0
    return _corners(center - half, center + half), _BOX_FACES.copy()


def tapered_box(center, size_bottom, size_top, height) -> tuple[np.ndarray, np.ndarray]:
    """Vertical frustum with rectangular cross sections (tapered prism)."""
    center = np.asarray(center, dtype=np.float64)
    hb = np.asarray(size_bottom, dtype=np.float64) / 2.0
    ht = np.asarray(size_top, dtype=np.float64) / 2.0
    z0, z1 = center[2] - height / 2.0, center[2] + height / 2.0
    verts = np.array([
        [center[0] - hb[0], center[1] - hb[1], z0],
        [center[0] + hb[0], center[1] - hb[1], z0],
        [center[0] - hb[0], center[1] + hb[1], z0],
        [center[0] + hb[0], center[1] + hb[1], z0],
        [center[0] - ht[0], center[1] - ht[1], z1],
        [center[0] + ht[0], center[1] - ht[1], z1],
        [center[0] - ht[0], center[1] + ht[1], z1],
        [center[0] + ht[0], center[1] + ht[1], z1],
    ])
    return verts, _BOX_FACES.copy()


def cylinder(center, radius, height, n=24, axis=2) -> tuple[np.ndarray, np.ndarray]:
    """Closed cylinder along one axis with n-gon cross section."""
    center = np.asarray(center, dtype=np.float64)
    ang = 2 * np.pi * np.arange(n) / n
    ring = np.stack([radius * np.cos(ang), radius * np.sin(ang)], axis=1)
    lo_ring = np.zeros((n, 3))
    hi_ring = np.zeros((n, 3))
    # Cyclic axis order keeps the (other0, other1, axis) frame right-handed,
    # so the winding below is outward for every axis choice.
    other = [(axis + 1) % 3, (axis + 2) % 3]
    lo_ring[:, other[0]] = ring[:, 0]
    lo_ring[:, other[1]] = ring[:, 1]
    hi_ring[:] = lo_ring
    lo_ring[:, axis] = -height / 2.0
    hi_ring[:, axis] = height / 2.0
    lo_c = np.zeros(3)
    hi_c = np.zeros(3)
    lo_c[axis] = -height / 2.0
    hi_c[axis] = height / 2.0
    verts = np.concatenate([lo_ring, hi_ring, [lo_c], [hi_c]]) + center

    faces = []
    for i in range(n):
        j = (i + 1) % n
        faces.append([i, j, n + i])          # side
        faces.append([j, n + j, n + i])
        faces.append([2 * n, j, i])          # bottom cap
        faces.append([2 * n + 1, n + i, n + j])  # top cap
    return verts, np.array(faces, dtype=np.int64)


def mesh_volume(vertices: np.ndarray, faces: np.ndarray) -> float:
    """Signed volume via the divergence theorem (positive for outward CCW)."""
    tri = vertices[faces]
    return float(np.einsum("ij,ij->", tri[:, 0],
                           np.cross(tri[:, 1], tri[:, 2])) / 6.0)
