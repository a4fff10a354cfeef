"""Inside/outside tests and binary voxelization by ray parity.

A point is inside a closed mesh iff a ray from it crosses the surface an
odd number of times. Rays run along +z; triangle coverage in the xy plane
uses a half-open fill rule so shared edges and vertices are counted by
exactly one incident triangle, which keeps the parity exact for
watertight meshes.
"""

from __future__ import annotations

import numpy as np

from splice.data.types import LabeledShape, PartMesh, PartVoxelGrid


class EmptyPart(ValueError):
    """Voxelization produced no occupied cells."""


def _coverage_and_z(tri: np.ndarray, px: np.ndarray, py: np.ndarray):
    """Coverage mask and surface z for query columns against one triangle.

    tri: (3, 3) vertices; px, py: flat arrays of column coordinates.
    Returns (mask, z) with z only valid where mask is set.
    """
    (ax, ay, az), (bx, by, bz), (cx, cy, cz) = tri
    area = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if area == 0.0:  # projects to a segment; adjacent faces own the parity
        return None, None
    sign = 1.0 if area > 0 else -1.0
    w0 = ((cx - bx) * (py - by) - (cy - by) * (px - bx)) * sign
    w1 = ((ax - cx) * (py - cy) - (ay - cy) * (px - cx)) * sign
    w2 = ((bx - ax) * (py - ay) - (by - ay) * (px - ax)) * sign

    # Half-open boundary ownership: an on-edge point belongs to the triangle
    # whose (CCW) edge direction satisfies dy < 0 or (dy == 0 and dx < 0).
    def edge_ok(x0, y0, x1, y1):
        dx, dy = (x1 - x0) * sign, (y1 - y0) * sign
        return dy < 0 or (dy == 0 and dx < 0)

    m0 = (w0 > 0) | ((w0 == 0) & edge_ok(bx, by, cx, cy))
    m1 = (w1 > 0) | ((w1 == 0) & edge_ok(cx, cy, ax, ay))
    m2 = (w2 > 0) | ((w2 == 0) & edge_ok(ax, ay, bx, by))
    mask = m0 & m1 & m2
    if not mask.any():
        return None, None
    wsum = w0 + w1 + w2
    z = (w0 * az + w1 * bz + w2 * cz) / wsum
    return mask, z


def points_inside_mesh(points: np.ndarray, vertices: np.ndarray,
                       faces: np.ndarray) -> np.ndarray:
    """Boolean inside mask for arbitrary points (+z ray parity)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    crossings = np.zeros(len(points), dtype=np.int64)
    px, py, pz = points[:, 0], points[:, 1], points[:, 2]
    tris = vertices[faces]
    for tri in tris:
        lo = tri[:, :2].min(axis=0)
        hi = tri[:, :2].max(axis=0)
        cand = np.flatnonzero((px >= lo[0]) & (px <= hi[0]) &
                              (py >= lo[1]) & (py <= hi[1]))
        if len(cand) == 0:
            continue
        mask, z = _coverage_and_z(tri, px[cand], py[cand])
        if mask is None:
            continue
        hit = cand[mask]
        crossings[hit] += (z[mask] > pz[hit]).astype(np.int64)
    return (crossings % 2) == 1


def points_inside_shape(points: np.ndarray, shape: LabeledShape) -> np.ndarray:
    """Inside the union of all parts."""
    inside = np.zeros(len(points), dtype=bool)
    for part in shape.parts:
        inside |= points_inside_mesh(points, part.vertices, part.faces)
    return inside


def _cell_centers_1d(res: int) -> np.ndarray:
    h = 2.0 / res
    return -1.0 + (np.arange(res) + 0.5) * h


def voxelize_mesh_raw(vertices: np.ndarray, faces: np.ndarray,
                      res: int) -> np.ndarray:
    """Uncentered occupancy over the cell centers of [-1, 1]^3 at res^3."""
    h = 2.0 / res
    centers = _cell_centers_1d(res)
    # A[ix, iy, m] counts surface crossings with exactly m cell centers
    # below them; parity of the suffix sum gives occupancy per cell.
    acc = np.zeros((res, res, res + 1), dtype=np.int32)
    tris = vertices[faces]
    for tri in tris:
        lo = tri[:, :2].min(axis=0)
        hi = tri[:, :2].max(axis=0)
        ix0 = max(int(np.ceil((lo[0] + 1) / h - 0.5)), 0)
        ix1 = min(int(np.floor((hi[0] + 1) / h - 0.5)), res - 1)
        iy0 = max(int(np.ceil((lo[1] + 1) / h - 0.5)), 0)
        iy1 = min(int(np.floor((hi[1] + 1) / h - 0.5)), res - 1)
        if ix0 > ix1 or iy0 > iy1:
            continue
        ix, iy = np.meshgrid(np.arange(ix0, ix1 + 1),
                             np.arange(iy0, iy1 + 1), indexing="ij")
        ix, iy = ix.ravel(), iy.ravel()
        mask, z = _coverage_and_z(tri, centers[ix], centers[iy])
        if mask is None:
            continue
        m = np.ceil((z[mask] + 1.0) / h - 0.5).astype(np.int64)
        m = np.clip(m, 0, res)
        np.add.at(acc, (ix[mask], iy[mask], m), 1)
    above = np.cumsum(acc[:, :, ::-1], axis=2)[:, :, ::-1]
    return (above[:, :, 1:] % 2 == 1)


def voxelize_part(part: PartMesh, res: int = 64) -> PartVoxelGrid:
    """Binary part grid recentered on its occupied-cell centroid."""
    raw = voxelize_mesh_raw(part.vertices, part.faces, res)
    occ = np.argwhere(raw)
    if len(occ) == 0:
        raise EmptyPart(f"part {part.part_label} occupies no cell at res {res}")
    h = 2.0 / res
    idx_mean = occ.mean(axis=0)
    centroid = -1.0 + (idx_mean + 0.5) * h

    shift = np.rint(idx_mean - (res - 1) / 2.0).astype(np.int64)
    lo_i = occ.min(axis=0)
    hi_i = occ.max(axis=0)
    # Clamp so no occupied cell is shifted out of the canvas.
    shift = np.minimum(np.maximum(shift, hi_i - (res - 1)), lo_i)
    grid = np.zeros_like(raw)
    new_idx = occ - shift
    grid[new_idx[:, 0], new_idx[:, 1], new_idx[:, 2]] = True
    return PartVoxelGrid(grid=grid, centroid=centroid, voxel_size=h)


def voxelize_shape(shape: LabeledShape, res: int = 64) -> np.ndarray:
    """Ground-truth union occupancy grid of a whole shape."""
    grid = np.zeros((res, res, res), dtype=bool)
    for part in shape.parts:
        grid |= voxelize_mesh_raw(part.vertices, part.faces, res)
    return grid
