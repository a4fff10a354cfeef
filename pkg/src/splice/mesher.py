"""Dense occupancy evaluation and isosurface extraction.

The decoded field is sampled at the cell centers of [-1, 1]^3 and run
through marching cubes (topologically disambiguated case tables via
scikit-image). The volume gets a one-voxel empty border first so shapes
touching the domain boundary still close.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from skimage import measure


@dataclass
class OccupancyVolume:
    """Scalar occupancy grid over [-1, 1]^3 at res^3 cell centers."""

    values: np.ndarray
    res: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.res,) * 3:
            raise ValueError("volume shape does not match res")

    def validate(self) -> None:
        if self.values.min() < 0.0 or self.values.max() > 1.0:
            raise ValueError("occupancy values outside [0, 1]")


@dataclass
class TriMesh:
    vertices: np.ndarray                    # (V, 3) float64
    faces: np.ndarray                       # (F, 3) int64
    part_index: np.ndarray | None = None    # (V,) dominant part per vertex

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        self.faces = np.asarray(self.faces, dtype=np.int64).reshape(-1, 3)

    def is_empty(self) -> bool:
        return len(self.faces) == 0

    def validate(self) -> None:
        if self.is_empty():
            return
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise ValueError("face index out of range")
        tri = self.vertices[self.faces]
        areas = 0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
        if np.any(areas <= 0):
            raise ValueError("degenerate face")

    def area(self) -> float:
        if self.is_empty():
            return 0.0
        tri = self.vertices[self.faces]
        return float(0.5 * np.linalg.norm(
            np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1).sum())

    def edge_face_counts(self) -> dict[tuple[int, int], int]:
        counts: dict[tuple[int, int], int] = {}
        for f in self.faces:
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                key = (min(a, b), max(a, b))
                counts[key] = counts.get(key, 0) + 1
        return counts

    def is_watertight(self) -> bool:
        if self.is_empty():
            return False
        return all(c == 2 for c in self.edge_face_counts().values())

    def euler_characteristic(self) -> int:
        v = len(self.vertices)
        e = len(self.edge_face_counts())
        f = len(self.faces)
        return v - e + f


def grid_points(res: int) -> np.ndarray:
    """Cell centers of [-1, 1]^3, shape (res^3, 3), x fastest-varying last."""
    h = 2.0 / res
    axis = -1.0 + (np.arange(res) + 0.5) * h
    xs, ys, zs = np.meshgrid(axis, axis, axis, indexing="ij")
    return np.stack([xs, ys, zs], axis=-1).reshape(-1, 3)


def query_grid(eval_fn: Callable[[np.ndarray], np.ndarray], res: int,
               batch_size: int = 1_000_000) -> OccupancyVolume:
    """Evaluate a field on the res^3 cell-center grid in bounded batches."""
    if res < 2:
        raise ValueError("grid resolution must be >= 2")
    pts = grid_points(res)
    values = np.empty(len(pts))
    for lo in range(0, len(pts), batch_size):
        hi = min(lo + batch_size, len(pts))
        values[lo:hi] = np.asarray(eval_fn(pts[lo:hi])).reshape(-1)
    vol = OccupancyVolume(values=values.reshape(res, res, res), res=res)
    vol.validate()
    return vol


def marching_cubes(volume: OccupancyVolume, iso: float = 0.5) -> TriMesh:
    """Extract the iso-surface as a triangle mesh in world coordinates."""
    res = volume.res
    h = 2.0 / res
    padded = np.zeros((res + 2,) * 3, dtype=np.float64)
    padded[1:-1, 1:-1, 1:-1] = volume.values
    if padded.max() <= iso:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    verts, faces, _, _ = measure.marching_cubes(padded, level=iso)
    # Padded index p maps to world -1 + (p - 0.5) * h.
    verts = verts * h + (-1.0 - 0.5 * h)
    mesh = TriMesh(vertices=verts, faces=faces.astype(np.int64))
    return _drop_degenerate(mesh)


def _drop_degenerate(mesh: TriMesh) -> TriMesh:
    if mesh.is_empty():
        return mesh
    tri = mesh.vertices[mesh.faces]
    areas = 0.5 * np.linalg.norm(
        np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    keep = areas > 0
    if keep.all():
        return mesh
    return TriMesh(mesh.vertices, mesh.faces[keep], mesh.part_index)


def sample_surface(mesh: TriMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """Area-weighted point samples on the mesh surface."""
    if mesh.is_empty():
        raise ValueError("cannot sample an empty mesh")
    tri = mesh.vertices[mesh.faces]
    areas = 0.5 * np.linalg.norm(
        np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    face_ids = rng.choice(len(areas), size=n, p=areas / areas.sum())
    t = tri[face_ids]
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    return t[:, 0] + u[:, None] * (t[:, 1] - t[:, 0]) \
        + v[:, None] * (t[:, 2] - t[:, 0])


# ---------------------------------------------------------------------------
# Export formats

def save_obj(mesh: TriMesh, path: str | Path) -> None:
    lines = [f"v {v[0]:.8f} {v[1]:.8f} {v[2]:.8f}" for v in mesh.vertices]
    lines += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}" for f in mesh.faces]
    Path(path).write_text("\n".join(lines) + "\n")


_MESH_MAGIC = b"SPLB"
_MESH_VERSION = 1


def mesh_to_bytes(mesh: TriMesh) -> bytes:
    """Compact binary mesh:

      magic b"SPLB" | u32 version | u32 V | u32 F | u8 has_part_index
      f32LE V*3 vertices | u32LE F*3 faces | i32LE V part indices (optional)
    """
    verts = np.ascontiguousarray(mesh.vertices, dtype="<f4")
    faces = np.ascontiguousarray(mesh.faces, dtype="<u4")
    has_idx = mesh.part_index is not None
    head = _MESH_MAGIC + struct.pack("<IIIB", _MESH_VERSION, len(verts),
                                     len(faces), int(has_idx))
    payload = head + verts.tobytes() + faces.tobytes()
    if has_idx:
        payload += np.ascontiguousarray(mesh.part_index, dtype="<i4").tobytes()
    return payload


def mesh_from_bytes(data: bytes) -> TriMesh:
    if data[:4] != _MESH_MAGIC:
        raise ValueError("bad mesh magic")
    version, nv, nf, has_idx = struct.unpack("<IIIB", data[4:17])
    if version != _MESH_VERSION:
        raise ValueError(f"unsupported mesh version {version}")
    off = 17
    verts = np.frombuffer(data, dtype="<f4", count=nv * 3, offset=off)
    off += nv * 12
    faces = np.frombuffer(data, dtype="<u4", count=nf * 3, offset=off)
    off += nf * 12
    part_index = None
    if has_idx:
        part_index = np.frombuffer(data, dtype="<i4", count=nv, offset=off).copy()
    return TriMesh(vertices=verts.reshape(nv, 3).astype(np.float64),
                   faces=faces.reshape(nf, 3).astype(np.int64),
                   part_index=part_index)
