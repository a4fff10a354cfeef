"""Core data model: labeled part meshes, part voxel grids, point samples."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Part label for exterior points (no part owns them).
NO_PART = -1


@dataclass
class PartMesh:
    """A closed triangle mesh for one labeled part."""

    vertices: np.ndarray   # (V, 3) float64
    faces: np.ndarray      # (F, 3) int64
    part_label: int
    name: str = ""

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)

    def validate(self) -> None:
        if len(self.faces) < 1:
            raise ValueError(f"part {self.part_label} has no triangles")
        if self.faces.min() < 0 or self.faces.max() >= len(self.vertices):
            raise ValueError(f"part {self.part_label} has invalid face indices")

    def triangles(self) -> np.ndarray:
        """(F, 3, 3) triangle vertex array."""
        return self.vertices[self.faces]

    def face_areas(self) -> np.ndarray:
        tri = self.triangles()
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def bbox(self) -> np.ndarray:
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    def translated(self, delta: np.ndarray) -> "PartMesh":
        return PartMesh(self.vertices + np.asarray(delta, dtype=np.float64),
                        self.faces.copy(), self.part_label, self.name)


@dataclass
class LabeledShape:
    """A shape assembled from labeled parts in normalized [-1, 1]^3 space."""

    id: str
    parts: list[PartMesh]
    bbox: np.ndarray = field(default=None)  # (2, 3) min/max
    category: str = ""
    seed: int = -1

    def __post_init__(self):
        if self.bbox is None:
            lo = np.min([p.bbox()[0] for p in self.parts], axis=0)
            hi = np.max([p.bbox()[1] for p in self.parts], axis=0)
            self.bbox = np.stack([lo, hi])
        self.bbox = np.asarray(self.bbox, dtype=np.float64).reshape(2, 3)

    def validate(self, n_max: int = 16) -> None:
        if not 1 <= len(self.parts) <= n_max:
            raise ValueError(f"part count {len(self.parts)} outside [1, {n_max}]")
        labels = [p.part_label for p in self.parts]
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate part labels")
        for p in self.parts:
            p.validate()
            if p.vertices.min() < -1.0 - 1e-9 or p.vertices.max() > 1.0 + 1e-9:
                raise ValueError(f"part {p.part_label} outside [-1, 1]^3")

    def part_by_label(self, label: int) -> PartMesh:
        for p in self.parts:
            if p.part_label == label:
                return p
        raise KeyError(label)


@dataclass
class PartVoxelGrid:
    """Binary occupancy grid of one part, recentered on its centroid.

    ``centroid`` keeps the original-frame occupied-cell centroid that was
    removed by recentering; ``voxel_size`` is the world edge length of one
    cell (the grid spans the full normalized domain before recentering).
    """

    grid: np.ndarray       # (res, res, res) bool
    centroid: np.ndarray   # (3,) float64, original frame
    voxel_size: float

    def __post_init__(self):
        self.grid = np.ascontiguousarray(self.grid, dtype=bool)
        self.centroid = np.asarray(self.centroid, dtype=np.float64).reshape(3)

    @property
    def res(self) -> int:
        return self.grid.shape[0]

    def occupied_centers(self, frame: str = "centered") -> np.ndarray:
        """World coordinates of occupied cell centers.

        frame="centered" places the grid around the origin (encoder view);
        frame="original" adds back the stored centroid offset.
        """
        idx = np.argwhere(self.grid)
        res = self.res
        # Cell centers of a grid spanning [-res/2, res/2] cells around 0.
        centers = (idx + 0.5 - res / 2.0) * self.voxel_size
        if frame == "centered":
            return centers
        if frame == "original":
            offset = self.centroid - centers.mean(axis=0) if len(centers) else 0.0
            return centers + offset
        raise ValueError(frame)

    def validate(self) -> None:
        if not self.grid.any():
            raise ValueError("empty voxel grid")
        centers = self.occupied_centers("centered")
        if np.any(np.abs(centers.mean(axis=0)) > self.voxel_size):
            raise ValueError("grid centroid more than one cell off center")


@dataclass
class OccupancySamples:
    """Batch of occupancy supervision points.

    ``part_labels[i]`` is NO_PART for exterior points; every interior point
    carries the label of its nearest part surface.
    """

    points: np.ndarray       # (N, 3) float64
    occupancy: np.ndarray    # (N,) uint8 in {0, 1}
    part_labels: np.ndarray  # (N,) int64, NO_PART for exterior

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=np.float64)
        self.occupancy = np.ascontiguousarray(self.occupancy, dtype=np.uint8)
        self.part_labels = np.ascontiguousarray(self.part_labels, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.points)

    def validate(self) -> None:
        if np.any((self.occupancy == 1) & (self.part_labels == NO_PART)):
            raise ValueError("interior sample without a part label")

    def interior_fraction(self) -> float:
        return float(self.occupancy.mean()) if len(self) else 0.0
