"""Part-label assignment by nearest annotated surface sample."""

from __future__ import annotations

import zlib

import numpy as np
from scipy.spatial import cKDTree

from splice.data.types import LabeledShape, PartMesh

# Fixed area-weighted surface sampling density per part for labeling.
SAMPLES_PER_PART = 4096


def _part_seed(shape_id: str, label: int) -> int:
    return zlib.crc32(f"{shape_id}/{label}".encode()) & 0xFFFFFFFF


def surface_samples(part: PartMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """Area-weighted uniform samples on the part surface."""
    areas = part.face_areas()
    total = areas.sum()
    if total <= 0:
        raise ValueError(f"part {part.part_label} has zero surface area")
    face_ids = rng.choice(len(areas), size=n, p=areas / total)
    tri = part.triangles()[face_ids]
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    return tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) \
        + v[:, None] * (tri[:, 2] - tri[:, 0])


def shape_surface_samples(shape: LabeledShape,
                          n_per_part: int = SAMPLES_PER_PART) -> list[np.ndarray]:
    """Deterministic per-part surface sample sets (keyed by shape id)."""
    out = []
    for part in shape.parts:
        rng = np.random.default_rng(_part_seed(shape.id, part.part_label))
        out.append(surface_samples(part, n_per_part, rng))
    return out


def assign_part_labels(points: np.ndarray, shape: LabeledShape,
                       n_per_part: int = SAMPLES_PER_PART) -> np.ndarray:
    """Label of the nearest surface sample across all parts.

    Ties go to the lowest part index (argmin keeps the first minimum).
    """
    if len(shape.parts) < 1:
        raise ValueError("shape has no parts")
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    sample_sets = shape_surface_samples(shape, n_per_part)
    dists = np.empty((len(shape.parts), len(points)))
    for i, samples in enumerate(sample_sets):
        dists[i], _ = cKDTree(samples).query(points)
    nearest_part = np.argmin(dists, axis=0)
    labels = np.array([p.part_label for p in shape.parts], dtype=np.int64)
    return labels[nearest_part]
