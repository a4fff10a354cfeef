"""Occupancy supervision point sampling with interior/exterior balancing."""

from __future__ import annotations

import numpy as np

from splice.data.labels import assign_part_labels
from splice.data.types import LabeledShape, OccupancySamples, NO_PART
from splice.data.voxelize import points_inside_shape

# Class balance must land within this relative band of 50/50.
BALANCE_TOLERANCE = 0.10


def sample_occupancy_points(shape: LabeledShape, n_uniform: int,
                            n_surface: int, sigma: float = 0.02,
                            seed: int = 0) -> OccupancySamples:
    """Uniform + near-surface points, rebalanced to ~50% interior.

    Near-surface points are area-weighted surface samples perturbed by
    isotropic Gaussian noise (sigma). The pooled set is resampled so the
    interior/exterior split is even; interior points carry the label of
    their nearest part surface, exterior points carry NO_PART.
    """
    if n_uniform <= 0 or n_surface <= 0:
        raise ValueError("n_uniform and n_surface must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = shape.bbox[0], shape.bbox[1]
    uniform = lo + rng.random((n_uniform, 3)) * (hi - lo)

    areas = np.concatenate([p.face_areas() for p in shape.parts])
    owners = np.concatenate([np.full(len(p.faces), i)
                             for i, p in enumerate(shape.parts)])
    tris = np.concatenate([p.triangles() for p in shape.parts])
    face_ids = rng.choice(len(areas), size=n_surface, p=areas / areas.sum())
    del owners  # ownership re-derived from geometry below
    tri = tris[face_ids]
    u = rng.random(n_surface)
    v = rng.random(n_surface)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    surface = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) \
        + v[:, None] * (tri[:, 2] - tri[:, 0])
    if sigma > 0:
        surface = surface + rng.normal(0.0, sigma, size=surface.shape)
    surface = np.clip(surface, -1.0, 1.0)

    pool = np.concatenate([uniform, surface])
    inside = points_inside_shape(pool, shape)

    total = n_uniform + n_surface
    target_in = total // 2
    target_out = total - target_in
    idx_in = np.flatnonzero(inside)
    idx_out = np.flatnonzero(~inside)
    if len(idx_in) == 0 or len(idx_out) == 0:
        chosen = np.arange(total)  # degenerate shape; keep the raw pool
    else:
        pick_in = rng.choice(idx_in, size=target_in,
                             replace=len(idx_in) < target_in)
        pick_out = rng.choice(idx_out, size=target_out,
                              replace=len(idx_out) < target_out)
        chosen = rng.permutation(np.concatenate([pick_in, pick_out]))

    points = pool[chosen]
    occupancy = inside[chosen].astype(np.uint8)
    labels = np.full(total, NO_PART, dtype=np.int64)
    if occupancy.any():
        interior = np.flatnonzero(occupancy == 1)
        labels[interior] = assign_part_labels(points[interior], shape)
    samples = OccupancySamples(points=points, occupancy=occupancy,
                               part_labels=labels)
    samples.validate()
    return samples
