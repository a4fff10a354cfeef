"""Reconstruction metrics: chamfer distance, EMD, mesh accuracy, IoU.

Absolute values use fixed in-repo conventions (squared chamfer summed both
ways x1000; EMD as mean assignment distance; mesh accuracy as mean
sample-to-surface distance x1000). Only orderings are comparable across
configurations, not any external benchmark's absolute numbers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial import cKDTree

# Reporting scales.
CHAMFER_SCALE = 1000.0
MESH_ACC_SCALE = 1000.0

# Problem size up to which the exact Hungarian assignment is used.
EMD_EXACT_LIMIT = 256


def chamfer(a: np.ndarray, b: np.ndarray, scale: float = CHAMFER_SCALE) -> float:
    """Symmetric squared chamfer distance between point sets, scaled.

    mean_a min_b ||a-b||^2 + mean_b min_a ||b-a||^2, times ``scale``.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("chamfer needs non-empty point sets")
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(((d_ab ** 2).mean() + (d_ba ** 2).mean()) * scale)


def emd(a: np.ndarray, b: np.ndarray, method: str = "auto") -> float:
    """Mean distance of the optimal one-to-one assignment.

    Exact Hungarian up to EMD_EXACT_LIMIT points; the auction
    approximation above that (method="auction" to force it, "hungarian"
    to force exactness at any size).
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1, 3)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 3)
    if len(a) != len(b):
        raise ValueError("emd needs equal-size point sets")
    if len(a) == 0:
        raise ValueError("emd needs non-empty point sets")
    if method == "auto":
        method = "hungarian" if len(a) <= EMD_EXACT_LIMIT else "auction"
    dists = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=2)
    if method == "hungarian":
        rows, cols = linear_sum_assignment(dists)
        return float(dists[rows, cols].mean())
    if method == "auction":
        cols = _auction_assignment(dists)
        return float(dists[np.arange(len(a)), cols].mean())
    raise ValueError(f"unknown emd method {method!r}")


def _auction_assignment(costs: np.ndarray, eps_factor: float = 0.25,
                        rounds: int = 12) -> np.ndarray:
    """Epsilon-scaling forward auction for min-cost assignment.

    Jacobi-style bidding: every unassigned row bids at once, the highest
    bid per column wins. Prices persist across epsilon phases.
    """
    n = costs.shape[0]
    benefits = -costs
    spread = float(costs.max() - costs.min()) or 1.0
    prices = np.zeros(n)
    owner = np.full(n, -1)       # column -> row
    assigned = np.full(n, -1)    # row -> column
    eps = spread / 2.0
    eps_final = spread / (50.0 * n)
    for _ in range(rounds):
        owner[:] = -1
        assigned[:] = -1
        while True:
            free = np.flatnonzero(assigned < 0)
            if len(free) == 0:
                break
            values = benefits[free] - prices[None, :]
            best = np.argmax(values, axis=1)
            top = values[np.arange(len(free)), best]
            values[np.arange(len(free)), best] = -np.inf
            second = values.max(axis=1)
            bids = prices[best] + (top - second) + eps
            # Highest bid per contested column wins.
            order = np.argsort(bids)  # later (higher) writes win
            for k in order:
                j = best[k]
                i = free[k]
                if owner[j] >= 0:
                    assigned[owner[j]] = -1
                owner[j] = i
                assigned[i] = j
                prices[j] = bids[k]
        if eps <= eps_final:
            break
        eps = max(eps * eps_factor, eps_final)
    return assigned


def point_triangle_distance(points: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Exact distances from points (M, 3) to triangles (M, 3, 3), pairwise.

    Projects onto the triangle plane; if the projection's barycentrics are
    all non-negative the plane distance is exact, otherwise the minimum
    over the three edge segments is.
    """
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, ac, ap = b - a, c - a, points - a
    # Barycentric coordinates of the plane projection.
    d00 = np.einsum("ij,ij->i", ab, ab)
    d01 = np.einsum("ij,ij->i", ab, ac)
    d11 = np.einsum("ij,ij->i", ac, ac)
    d20 = np.einsum("ij,ij->i", ap, ab)
    d21 = np.einsum("ij,ij->i", ap, ac)
    denom = d00 * d11 - d01 * d01
    denom = np.where(np.abs(denom) < 1e-30, 1e-30, denom)
    v = (d11 * d20 - d01 * d21) / denom
    w = (d00 * d21 - d01 * d20) / denom
    inside = (v >= 0) & (w >= 0) & (v + w <= 1)

    closest = a + v[:, None] * ab + w[:, None] * ac
    d_plane = np.linalg.norm(points - closest, axis=1)

    d_edges = np.minimum(
        _point_segment_distance(points, a, b),
        np.minimum(_point_segment_distance(points, b, c),
                   _point_segment_distance(points, c, a)))
    return np.where(inside, d_plane, d_edges)


def _point_segment_distance(p: np.ndarray, s0: np.ndarray,
                            s1: np.ndarray) -> np.ndarray:
    d = s1 - s0
    t = np.einsum("ij,ij->i", p - s0, d)
    dd = np.einsum("ij,ij->i", d, d)
    t = np.clip(np.where(dd > 0, t / np.where(dd > 0, dd, 1.0), 0.0), 0.0, 1.0)
    proj = s0 + t[:, None] * d
    return np.linalg.norm(p - proj, axis=1)


def points_to_mesh_distance(points: np.ndarray, vertices: np.ndarray,
                            faces: np.ndarray) -> np.ndarray:
    """Exact nearest-surface distance per point (KD-tree candidate pruning)."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    tris = vertices[faces]
    centroids = tris.mean(axis=1)
    radii = np.linalg.norm(tris - centroids[:, None, :], axis=2).max(axis=1)
    r_max = radii.max()
    tree = cKDTree(centroids)
    _, nearest = tree.query(points)
    upper = point_triangle_distance(points, tris[nearest])
    candidate_lists = tree.query_ball_point(points, upper + r_max + 1e-12)
    out = upper.copy()
    flat_pts, flat_tris = [], []
    for i, cands in enumerate(candidate_lists):
        flat_pts.extend([i] * len(cands))
        flat_tris.extend(cands)
    if flat_pts:
        flat_pts = np.asarray(flat_pts)
        flat_tris = np.asarray(flat_tris)
        d = point_triangle_distance(points[flat_pts], tris[flat_tris])
        np.minimum.at(out, flat_pts, d)
    return out


def mesh_acc(recon, gt, n_samples: int = 10_000, seed: int = 0,
             scale: float = MESH_ACC_SCALE) -> float:
    """Mean distance from area-weighted recon samples to the gt surface."""
    from splice.mesher import TriMesh, sample_surface
    if recon.is_empty() or gt.is_empty():
        raise ValueError("mesh_acc needs non-empty meshes")
    rng = np.random.default_rng(seed)
    samples = sample_surface(recon, n_samples, rng)
    d = points_to_mesh_distance(samples, gt.vertices, gt.faces)
    return float(d.mean() * scale)


def volumetric_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean occupancy grids."""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


@dataclass
class MetricReport:
    """Per-shape metrics plus means and the producing config fingerprint."""

    per_shape: list[dict] = field(default_factory=list)
    config_fingerprint: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add(self, shape_id: str, **metrics: float) -> None:
        for v in metrics.values():
            if v < 0:
                raise ValueError("metrics must be non-negative")
        self.per_shape.append({"shape_id": shape_id, **metrics})

    def means(self) -> dict:
        if not self.per_shape:
            return {}
        keys = [k for k in self.per_shape[0] if k != "shape_id"]
        return {k: float(np.mean([row[k] for row in self.per_shape]))
                for k in keys}

    def to_json(self) -> str:
        return json.dumps({
            "means": self.means(),
            "per_shape": self.per_shape,
            "config_fingerprint": self.config_fingerprint,
            "extra": self.extra,
        }, indent=2, sort_keys=True)

    def to_csv(self) -> str:
        if not self.per_shape:
            return ""
        keys = list(self.per_shape[0].keys())
        lines = [",".join(keys)]
        for row in self.per_shape:
            lines.append(",".join(str(row[k]) for k in keys))
        mean_row = self.means()
        lines.append(",".join(["mean"] + [str(mean_row[k]) for k in keys
                                          if k != "shape_id"]))
        return "\n".join(lines)

    def to_markdown(self) -> str:
        means = self.means()
        keys = list(means.keys())
        head = "| metric | mean |\n|---|---|"
        rows = [f"| {k} | {means[k]:.6g} |" for k in keys]
        return "\n".join([head] + rows)
