"""Procedural desk-scale shape corpus: chairs, tables, lamps.

Category templates are fixed in code; every dimension is drawn from a
seeded generator so a (seed, category) pair is fully reproducible. All
shapes fit inside the normalized [-1, 1]^3 domain with margin.
"""

from __future__ import annotations

import numpy as np

from splice.data import primitives as prim
from splice.data.types import LabeledShape, PartMesh

CATEGORIES = ("chair", "table", "lamp")

# Keep everything inside [-1, 1]^3 with headroom for voxel sampling.
_MARGIN = 0.05


def synth_shape(seed: int, category: str) -> LabeledShape:
    """Deterministic labeled shape assembled from primitive parts."""
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}, expected {CATEGORIES}")
    rng = np.random.default_rng([int(seed), CATEGORIES.index(category)])
    builder = {"chair": _chair, "table": _table, "lamp": _lamp}[category]
    parts = builder(rng)
    shape = LabeledShape(id=f"{category}-{seed:06d}", parts=parts,
                         category=category, seed=int(seed))
    shape.validate()
    return shape


def _part(label: int, name: str, verts: np.ndarray, faces: np.ndarray) -> PartMesh:
    return PartMesh(vertices=verts, faces=faces, part_label=label, name=name)


def _chair(rng: np.random.Generator) -> list[PartMesh]:
    parts: list[PartMesh] = []
    label = 0

    seat_w = rng.uniform(0.75, 1.1)
    seat_d = rng.uniform(0.7, 1.0)
    seat_t = rng.uniform(0.08, 0.14)
    seat_h = rng.uniform(-0.15, 0.1)
    v, f = prim.box([0.0, 0.0, seat_h], [seat_w, seat_d, seat_t])
    parts.append(_part(label, "seat", v, f))
    label += 1

    # Back: either a solid panel or 2-4 vertical slats under a top rail.
    back_h = rng.uniform(0.55, 0.85)
    back_t = rng.uniform(0.06, 0.1)
    back_y = -seat_d / 2 + back_t / 2
    back_z0 = seat_h + seat_t / 2
    slatted = rng.random() < 0.6
    if slatted:
        n_slats = int(rng.integers(2, 5))
        slat_w = seat_w / (2.2 * n_slats)
        xs = np.linspace(-seat_w / 2 + slat_w, seat_w / 2 - slat_w, n_slats)
        slat_h = back_h * rng.uniform(0.7, 0.8)
        for x in xs:
            v, f = prim.box([x, back_y, back_z0 + slat_h / 2],
                            [slat_w, back_t, slat_h])
            parts.append(_part(label, "slat", v, f))
            label += 1
        rail_h = rng.uniform(0.08, 0.14)
        v, f = prim.box([0.0, back_y, back_z0 + slat_h + rail_h / 2],
                        [seat_w, back_t, rail_h])
        parts.append(_part(label, "rail", v, f))
        label += 1
    else:
        v, f = prim.box([0.0, back_y, back_z0 + back_h / 2],
                        [seat_w, back_t, back_h])
        parts.append(_part(label, "back", v, f))
        label += 1

    n_legs = int(rng.choice([2, 4], p=[0.15, 0.85]))
    leg_h = rng.uniform(0.45, 0.7)
    leg_r = rng.uniform(0.035, 0.06)
    round_legs = rng.random() < 0.5
    inset = leg_r * 2.2
    if n_legs == 4:
        xy = [(-seat_w / 2 + inset, -seat_d / 2 + inset),
              (seat_w / 2 - inset, -seat_d / 2 + inset),
              (-seat_w / 2 + inset, seat_d / 2 - inset),
              (seat_w / 2 - inset, seat_d / 2 - inset)]
    else:
        # Two panel legs spanning the depth.
        xy = [(-seat_w / 2 + inset, 0.0), (seat_w / 2 - inset, 0.0)]
    for x, y in xy:
        z = seat_h - seat_t / 2 - leg_h / 2
        if n_legs == 2:
            v, f = prim.box([x, y, z], [leg_r * 2, seat_d * 0.9, leg_h])
        elif round_legs:
            v, f = prim.cylinder([x, y, z], leg_r, leg_h, n=16)
        else:
            v, f = prim.box([x, y, z], [leg_r * 2, leg_r * 2, leg_h])
        parts.append(_part(label, "leg", v, f))
        label += 1

    if rng.random() < 0.3:
        arm_h = rng.uniform(0.18, 0.3)
        arm_t = rng.uniform(0.05, 0.08)
        for sx in (-1, 1):
            v, f = prim.box([sx * (seat_w / 2 - arm_t / 2), 0.0,
                             back_z0 + arm_h],
                            [arm_t, seat_d * 0.85, arm_t])
            parts.append(_part(label, "arm", v, f))
            label += 1

    return _fit_to_domain(parts)


def _table(rng: np.random.Generator) -> list[PartMesh]:
    parts: list[PartMesh] = []
    label = 0

    top_w = rng.uniform(1.1, 1.6)
    top_d = rng.uniform(0.8, 1.3)
    top_t = rng.uniform(0.07, 0.12)
    top_z = rng.uniform(0.1, 0.3)
    round_top = rng.random() < 0.3
    if round_top:
        v, f = prim.cylinder([0, 0, top_z], top_w / 2, top_t, n=24)
    else:
        v, f = prim.box([0, 0, top_z], [top_w, top_d, top_t])
    parts.append(_part(label, "top", v, f))
    label += 1

    leg_h = rng.uniform(0.6, 0.9)
    leg_r = rng.uniform(0.04, 0.07)
    inset = leg_r * 2.5
    if round_top:
        xy = [(0.0, 0.0)]
        leg_r *= 1.8
    else:
        xy = [(-top_w / 2 + inset, -top_d / 2 + inset),
              (top_w / 2 - inset, -top_d / 2 + inset),
              (-top_w / 2 + inset, top_d / 2 - inset),
              (top_w / 2 - inset, top_d / 2 - inset)]
    for x, y in xy:
        z = top_z - top_t / 2 - leg_h / 2
        v, f = prim.cylinder([x, y, z], leg_r, leg_h, n=16)
        parts.append(_part(label, "leg", v, f))
        label += 1

    if round_top:
        base_r = top_w * rng.uniform(0.2, 0.3)
        z = top_z - top_t / 2 - leg_h
        v, f = prim.cylinder([0, 0, z], base_r, 0.08, n=24)
        parts.append(_part(label, "base", v, f))
        label += 1
    elif rng.random() < 0.4:
        # Stretchers between leg pairs.
        bar_t = leg_r * 1.5
        z = top_z - top_t / 2 - leg_h * 0.75
        for y in (-top_d / 2 + inset, top_d / 2 - inset):
            v, f = prim.box([0, y, z], [top_w - 2 * inset, bar_t, bar_t])
            parts.append(_part(label, "stretcher", v, f))
            label += 1

    return _fit_to_domain(parts)


def _lamp(rng: np.random.Generator) -> list[PartMesh]:
    parts: list[PartMesh] = []
    base_r = rng.uniform(0.25, 0.4)
    base_t = rng.uniform(0.06, 0.12)
    pole_h = rng.uniform(0.9, 1.3)
    pole_r = rng.uniform(0.04, 0.07)
    shade_h = rng.uniform(0.3, 0.5)
    shade_r0 = rng.uniform(0.3, 0.45)
    shade_r1 = shade_r0 * rng.uniform(0.45, 0.75)

    z = -0.8
    v, f = prim.cylinder([0, 0, z + base_t / 2], base_r, base_t, n=24)
    parts.append(_part(0, "base", v, f))
    z += base_t
    v, f = prim.cylinder([0, 0, z + pole_h / 2], pole_r, pole_h, n=12)
    parts.append(_part(1, "pole", v, f))
    z += pole_h
    v, f = prim.tapered_box([0, 0, z + shade_h / 2],
                            [shade_r0 * 2, shade_r0 * 2],
                            [shade_r1 * 2, shade_r1 * 2], shade_h)
    parts.append(_part(2, "shade", v, f))
    return _fit_to_domain(parts)


def _fit_to_domain(parts: list[PartMesh]) -> list[PartMesh]:
    """Center the assembly and scale it uniformly into [-1+m, 1-m]^3."""
    lo = np.min([p.bbox()[0] for p in parts], axis=0)
    hi = np.max([p.bbox()[1] for p in parts], axis=0)
    center = (lo + hi) / 2.0
    half = float(np.max(hi - lo)) / 2.0
    scale = (1.0 - _MARGIN) / max(half, 1e-9)
    scale = min(scale, 1.0)  # only shrink, never inflate small shapes
    out = []
    for p in parts:
        out.append(PartMesh((p.vertices - center) * scale, p.faces.copy(),
                            p.part_label, p.name))
    return out
