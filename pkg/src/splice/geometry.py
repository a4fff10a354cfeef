"""Quaternion / rotation primitives and the oriented-ellipsoid pose handle.

Quaternions are stored (w, x, y, z) and canonicalized to w >= 0 so a pose
serializes to a unique value (q and -q describe the same rotation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from splice.config import SIGMA_MIN


class DegenerateScale(ValueError):
    """An ellipsoid scale fell below the supported floor."""


def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Unit-normalize and canonicalize a quaternion (w >= 0).

    A near-zero quaternion falls back to the identity rotation, which keeps
    the pose head well-defined for arbitrary (e.g. zeroed) weights.
    """
    q = np.asarray(q, dtype=np.float64)
    norm = float(np.linalg.norm(q))
    if norm < 1e-8:
        return np.array([1.0, 0.0, 0.0, 0.0])
    q = q / norm
    if q[0] < 0 or (q[0] == 0 and _first_nonzero(q) < 0):
        q = -q
    return q


def _first_nonzero(q: np.ndarray) -> float:
    for v in q:
        if v != 0:
            return float(v)
    return 0.0


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = np.asarray(q, dtype=np.float64)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b; applying the result rotates by b then a."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=np.float64)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = axis / n
    half = 0.5 * angle
    return quat_normalize(np.concatenate([[np.cos(half)], np.sin(half) * axis]))


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Quaternion of a proper rotation matrix (Shepperd's method)."""
    m = np.asarray(m, dtype=np.float64)
    t = np.trace(m)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return quat_normalize(q)


def nearest_rotation(m: np.ndarray) -> np.ndarray:
    """Project a 3x3 matrix to the closest proper rotation (Frobenius)."""
    u, _, vt = np.linalg.svd(np.asarray(m, dtype=np.float64))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u = u.copy()
        u[:, -1] = -u[:, -1]
        r = u @ vt
    return r


@dataclass
class GaussianProxy:
    """Oriented ellipsoid summarizing a part's pose: the user's edit handle.

    ``scale`` holds per-axis standard deviations (>= SIGMA_MIN) and
    ``quaternion`` a unit (w, x, y, z) rotation with w >= 0.
    """

    center: np.ndarray
    scale: np.ndarray
    quaternion: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.scale = np.asarray(self.scale, dtype=np.float64).reshape(3)
        self.quaternion = np.asarray(self.quaternion, dtype=np.float64).reshape(4)

    def validate(self) -> None:
        if not np.all(np.isfinite(self.center)):
            raise ValueError("non-finite proxy center")
        if np.any(self.scale < SIGMA_MIN - 1e-12):
            raise DegenerateScale(f"scale below {SIGMA_MIN}: {self.scale}")
        if abs(np.linalg.norm(self.quaternion) - 1.0) > 1e-6:
            raise ValueError("quaternion not unit-norm")

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_matrix(self.quaternion)

    def covariance(self) -> np.ndarray:
        r = self.rotation
        return r @ np.diag(self.scale ** 2) @ r.T

    def copy(self) -> "GaussianProxy":
        return GaussianProxy(self.center.copy(), self.scale.copy(),
                             self.quaternion.copy())

    def to_dict(self) -> dict:
        return {
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "quaternion": self.quaternion.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GaussianProxy":
        return cls(np.array(d["center"]), np.array(d["scale"]),
                   np.array(d["quaternion"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def standard(cls) -> "GaussianProxy":
        return cls(np.zeros(3), np.ones(3), np.array([1.0, 0, 0, 0]))


def make_proxy(center, scale, quaternion) -> GaussianProxy:
    """Build a proxy with normalization and the scale floor applied."""
    scale = np.maximum(np.asarray(scale, dtype=np.float64), SIGMA_MIN)
    return GaussianProxy(np.asarray(center, dtype=np.float64), scale,
                         quat_normalize(quaternion))
