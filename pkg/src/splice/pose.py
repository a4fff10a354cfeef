"""Pose encoding and the training-time affine edit simulation.

A proxy's pose is fed to the network as six ellipsoid endpoints (center
+- radius * scale_k * axis_k), concatenated to an 18-vector, encoded by a
sinusoidal network and fused with the latent shape code by a small MLP.
Everything here is strictly per-part: no cross-part terms anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from splice.config import Dims
from splice.geometry import (GaussianProxy, quat_from_axis_angle,
                             quat_multiply, quat_normalize, quat_to_matrix)


@dataclass
class EllipsoidEndpoints:
    """Six pose endpoints ordered (+x, -x, +y, -y, +z, -z) of the proxy axes."""

    points: np.ndarray  # (6, 3)

    @property
    def concat(self) -> np.ndarray:
        return self.points.reshape(18)


def ellipsoid_endpoints(proxy: GaussianProxy,
                        radius: float = Dims().endpoint_radius
                        ) -> EllipsoidEndpoints:
    """Endpoints at center +- radius * scale_k along each principal axis."""
    r = proxy.rotation
    offsets = radius * proxy.scale[None, :] * r.T  # row k = radius*s_k*R[:,k]
    pts = np.empty((6, 3))
    pts[0::2] = proxy.center + offsets
    pts[1::2] = proxy.center - offsets
    return EllipsoidEndpoints(points=pts)


def endpoints_torch(center: torch.Tensor, scale: torch.Tensor,
                    rotation: torch.Tensor, radius: float) -> torch.Tensor:
    """Batched endpoints: (..., 3), (..., 3), (..., 3, 3) -> (..., 18)."""
    offsets = radius * scale.unsqueeze(-2) * rotation.transpose(-1, -2)
    plus = center.unsqueeze(-2) + offsets   # (..., 3ax, 3)
    minus = center.unsqueeze(-2) - offsets
    inter = torch.stack([plus, minus], dim=-2)  # (..., 3ax, 2, 3)
    return inter.reshape(*center.shape[:-1], 18)


class SineLayer(nn.Module):
    def __init__(self, in_features: int, out_features: int,
                 omega_0: float = 30.0, is_first: bool = False):
        super().__init__()
        self.omega_0 = omega_0
        self.linear = nn.Linear(in_features, out_features)
        with torch.no_grad():
            if is_first:
                bound = 1.0 / in_features
            else:
                bound = np.sqrt(6.0 / in_features) / omega_0
            self.linear.weight.uniform_(-bound, bound)
            self.linear.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return torch.sin(self.omega_0 * self.linear(x))


class Siren(nn.Module):
    """Sinusoidal encoder: input -> hidden sine layers -> linear output."""

    def __init__(self, in_features: int, out_features: int,
                 hidden: int = 128, hidden_layers: int = 3,
                 omega_0: float = 30.0):
        super().__init__()
        layers: list[nn.Module] = [SineLayer(in_features, hidden, omega_0,
                                             is_first=True)]
        for _ in range(hidden_layers - 1):
            layers.append(SineLayer(hidden, hidden, omega_0))
        self.layers = nn.Sequential(*layers)
        self.out = nn.Linear(hidden, out_features)
        with torch.no_grad():
            bound = np.sqrt(6.0 / hidden) / omega_0
            self.out.weight.uniform_(-bound, bound)
            self.out.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.out(self.layers(x))


class PartMixer(nn.Module):
    """4-layer MLP with residual skips and layer norm over [z ; pose]."""

    def __init__(self, dims: Dims = Dims(), pose_in: int | None = None):
        super().__init__()
        d_in = dims.d_z + dims.d_pose if pose_in is None else dims.d_z + pose_in
        h = dims.mix_hidden
        self.fc1 = nn.Linear(d_in, h)
        self.ln1 = nn.LayerNorm(h)
        self.fc2 = nn.Linear(h, h)
        self.ln2 = nn.LayerNorm(h)
        self.fc3 = nn.Linear(h, h)
        self.ln3 = nn.LayerNorm(h)
        self.fc4 = nn.Linear(h, dims.d_embed)

    def forward(self, z: torch.Tensor, pose: torch.Tensor) -> torch.Tensor:
        x = torch.cat([z, pose], dim=-1)
        x = self.ln1(torch.relu(self.fc1(x)))
        x = self.ln2(x + torch.relu(self.fc2(x)))
        x = self.ln3(x + torch.relu(self.fc3(x)))
        return self.fc4(x)


class PoseEncoder(nn.Module):
    """Sinusoidal pose feature from endpoints (or raw pose parameters)."""

    def __init__(self, dims: Dims = Dims(), mode: str = "endpoints"):
        super().__init__()
        if mode not in ("endpoints", "raw"):
            raise ValueError(mode)
        self.mode = mode
        self.radius = dims.endpoint_radius
        in_features = 18 if mode == "endpoints" else 10
        self.siren = Siren(in_features, dims.d_pose, dims.siren_hidden,
                           dims.siren_layers, dims.omega_0)

    def forward(self, center: torch.Tensor, scale: torch.Tensor,
                rotation: torch.Tensor, quat: torch.Tensor) -> torch.Tensor:
        if self.mode == "endpoints":
            feats = endpoints_torch(center, scale, rotation, self.radius)
        else:
            feats = torch.cat([center, scale, quat], dim=-1)
        return self.siren(feats)


@dataclass
class AffineEdit:
    """Scale -> rotate -> translate about the global origin."""

    rotation: np.ndarray      # unit quaternion (w, x, y, z)
    translation: np.ndarray   # (3,)
    scale: np.ndarray         # (3,) positive

    def __post_init__(self):
        self.rotation = quat_normalize(np.asarray(self.rotation, float))
        self.translation = np.asarray(self.translation, float).reshape(3)
        self.scale = np.asarray(self.scale, float).reshape(3)
        if np.any(self.scale <= 0):
            raise ValueError("affine scale must be positive")

    @classmethod
    def identity(cls) -> "AffineEdit":
        return cls(np.array([1.0, 0, 0, 0]), np.zeros(3), np.ones(3))

    def to_dict(self) -> dict:
        return {"rotation": self.rotation.tolist(),
                "translation": self.translation.tolist(),
                "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "AffineEdit":
        return cls(np.array(d["rotation"]), np.array(d["translation"]),
                   np.array(d["scale"]))


def sample_random_affine(rng: np.random.Generator,
                         rotation_prob: float = 0.10) -> AffineEdit:
    """Training-time edit simulation.

    Translation uniform in [-0.5, 0.5]^3 and per-axis scale exp(U(-0.5,
    0.5)) are always applied; a rotation of uniform angle in (-pi/4, pi/4)
    about a random axis is applied with the given probability.
    """
    translation = rng.uniform(-0.5, 0.5, size=3)
    scale = np.exp(rng.uniform(-0.5, 0.5, size=3))
    # Draw rotation variates unconditionally to keep the stream aligned.
    axis = rng.normal(size=3)
    angle = rng.uniform(-np.pi / 4, np.pi / 4)
    apply_rot = rng.random() < rotation_prob
    rotation = quat_from_axis_angle(axis, angle) if apply_rot \
        else np.array([1.0, 0, 0, 0])
    return AffineEdit(rotation=rotation, translation=translation, scale=scale)


def apply_affine(edit: AffineEdit, proxy: GaussianProxy,
                 inverse: bool = False) -> GaussianProxy:
    """Transform a proxy; scale composes per-axis in the proxy's own frame.

    A global anisotropic scale of a rotated ellipsoid is generally not an
    ellipsoid of the same oriented family, so edits deliberately apply the
    scale to the proxy's local radii instead; the center still follows the
    full point transform.
    """
    r_e = quat_to_matrix(edit.rotation)
    if not inverse:
        center = r_e @ (edit.scale * proxy.center) + edit.translation
        quat = quat_normalize(quat_multiply(edit.rotation, proxy.quaternion))
        scale = edit.scale * proxy.scale
    else:
        center = (r_e.T @ (proxy.center - edit.translation)) / edit.scale
        quat = quat_normalize(quat_multiply(
            np.array([edit.rotation[0], *(-edit.rotation[1:])]),
            proxy.quaternion))
        scale = proxy.scale / edit.scale
    return GaussianProxy(center=center, scale=scale, quaternion=quat)


def apply_affine_points(edit: AffineEdit, points: np.ndarray,
                        inverse: bool = False) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    r_e = quat_to_matrix(edit.rotation)
    if not inverse:
        return (edit.scale * points) @ r_e.T + edit.translation
    return ((points - edit.translation) @ r_e) / edit.scale
