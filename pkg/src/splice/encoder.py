"""Convolutional part encoder: voxel grid -> variational code + pose proxy.

The encoder maps a centered binary part grid to (mu, log_sigma) of the
latent shape code plus a 10-value pose head (translation offset, raw
scales, quaternion). Raw scales pass through softplus and a global factor;
the translation offset is added to the stored voxel centroid so the proxy
lives in the original shape frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from splice.config import Dims, SIGMA_MIN
from splice.data.types import PartVoxelGrid
from splice.geometry import (DegenerateScale, GaussianProxy, make_proxy,
                             matrix_to_quat, quat_normalize)


class EmptyPartError(ValueError):
    """Encoder input grid has no occupied cell."""


class DegeneratePart(ValueError):
    """PCA fit impossible: covariance has rank zero."""


@dataclass
class LatentCode:
    """Variational latent code of one part."""

    mu: np.ndarray
    log_sigma: np.ndarray
    sample: np.ndarray

    def validate(self) -> None:
        for arr in (self.mu, self.log_sigma, self.sample):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite latent code")


def quat_to_matrix_torch(q: torch.Tensor) -> torch.Tensor:
    """Batched (..., 4) unit quaternion -> (..., 3, 3) rotation matrix."""
    w, x, y, z = q.unbind(-1)
    row0 = torch.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z),
                        2 * (x * z + w * y)], dim=-1)
    row1 = torch.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z),
                        2 * (y * z - w * x)], dim=-1)
    row2 = torch.stack([2 * (x * z - w * y), 2 * (y * z + w * x),
                        1 - 2 * (x * x + y * y)], dim=-1)
    return torch.stack([row0, row1, row2], dim=-2)


def normalize_quat_torch(q: torch.Tensor) -> torch.Tensor:
    """Unit-normalize with an identity fallback for near-zero inputs."""
    norm = q.norm(dim=-1, keepdim=True)
    identity = torch.zeros_like(q)
    identity[..., 0] = 1.0
    safe = torch.where(norm > 1e-8, q / norm.clamp_min(1e-8), identity)
    return safe


class PartEncoder(nn.Module):
    """3x3x3 conv stack with pooling; channels 1 -> 8 doubling to 512."""

    def __init__(self, res: int = 64, dims: Dims = Dims()):
        super().__init__()
        if res & (res - 1) or res < 2:
            raise ValueError("encoder resolution must be a power of two >= 2")
        self.res = res
        self.dims = dims
        layers: list[nn.Module] = [
            nn.Conv3d(1, dims.encoder_base_channels, 3, padding=1),
            nn.ReLU(inplace=True),
        ]
        c = dims.encoder_base_channels
        for _ in range(int(math.log2(res))):
            c2 = min(c * 2, dims.encoder_max_channels)
            layers += [nn.MaxPool3d(2),
                       nn.Conv3d(c, c2, 3, padding=1),
                       nn.ReLU(inplace=True)]
            c = c2
        if c < dims.encoder_max_channels:
            layers += [nn.Conv3d(c, dims.encoder_max_channels, 1),
                       nn.ReLU(inplace=True)]
            c = dims.encoder_max_channels
        self.stack = nn.Sequential(*layers)
        self.pose_head = nn.Conv3d(c, 10, 1)
        self.shape_head = nn.Conv3d(c, 2 * dims.d_z, 1)
        # Start the pose head at the identity operating point: zero offset,
        # unit-quaternion bias, zero raw scale.
        nn.init.zeros_(self.pose_head.weight)
        with torch.no_grad():
            self.pose_head.bias.copy_(torch.tensor(
                [0, 0, 0, 0, 0, 0, 1, 0, 0, 0], dtype=torch.float32))

    def forward(self, grids: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """grids: (B, 1, R, R, R) float -> (pose_raw (B,10), shape_raw (B,2*Dz))."""
        feats = self.stack(grids.to(memory_format=torch.channels_last_3d))
        pose_raw = self.pose_head(feats).flatten(1)
        shape_raw = self.shape_head(feats).flatten(1)
        return pose_raw, shape_raw

    def heads_to_outputs(self, pose_raw: torch.Tensor, shape_raw: torch.Tensor,
                         centroids: torch.Tensor, *, stochastic: bool,
                         generator: torch.Generator | None = None):
        """Split raw heads into (mu, log_sigma, z, center, scale, quat, R)."""
        d_z = self.dims.d_z
        mu, log_sigma = shape_raw[:, :d_z], shape_raw[:, d_z:]
        if stochastic:
            eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype,
                              device=mu.device)
            z = mu + torch.exp(log_sigma) * eps
        else:
            z = mu
        t = pose_raw[:, 0:3]
        s_raw = pose_raw[:, 3:6]
        q_raw = pose_raw[:, 6:10]
        center = centroids + t
        scale = (self.dims.scale_lambda * F.softplus(s_raw)).clamp_min(SIGMA_MIN)
        quat = normalize_quat_torch(q_raw)
        rot = quat_to_matrix_torch(quat)
        return mu, log_sigma, z, center, scale, quat, rot


def encode_part(grid: PartVoxelGrid, encoder: PartEncoder,
                stochastic: bool = False,
                generator: torch.Generator | None = None
                ) -> tuple[LatentCode, GaussianProxy]:
    """Encode one centered part grid into a latent code and pose proxy."""
    if not grid.grid.any():
        raise EmptyPartError("cannot encode an empty part grid")
    if grid.res != encoder.res:
        raise ValueError(f"grid res {grid.res} != encoder res {encoder.res}")
    with torch.no_grad():
        g = torch.from_numpy(grid.grid.astype(np.float32))[None, None]
        centroid = torch.from_numpy(grid.centroid.astype(np.float32))[None]
        pose_raw, shape_raw = encoder(g)
        mu, log_sigma, z, center, scale, quat, _ = encoder.heads_to_outputs(
            pose_raw, shape_raw, centroid, stochastic=stochastic,
            generator=generator)
    code = LatentCode(mu=mu[0].numpy().astype(np.float64),
                      log_sigma=log_sigma[0].numpy().astype(np.float64),
                      sample=z[0].numpy().astype(np.float64))
    proxy = make_proxy(center[0].numpy(), scale[0].numpy(), quat[0].numpy())
    code.validate()
    proxy.validate()
    return code, proxy


def gaussian_nll(proxy: GaussianProxy, points: np.ndarray) -> float:
    """Mean negative log-likelihood of points under the proxy's Gaussian."""
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) < 1:
        raise ValueError("gaussian_nll needs at least one point")
    if np.any(proxy.scale < SIGMA_MIN - 1e-12):
        raise DegenerateScale(f"proxy scale below {SIGMA_MIN}")
    return float(gaussian_nll_torch(
        torch.from_numpy(proxy.center), torch.from_numpy(proxy.scale),
        torch.from_numpy(proxy.rotation), torch.from_numpy(points)))


def gaussian_nll_torch(center: torch.Tensor, scale: torch.Tensor,
                       rotation: torch.Tensor, points: torch.Tensor
                       ) -> torch.Tensor:
    """Differentiable NLL; supports batched proxies.

    center (..., 3), scale (..., 3), rotation (..., 3, 3),
    points (..., N, 3) -> scalar mean per proxy (...,).
    """
    local = torch.einsum("...ji,...nj->...ni", rotation,
                         points - center.unsqueeze(-2))
    maha = ((local / scale.unsqueeze(-2)) ** 2).sum(-1)
    log_det = 2.0 * torch.log(scale).sum(-1, keepdim=True)
    d = points.shape[-1]
    nll = 0.5 * (d * math.log(2 * math.pi) + log_det + maha)
    return nll.mean(-1)


def kl_unit_gaussian(code: LatentCode) -> float:
    """KL(q || N(0, I)) summed over latent dimensions."""
    mu = np.asarray(code.mu, dtype=np.float64)
    log_sigma = np.asarray(code.log_sigma, dtype=np.float64)
    return float(kl_unit_gaussian_torch(torch.from_numpy(mu),
                                        torch.from_numpy(log_sigma)))


def kl_unit_gaussian_torch(mu: torch.Tensor, log_sigma: torch.Tensor
                           ) -> torch.Tensor:
    var = torch.exp(2.0 * log_sigma)
    return 0.5 * (mu ** 2 + var - 2.0 * log_sigma - 1.0).sum(-1)


def fit_gaussian_pca(grid: PartVoxelGrid) -> GaussianProxy:
    """Baseline proxy from PCA over occupied cell centers.

    Rotation columns are covariance eigenvectors ordered by decreasing
    eigenvalue, each sign-fixed so its largest-magnitude component is
    positive; the third column is replaced by the cross product of the
    first two to guarantee a proper rotation. Minor axes of rotationally
    symmetric parts are arbitrary up to that convention.
    """
    occupied = np.argwhere(grid.grid)
    if len(occupied) < 2:
        raise DegeneratePart("PCA needs at least two occupied cells")
    pts = grid.occupied_centers("original")
    center = pts.mean(axis=0)
    centered = pts - center
    cov = centered.T @ centered / len(pts)
    if not np.any(cov > 1e-18):
        raise DegeneratePart("occupied cells have zero covariance")
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    for k in range(3):
        col = eigvecs[:, k]
        if col[np.argmax(np.abs(col))] < 0:
            eigvecs[:, k] = -col
    eigvecs[:, 2] = np.cross(eigvecs[:, 0], eigvecs[:, 1])
    scale = np.sqrt(np.maximum(eigvals, 0.0))
    return make_proxy(center, scale, matrix_to_quat(eigvecs))
