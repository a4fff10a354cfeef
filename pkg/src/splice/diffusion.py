"""Denoising diffusion over fixed-width sets of part tokens.

A part token concatenates [validity flag | center | scale | rotation
matrix (row-major) | shape code], all rescaled so component magnitudes
balance: flag in {-0.01, +0.01} (sign = validity, resolved only at the
very end of sampling), positions and radii x5, rotation unchanged, shape
code x0.1. The noise-prediction network is a set transformer without
positional encodings, so it is exactly permutation-equivariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from splice.config import DiffusionSettings, SIGMA_MIN
from splice.edits import PartRecord
from splice.geometry import make_proxy, matrix_to_quat, nearest_rotation

FLAG_VALID = 0.01
FLAG_INVALID = -0.01
POS_SCALE = 5.0
CODE_SCALE = 0.1

FLAG_IDX = 0
CENTER_SLICE = slice(1, 4)
SCALE_SLICE = slice(4, 7)
ROT_SLICE = slice(7, 16)
POSE_SLICE = slice(1, 16)


def token_dim(d_z: int) -> int:
    return 1 + 15 + d_z


def rescale_token(record: PartRecord | None, d_z: int) -> np.ndarray:
    """Record -> rescaled token; None means an empty (invalid) slot."""
    tok = np.zeros(token_dim(d_z))
    if record is None or not record.valid:
        tok[FLAG_IDX] = FLAG_INVALID
        if record is not None:
            _fill_pose_code(tok, record, d_z)
        return tok
    tok[FLAG_IDX] = FLAG_VALID
    _fill_pose_code(tok, record, d_z)
    return tok


def _fill_pose_code(tok: np.ndarray, record: PartRecord, d_z: int) -> None:
    tok[CENTER_SLICE] = record.proxy.center * POS_SCALE
    tok[SCALE_SLICE] = record.proxy.scale * POS_SCALE
    tok[ROT_SLICE] = record.proxy.rotation.reshape(9)
    z = np.asarray(record.z, dtype=np.float64)
    if len(z) != d_z:
        raise ValueError(f"record code dim {len(z)} != {d_z}")
    tok[16:] = z * CODE_SCALE


def unscale_token(tok: np.ndarray, record_id: str) -> PartRecord:
    """Token -> record. The rotation block is projected back to the closest
    proper rotation and scales are floored, so any finite token yields a
    valid proxy."""
    tok = np.asarray(tok, dtype=np.float64)
    valid = bool(tok[FLAG_IDX] > 0)
    center = tok[CENTER_SLICE] / POS_SCALE
    scale = np.maximum(tok[SCALE_SLICE] / POS_SCALE, SIGMA_MIN)
    rot = nearest_rotation(tok[ROT_SLICE].reshape(3, 3))
    z = (tok[16:] / CODE_SCALE).astype(np.float32)
    proxy = make_proxy(center, scale, matrix_to_quat(rot))
    return PartRecord(id=record_id, z=z, proxy=proxy, valid=valid)


def pack_records(records: list[PartRecord], n_max: int, d_z: int) -> np.ndarray:
    """Fixed-width token set; unused slots are invalid tokens."""
    if len(records) > n_max:
        raise ValueError(f"more than {n_max} parts")
    x0 = np.zeros((n_max, token_dim(d_z)))
    for i in range(n_max):
        x0[i] = rescale_token(records[i] if i < len(records) else None, d_z)
    return x0


def unpack_tokens(tokens: np.ndarray, id_prefix: str = "g") -> list[PartRecord]:
    """Records for every token whose flag resolves to valid."""
    out = []
    for i, tok in enumerate(tokens):
        rec = unscale_token(tok, f"{id_prefix}{i:04d}")
        if rec.valid:
            out.append(rec)
    return out


class CosineSchedule:
    """Cosine cumulative-alpha schedule with clipped per-step betas.

    alpha_bar[0] == 1 (t = 0 is the data itself); alpha_bar decreases
    monotonically to ~0 at t = T.
    """

    def __init__(self, timesteps: int = 1000, max_beta: float = 0.999,
                 s: float = 0.008):
        self.timesteps = timesteps
        f = np.cos((np.arange(timesteps + 1) / timesteps + s)
                   / (1 + s) * math.pi / 2.0) ** 2
        raw_bar = f / f[0]
        betas = 1.0 - raw_bar[1:] / raw_bar[:-1]
        self.betas = np.clip(betas, 0.0, max_beta)       # beta[t-1] for step t
        self.alphas = 1.0 - self.betas
        self.alpha_bar = np.concatenate([[1.0], np.cumprod(self.alphas)])

    def forward_noise(self, x0: np.ndarray, t: int,
                      eps: np.ndarray) -> np.ndarray:
        """q(x_t | x_0) sample with the provided standard normal noise."""
        if not 0 <= t <= self.timesteps:
            raise ValueError(f"step {t} outside [0, {self.timesteps}]")
        ab = self.alpha_bar[t]
        return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps

    def recover_x0(self, x_t: np.ndarray, t: int,
                   eps: np.ndarray) -> np.ndarray:
        """Algebraic inverse of forward_noise given the exact noise."""
        ab = self.alpha_bar[t]
        return (x_t - math.sqrt(1.0 - ab) * eps) / math.sqrt(ab)

    def posterior_mean(self, x_t: np.ndarray, x0: np.ndarray,
                       t: int) -> np.ndarray:
        """Closed-form mean of q(x_{t-1} | x_t, x_0)."""
        ab_t = self.alpha_bar[t]
        ab_prev = self.alpha_bar[t - 1]
        beta = self.betas[t - 1]
        coef0 = math.sqrt(ab_prev) * beta / (1.0 - ab_t)
        coef_t = math.sqrt(self.alphas[t - 1]) * (1.0 - ab_prev) / (1.0 - ab_t)
        return coef0 * x0 + coef_t * x_t

    def denoise_step(self, x_t: np.ndarray, t: int, eps_hat: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
        """Ancestral step with fixed posterior variance.

        The mean is computed from the epsilon prediction; variance is the
        closed-form posterior variance (zero at t = 1, so the final step
        is deterministic).
        """
        if t < 1:
            raise ValueError("denoise_step needs t >= 1")
        ab_t = self.alpha_bar[t]
        ab_prev = self.alpha_bar[t - 1]
        beta = self.betas[t - 1]
        alpha = self.alphas[t - 1]
        mean = (x_t - beta / math.sqrt(1.0 - ab_t) * eps_hat) / math.sqrt(alpha)
        var = beta * (1.0 - ab_prev) / (1.0 - ab_t)
        if var > 0:
            mean = mean + math.sqrt(var) * rng.standard_normal(x_t.shape)
        return mean


class TransformerBlock(nn.Module):
    def __init__(self, width: int, heads: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(width)
        self.ff = nn.Sequential(nn.Linear(width, 4 * width), nn.GELU(),
                                nn.Linear(4 * width, width))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        attn_out, _ = self.attn(h, h, h, need_weights=False)
        x = x + attn_out
        return x + self.ff(self.norm2(x))


class TokenDiffusion(nn.Module):
    """Set transformer predicting the injected noise for each token."""

    def __init__(self, d_z: int = 256, settings: DiffusionSettings = DiffusionSettings()):
        super().__init__()
        self.d_z = d_z
        self.settings = settings
        dim = token_dim(d_z)
        w = settings.width
        self.in_proj = nn.Sequential(nn.Linear(dim, w), nn.GELU(),
                                     nn.Linear(w, w))
        self.time_mlp = nn.Sequential(nn.Linear(128, w), nn.GELU(),
                                      nn.Linear(w, w))
        self.blocks = nn.ModuleList([TransformerBlock(w, settings.heads)
                                     for _ in range(settings.layers)])
        self.out_norm = nn.LayerNorm(w)
        self.out = nn.Linear(w, dim)

    @staticmethod
    def time_features(t: torch.Tensor, dim: int = 128) -> torch.Tensor:
        half = dim // 2
        freqs = torch.exp(-math.log(10000.0)
                          * torch.arange(half, dtype=torch.float32) / half)
        args = t.float()[:, None] * freqs[None]
        return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)

    def forward(self, tokens: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        """tokens (B, S, dim), t (B,) integer steps -> predicted noise."""
        x = self.in_proj(tokens)
        x = x + self.time_mlp(self.time_features(t))[:, None, :]
        for block in self.blocks:
            x = block(x)
        return self.out(self.out_norm(x))

    def predict_eps(self, tokens: np.ndarray, t: int) -> np.ndarray:
        """Single-set numpy convenience wrapper."""
        with torch.no_grad():
            x = torch.from_numpy(np.asarray(tokens, dtype=np.float32))[None]
            ts = torch.tensor([t], dtype=torch.long)
            return self(x, ts)[0].double().numpy()


def generate(net: TokenDiffusion, schedule: CosineSchedule,
             rng: np.random.Generator, n_parts: int | None = None,
             n_max: int | None = None) -> list[PartRecord]:
    """Unconditional sampling; optional part-count hint via flag guidance."""
    n_max = n_max or net.settings.n_max
    dim = token_dim(net.d_z)
    x = rng.standard_normal((n_max, dim))
    flags = None
    if n_parts is not None:
        n_parts = min(n_parts, n_max)
        flags = np.full(n_max, FLAG_INVALID)
        flags[:n_parts] = FLAG_VALID
    for t in range(schedule.timesteps, 0, -1):
        eps_hat = net.predict_eps(x, t)
        x = schedule.denoise_step(x, t, eps_hat, rng)
        if flags is not None:
            noised = schedule.forward_noise(flags, t - 1,
                                            rng.standard_normal(n_max))
            x[:, FLAG_IDX] = noised
    return unpack_tokens(x)


def complete(fixed: list[PartRecord], net: TokenDiffusion,
             schedule: CosineSchedule, rng: np.random.Generator,
             n_max: int | None = None) -> list[PartRecord]:
    """Synthesize parts for the free slots while re-imposing the fixed
    tokens (noised to the current level) after every step; the fixed
    records are returned verbatim."""
    n_max = n_max or net.settings.n_max
    if len(fixed) >= n_max:
        raise ValueError(f"completion needs fewer than {n_max} fixed parts")
    dim = token_dim(net.d_z)
    k = len(fixed)
    fixed_x0 = np.stack([rescale_token(r, net.d_z) for r in fixed]) \
        if k else np.zeros((0, dim))
    x = rng.standard_normal((n_max, dim))
    if k:
        x[:k] = schedule.forward_noise(
            fixed_x0, schedule.timesteps, rng.standard_normal((k, dim)))
    for t in range(schedule.timesteps, 0, -1):
        eps_hat = net.predict_eps(x, t)
        x = schedule.denoise_step(x, t, eps_hat, rng)
        if k:
            x[:k] = schedule.forward_noise(
                fixed_x0, t - 1, rng.standard_normal((k, dim)))
    synthesized = unpack_tokens(x[k:], id_prefix="c")
    return [r.copy() for r in fixed] + synthesized


def refine(records: list[PartRecord], net: TokenDiffusion,
           schedule: CosineSchedule, rng: np.random.Generator,
           steps: int = 100, fix_pose: bool = False,
           n_max: int | None = None) -> list[PartRecord]:
    """Noise the record tokens `steps` levels and denoise them back.

    With fix_pose the flag and 15 pose values of every slot are re-imposed
    (noised consistently) at each step and restored exactly at the end, so
    only the shape codes move: the repair protocol for extreme edits.
    Padding slots are always held invalid so refinement never spawns parts.
    """
    if steps == 0:
        return [r.copy() for r in records]
    if steps < 0 or steps > schedule.timesteps:
        raise ValueError("steps outside schedule range")
    n_max = n_max or net.settings.n_max
    dim = token_dim(net.d_z)
    x0 = pack_records(records, n_max, net.d_z)
    k = len(records)
    x = schedule.forward_noise(x0, steps, rng.standard_normal(x0.shape))

    def reimpose(x: np.ndarray, t: int) -> None:
        # Padding slots stay pinned to their invalid tokens.
        if k < n_max:
            noise = rng.standard_normal((n_max - k, dim))
            x[k:] = schedule.forward_noise(x0[k:], t, noise)
        if fix_pose:
            noise = rng.standard_normal((k, 16))
            ref = np.concatenate([x0[:k, :1], x0[:k, POSE_SLICE]], axis=1)
            noised = schedule.forward_noise(ref, t, noise)
            x[:k, FLAG_IDX] = noised[:, 0]
            x[:k, POSE_SLICE] = noised[:, 1:]

    reimpose(x, steps)
    for t in range(steps, 0, -1):
        eps_hat = net.predict_eps(x, t)
        x = schedule.denoise_step(x, t, eps_hat, rng)
        reimpose(x, t - 1)
    refined = []
    for i, rec in enumerate(records):
        new = unscale_token(x[i], rec.id)
        new.valid = rec.valid
        refined.append(new)
    return refined
