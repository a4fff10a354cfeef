"""Cross-attention occupancy decoder over part embeddings.

Each query point is sinusoidally encoded and attends to the part embedding
set through a stack of cross-attention blocks (no self-attention between
points, so points stay independent and batching is exact). The
head-averaged attention of the final block is exposed for supervision and
part-coloring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from splice.config import Dims
from splice.pose import Siren


class EmptyPartSet(ValueError):
    """Decoding requires at least one part embedding."""


@dataclass
class AttentionTrace:
    """Final-layer, head-averaged attention per query point over parts."""

    weights: np.ndarray  # (P, N) rows sum to 1

    def validate(self, tol: float = 1e-5) -> None:
        if np.any(self.weights < -tol):
            raise ValueError("negative attention weight")
        if np.any(np.abs(self.weights.sum(axis=1) - 1.0) > tol):
            raise ValueError("attention row does not sum to 1")

    def dominant_part(self) -> np.ndarray:
        return self.weights.argmax(axis=1)


class CrossAttentionBlock(nn.Module):
    def __init__(self, width: int, heads: int, kv_dim: int):
        super().__init__()
        if width % heads:
            raise ValueError("attention width must divide into heads")
        self.heads = heads
        self.dh = width // heads
        self.norm_q = nn.LayerNorm(width)
        self.norm_kv = nn.LayerNorm(kv_dim)
        self.to_q = nn.Linear(width, width)
        self.to_k = nn.Linear(kv_dim, width)
        self.to_v = nn.Linear(kv_dim, width)
        self.proj = nn.Linear(width, width)
        self.norm_ff = nn.LayerNorm(width)
        self.ff = nn.Sequential(nn.Linear(width, 2 * width), nn.ReLU(inplace=True),
                                nn.Linear(2 * width, width))

    def forward(self, x: torch.Tensor, kv: torch.Tensor,
                mask: torch.Tensor | None):
        """x (B,P,W), kv (B,N,Dkv), mask (B,N) True=valid -> (x', attn)."""
        b, p, w = x.shape
        n = kv.shape[1]
        q = self.to_q(self.norm_q(x)).view(b, p, self.heads, self.dh)
        kvn = self.norm_kv(kv)
        k = self.to_k(kvn).view(b, n, self.heads, self.dh)
        v = self.to_v(kvn).view(b, n, self.heads, self.dh)
        scores = torch.einsum("bphd,bnhd->bhpn", q, k) / math.sqrt(self.dh)
        if mask is not None:
            scores = scores.masked_fill(~mask[:, None, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        out = torch.einsum("bhpn,bnhd->bphd", attn, v).reshape(b, p, w)
        x = x + self.proj(out)
        x = x + self.ff(self.norm_ff(x))
        return x, attn.mean(dim=1)  # head-averaged (B, P, N)


class OccupancyDecoder(nn.Module):
    """Point SIREN + cross-attention stack + occupancy MLP."""

    def __init__(self, dims: Dims = Dims()):
        super().__init__()
        self.dims = dims
        w = dims.attn_width
        self.point_encoder = Siren(3, w, dims.siren_hidden,
                                   dims.siren_layers, dims.omega_0)
        self.blocks = nn.ModuleList([
            CrossAttentionBlock(w, dims.attn_heads, dims.d_embed)
            for _ in range(dims.attn_layers)])
        mlp: list[nn.Module] = []
        d = 2 * w
        for _ in range(dims.occ_mlp_layers - 1):
            mlp += [nn.Linear(d, w), nn.ReLU(inplace=True)]
            d = w
        mlp.append(nn.Linear(d, 1))
        self.occ_mlp = nn.Sequential(*mlp)

    def forward(self, points: torch.Tensor, embeddings: torch.Tensor,
                mask: torch.Tensor | None = None):
        """points (B,P,3), embeddings (B,N,De), mask (B,N) True=valid.

        Returns (probs (B,P), attention (B,P,N)) where attention is the
        final block's head-averaged weights.
        """
        if embeddings.shape[1] < 1:
            raise EmptyPartSet("decoder needs at least one part embedding")
        phi = self.point_encoder(points)
        x = phi
        attn = None
        for block in self.blocks:
            x, attn = block(x, embeddings, mask)
        logits = self.occ_mlp(torch.cat([phi, x], dim=-1)).squeeze(-1)
        return torch.sigmoid(logits), attn


def decode(points: np.ndarray, embeddings: np.ndarray,
           decoder: OccupancyDecoder, batch_size: int = 1_000_000
           ) -> tuple[np.ndarray, AttentionTrace]:
    """Evaluate occupancy probabilities for a flat point array.

    embeddings: (N, De) for a single shape. Points are processed in
    batches of at most ``batch_size``; outputs are independent of the
    batching.
    """
    points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(points) < 1:
        raise ValueError("decode needs at least one point")
    embeddings = np.asarray(embeddings, dtype=np.float32)
    if embeddings.ndim != 2 or embeddings.shape[0] < 1:
        raise EmptyPartSet("decode needs at least one part embedding")
    emb = torch.from_numpy(embeddings)[None]
    probs_out = np.empty(len(points))
    attn_out = np.empty((len(points), embeddings.shape[0]))
    with torch.no_grad():
        for lo in range(0, len(points), batch_size):
            hi = min(lo + batch_size, len(points))
            pts = torch.from_numpy(points[lo:hi].astype(np.float32))[None]
            probs, attn = decoder(pts, emb)
            probs_out[lo:hi] = probs[0].double().numpy()
            attn_out[lo:hi] = attn[0].double().numpy()
    return probs_out, AttentionTrace(weights=attn_out)


# Probability clamp inside the cross-entropy losses.
BCE_EPS = 1e-7


def occupancy_loss(probs, targets) -> float | torch.Tensor:
    """Mean binary cross-entropy with clamped probabilities."""
    scalar = not torch.is_tensor(probs)
    p = torch.as_tensor(probs, dtype=torch.float64) if scalar else probs
    t = torch.as_tensor(targets, dtype=p.dtype, device=p.device)
    p = p.clamp(BCE_EPS, 1.0 - BCE_EPS)
    loss = -(t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p)).mean()
    return float(loss) if scalar else loss


def attention_guiding_loss(trace, labels) -> float | torch.Tensor:
    """Mean cross-entropy of attention rows against one-hot part labels.

    ``trace`` is an AttentionTrace or a (P, N) tensor/array; ``labels``
    are part indices for interior points only (exterior points carry no
    supervision and must be excluded by the caller).
    """
    weights = trace.weights if isinstance(trace, AttentionTrace) else trace
    scalar = not torch.is_tensor(weights)
    w = torch.as_tensor(weights, dtype=torch.float64) if scalar else weights
    idx = torch.as_tensor(labels, dtype=torch.long, device=w.device)
    if idx.numel() == 0:
        zero = w.sum() * 0.0
        return float(zero) if scalar else zero
    picked = w.gather(-1, idx.unsqueeze(-1)).squeeze(-1)
    loss = -torch.log(picked.clamp_min(1e-12)).mean()
    return float(loss) if scalar else loss


def total_loss(l_occ, l_nll, l_kl, l_attn,
               w_nll: float = 1.0, w_kl: float = 1e-5, w_attn: float = 0.1):
    """Weighted training objective."""
    return l_occ + w_nll * l_nll + w_kl * l_kl + w_attn * l_attn
