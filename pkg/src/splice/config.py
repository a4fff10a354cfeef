"""Configuration dataclasses and TOML loading for the whole pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

# Default grid resolution for data artifacts and meshing at desk scale.
# Full-scale runs use 256 (encoder) / 128 (meshing); both stay config knobs.
DESK_VOXEL_RES = 64

# Sigma floor for all ellipsoid scales; prevents NLL singularities on
# planar or near-degenerate parts.
SIGMA_MIN = 1e-3

# Radius multiplier for the six pose endpoints along the principal axes.
ENDPOINT_RADIUS = 1.75

# Global per-axis factor multiplying the softplus-activated raw scales, so
# a raw scale of softplus^-1(1) yields an ellipsoid sigma of 0.5 (roughly
# half the part grid's half-extent in normalized coordinates).
SCALE_LAMBDA = 0.5

# Maximum parts per shape; also the fixed token-set width for diffusion.
N_MAX = 16


@dataclass(frozen=True)
class Dims:
    """Network dimensions shared by the encoder, pose mixer and decoder."""

    d_z: int = 256          # latent shape code size (config; 512 also valid)
    d_pose: int = 128       # pose feature size out of the sinusoidal encoder
    d_embed: int = 256      # final part embedding size
    attn_width: int = 128   # decoder cross-attention width
    attn_layers: int = 4
    attn_heads: int = 8
    occ_mlp_layers: int = 4
    siren_hidden: int = 128
    siren_layers: int = 3   # hidden sine layers
    omega_0: float = 30.0
    mix_hidden: int = 256
    encoder_base_channels: int = 8
    encoder_max_channels: int = 512
    endpoint_radius: float = ENDPOINT_RADIUS
    scale_lambda: float = SCALE_LAMBDA


@dataclass
class TrainSettings:
    """Reconstruction training settings (desk-scale defaults).

    Full-scale settings (batch 40, encoder res 256) remain reachable by
    overriding fields; the desk defaults are sized so a complete overfit
    run finishes on a small CPU box.
    """

    lr: float = 1e-4
    batch: int = 8                 # shapes per step (full scale: 40)
    steps: int = 20_000
    seed: int = 0
    encoder_res: int = 32          # part grid resolution fed to the encoder
    points_per_shape: int = 320    # occupancy queries per shape per step
    nll_points: int = 128          # voxel centers per part for the NLL term
    w_nll: float = 1.0
    w_kl: float = 1e-5
    w_attn: float = 0.1
    attention_guidance: bool = True
    pose_encoding: str = "endpoints"   # "endpoints" | "raw"
    augment: bool = True               # random affine edit simulation
    rotation_prob: float = 0.10
    stochastic_latent: bool = True
    checkpoint_every: int = 1000
    log_every: int = 50

    def fingerprint(self) -> dict:
        return asdict(self)


@dataclass
class DiffusionSettings:
    """Set-diffusion model and training settings."""

    n_max: int = N_MAX
    timesteps: int = 1000
    width: int = 512
    layers: int = 8
    heads: int = 16
    lr: float = 1e-4
    batch: int = 16
    steps: int = 8000
    seed: int = 0
    scale_aug_lo: float = 0.8
    scale_aug_hi: float = 1.2
    refine_steps: int = 100
    log_every: int = 50

    def fingerprint(self) -> dict:
        return asdict(self)


@dataclass
class PipelineConfig:
    """Bundle of every knob, loadable from a single TOML file."""

    dims: Dims = field(default_factory=Dims)
    train: TrainSettings = field(default_factory=TrainSettings)
    diffusion: DiffusionSettings = field(default_factory=DiffusionSettings)
    voxel_res: int = DESK_VOXEL_RES    # data artifacts / ground-truth grids
    mesh_res: int = DESK_VOXEL_RES     # occupancy grid for marching cubes
    iso_level: float = 0.5
    metric_points: int = 2048          # point-set size for CD/EMD


def load_config(path: str | Path) -> PipelineConfig:
    """Read a TOML file with optional [dims], [train], [diffusion] tables."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = PipelineConfig()
    if "dims" in raw:
        cfg.dims = replace(cfg.dims, **raw["dims"])
    if "train" in raw:
        cfg.train = replace(cfg.train, **raw["train"])
    if "diffusion" in raw:
        cfg.diffusion = replace(cfg.diffusion, **raw["diffusion"])
    for key in ("voxel_res", "mesh_res", "iso_level", "metric_points"):
        if key in raw:
            setattr(cfg, key, raw[key])
    return cfg
