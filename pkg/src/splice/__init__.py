"""Part-level neural implicit shape representation with direct editing.

Shapes are sets of independently encoded parts. Each part carries a latent
geometry code and an oriented-ellipsoid pose handle; a cross-attention
decoder turns the part set back into an occupancy field. Edits act on the
pose handles directly, and an optional set-diffusion model refines or
completes part configurations.
"""

__version__ = "0.1.0"

from splice.config import Dims, TrainSettings, DiffusionSettings

__all__ = ["Dims", "TrainSettings", "DiffusionSettings", "__version__"]
