from splice.data.types import LabeledShape, PartMesh, PartVoxelGrid, OccupancySamples, NO_PART
from splice.data.synth import synth_shape, CATEGORIES
from splice.data.voxelize import voxelize_part, voxelize_shape, points_inside_mesh, EmptyPart
from splice.data.labels import assign_part_labels, surface_samples
from splice.data.sampling import sample_occupancy_points
from splice.data.store import save_shape, load_shape, shape_to_bytes, shape_from_bytes

__all__ = [
    "LabeledShape", "PartMesh", "PartVoxelGrid", "OccupancySamples", "NO_PART",
    "synth_shape", "CATEGORIES",
    "voxelize_part", "voxelize_shape", "points_inside_mesh", "EmptyPart",
    "assign_part_labels", "surface_samples",
    "sample_occupancy_points",
    "save_shape", "load_shape", "shape_to_bytes", "shape_from_bytes",
]
