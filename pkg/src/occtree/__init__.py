"""Occupancy octree mapping with explicit occupied, free, and unknown space.

Hot kernels (Morton dilation/contraction and voxel ray traversal) run in a
compiled extension when available; ``kernel_backend()`` reports which
implementation is active.
"""

from ._kernels import BACKEND as _KERNEL_BACKEND
from .core import (
    Indicators,
    NodeState,
    NodeView,
    OccupancyConfig,
    OccupancyMap,
    TreeStats,
    create_map,
    logit,
    probability,
)
from .errors import MapFormatError, OutOfExtentError, ScanFormatError
from .geometry import MortonCode, TreeGeometry, VoxelKey
from .integrate import (
    IntegrationResult,
    IntegratorConfig,
    Scan,
    clamp_ray_to_region,
    coarse_free_samples,
    integrate,
    trace_ray_cells,
)
from .io import read_map, read_scan, write_csv_stats, write_map
from .morton import child_index, decode, encode
from .query import StateFilter, info_gain, iterate_region, line_collision, region_collision
from .volumes import Aabb, Frustum, SensorModel, Sphere, yaw_rotation

__version__ = "0.1.0"


def kernel_backend() -> str:
    """Name of the active kernel implementation: 'compiled' or 'python'."""
    return _KERNEL_BACKEND
