"""Hierarchical filtered iteration, collision checks, and information gain.

All operations are read-only. Traversals never descend past a node whose
children are all identical (the all-same indicator), so they stay safe to
run concurrently with a writer while automatic pruning is disabled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import _kernels
from .core import Node, NodeState, NodeView, OccupancyMap, probability
from .geometry import TreeGeometry, VoxelKey
from .integrate import _grid_cell, _trace_grid
from .volumes import Aabb, Frustum, SensorModel, Sphere


@dataclass(frozen=True)
class StateFilter:
    """Which node kinds an iteration yields. State flags select leaves and
    pruned inner-leaves; contains flags additionally select inner nodes via
    their indicators."""

    occupied: bool = False
    free: bool = False
    unknown: bool = False
    contains_occupied: bool = False
    contains_free: bool = False
    contains_unknown: bool = False

    def __post_init__(self):
        if not any((self.occupied, self.free, self.unknown, self.contains_occupied,
                    self.contains_free, self.contains_unknown)):
            raise ValueError("at least one filter flag must be set")

    @classmethod
    def all_states(cls) -> "StateFilter":
        return cls(occupied=True, free=True, unknown=True)


def _cell_box(geo: TreeGeometry, kx: int, ky: int, kz: int, depth: int):
    bias = 1 << (geo.depth_levels - 1)
    res = geo.resolution
    side = geo.res_at(depth)
    lo = ((kx - bias) * res, (ky - bias) * res, (kz - bias) * res)
    return lo, (lo[0] + side, lo[1] + side, lo[2] + side)


def iterate_region(map_: OccupancyMap, volume, flt: StateFilter,
                   min_depth: int = 0) -> Iterator[NodeView]:
    """Yield matching nodes intersecting the volume, in Morton order.
    Branches that cannot contain a match are skipped via the indicators.
    Nodes at ``min_depth`` are reported as coarse leaves (max-occupancy
    state)."""
    geo = map_.geometry
    if not (0 <= min_depth <= geo.depth_levels):
        raise ValueError(f"min_depth {min_depth} outside [0, {geo.depth_levels}]")
    yield from _iterate(map_, map_.root, geo.depth_levels, 0, 0, 0, volume,
                        flt, min_depth)


def _node_view(map_: OccupancyMap, node: Node, kx: int, ky: int, kz: int,
               depth: int) -> NodeView:
    code = _kernels.morton_encode(kx, ky, kz)
    return map_._view(node, code, depth)


def _iterate(map_: OccupancyMap, node: Node, depth: int, kx: int, ky: int,
             kz: int, volume, flt: StateFilter, min_depth: int):
    geo = map_.geometry
    lo, hi = _cell_box(geo, kx, ky, kz, depth)
    if not volume.intersects_box(lo, hi):
        return
    st = map_.state_of(node.value)
    leaf_like = node.children is None or node.all_same
    if leaf_like or depth == min_depth:
        match = ((flt.occupied and st is NodeState.OCCUPIED)
                 or (flt.free and st is NodeState.FREE)
                 or (flt.unknown and st is NodeState.UNKNOWN))
        if not match:
            if node.children is not None and not node.all_same:
                match = ((flt.contains_occupied and st is NodeState.OCCUPIED)
                         or (flt.contains_free and node.contains_free)
                         or (flt.contains_unknown and node.contains_unknown))
            else:
                match = ((flt.contains_occupied and st is NodeState.OCCUPIED)
                         or (flt.contains_free and st is NodeState.FREE)
                         or (flt.contains_unknown and st is NodeState.UNKNOWN))
        if match:
            yield _node_view(map_, node, kx, ky, kz, depth)
        return
    if ((flt.contains_occupied and st is NodeState.OCCUPIED)
            or (flt.contains_free and node.contains_free)
            or (flt.contains_unknown and node.contains_unknown)):
        yield _node_view(map_, node, kx, ky, kz, depth)
    can_match = (((flt.occupied or flt.contains_occupied) and st is NodeState.OCCUPIED)
                 or ((flt.free or flt.contains_free) and node.contains_free)
                 or ((flt.unknown or flt.contains_unknown) and node.contains_unknown))
    if not can_match:
        return
    if node.all_same:  # instrumentation: readers must never get here
        map_.reader_allsame_descents += 1
    half = 1 << (depth - 1)
    for i, child in enumerate(node.children):
        yield from _iterate(map_, child, depth - 1,
                            kx + (i & 1) * half,
                            ky + ((i >> 1) & 1) * half,
                            kz + ((i >> 2) & 1) * half,
                            volume, flt, min_depth)


# -- collision checks -----------------------------------------------------


def region_collision(map_: OccupancyMap, sphere: Sphere,
                     mode: str = "conservative") -> bool:
    """True if the sphere overlaps occupied space (occupied_only) or
    occupied-or-unknown space (conservative). Hierarchical with early exit
    on the first witness."""
    occupied_only = _collision_mode(mode)
    return _region_collide(map_, map_.root, map_.geometry.depth_levels,
                           0, 0, 0, sphere, occupied_only)


def _collision_mode(mode: str) -> bool:
    if mode not in ("conservative", "occupied_only"):
        raise ValueError(f"unknown collision mode {mode!r}")
    return mode == "occupied_only"


def _region_collide(map_, node, depth, kx, ky, kz, sphere, occupied_only):
    lo, hi = _cell_box(map_.geometry, kx, ky, kz, depth)
    if not sphere.intersects_box(lo, hi):
        return False
    st = map_.state_of(node.value)
    if node.children is None or node.all_same:
        return st is NodeState.OCCUPIED or (not occupied_only and st is NodeState.UNKNOWN)
    if occupied_only:
        if st is not NodeState.OCCUPIED:
            return False
    elif st is not NodeState.OCCUPIED and not node.contains_unknown:
        return False
    half = 1 << (depth - 1)
    return any(
        _region_collide(map_, child, depth - 1, kx + (i & 1) * half,
                        ky + ((i >> 1) & 1) * half, kz + ((i >> 2) & 1) * half,
                        sphere, occupied_only)
        for i, child in enumerate(node.children))


def line_collision(map_: OccupancyMap, p0, p1, mode: str = "conservative") -> bool:
    """True if any cell the closed segment passes through is occupied
    (occupied_only) or occupied-or-unknown (conservative). A uniform
    subtree is crossed in one step."""
    occupied_only = _collision_mode(mode)
    geo = map_.geometry
    geo.check_inside(p0)
    geo.check_inside(p1)
    cells = [_grid_cell(geo, p0, 0)]
    cells.extend((int(x), int(y), int(z)) for x, y, z in _trace_grid(geo, p0, p1, 0))
    cells.append(_grid_cell(geo, p1, 0))
    safe_prefix = -1
    safe_shift = 0
    for cx, cy, cz in cells:
        code = _kernels.morton_encode(cx, cy, cz)
        if safe_prefix >= 0 and (code >> safe_shift) == safe_prefix:
            continue  # still inside a known-safe uniform subtree
        node, reached = map_._descend(code, 0)
        st = map_.state_of(node.value)
        if st is NodeState.OCCUPIED or (not occupied_only and st is NodeState.UNKNOWN):
            return True
        if reached > 0:
            safe_shift = 3 * reached
            safe_prefix = code >> safe_shift
    return False


# -- information gain -----------------------------------------------------


def info_gain(map_: OccupancyMap, sensor: SensorModel, variant: str = "exact") -> int:
    """Number of unknown leaf cells visible (in the sensor's field of view
    and range, not occluded by occupied space) from the sensor pose."""
    if variant == "flat":
        return _gain_flat(map_, sensor)
    if variant == "exact":
        return _gain_hier(map_, sensor, fast=False)
    if variant == "fast":
        return _gain_hier(map_, sensor, fast=True)
    raise ValueError(f"unknown info_gain variant {variant!r}")


def _ray_blocked(map_: OccupancyMap, origin, target, depth: int) -> bool:
    """Occupied cell strictly before the target along the depth-``depth``
    traversal from the sensor."""
    for x, y, z in _trace_grid(map_.geometry, origin, target, depth):
        code = _kernels.morton_encode(int(x) << depth, int(y) << depth, int(z) << depth)
        node, _ = map_._descend(code, depth)
        if map_.state_of(node.value) is NodeState.OCCUPIED:
            return True
    return False


def _leaf_centers(geo: TreeGeometry, kx: int, ky: int, kz: int, depth: int) -> np.ndarray:
    bias = 1 << (geo.depth_levels - 1)
    res = geo.resolution
    n = 1 << depth
    ax = (np.arange(n) + kx - bias) * res + res / 2.0
    ay = (np.arange(n) + ky - bias) * res + res / 2.0
    az = (np.arange(n) + kz - bias) * res + res / 2.0
    gx, gy, gz = np.meshgrid(ax, ay, az, indexing="ij")
    return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)


def _gain_flat(map_: OccupancyMap, sensor: SensorModel) -> int:
    geo = map_.geometry
    geo.check_inside(sensor.position)
    fr = sensor.frustum()
    pos = np.asarray(sensor.position, dtype=float)
    bias = 1 << (geo.depth_levels - 1)
    res = geo.resolution
    n_cells = 1 << geo.depth_levels
    lo_idx = np.maximum(np.floor((pos - sensor.r_max) / res).astype(int) + bias, 0)
    hi_idx = np.minimum(np.floor((pos + sensor.r_max) / res).astype(int) + bias, n_cells - 1)
    total = 0
    for kx in range(lo_idx[0], hi_idx[0] + 1):
        ax = (kx - bias) * res + res / 2.0
        ys = np.arange(lo_idx[1], hi_idx[1] + 1)
        zs = np.arange(lo_idx[2], hi_idx[2] + 1)
        gy, gz = np.meshgrid(ys, zs, indexing="ij")
        centers = np.stack([
            np.full(gy.size, ax),
            (gy.ravel() - bias) * res + res / 2.0,
            (gz.ravel() - bias) * res + res / 2.0,
        ], axis=1)
        inside = fr.contains_points(centers)
        for (ky, kz), center in zip(
                zip(gy.ravel()[inside], gz.ravel()[inside]), centers[inside]):
            code = _kernels.morton_encode(kx, int(ky), int(kz))
            node, _ = map_._descend(code, 0)
            if map_.state_of(node.value) is not NodeState.UNKNOWN:
                continue
            if not _ray_blocked(map_, pos, center, 0):
                total += 1
    return total


def _unknown_nodes(map_: OccupancyMap, node: Node, depth: int, kx: int,
                   ky: int, kz: int, volume):
    lo, hi = _cell_box(map_.geometry, kx, ky, kz, depth)
    if not volume.intersects_box(lo, hi):
        return
    if node.children is None or node.all_same:
        if map_.state_of(node.value) is NodeState.UNKNOWN:
            yield kx, ky, kz, depth
        return
    if not node.contains_unknown:
        return
    half = 1 << (depth - 1)
    for i, child in enumerate(node.children):
        yield from _unknown_nodes(map_, child, depth - 1, kx + (i & 1) * half,
                                  ky + ((i >> 1) & 1) * half,
                                  kz + ((i >> 2) & 1) * half, volume)


def _gain_hier(map_: OccupancyMap, sensor: SensorModel, fast: bool) -> int:
    geo = map_.geometry
    geo.check_inside(sensor.position)
    fr = sensor.frustum()
    pos = np.asarray(sensor.position, dtype=float)
    total = 0
    for kx, ky, kz, depth in _unknown_nodes(map_, map_.root,
                                            geo.depth_levels, 0, 0, 0, fr):
        centers = _leaf_centers(geo, kx, ky, kz, depth)
        inside = fr.contains_points(centers)
        weight = int(np.count_nonzero(inside))
        if weight == 0:
            continue
        if fast:
            # first visible leaf stands in for the whole node
            for center in centers[inside]:
                if not _ray_blocked(map_, pos, center, 0):
                    total += weight
                    break
        else:
            total += _gain_exact_node(map_, fr, pos, kx, ky, kz, depth)
    return total


def _gain_exact_node(map_: OccupancyMap, fr: Frustum, pos, kx: int, ky: int,
                     kz: int, depth: int) -> int:
    geo = map_.geometry
    centers = _leaf_centers(geo, kx, ky, kz, depth)
    weight = int(np.count_nonzero(fr.contains_points(centers)))
    if weight == 0:
        return 0
    bias = 1 << (geo.depth_levels - 1)
    res = geo.resolution
    side = geo.res_at(depth)
    center = ((kx - bias) * res + side / 2.0, (ky - bias) * res + side / 2.0,
              (kz - bias) * res + side / 2.0)
    if not _ray_blocked(map_, pos, center, depth):
        return weight
    if depth == 0:
        return 0
    half = 1 << (depth - 1)
    return sum(
        _gain_exact_node(map_, fr, pos, kx + (i & 1) * half,
                         ky + ((i >> 1) & 1) * half,
                         kz + ((i >> 2) & 1) * half, depth - 1)
        for i in range(8))
