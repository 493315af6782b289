"""The occupancy octree.

Every node carries a clamped log-odds occupancy value. Inner nodes hold the
maximum over their children (conservative for coarse queries) plus three
indicators: subtree contains free space, subtree contains unknown space, and
all eight children identical (prunable). A node has either no children or
exactly eight, so unknown space is represented explicitly.

Occupancy values are quantized to 32-bit float precision on every write so
the in-memory tree matches its serialized form bit for bit.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .geometry import MortonCode, TreeGeometry, VoxelKey
from .morton import encode


def _f32(x: float) -> float:
    return float(np.float32(x))


def logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def probability(log_odds: float) -> float:
    return 1.0 / (1.0 + math.exp(-log_odds))


class NodeState(enum.Enum):
    OCCUPIED = "occupied"
    FREE = "free"
    UNKNOWN = "unknown"

    def __str__(self) -> str:
        return self.value


class Indicators(NamedTuple):
    contains_free: bool
    contains_unknown: bool
    all_children_same: bool


@dataclass(frozen=True)
class OccupancyConfig:
    """Log-odds fusion parameters and the dual classification thresholds.

    Defaults: p_hit = 0.7, p_miss = 0.4, clamps at probabilities 0.12 / 0.97,
    and t_free = t_occ = 0.5 so never-observed space classifies unknown.
    """

    log_hit: float = field(default_factory=lambda: logit(0.7))
    log_miss: float = field(default_factory=lambda: logit(0.4))
    clamp_min: float = field(default_factory=lambda: logit(0.12))
    clamp_max: float = field(default_factory=lambda: logit(0.97))
    t_free: float = 0.5
    t_occ: float = 0.5
    prior_log_odds: float = 0.0

    def __post_init__(self):
        # quantize everything that ends up in the map file header
        for name in ("clamp_min", "clamp_max", "t_free", "t_occ"):
            object.__setattr__(self, name, _f32(getattr(self, name)))
        if not (self.log_hit > 0.0 > self.log_miss):
            raise ValueError("log_hit must be > 0 and log_miss < 0")
        if not (self.clamp_min <= self.prior_log_odds <= self.clamp_max):
            raise ValueError("prior_log_odds must lie within the clamp bounds")
        if not (0.0 < self.t_free <= self.t_occ < 1.0):
            raise ValueError("thresholds must satisfy 0 < t_free <= t_occ < 1")
        if logit(self.t_free) < self.clamp_min:
            warnings.warn(
                "logit(t_free) below clamp_min: no node can ever classify free",
                stacklevel=2,
            )


class Node:
    """Tree node. ``children`` is None (leaf / inner-leaf) or a list of 8."""

    __slots__ = ("value", "children", "contains_free", "contains_unknown",
                 "all_same", "color", "color_n")

    def __init__(self, value: float, color=None, color_n: int = 0):
        self.value = value
        self.children: Optional[list[Node]] = None
        self.contains_free = False
        self.contains_unknown = False
        self.all_same = True
        self.color = color  # (r, g, b) floats, running average
        self.color_n = color_n

    @property
    def indicators(self) -> Indicators:
        return Indicators(self.contains_free, self.contains_unknown, self.all_same)


def _color_u8(color) -> Optional[tuple[int, int, int]]:
    if color is None:
        return None
    return (int(round(color[0])), int(round(color[1])), int(round(color[2])))


@dataclass(frozen=True)
class NodeView:
    """Snapshot of one node as seen by a query."""

    code: int
    depth: int
    value: float
    probability: float
    state: NodeState
    color: Optional[tuple[int, int, int]] = None


@dataclass(frozen=True)
class TreeStats:
    inner: int
    inner_leaf: int
    leaf: int

    @property
    def total(self) -> int:
        return self.inner + self.inner_leaf + self.leaf

    @property
    def leaf_fraction(self) -> float:
        return self.leaf / self.total

    @property
    def bytes_model(self) -> int:
        # reporting model: 16 bytes per inner / inner-leaf, 4 per leaf
        return 16 * (self.inner + self.inner_leaf) + 4 * self.leaf


class OccupancyMap:
    """Occupancy octree over a cube of side ``2**depth_levels * resolution``
    centered on the origin.

    Single writer; concurrent readers are allowed only while ``auto_prune``
    is off and no manual prune is running (the tree is then grow-only and
    readers treat all-same inner nodes as leaves).
    """

    def __init__(self, resolution: float, depth_levels: int,
                 config: Optional[OccupancyConfig] = None,
                 auto_prune: bool = True, store_color: bool = False):
        self.geometry = TreeGeometry(resolution, depth_levels)
        self.config = config if config is not None else OccupancyConfig()
        self.auto_prune = auto_prune
        self.store_color = store_color
        self.root = Node(_f32(self.config.prior_log_odds))
        self._lo_free = logit(self.config.t_free)
        self._lo_occ = logit(self.config.t_occ)
        # instrumentation: descents past an all-same inner node by readers
        self.reader_allsame_descents = 0

    # -- classification ---------------------------------------------------

    def state_of(self, log_odds: float) -> NodeState:
        if log_odds > self._lo_occ:
            return NodeState.OCCUPIED
        if log_odds < self._lo_free:
            return NodeState.FREE
        return NodeState.UNKNOWN

    def clamp(self, log_odds: float) -> float:
        cfg = self.config
        return _f32(min(max(log_odds, cfg.clamp_min), cfg.clamp_max))

    # -- lookup -----------------------------------------------------------

    def get_node(self, code: MortonCode | int, depth: int | None = None) -> NodeView:
        """Descend toward the requested node; stops early at childless (or
        all-same) nodes, whose max-occupancy answer covers the subtree."""
        if isinstance(code, MortonCode):
            raw, target = code.code, code.depth
        else:
            raw, target = code, 0
        if depth is not None:
            target = depth
        node, reached = self._descend(raw, target)
        return self._view(node, raw, reached)

    def _descend(self, raw_code: int, target_depth: int) -> tuple[Node, int]:
        node = self.root
        depth = self.geometry.depth_levels
        while depth > target_depth:
            children = node.children
            if children is None or node.all_same:
                break
            node = children[(raw_code >> (3 * (depth - 1))) & 7]
            depth -= 1
        return node, depth

    def _view(self, node: Node, raw_code: int, depth: int) -> NodeView:
        v = node.value
        mask = ~((1 << (3 * depth)) - 1)
        return NodeView(raw_code & mask, depth, v, probability(v),
                        self.state_of(v), _color_u8(node.color))

    def state_at(self, coord, depth: int = 0) -> NodeView:
        key = self.geometry.coord_to_key(coord, depth)
        return self.get_node(encode(key))

    # -- mutation ---------------------------------------------------------

    def update_occupancy(self, code: MortonCode | int, delta: float,
                         color=None) -> NodeState:
        """Add ``delta`` to a leaf's clamped log-odds value; materializes the
        path, then restores the max / indicator invariants bottom-up."""
        if isinstance(code, MortonCode):
            if code.depth != 0:
                raise ValueError("update_occupancy requires a leaf-depth code")
            raw = code.code
        else:
            raw = code
        node = self.root
        depth = self.geometry.depth_levels
        path = []
        while depth > 0:
            if node.children is None:
                self._expand(node)
            path.append(node)
            node = node.children[(raw >> (3 * (depth - 1))) & 7]
            depth -= 1
        node.value = self.clamp(node.value + delta)
        if color is not None and self.store_color:
            self._fuse_color(node, color)
        self._finish_path(path)
        return self.state_of(node.value)

    def set_coarse(self, code: MortonCode, value: float) -> int:
        """Overwrite a coarse cell with ``value`` unless (parts of) it are
        occupied: occupied children are preserved by recursing one level at a
        time down to leaves. Returns the depth at which the write stopped."""
        d_max = self.geometry.depth_levels
        if not (0 < code.depth <= d_max):
            raise ValueError("set_coarse requires depth in (0, depth_levels]")
        v = self.clamp(value)
        node = self.root
        depth = d_max
        path = []
        while depth > code.depth:
            if node.children is None:
                if self.state_of(node.value) is NodeState.OCCUPIED:
                    return depth  # uniform occupied: rule leaves it untouched
                if node.value == v and node.color is None:
                    return depth  # already holds the target value
                self._expand(node)
            path.append(node)
            node = node.children[(code.code >> (3 * (depth - 1))) & 7]
            depth -= 1
        self._apply_coarse(node, depth, v)
        self._finish_path(path)
        return depth

    def _apply_coarse(self, node: Node, depth: int, v: float) -> None:
        if self.state_of(node.value) is not NodeState.OCCUPIED:
            node.children = None
            node.value = v
            node.color = None
            node.color_n = 0
            node.all_same = True
            return
        if depth == 0 or node.children is None:
            return  # occupied leaf or uniform occupied subtree: untouched
        for child in node.children:
            self._apply_coarse(child, depth - 1, v)
        self._refresh(node)

    def prune(self) -> int:
        """Collapse every inner node with 8 identical childless children,
        bottom-up until fixpoint. Returns the number of nodes removed."""
        return self._prune(self.root)

    def _prune(self, node: Node) -> int:
        if node.children is None:
            return 0
        removed = 0
        for child in node.children:
            removed += self._prune(child)
        self._refresh(node)
        if node.all_same:
            self._collapse(node)
            removed += 8
        return removed

    # -- internals --------------------------------------------------------

    def _expand(self, node: Node) -> None:
        kids = [Node(node.value, node.color, node.color_n) for _ in range(8)]
        st = self.state_of(node.value)
        node.contains_free = st is NodeState.FREE
        node.contains_unknown = st is NodeState.UNKNOWN
        node.all_same = True
        node.children = kids  # assigned last so readers see a complete block

    def _leaf_sig(self, node: Node):
        return (node.value, _color_u8(node.color))

    def _refresh(self, node: Node) -> None:
        best = -math.inf
        cf = False
        cu = False
        all_same = True
        first_sig = None
        for child in node.children:
            if child.value > best:
                best = child.value
            if child.children is None:
                st = self.state_of(child.value)
                if st is NodeState.FREE:
                    cf = True
                elif st is NodeState.UNKNOWN:
                    cu = True
                if all_same:
                    sig = self._leaf_sig(child)
                    if first_sig is None:
                        first_sig = sig
                    elif sig != first_sig:
                        all_same = False
            else:
                cf = cf or child.contains_free
                cu = cu or child.contains_unknown
                all_same = False
        node.contains_free = cf
        node.contains_unknown = cu
        node.all_same = all_same
        node.value = best

    def _collapse(self, node: Node) -> None:
        first = node.children[0]
        node.value = first.value
        node.color = first.color
        node.color_n = first.color_n
        node.children = None
        node.all_same = True

    def _finish_path(self, path: list[Node]) -> None:
        for node in reversed(path):
            self._refresh(node)
            if self.auto_prune and node.all_same:
                self._collapse(node)

    def _fuse_color(self, node: Node, color) -> None:
        r, g, b = float(color[0]), float(color[1]), float(color[2])
        if node.color is None:
            node.color = (r, g, b)
            node.color_n = 1
        else:
            n = node.color_n
            cr, cg, cb = node.color
            node.color = ((cr * n + r) / (n + 1), (cg * n + g) / (n + 1),
                          (cb * n + b) / (n + 1))
            node.color_n = n + 1

    # -- statistics -------------------------------------------------------

    def tree_stats(self) -> TreeStats:
        inner = inner_leaf = leaf = 0
        stack = [(self.root, self.geometry.depth_levels)]
        while stack:
            node, depth = stack.pop()
            if node.children is not None:
                inner += 1
                for child in node.children:
                    stack.append((child, depth - 1))
            elif depth > 0:
                inner_leaf += 1
            else:
                leaf += 1
        return TreeStats(inner, inner_leaf, leaf)


def create_map(resolution: float, depth_levels: int,
               config: Optional[OccupancyConfig] = None,
               auto_prune: bool = True, store_color: bool = False) -> OccupancyMap:
    return OccupancyMap(resolution, depth_levels, config, auto_prune, store_color)
