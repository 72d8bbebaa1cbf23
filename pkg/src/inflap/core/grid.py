"""
Lattice Geometry
Square-lattice domain, wide stencils and ball/annulus indexing.

The domain is the square [-L, L]^2 sampled by ``n_per_side`` nodes per axis.
Node (i, j) sits at (-L + i*h, -L + j*h); the node ((n-1)/2, (n-1)/2) is the
origin. Dirichlet data lives on the outer ring of nodes.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Tuple

import numpy as np

from ..utils.errors import InvalidParameterError, OutOfDomainError

Node = Tuple[int, int]

MIN_NODES_PER_SIDE = 17
MAX_STENCIL_WIDTH = 4


class FieldRole(Enum):
    """What a ScalarField holds."""
    SOLUTION = "solution"
    RHS_SAMPLE = "rhs_sample"
    RESIDUAL = "residual"
    ORACLE = "oracle"


@dataclass(frozen=True)
class Grid2D:
    """Square lattice on [-L, L]^2 with an odd node count per axis."""
    n_per_side: int
    half_width: float

    def __post_init__(self):
        if self.n_per_side < MIN_NODES_PER_SIDE or self.n_per_side % 2 == 0:
            raise InvalidParameterError(
                f"n_per_side must be odd and >= {MIN_NODES_PER_SIDE}, got {self.n_per_side}"
            )
        if not (self.half_width > 0 and math.isfinite(self.half_width)):
            raise InvalidParameterError(f"half_width must be positive, got {self.half_width}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.n_per_side - 1)

    @property
    def origin(self) -> Node:
        mid = (self.n_per_side - 1) // 2
        return (mid, mid)

    def coordinate(self, node: Node) -> Tuple[float, float]:
        i, j = node
        h = self.spacing
        return (-self.half_width + i * h, -self.half_width + j * h)

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays (X, Y), indexed [i, j]."""
        axis = -self.half_width + np.arange(self.n_per_side) * self.spacing
        return np.meshgrid(axis, axis, indexing='ij')

    def node_of(self, point: Tuple[float, float]) -> Node:
        """Nearest lattice node to a physical point."""
        h = self.spacing
        i = int(round((point[0] + self.half_width) / h))
        j = int(round((point[1] + self.half_width) / h))
        if not (0 <= i < self.n_per_side and 0 <= j < self.n_per_side):
            raise OutOfDomainError(f"point {point} lies outside the square")
        return (i, j)

    def contains(self, node: Node) -> bool:
        i, j = node
        return 0 <= i < self.n_per_side and 0 <= j < self.n_per_side

    def is_boundary(self, node: Node) -> bool:
        i, j = node
        last = self.n_per_side - 1
        return i == 0 or j == 0 or i == last or j == last

    def ball_fits(self, center: Node, r: float) -> bool:
        """True when every node of B_r(center) is an interior node."""
        if r <= 0:
            return False
        cx, cy = self.coordinate(center)
        L = self.half_width
        slack = 1e-12 * L
        return (cx - r > -L + slack and cx + r < L - slack
                and cy - r > -L + slack and cy + r < L - slack)


@dataclass(frozen=True)
class StencilSet:
    """Wide stencil: primitive lattice directions with Chebyshev radius <= W."""
    width: int
    offsets: np.ndarray = field(repr=False, compare=False)
    unit_arms: np.ndarray = field(repr=False, compare=False)

    @property
    def directions(self) -> List[Node]:
        return [(int(p), int(q)) for p, q in self.offsets]

    def __len__(self) -> int:
        return int(self.offsets.shape[0])

    def arm_lengths(self, grid: Grid2D) -> np.ndarray:
        """Physical arm lengths d = h * sqrt(p^2 + q^2)."""
        return grid.spacing * self.unit_arms


@dataclass(frozen=True)
class BallIndex:
    """All interior nodes within Euclidean distance r of a center node."""
    center: Node
    radius: float
    nodes: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return int(self.nodes.shape[0])

    def values(self, values: np.ndarray) -> np.ndarray:
        return values[self.nodes[:, 0], self.nodes[:, 1]]


def build_grid(n_per_side: int, half_width: float) -> Grid2D:
    """Build the square lattice; rejects even or too-small node counts."""
    return Grid2D(int(n_per_side), float(half_width))


def build_stencil(width: int) -> StencilSet:
    """
    Enumerate the primitive directions (p, q) with max(|p|, |q|) <= width.

    Directions are ordered by arm length, then by angle in [0, 2*pi), so the
    order (and therefore every lowest-index tie break) is platform independent.
    """
    if not isinstance(width, (int, np.integer)) or not 1 <= width <= MAX_STENCIL_WIDTH:
        raise InvalidParameterError(f"stencil width must be in [1, {MAX_STENCIL_WIDTH}], got {width}")

    directions = []
    for p in range(-width, width + 1):
        for q in range(-width, width + 1):
            if (p, q) != (0, 0) and math.gcd(abs(p), abs(q)) == 1:
                directions.append((p, q))
    directions.sort(key=lambda d: (d[0] ** 2 + d[1] ** 2, math.atan2(d[1], d[0]) % (2 * math.pi)))

    offsets = np.array(directions, dtype=np.int64)
    unit_arms = np.sqrt((offsets ** 2).sum(axis=1).astype(float))
    return StencilSet(int(width), offsets, unit_arms)


def boundary_mask(grid: Grid2D) -> np.ndarray:
    """Boolean array, True on the outer ring of lattice nodes."""
    mask = np.zeros((grid.n_per_side, grid.n_per_side), dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask


def interior_nodes(grid: Grid2D) -> np.ndarray:
    """(N, 2) array of interior node indices in lexicographic order."""
    idx = np.arange(1, grid.n_per_side - 1)
    ii, jj = np.meshgrid(idx, idx, indexing='ij')
    return np.stack([ii.ravel(), jj.ravel()], axis=1).astype(np.int64)


def color_classes(grid: Grid2D) -> List[np.ndarray]:
    """
    Interior nodes split by (i mod 2, j mod 2).

    Every primitive offset has an odd component, so a stencil arm never joins
    two nodes of the same class.
    """
    nodes = interior_nodes(grid)
    classes = []
    for pi in (0, 1):
        for pj in (0, 1):
            sel = (nodes[:, 0] % 2 == pi) & (nodes[:, 1] % 2 == pj)
            classes.append(np.ascontiguousarray(nodes[sel]))
    return classes


def _distances_from(grid: Grid2D, center: Node) -> np.ndarray:
    X, Y = grid.coordinates()
    cx, cy = grid.coordinate(center)
    return np.hypot(X - cx, Y - cy)


def ball_nodes(grid: Grid2D, center: Node, r: float) -> BallIndex:
    """Exact Euclidean membership list of B_r(center)."""
    if not grid.contains(center):
        raise OutOfDomainError(f"center {center} is not a lattice node")
    if not r > 0:
        raise InvalidParameterError(f"radius must be positive, got {r}")
    if not grid.ball_fits(center, r):
        raise OutOfDomainError(f"ball of radius {r} about {center} touches the lattice boundary")

    # membership is decided on the same coordinates the rest of the code uses
    dist = _distances_from(grid, center)
    ii, jj = np.nonzero(dist <= r)
    return BallIndex(center, float(r), np.stack([ii, jj], axis=1).astype(np.int64))


def shell_nodes(grid: Grid2D, center: Node, r: float) -> np.ndarray:
    """Nodes of the annulus r - h <= |x - x0| <= r, as an (N, 2) index array."""
    if not grid.ball_fits(center, r):
        raise OutOfDomainError(f"shell of radius {r} about {center} touches the lattice boundary")
    dist = _distances_from(grid, center)
    ii, jj = np.nonzero((dist >= r - grid.spacing) & (dist <= r))
    return np.stack([ii, jj], axis=1).astype(np.int64)
