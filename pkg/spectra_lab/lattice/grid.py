"""
Rectangular lattices and cell-weighted grid functions
"""
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Tuple

import numpy as np

from spectra_lab.core.exceptions import BudgetExceededError, GridError
from spectra_lab.core.settings import get_settings

logger = logging.getLogger(__name__)

COMMENSURATE_TOL = 1e-6


def is_commensurate(length: float, spacing: float) -> bool:
    """length is a whole number of cells of width spacing"""
    cells = length / spacing
    return abs(cells - round(cells)) <= COMMENSURATE_TOL * max(1.0, cells)


@dataclass(frozen=True)
class GridSpec:
    """Box bounds and interior node counts per axis"""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    nodes: Tuple[int, ...]

    @classmethod
    def from_spacing(cls, lower: Sequence[float], upper: Sequence[float], spacing: float) -> "GridSpec":
        """Interior node counts giving a spacing as close as possible to `spacing`"""
        if spacing <= 0:
            raise GridError(f"Spacing must be positive, got {spacing}")
        for a, b in zip(lower, upper):
            if not is_commensurate(b - a, spacing):
                actual = (b - a) / max(int(round((b - a) / spacing)), 1)
                logger.warning(f"Side ({a}, {b}) is not a multiple of h={spacing}; the grid uses h={actual:.6g}")
        nodes = tuple(max(int(round((b - a) / spacing)) - 1, 0) for a, b in zip(lower, upper))
        return cls(tuple(float(a) for a in lower), tuple(float(b) for b in upper), nodes)

    @classmethod
    def centered_box(cls, radius: float, dim: int, spacing: float) -> "GridSpec":
        return cls.from_spacing([-radius] * dim, [radius] * dim, spacing)


@dataclass(frozen=True)
class Grid:
    """
    Interior nodes of a Dirichlet box, numbered in C order (last axis fastest).

    Node i of axis a sits at lower[a] + (i + 1) * spacing[a]; the box faces
    carry the boundary condition and are not nodes.
    """

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]
    shape: Tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple((b - a) / (n + 1) for a, b, n in zip(self.lower, self.upper, self.shape))

    @property
    def cell_measure(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def volume(self) -> float:
        return self.size * self.cell_measure

    def axes(self) -> Tuple[np.ndarray, ...]:
        return tuple(
            a + h * np.arange(1, n + 1) for a, h, n in zip(self.lower, self.spacing, self.shape)
        )

    def points(self) -> np.ndarray:
        """(size, dim) array of node coordinates in index order"""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def coordinate(self, index: int) -> np.ndarray:
        multi = np.unravel_index(index, self.shape)
        return np.array([a + h * (i + 1) for a, h, i in zip(self.lower, self.spacing, multi)])

    def index(self, multi: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi), self.shape))

    def nearest_node(self, x: Sequence[float]) -> Optional[int]:
        """Index of the node closest to x, or None when x lies outside the node range"""
        multi = []
        for xa, a, h, n in zip(x, self.lower, self.spacing, self.shape):
            i = int(np.floor((xa - a) / h + 0.5)) - 1
            if i < 0 or i >= n:
                return None
            multi.append(i)
        return self.index(multi)

    def function(self, values) -> "GridFunction":
        return GridFunction(self, values)

    def evaluate(self, fn: Callable[..., np.ndarray]) -> "GridFunction":
        """Evaluate fn(x) in 1D or fn(x, y) in 2D on every node"""
        pts = self.points()
        return GridFunction(self, fn(*[pts[:, a] for a in range(self.dim)]))

    def indicator(self, nodes: Iterable[int]) -> "GridFunction":
        values = np.zeros(self.size)
        values[np.fromiter(nodes, dtype=int)] = 1.0
        return GridFunction(self, values)


def build_grid(spec: GridSpec, node_budget: Optional[int] = None) -> Grid:
    """Validate a box specification and build its lattice"""
    lower = tuple(float(a) for a in spec.lower)
    upper = tuple(float(b) for b in spec.upper)
    nodes = tuple(int(n) for n in spec.nodes)

    if not (len(lower) == len(upper) == len(nodes)):
        raise GridError(f"Bounds and resolution disagree in dimension: {len(lower)}, {len(upper)}, {len(nodes)}")
    if len(nodes) not in (1, 2):
        raise GridError(f"Only 1D and 2D boxes are supported, got dimension {len(nodes)}")
    for axis, (a, b) in enumerate(zip(lower, upper)):
        if not np.isfinite(a) or not np.isfinite(b) or b - a <= 0:
            raise GridError(f"Axis {axis} has empty extent ({a}, {b})")
    for axis, n in enumerate(nodes):
        if n < 2:
            raise GridError(f"Axis {axis} needs at least 2 interior nodes, got {n}")

    budget = node_budget or get_settings().node_budget
    total = int(np.prod(nodes))
    if total > budget:
        raise BudgetExceededError(f"Grid with {total} nodes exceeds node budget {budget}")

    grid = Grid(lower, upper, nodes)
    logger.debug(f"Built grid shape={grid.shape} spacing={grid.spacing}")
    return grid


class GridFunction:
    """
    Real values on every node of a grid; +inf marks removed nodes when the
    function plays the role of V+ or of a mask.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size != grid.size:
            raise GridError(f"Grid function has {arr.size} values for {grid.size} nodes")
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GridFunction is immutable")

    @property
    def infinite(self) -> np.ndarray:
        return np.isposinf(self.values)

    def finite_values(self) -> np.ndarray:
        return np.where(self.infinite, 0.0, self.values)

    def norm_l1(self) -> float:
        return float(self.grid.cell_measure * np.abs(self.values).sum())

    def norm_l2(self) -> float:
        return float(np.sqrt(self.grid.cell_measure * np.dot(self.values, self.values)))

    def norm_linf(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def inner(self, other: "GridFunction") -> float:
        return float(self.grid.cell_measure * np.dot(self.values, other.values))

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values + other.values)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(self.grid, self.values * scalar)

    __rmul__ = __mul__
