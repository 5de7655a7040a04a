"""
Named potential and measure families, evaluated on any grid.

The same specification is re-evaluated on every box of a truncation family,
so families are described analytically rather than by node values (the
`tabulated` family is the one exception and is tied to a single grid).
"""
import logging
from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from spectra_lab.core.exceptions import DomainError, GridError
from spectra_lab.lattice.grid import Grid, GridFunction
from spectra_lab.lattice.measures import DiscreteMeasure, atoms_from_pairs

logger = logging.getLogger(__name__)


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class Region(_Spec):
    shape: Literal["box", "ball", "strip"]
    lower: Optional[List[float]] = None
    upper: Optional[List[float]] = None
    center: Optional[List[float]] = None
    radius: Optional[float] = Field(None, gt=0)
    axis: int = 0
    half_width: Optional[float] = Field(None, gt=0)

    def contains(self, points: np.ndarray) -> np.ndarray:
        if self.shape == "box":
            if self.lower is None or self.upper is None:
                raise DomainError("Box region needs lower and upper")
            lo, hi = np.asarray(self.lower), np.asarray(self.upper)
            return np.all((points >= lo - 1e-12) & (points <= hi + 1e-12), axis=1)
        if self.shape == "ball":
            if self.center is None or self.radius is None:
                raise DomainError("Ball region needs center and radius")
            return np.linalg.norm(points - np.asarray(self.center), axis=1) <= self.radius + 1e-12
        if self.half_width is None:
            raise DomainError("Strip region needs half_width")
        # strip {|x_axis| <= half_width}
        return np.abs(points[:, self.axis]) <= self.half_width + 1e-12


class ZeroPotential(_Spec):
    family: Literal["zero"] = "zero"

    def evaluate(self, grid: Grid) -> GridFunction:
        return GridFunction(grid, np.zeros(grid.size))


class PolyTerm(_Spec):
    coef: float
    px: int = Field(0, ge=0)
    py: int = Field(0, ge=0)


class PolynomialPotential(_Spec):
    family: Literal["polynomial"] = "polynomial"
    terms: List[PolyTerm]

    def evaluate(self, grid: Grid) -> GridFunction:
        pts = grid.points()
        values = np.zeros(grid.size)
        for term in self.terms:
            if term.py and grid.dim < 2:
                raise GridError("Polynomial term in y on a 1D grid")
            part = term.coef * pts[:, 0] ** term.px
            if grid.dim == 2:
                part = part * pts[:, 1] ** term.py
            values += part
        return GridFunction(grid, values)


class PowerPotential(_Spec):
    family: Literal["power"] = "power"
    c: float = 1.0
    alpha: float = Field(2.0, ge=0)

    def evaluate(self, grid: Grid) -> GridFunction:
        r = np.linalg.norm(grid.points(), axis=1)
        return GridFunction(grid, self.c * r ** self.alpha)


class ProductSquaresPotential(_Spec):
    family: Literal["product_squares"] = "product_squares"
    c: float = 1.0

    def evaluate(self, grid: Grid) -> GridFunction:
        if grid.dim != 2:
            raise GridError("x^2 y^2 potential needs a 2D grid")
        pts = grid.points()
        return GridFunction(grid, self.c * pts[:, 0] ** 2 * pts[:, 1] ** 2)


class IndicatorPotential(_Spec):
    family: Literal["indicator"] = "indicator"
    region: Region
    inside: float = 0.0
    outside: float = float("inf")

    def evaluate(self, grid: Grid) -> GridFunction:
        inside = self.region.contains(grid.points())
        return GridFunction(grid, np.where(inside, self.inside, self.outside))


class DisjointBallsPotential(_Spec):
    """`inside` on balls of radius r centred at k*period on the x-axis, `outside` elsewhere"""

    family: Literal["disjoint_balls"] = "disjoint_balls"
    radius: float = Field(1.0, gt=0)
    period: float = Field(4.0, gt=0)
    inside: float = 0.0
    outside: float = float("inf")

    def evaluate(self, grid: Grid) -> GridFunction:
        if 2 * self.radius >= self.period:
            raise DomainError(f"Balls of radius {self.radius} overlap at period {self.period}")
        pts = grid.points()
        nearest = np.round(pts[:, 0] / self.period) * self.period
        offset = pts.copy()
        offset[:, 0] = pts[:, 0] - nearest
        inside = np.linalg.norm(offset, axis=1) <= self.radius + 1e-12
        return GridFunction(grid, np.where(inside, self.inside, self.outside))


class TabulatedPotential(_Spec):
    family: Literal["tabulated"] = "tabulated"
    values: List[float]

    def evaluate(self, grid: Grid) -> GridFunction:
        if len(self.values) != grid.size:
            raise GridError(f"Tabulated potential has {len(self.values)} values for {grid.size} nodes")
        return GridFunction(grid, self.values)


PotentialSpec = Annotated[
    Union[
        ZeroPotential,
        PolynomialPotential,
        PowerPotential,
        ProductSquaresPotential,
        IndicatorPotential,
        DisjointBallsPotential,
        TabulatedPotential,
    ],
    Field(discriminator="family"),
]


class LebesgueMeasure(_Spec):
    family: Literal["lebesgue"] = "lebesgue"
    c: float = Field(1.0, ge=0)

    def build(self, grid: Grid) -> DiscreteMeasure:
        return DiscreteMeasure.lebesgue(grid, self.c)


class CombMeasure(_Spec):
    """Atoms at k*period (1D); weight c for `unit`, c*|k| for `linear`"""

    family: Literal["comb"] = "comb"
    period: float = Field(1.0, gt=0)
    weight: Literal["unit", "linear"] = "unit"
    c: float = Field(1.0, ge=0)

    def build(self, grid: Grid) -> DiscreteMeasure:
        if grid.dim != 1:
            raise GridError("Comb measures are defined on 1D grids")
        lo, hi = grid.lower[0], grid.upper[0]
        k_min, k_max = int(np.ceil(lo / self.period)), int(np.floor(hi / self.period))
        pairs = []
        for k in range(k_min, k_max + 1):
            node = grid.nearest_node([k * self.period])
            if node is None:
                continue
            w = self.c if self.weight == "unit" else self.c * abs(k)
            if w > 0:
                pairs.append((node, w))
        return DiscreteMeasure(grid, atoms=atoms_from_pairs(pairs))


class AtomsMeasure(_Spec):
    family: Literal["atoms"] = "atoms"
    positions: List[List[float]]
    weights: List[float]

    def build(self, grid: Grid) -> DiscreteMeasure:
        if len(self.positions) != len(self.weights):
            raise DomainError("Atom positions and weights differ in length")
        pairs = []
        for x, w in zip(self.positions, self.weights):
            node = grid.nearest_node(x)
            if node is None:
                logger.debug(f"Atom at {x} falls outside the grid; dropped")
                continue
            pairs.append((node, w))
        return DiscreteMeasure(grid, atoms=atoms_from_pairs(pairs))


class InfiniteOutsideMeasure(_Spec):
    family: Literal["infinite_outside"] = "infinite_outside"
    region: Region

    def build(self, grid: Grid) -> DiscreteMeasure:
        return DiscreteMeasure(grid, infinite_mask=~self.region.contains(grid.points()))


MeasureSpec = Annotated[
    Union[LebesgueMeasure, CombMeasure, AtomsMeasure, InfiniteOutsideMeasure],
    Field(discriminator="family"),
]


def sum_measures(grid: Grid, measures: List[DiscreteMeasure]) -> DiscreteMeasure:
    """Sum of measures on one grid (densities add, atoms merge, masks unite)"""
    density = np.zeros(grid.size)
    mask = np.zeros(grid.size, dtype=bool)
    pairs = []
    for mu in measures:
        density += mu.density
        mask |= mu.infinite_mask
        pairs.extend(mu.atoms)
    return DiscreteMeasure(grid, density, atoms_from_pairs(pairs), mask)


def build_measures(specs, grid: Grid) -> DiscreteMeasure:
    return sum_measures(grid, [spec.build(grid) for spec in specs])
