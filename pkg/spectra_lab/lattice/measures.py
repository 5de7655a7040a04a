"""
Discrete measures on a grid: cell densities, point atoms and an infinite mask
"""
import hashlib
import logging
from typing import Dict, Iterable, Mapping, Optional, Tuple

import numpy as np

from spectra_lab.core.exceptions import DomainError, GridError
from spectra_lab.lattice.grid import Grid

logger = logging.getLogger(__name__)


class DiscreteMeasure:
    """
    mu = density * (cell measure) + sum of atoms + infinity on the mask.

    The measure of a single cell i is density[i] * h^d plus the atom weight
    sitting at node i; a node in the infinite mask carries infinite mass.
    """

    __slots__ = ("grid", "density", "atoms", "infinite_mask")

    def __init__(
        self,
        grid: Grid,
        density=None,
        atoms: Optional[Mapping[int, float]] = None,
        infinite_mask=None,
    ):
        dens = np.zeros(grid.size) if density is None else np.array(density, dtype=float).reshape(-1)
        if dens.size != grid.size:
            raise GridError(f"Density has {dens.size} values for {grid.size} nodes")
        if np.any(~np.isfinite(dens)) or np.any(dens < 0):
            raise DomainError("Density must be finite and nonnegative")

        atom_map: Dict[int, float] = {}
        for node, weight in (atoms or {}).items():
            node = int(node)
            if node < 0 or node >= grid.size:
                raise GridError(f"Atom node {node} outside grid of {grid.size} nodes")
            if not np.isfinite(weight) or weight < 0:
                raise DomainError(f"Atom weight at node {node} must be finite and nonnegative, got {weight}")
            atom_map[node] = float(weight)

        mask = np.zeros(grid.size, dtype=bool) if infinite_mask is None else np.array(infinite_mask, dtype=bool).reshape(-1)
        if mask.size != grid.size:
            raise GridError(f"Infinite mask has {mask.size} entries for {grid.size} nodes")

        dens.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", dens)
        object.__setattr__(self, "atoms", tuple(sorted(atom_map.items())))
        object.__setattr__(self, "infinite_mask", mask)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteMeasure is immutable")

    @classmethod
    def zero(cls, grid: Grid) -> "DiscreteMeasure":
        return cls(grid)

    @classmethod
    def lebesgue(cls, grid: Grid, c: float = 1.0) -> "DiscreteMeasure":
        return cls(grid, density=np.full(grid.size, float(c)))

    @classmethod
    def infinite_on(cls, grid: Grid, nodes: Iterable[int]) -> "DiscreteMeasure":
        mask = np.zeros(grid.size, dtype=bool)
        mask[np.fromiter(nodes, dtype=int)] = True
        return cls(grid, infinite_mask=mask)

    @property
    def has_infinite(self) -> bool:
        return bool(self.infinite_mask.any())

    def atom_array(self) -> np.ndarray:
        weights = np.zeros(self.grid.size)
        for node, weight in self.atoms:
            weights[node] = weight
        return weights

    def cell_masses(self) -> np.ndarray:
        """Mass of every cell, inf on the infinite mask"""
        masses = self.density * self.grid.cell_measure + self.atom_array()
        return np.where(self.infinite_mask, np.inf, masses)

    def digest(self) -> str:
        sha = hashlib.sha256(np.ascontiguousarray(self.cell_masses()).tobytes())
        sha.update(np.float64(self.grid.cell_measure).tobytes())
        return sha.hexdigest()

    def total_mass(self, nodes=None) -> float:
        masses = self.cell_masses()
        if nodes is not None:
            masses = masses[_as_index(nodes, self.grid.size)]
        return float(masses.sum()) if masses.size else 0.0

    def form_diagonal(self) -> np.ndarray:
        """
        Diagonal matrix entries of the measure form: density + atom / h^d, so
        that h^d * sum(diag * u^2) equals the integral of u^2 against mu.
        Infinite-mask nodes carry 0 here; they are removed from the active set.
        """
        diag = self.density + self.atom_array() / self.grid.cell_measure
        return np.where(self.infinite_mask, 0.0, diag)

    def integrate_square(self, values: np.ndarray) -> float:
        """mu[u, u] for nodal values u over the whole grid"""
        values = np.asarray(values, dtype=float)
        if np.any(self.infinite_mask & (values != 0)):
            return float("inf")
        return float(self.grid.cell_measure * np.dot(self.form_diagonal(), values * values))

    def scaled(self, c: float) -> "DiscreteMeasure":
        if c < 0:
            raise DomainError(f"Scale must be nonnegative, got {c}")
        return DiscreteMeasure(
            self.grid,
            self.density * c,
            {node: weight * c for node, weight in self.atoms},
            self.infinite_mask,
        )


def _as_index(nodes, size: int) -> np.ndarray:
    arr = np.asarray(nodes)
    if arr.dtype == bool:
        if arr.size != size:
            raise GridError(f"Boolean node set has {arr.size} entries for {size} nodes")
        return np.flatnonzero(arr)
    return arr.astype(int).reshape(-1)


def node_index(nodes, size: int) -> np.ndarray:
    """Normalize a node set (boolean mask or index collection) to sorted unique indices"""
    return np.unique(_as_index(nodes, size))


def node_mask(nodes, size: int) -> np.ndarray:
    mask = np.zeros(size, dtype=bool)
    mask[_as_index(nodes, size)] = True
    return mask


def atoms_from_pairs(pairs: Iterable[Tuple[int, float]]) -> Dict[int, float]:
    """Merge (node, weight) pairs so each node appears at most once"""
    merged: Dict[int, float] = {}
    for node, weight in pairs:
        merged[int(node)] = merged.get(int(node), 0.0) + float(weight)
    return merged
