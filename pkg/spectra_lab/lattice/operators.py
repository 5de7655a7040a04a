"""
Symmetric operators on the active nodes of a grid
"""
import hashlib
import logging
from typing import Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from spectra_lab.core.exceptions import DomainError, GridError
from spectra_lab.lattice.grid import Grid, GridFunction
from spectra_lab.lattice.measures import node_index

logger = logging.getLogger(__name__)

MatrixLike = Union[np.ndarray, sp.spmatrix]


class SymmetricOperator:
    """
    Real symmetric matrix acting on the active nodes of a grid.

    The Hilbert space is l2(active nodes) with inner product h^d * sum(u*v),
    so the matrix is selfadjoint there exactly when it is symmetric. Nodes
    removed by V+ = inf (or by an infinite measure) are absent from `active`.
    """

    def __init__(
        self,
        matrix: MatrixLike,
        grid: Optional[Grid] = None,
        active: Optional[np.ndarray] = None,
        gamma: Optional[float] = None,
        form_bound: Optional[Tuple[float, float]] = None,
        cell_measure: Optional[float] = None,
        label: str = "",
    ):
        if sp.issparse(matrix):
            m = sp.csr_matrix(matrix, dtype=float)
            m = ((m + m.T) * 0.5).tocsr()
            m.sum_duplicates()
            m.sort_indices()
        else:
            m = np.array(matrix, dtype=float)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise GridError(f"Operator matrix must be square, got shape {m.shape}")
            m = (m + m.T) * 0.5
            m.setflags(write=False)

        n = m.shape[0]
        if grid is None:
            act = np.ones(n, dtype=bool)
        else:
            act = np.ones(grid.size, dtype=bool) if active is None else np.array(active, dtype=bool).reshape(-1)
            if act.size != grid.size:
                raise GridError(f"Active mask has {act.size} entries for {grid.size} nodes")
        if int(act.sum()) != n:
            raise GridError(f"Matrix dimension {n} does not match {int(act.sum())} active nodes")
        act.setflags(write=False)

        self.matrix = m
        self.grid = grid
        self.active = act
        self.gamma = gamma
        self.form_bound = form_bound
        self.label = label
        if grid is not None:
            self.cell_measure = grid.cell_measure
        else:
            self.cell_measure = 1.0 if cell_measure is None else float(cell_measure)

    @classmethod
    def from_matrix(cls, matrix: MatrixLike, gamma: Optional[float] = None, label: str = "") -> "SymmetricOperator":
        """Operator without a grid (unit cell measure)"""
        return cls(matrix, gamma=gamma, label=label)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.matrix)

    @property
    def active_index(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else np.array(self.matrix)

    def sparse(self) -> sp.csr_matrix:
        return self.matrix if self.is_sparse else sp.csr_matrix(self.matrix)

    def diagonal(self) -> np.ndarray:
        return np.asarray(self.matrix.diagonal()).ravel()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.matrix @ x)

    def digest(self) -> str:
        """SHA-256 of the matrix entries, active mask and cell measure"""
        sha = hashlib.sha256()
        if self.is_sparse:
            for part in (self.matrix.indptr, self.matrix.indices, self.matrix.data):
                sha.update(np.ascontiguousarray(part).tobytes())
        else:
            sha.update(np.ascontiguousarray(self.matrix).tobytes())
        sha.update(np.packbits(self.active).tobytes())
        sha.update(np.float64(self.cell_measure).tobytes())
        return sha.hexdigest()

    def is_exactly_symmetric(self) -> bool:
        if self.is_sparse:
            diff = (self.matrix - self.matrix.T).tocsr()
            diff.eliminate_zeros()
            return diff.nnz == 0
        return bool(np.array_equal(self.matrix, self.matrix.T))

    def gershgorin_bounds(self) -> Tuple[float, float]:
        diag = self.diagonal()
        if self.is_sparse:
            radius = np.asarray(abs(self.matrix).sum(axis=1)).ravel() - np.abs(diag)
        else:
            radius = np.abs(self.matrix).sum(axis=1) - np.abs(diag)
        return float((diag - radius).min()), float((diag + radius).max())

    def positions(self, nodes) -> np.ndarray:
        """Positions in the active numbering of the given grid nodes (all must be active)"""
        if self.grid is None:
            return node_index(nodes, self.dimension)
        idx = node_index(nodes, self.grid.size)
        if idx.size and not self.active[idx].all():
            raise DomainError("Node set meets inactive nodes")
        lookup = np.cumsum(self.active) - 1
        return lookup[idx]

    def restrict(self, u: Union[GridFunction, np.ndarray]) -> np.ndarray:
        """Nodal values of u on the active nodes"""
        if isinstance(u, GridFunction):
            if self.grid is None or u.grid.shape != self.grid.shape:
                raise GridError("Grid function lives on a different grid")
            if np.any(u.values[~self.active] != 0):
                raise DomainError("Function is not supported on the active nodes")
            return np.array(u.values[self.active])
        arr = np.asarray(u, dtype=float).reshape(-1)
        if arr.size == self.dimension:
            return arr
        if self.grid is not None and arr.size == self.grid.size:
            if np.any(arr[~self.active] != 0):
                raise DomainError("Vector is not supported on the active nodes")
            return arr[self.active]
        raise GridError(f"Vector of length {arr.size} does not match operator dimension {self.dimension}")

    def extend(self, x: np.ndarray) -> GridFunction:
        """Grid function equal to x on active nodes and 0 elsewhere"""
        if self.grid is None:
            raise GridError("Operator has no grid to extend onto")
        values = np.zeros(self.grid.size)
        values[self.active] = x
        return GridFunction(self.grid, values)

    def with_matrix(self, matrix: MatrixLike, **overrides) -> "SymmetricOperator":
        kwargs = dict(
            grid=self.grid,
            active=self.active,
            gamma=self.gamma,
            form_bound=self.form_bound,
            cell_measure=self.cell_measure,
            label=self.label,
        )
        kwargs.update(overrides)
        return SymmetricOperator(matrix, **kwargs)

    def compress(self, keep: np.ndarray) -> "SymmetricOperator":
        """
        Principal compression onto the active positions flagged by `keep`
        (a boolean array over the current active numbering).
        """
        keep = np.asarray(keep, dtype=bool)
        if keep.size != self.dimension:
            raise GridError(f"Keep mask has {keep.size} entries for dimension {self.dimension}")
        idx = np.flatnonzero(keep)
        if self.is_sparse:
            sub = self.matrix[idx][:, idx]
        else:
            sub = self.matrix[np.ix_(idx, idx)]
        if self.grid is None:
            return SymmetricOperator(sub, gamma=self.gamma, cell_measure=self.cell_measure, label=self.label)
        active = np.zeros(self.grid.size, dtype=bool)
        active[self.active_index[idx]] = True
        # compression keeps any lower form bound
        return self.with_matrix(sub, active=active)

    def shifted(self, c: float) -> "SymmetricOperator":
        eye = sp.identity(self.dimension, format="csr") if self.is_sparse else np.eye(self.dimension)
        gamma = None if self.gamma is None else self.gamma + c
        return self.with_matrix(self.matrix + c * eye, gamma=gamma)


def quadratic_form(A: SymmetricOperator, u: Union[GridFunction, np.ndarray]) -> float:
    """h[u] = h^d * u^T A u"""
    x = A.restrict(u)
    return float(A.cell_measure * np.dot(x, A.matvec(x)))


def weighted_norm(A: SymmetricOperator, x: np.ndarray) -> float:
    return float(np.sqrt(A.cell_measure * np.dot(x, x)))
