"""
Capacity of a node set: min E[phi] + ||phi||^2 over phi >= 1 on U
"""
import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from spectra_lab.core.exceptions import ConvergenceError
from spectra_lab.lattice.grid import GridFunction
from spectra_lab.lattice.operators import SymmetricOperator

logger = logging.getLogger(__name__)

KKT_TOL = 1e-10


@dataclass(frozen=True)
class CapacityResult:
    cap: float
    minimizer: Union[GridFunction, np.ndarray]
    kkt_ok: bool
    iterations: int = 0


def _solve_clamped(Q, clamped: np.ndarray) -> np.ndarray:
    """phi = 1 on the clamped positions, Q phi = 0 on the rest"""
    n = Q.shape[0]
    phi = np.zeros(n)
    phi[clamped] = 1.0
    free = ~clamped
    if free.any():
        if sp.issparse(Q):
            Q = Q.tocsr()
            rhs = -np.asarray(Q[free][:, clamped] @ phi[clamped]).ravel()
            phi[free] = spla.spsolve(Q[free][:, free].tocsc(), rhs)
        else:
            rhs = -Q[np.ix_(free, clamped)] @ phi[clamped]
            phi[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs)
    return phi


def capacity(U, A: SymmetricOperator, max_iter: Optional[int] = None) -> CapacityResult:
    """
    Obstacle problem for A + I. First clamp phi = 1 on all of U and check the
    multipliers (for Laplacian-type A the maximum principle makes this
    optimal); otherwise a primal-dual active-set loop over the nodes of U.
    """
    w = A.cell_measure
    U_pos = A.positions(U)
    n = A.dimension
    if U_pos.size == 0:
        zero = np.zeros(n)
        return CapacityResult(0.0, A.extend(zero) if A.grid is not None else zero, True)

    shifted = A.shifted(1.0)
    Q = shifted.matrix
    in_U = np.zeros(n, dtype=bool)
    in_U[U_pos] = True
    working = in_U.copy()
    max_iter = max_iter or U_pos.size + 10
    c = 2.0 * w * float(np.abs(shifted.diagonal()).max())

    for iteration in range(1, max_iter + 1):
        phi = _solve_clamped(Q, working)
        grad = 2.0 * w * np.asarray(Q @ phi).ravel()
        multipliers = np.where(working, grad, 0.0)
        scale = max(1.0, float(np.abs(grad).max()))
        feasible = np.all(phi[in_U] >= 1.0 - 1e-12)
        dual_ok = np.all(multipliers[working] >= -KKT_TOL * scale)
        if feasible and dual_ok:
            cap = float(w * np.dot(phi, np.asarray(Q @ phi).ravel()))
            logger.debug(f"Capacity of {U_pos.size} nodes: {cap:.10g} after {iteration} solve(s)")
            return CapacityResult(cap, A.extend(phi) if A.grid is not None else phi, True, iteration)
        updated = in_U & (multipliers + c * (1.0 - phi) > 0)
        if np.array_equal(updated, working):
            break
        working = updated

    raise ConvergenceError(f"Active-set iteration for capacity did not settle in {max_iter} steps")
