"""
Weyl residuals: how close lambda is to the spectrum for test vectors supported off K
"""
import logging

import numpy as np
import scipy.linalg as sla

from spectra_lab.core.exceptions import BudgetExceededError, DomainError
from spectra_lab.core.settings import get_settings
from spectra_lab.lattice.operators import SymmetricOperator

logger = logging.getLogger(__name__)


def weyl_residual(A: SymmetricOperator, lam: float, K=None) -> float:
    """
    min ||(A - lam)u|| over unit u supported on the active nodes outside K:
    the smallest singular value of the columns of A - lam indexed by K^c.
    """
    keep = np.ones(A.dimension, dtype=bool)
    if K is not None:
        if A.grid is not None:
            mask = np.zeros(A.grid.size, dtype=bool)
            arr = np.asarray(K)
            if arr.dtype == bool:
                mask |= arr.reshape(-1)
            elif arr.size:
                mask[arr.astype(int)] = True
            keep = ~mask[A.active]
        else:
            keep[np.asarray(K, dtype=int)] = False
    if not keep.any():
        raise DomainError("K covers every active node")
    if A.dimension > get_settings().dense_budget:
        raise BudgetExceededError(f"Weyl residual of dimension {A.dimension} exceeds the dense budget")

    shifted = A.dense() - lam * np.eye(A.dimension)
    residual = float(sla.svdvals(shifted[:, keep])[-1])
    logger.debug(f"Weyl residual at {lam} with {int(keep.sum())} free nodes: {residual:.3e}")
    return residual
