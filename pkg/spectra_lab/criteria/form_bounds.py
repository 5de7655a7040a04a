"""
Relative form bounds of a negative part and the essential-spectrum threshold
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from spectra_lab.core.exceptions import DomainError, KLMNViolationError
from spectra_lab.core.settings import get_settings
from spectra_lab.lattice.grid import GridFunction
from spectra_lab.lattice.measures import DiscreteMeasure
from spectra_lab.lattice.operators import SymmetricOperator
from spectra_lab.spectral.eigensolvers import lowest_eigenvalue

logger = logging.getLogger(__name__)

KLMN_LADDER: Tuple[float, ...] = (0.0,) + tuple(float(2**j) for j in range(17))

NegativePart = Union[GridFunction, DiscreteMeasure, np.ndarray]


@dataclass(frozen=True)
class FormBound:
    """q with minus[u] <= q*base[u] + q*C*||u||^2, attained at `witness`"""

    q: float
    C: float
    witness: Optional[np.ndarray] = None

    @property
    def C_q(self) -> float:
        return self.q * self.C


@dataclass(frozen=True)
class KLMNResult:
    q: float
    C: float
    scan: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def C_q(self) -> float:
        return self.q * self.C


def negative_diagonal(minus: NegativePart, base: SymmetricOperator) -> np.ndarray:
    """Diagonal of the negative-part form on the active nodes of base"""
    if isinstance(minus, DiscreteMeasure):
        if minus.has_infinite:
            raise DomainError("Negative measure must not carry an infinite part")
        values = minus.form_diagonal()
    elif isinstance(minus, GridFunction):
        values = minus.values
    else:
        values = np.asarray(minus, dtype=float).reshape(-1)

    if values.size != base.dimension:
        if base.grid is None or values.size != base.grid.size:
            raise DomainError(f"Negative part has {values.size} values for dimension {base.dimension}")
        values = values[base.active]
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        raise DomainError("Negative part must be finite and nonnegative")
    return np.asarray(values, dtype=float)


def form_bound_estimate(minus: NegativePart, base: SymmetricOperator, C: float) -> FormBound:
    """
    Largest generalized eigenvalue q of the pencil (M-, base + C). The
    eigenvector is the extremal u for the inequality.
    """
    diag = negative_diagonal(minus, base)
    shifted = base.shifted(C)
    lam_min, _ = lowest_eigenvalue(shifted)
    if lam_min <= 0:
        raise DomainError(f"base + {C} is not positive definite (lowest eigenvalue {lam_min:.3e})")
    if not diag.any():
        return FormBound(0.0, float(C), None)

    n = base.dimension
    if n <= get_settings().dense_budget:
        q, vec = sla.eigh(np.diag(diag), shifted.dense(), subset_by_index=[n - 1, n - 1])
        q, vec = float(q[0]), vec[:, 0]
    else:
        q, vec = spla.eigsh(sp.diags(diag).tocsc(), k=1, M=shifted.sparse().tocsc(), which="LA")
        q, vec = float(q[0]), vec[:, 0]
    vec = vec / np.linalg.norm(vec)
    logger.debug(f"Form bound at C={C}: q={q:.6g}")
    return FormBound(max(q, 0.0), float(C), vec)


def klmn_scan(minus: NegativePart, base: SymmetricOperator, ladder: Sequence[float] = KLMN_LADDER) -> KLMNResult:
    """
    Walk C up the ladder and stop at the first q(C) < 1. Values of C that
    leave base + C indefinite are recorded with q = inf.
    """
    scan: List[Tuple[float, float]] = []
    for C in ladder:
        try:
            bound = form_bound_estimate(minus, base, C)
        except DomainError as e:
            if "positive definite" not in str(e):
                raise
            scan.append((float(C), float("inf")))
            continue
        scan.append((float(C), bound.q))
        if bound.q < 1.0:
            logger.info(f"KLMN scan accepted C={C} with q={bound.q:.6g}")
            return KLMNResult(bound.q, float(C), scan)
    raise KLMNViolationError(f"Form bound q >= 1 for every C up to {ladder[-1]}", scan=scan)


def essential_threshold(q: float, C_q: float, gamma: float, s: float) -> float:
    """(1 - q)(gamma + s) - C_q: the essential spectrum lies above this value"""
    if not 0.0 <= q < 1.0:
        raise DomainError(f"Form bound must satisfy 0 <= q < 1, got {q}")
    return (1.0 - q) * (gamma + s) - C_q


def threshold_sweep(q: float, C_q: float, gamma: float, s_values: Sequence[float]) -> List[Tuple[float, float]]:
    """essential_threshold along an increasing ladder of sublevel heights"""
    s_sorted = sorted(float(s) for s in s_values)
    return [(s, essential_threshold(q, C_q, gamma, s)) for s in s_sorted]
