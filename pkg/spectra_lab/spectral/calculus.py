"""
Functional calculus on full spectral data: phi(H), spectral projectors,
singular-value tails and Hilbert-Schmidt norms of B*phi(H).
"""
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, NamedTuple, Union

import numpy as np

from spectra_lab.core.exceptions import DomainError
from spectra_lab.lattice.operators import SymmetricOperator
from spectra_lab.spectral.eigensolvers import SpectralData, dense_eigendecomposition

logger = logging.getLogger(__name__)

ScalarMap = Callable[[np.ndarray], np.ndarray]
BOUNDARY_TOL = 1e-9


class Interval(NamedTuple):
    """Closed interval [lower, upper]; infinite ends allowed"""

    lower: float
    upper: float

    def contains(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        return (values >= self.lower) & (values <= self.upper)

    def near_boundary(self, values: np.ndarray, tol: float = BOUNDARY_TOL) -> np.ndarray:
        values = np.asarray(values)
        return (np.abs(values - self.lower) <= tol) | (np.abs(values - self.upper) <= tol)

    def intersect(self, other: "Interval") -> "Interval":
        return Interval(max(self.lower, other.lower), min(self.upper, other.upper))


def _spectral(A: Union[SymmetricOperator, SpectralData]) -> SpectralData:
    return A if isinstance(A, SpectralData) else dense_eigendecomposition(A)


def apply_scalar_map(phi: ScalarMap, values: np.ndarray) -> np.ndarray:
    """phi at every eigenvalue; DomainError if phi is undefined (non-finite) anywhere"""
    values = np.asarray(values, dtype=float)
    with np.errstate(all="ignore"):
        try:
            out = np.asarray(phi(values), dtype=float)
            if out.shape != values.shape:
                out = np.broadcast_to(out, values.shape).astype(float)
        except (TypeError, ValueError):
            out = np.array([float(phi(v)) for v in values])
    bad = ~np.isfinite(out)
    if bad.any():
        raise DomainError(f"Scalar map undefined at eigenvalue {values[bad][0]!r}")
    return out


def functional_calculus(S: SpectralData, phi: ScalarMap) -> SymmetricOperator:
    """phi(H) = V phi(Lambda) V^* in the weighted inner product"""
    S.require_full("Functional calculus")
    E = S.euclidean_vectors
    weights = apply_scalar_map(phi, S.eigenvalues)
    matrix = (E * weights) @ E.T
    return S.operator.with_matrix(matrix, gamma=float(weights.min()) if weights.size else None, form_bound=None)


def spectral_projector(S: SpectralData, interval: Interval) -> SymmetricOperator:
    """Orthogonal projector onto the eigenvectors with eigenvalue in the closed interval"""
    S.require_full("Spectral projector")
    ties = interval.near_boundary(S.eigenvalues)
    if ties.any():
        logger.warning(f"{int(ties.sum())} eigenvalue(s) within {BOUNDARY_TOL} of the boundary of {tuple(interval)}")
    E = S.euclidean_vectors[:, interval.contains(S.eigenvalues)]
    return S.operator.with_matrix(E @ E.T, gamma=0.0, form_bound=None)


@dataclass(frozen=True)
class CompositionCheck:
    defect: float
    ties: List[int]

    @property
    def tied(self) -> bool:
        return bool(self.ties)


def composition_identity_check(S: SpectralData, g: ScalarMap, interval: Interval) -> CompositionCheck:
    """
    ||1_I(g(H)) - 1_{g^-1(I)}(H)||_F. The left side comes from a fresh
    eigendecomposition of the matrix g(H); the right side selects the
    eigenvectors of H whose image under g falls in I.
    """
    S.require_full("Composition identity check")
    g_values = apply_scalar_map(g, S.eigenvalues)
    ties = np.flatnonzero(interval.near_boundary(g_values)).tolist()
    if ties:
        logger.info(f"Composition check: {len(ties)} tie(s) at the boundary of {tuple(interval)}")

    g_matrix = functional_calculus(S, g).dense()
    mu, W = np.linalg.eigh(g_matrix)
    W = W[:, interval.contains(mu)]
    lhs = W @ W.T

    E = S.euclidean_vectors[:, interval.contains(g_values)]
    rhs = E @ E.T
    return CompositionCheck(float(np.linalg.norm(lhs - rhs, "fro")), ties)


def _left_factor(B, A: SymmetricOperator) -> np.ndarray:
    """Dense matrix of B on the active space; B may be an operator or a node set"""
    if isinstance(B, SymmetricOperator):
        if B.dimension != A.dimension:
            raise DomainError(f"Left factor of dimension {B.dimension} for operator of dimension {A.dimension}")
        return B.dense()
    rows = np.zeros(A.dimension)
    if A.grid is None:
        rows[np.asarray(B, dtype=int)] = 1.0
    else:
        rows[A.positions(_active_part(B, A))] = 1.0
    return np.diag(rows)


def _active_part(nodes, A: SymmetricOperator) -> np.ndarray:
    """Grid nodes of the set that are active (an indicator acts as 0 elsewhere)"""
    mask = np.zeros(A.grid.size, dtype=bool)
    arr = np.asarray(nodes)
    if arr.dtype == bool:
        mask |= arr.reshape(-1)
    elif arr.size:
        mask[arr.astype(int)] = True
    return np.flatnonzero(mask & A.active)


def singular_values(B, A: Union[SymmetricOperator, SpectralData], phi: ScalarMap) -> np.ndarray:
    """Descending singular values of B*phi(A), from the eigenvalues of the symmetrized product"""
    S = _spectral(A)
    M = _left_factor(B, S.operator) @ functional_calculus(S, phi).dense()
    gram = M.T @ M
    sv2 = np.linalg.eigvalsh((gram + gram.T) * 0.5)
    return np.sqrt(np.clip(sv2, 0.0, None))[::-1]


def sv_tail(B, A: Union[SymmetricOperator, SpectralData], phi: ScalarMap, k: int) -> float:
    """sigma_{k+1}(B*phi(A)), the finite-scale compactness proxy"""
    S = _spectral(A)
    if k < 0 or k >= S.operator.dimension:
        raise DomainError(f"Tail index {k} out of range for dimension {S.operator.dimension}")
    return float(singular_values(B, S, phi)[k])


def hs_norm(B, A: Union[SymmetricOperator, SpectralData], t: float) -> float:
    """
    Hilbert-Schmidt norm of 1_E e^{-tA} from nodal coefficients into weighted
    L2: sqrt(h^d * sum over i in E, all j of K_ij^2), K the matrix of e^{-tA}.
    At t = 0 this is the square root of the active volume of E.
    """
    if t < 0:
        raise DomainError(f"Time must be nonnegative, got {t}")
    S = _spectral(A)
    rows = np.diag(_left_factor(B, S.operator)) > 0
    if not rows.any():
        return 0.0
    K = functional_calculus(S, lambda x: np.exp(-t * x)).dense()
    return float(np.sqrt(S.operator.cell_measure * np.sum(K[rows] ** 2)))


def hs_norm_expansion(B, A: Union[SymmetricOperator, SpectralData], t: float) -> float:
    """The same norm through the eigen-expansion sum_k e^{-2t lambda_k} ||1_E e_k||^2"""
    S = _spectral(A)
    S.require_full("Hilbert-Schmidt expansion")
    rows = np.diag(_left_factor(B, S.operator)) > 0
    E = S.euclidean_vectors
    restricted = S.operator.cell_measure * np.sum(E[rows] ** 2, axis=0)
    return float(np.sqrt(np.dot(np.exp(-2.0 * t * S.eigenvalues), restricted)))


def relative_compactness_profile(
    S: SpectralData,
    B,
    interval: Interval,
    lam: float,
    t: float,
    p: float,
    k: int,
) -> Dict[str, float]:
    """
    sigma_{k+1} of B 1_I(H), B (H - lam)^{-1}, B e^{-tH} and B (H + s)^{-p/2}
    with s = 1 - lambda_min: the equivalent relative-compactness conditions
    side by side for one B.
    """
    S.require_full("Relative compactness profile")
    if np.min(np.abs(S.eigenvalues - lam)) <= 1e-12:
        raise DomainError(f"{lam} is an eigenvalue; the resolvent is undefined there")
    s = 1.0 - float(S.eigenvalues[0])
    return {
        "spectral": sv_tail(B, S, lambda x: interval.contains(x).astype(float), k),
        "resolvent": sv_tail(B, S, lambda x: 1.0 / (x - lam), k),
        "semigroup": sv_tail(B, S, lambda x: np.exp(-t * x), k),
        "sobolev": sv_tail(B, S, lambda x: (x + s) ** (-p / 2.0), k),
    }
