"""
Heat semigroup e^{-tA}: eigen-expansion for dense operators, Lanczos
exponential with an a posteriori bound for large sparse ones.
"""
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np
import scipy.linalg as sla

from spectra_lab.core.exceptions import BudgetExceededError, ConvergenceError, DomainError
from spectra_lab.core.settings import get_settings
from spectra_lab.lattice.grid import GridFunction
from spectra_lab.lattice.operators import SymmetricOperator
from spectra_lab.spectral.eigensolvers import SpectralData, dense_eigendecomposition

logger = logging.getLogger(__name__)

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class HeatComputation:
    operator: SymmetricOperator
    t: float
    method: str
    error_bound: float
    result: np.ndarray  # active numbering

    def as_function(self) -> Union[GridFunction, np.ndarray]:
        return self.operator.extend(self.result) if self.operator.grid is not None else self.result


class KernelNorms(NamedTuple):
    c_12: float
    c_2inf: float


def _eigen_expansion(S: SpectralData, t: float, x: np.ndarray) -> HeatComputation:
    E = S.euclidean_vectors
    factors = np.exp(-t * S.eigenvalues)
    y = E @ (factors * (E.T @ x))
    bound = 10.0 * EPS * S.operator.dimension * np.linalg.norm(x) * max(1.0, float(factors.max()))
    return HeatComputation(S.operator, t, "eigen", float(bound), y)


def _krylov(A: SymmetricOperator, t: float, x: np.ndarray, tol: float, max_dim: int) -> HeatComputation:
    """
    Lanczos approximation ||x|| Q_m exp(-t T_m) e_1 with full reorthogonalization.
    The error estimate t * beta_m * |e_m^T exp(-t T_m) e_1| * ||x|| is checked
    after every step.
    """
    n = A.dimension
    norm_x = np.linalg.norm(x)
    m_max = min(max_dim, n)
    Q = np.zeros((n, m_max))
    alphas = np.zeros(m_max)
    betas = np.zeros(m_max)
    q = x / norm_x
    estimate = np.inf
    for m in range(1, m_max + 1):
        Q[:, m - 1] = q
        w = A.matvec(q)
        alphas[m - 1] = np.dot(q, w)
        w -= Q[:, :m] @ (Q[:, :m].T @ w)
        w -= Q[:, :m] @ (Q[:, :m].T @ w)
        beta = np.linalg.norm(w)
        betas[m - 1] = beta

        theta, S = sla.eigh_tridiagonal(alphas[:m], betas[: m - 1]) if m > 1 else (alphas[:1], np.ones((1, 1)))
        coeffs = S @ (np.exp(-t * theta) * S[0, :])
        estimate = t * beta * abs(coeffs[-1]) * norm_x
        if estimate <= tol or m == n or beta < 1e-14 * max(1.0, abs(alphas[m - 1])):
            y = norm_x * (Q[:, :m] @ coeffs)
            logger.debug(f"Krylov exponential converged in {m} steps, estimate {estimate:.2e}")
            return HeatComputation(A, t, "krylov", float(max(estimate, EPS * norm_x)), y)
        q = w / beta
    raise ConvergenceError(f"Krylov exponential did not reach {tol} within {m_max} steps", residuals=[float(estimate)])


def heat_computation(
    A: SymmetricOperator,
    t: float,
    v: Union[GridFunction, np.ndarray],
    method: str = "auto",
    spectrum: Optional[SpectralData] = None,
    tol: float = 1e-10,
) -> HeatComputation:
    """e^{-tA} v with the declared error bound of the method used"""
    if t < 0:
        raise DomainError(f"Time must be nonnegative, got {t}")
    x = A.restrict(v)
    if t == 0 or not x.any():
        return HeatComputation(A, float(t), "identity", 0.0, np.array(x))

    if method == "auto":
        method = "eigen" if spectrum is not None or A.dimension <= get_settings().dense_budget else "krylov"
    if method == "eigen":
        S = spectrum if spectrum is not None else dense_eigendecomposition(A)
        S.require_full("Eigen-expansion of the heat semigroup")
        return _eigen_expansion(S, float(t), x)
    if method == "krylov":
        return _krylov(A, float(t), x, tol, get_settings().krylov_max_dim)
    raise DomainError(f"Unknown heat method: {method}")


def heat_apply(
    A: SymmetricOperator,
    t: float,
    v: Union[GridFunction, np.ndarray],
    method: str = "auto",
    spectrum: Optional[SpectralData] = None,
) -> Union[GridFunction, np.ndarray]:
    result = heat_computation(A, t, v, method=method, spectrum=spectrum)
    if isinstance(v, GridFunction) or (A.grid is not None and np.size(v) == A.grid.size):
        return result.as_function()
    return result.result


def heat_kernel_matrix(A: SymmetricOperator, t: float, spectrum: Optional[SpectralData] = None) -> np.ndarray:
    """Matrix K of e^{-tA} acting on nodal values (active numbering)"""
    if spectrum is None:
        if A.dimension > get_settings().dense_budget:
            raise BudgetExceededError(f"Heat kernel of dimension {A.dimension} exceeds the dense budget")
        spectrum = dense_eigendecomposition(A)
    E = spectrum.euclidean_vectors
    return (E * np.exp(-t * spectrum.eigenvalues)) @ E.T


def heat_kernel_norms(A: SymmetricOperator, t: float, spectrum: Optional[SpectralData] = None) -> KernelNorms:
    """
    ||e^{-tA}||_{1->2} and ||e^{-tA}||_{2->inf} in the cell-weighted norms.
    Both equal the largest Euclidean row (column) norm of K divided by
    sqrt(h^d); the two are computed independently and compared.
    """
    if t < 0:
        raise DomainError(f"Time must be nonnegative, got {t}")
    K = heat_kernel_matrix(A, t, spectrum)
    root_w = np.sqrt(A.cell_measure)
    c_2inf = float(np.linalg.norm(K, axis=1).max() / root_w)
    c_12 = float(np.linalg.norm(K, axis=0).max() / root_w)
    if abs(c_12 - c_2inf) > 1e-8 * max(1.0, c_12):
        raise ConvergenceError(f"Kernel norms disagree: c_12={c_12!r}, c_2inf={c_2inf!r}")
    return KernelNorms(c_12, c_2inf)
