"""
Eigensolvers for SymmetricOperator: dense oracle, Lanczos with full
reorthogonalization, and ARPACK for large sparse operators.
"""
import logging
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from spectra_lab.core.exceptions import BudgetExceededError, ConvergenceError, DomainError
from spectra_lab.core.settings import get_settings
from spectra_lab.lattice.grid import GridFunction
from spectra_lab.lattice.operators import SymmetricOperator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralData:
    """
    Ascending eigenvalues with eigenvectors orthonormal in the cell-weighted
    inner product (columns, active numbering).
    """

    operator: SymmetricOperator
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    complete: bool
    residuals: np.ndarray
    method: str = "dense"
    meta: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def euclidean_vectors(self) -> np.ndarray:
        """Eigenvectors normalized in the plain Euclidean inner product"""
        return self.eigenvectors * np.sqrt(self.operator.cell_measure)

    def eigenfunction(self, k: int) -> GridFunction:
        return self.operator.extend(self.eigenvectors[:, k])

    def require_full(self, what: str) -> None:
        if not self.complete:
            raise DomainError(f"{what} needs a full spectral decomposition, got {self.count} of {self.operator.dimension} pairs")


class CountResult(NamedTuple):
    count: int
    is_lower_bound: bool


def _pack(A: SymmetricOperator, values: np.ndarray, unit_vectors: np.ndarray, complete: bool, method: str) -> SpectralData:
    order = np.argsort(values, kind="stable")
    values = np.asarray(values)[order]
    unit_vectors = np.asarray(unit_vectors)[:, order]
    residual_matrix = np.asarray(A.matrix @ unit_vectors) - unit_vectors * values
    residuals = np.linalg.norm(residual_matrix, axis=0)
    vectors = unit_vectors / np.sqrt(A.cell_measure)
    values.setflags(write=False)
    vectors.setflags(write=False)
    return SpectralData(A, values, vectors, complete, residuals, method)


def dense_eigendecomposition(A: SymmetricOperator, dense_budget: Optional[int] = None) -> SpectralData:
    """Full eigendecomposition via LAPACK; the oracle for every other spectral routine"""
    budget = dense_budget or get_settings().dense_budget
    if A.dimension > budget:
        raise BudgetExceededError(f"Active dimension {A.dimension} exceeds dense budget {budget}")
    values, vectors = np.linalg.eigh(A.dense())
    logger.debug(f"Dense eigendecomposition of dimension {A.dimension}")
    return _pack(A, values, vectors, True, "dense")


def _lanczos_pass(
    A: SymmetricOperator,
    locked: np.ndarray,
    k: int,
    tol: float,
    max_iter: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One Lanczos run on the complement of the locked vectors, with full
    reorthogonalization against the locked set and every previous Lanczos
    vector. Returns converged lowest Ritz pairs (contiguous from the bottom)
    and the estimated residuals of all k lowest Ritz pairs.
    """
    n = A.dimension
    free_dim = n - locked.shape[1]
    steps = min(max_iter, free_dim)

    def project(v: np.ndarray, Q: np.ndarray) -> np.ndarray:
        if locked.shape[1]:
            v = v - locked @ (locked.T @ v)
        if Q.shape[1]:
            v = v - Q @ (Q.T @ v)
        return v

    q = project(rng.standard_normal(n), np.zeros((n, 0)))
    q = project(q, np.zeros((n, 0)))
    q /= np.linalg.norm(q)

    Q = np.zeros((n, steps))
    alphas = np.zeros(steps)
    betas = np.zeros(steps)
    check_every = 10
    m = 0
    estimates = np.full(k, np.inf)
    for m in range(1, steps + 1):
        Q[:, m - 1] = q
        w = A.matvec(q)
        alphas[m - 1] = np.dot(q, w)
        # twice is enough
        w = project(project(w, Q[:, :m]), Q[:, :m])
        beta = np.linalg.norm(w)
        betas[m - 1] = beta

        breakdown = beta < 1e-13 * max(1.0, abs(alphas[m - 1]))
        if m % check_every == 0 or m == steps or breakdown:
            theta, S = sla.eigh_tridiagonal(alphas[:m], betas[: m - 1])
            kk = min(k, m)
            estimates = np.abs(beta * S[-1, :kk])
            if breakdown:
                estimates[:] = 0.0
            converged = 0
            while converged < kk and estimates[converged] <= tol:
                converged += 1
            logger.debug(f"Lanczos step {m}: converged {converged}/{k}, worst estimate {estimates.max():.2e}")
            if converged == k or breakdown or m == steps:
                ritz = Q[:, :m] @ S[:, :converged]
                return theta[:converged], ritz, estimates
        q = w / beta
    return np.zeros(0), np.zeros((n, 0)), estimates


def lanczos_eigenpairs(
    A: SymmetricOperator,
    k: int,
    tol: float = 1e-8,
    max_iter: Optional[int] = None,
    seed: int = 0,
) -> SpectralData:
    """
    Lowest k eigenpairs by repeated deflated Lanczos runs with locking. A final
    verification run on the complement of the locked vectors catches missed
    multiplicities.
    """
    n = A.dimension
    max_iter = max_iter or get_settings().lanczos_max_iter
    rng = np.random.default_rng(seed)
    values: List[float] = []
    locked = np.zeros((n, 0))
    best = np.full(k, np.inf)

    for _ in range(4 * k + 4):
        need = k - len(values)
        verifying = need <= 0
        if locked.shape[1] >= n:
            break
        theta, ritz, estimates = _lanczos_pass(A, locked, max(need, 1), 0.1 * tol, max_iter, rng)
        if theta.size == 0:
            best = estimates
            break
        if verifying:
            if theta[0] >= values[-1] - tol:
                break
            # a missed copy of a multiple eigenvalue
            theta, ritz = theta[:1], ritz[:, :1]
        values.extend(theta.tolist())
        locked = np.hstack([locked, ritz])
        order = np.argsort(values, kind="stable")
        values = [values[i] for i in order[:k]]
        locked = locked[:, order[:k]]
        # refresh orthonormality of the locked block
        locked, _ = np.linalg.qr(locked)
        values = list(np.diag(locked.T @ A.matvec(locked)))
        order = np.argsort(values, kind="stable")
        values = [values[i] for i in order]
        locked = locked[:, order]
    else:
        raise ConvergenceError(f"Lanczos did not settle on {k} eigenpairs", residuals=best.tolist())

    if len(values) < k:
        raise ConvergenceError(f"Lanczos converged {len(values)} of {k} eigenpairs", residuals=best.tolist())

    data = _pack(A, np.array(values), locked, k == n, "lanczos")
    if data.residuals.max() > tol:
        raise ConvergenceError(
            f"Lanczos residuals above tolerance {tol}", residuals=data.residuals.tolist()
        )
    return data


def arpack_eigenpairs(A: SymmetricOperator, k: int, tol: float = 1e-8, seed: int = 0) -> SpectralData:
    """Lowest k eigenpairs via ARPACK in shift-invert mode below the Gershgorin bound"""
    lower, upper = A.gershgorin_bounds()
    sigma = lower - max(1.0, 1e-6 * (upper - lower))
    try:
        v0 = np.random.default_rng(seed).standard_normal(A.dimension)
        values, vectors = spla.eigsh(A.sparse().tocsc(), k=k, sigma=sigma, which="LM", v0=v0)
    except spla.ArpackNoConvergence as e:
        raise ConvergenceError(f"ARPACK did not converge for k={k}: {e}") from e
    data = _pack(A, values, vectors, False, "arpack")
    if data.residuals.max() > tol:
        raise ConvergenceError(f"ARPACK residuals above tolerance {tol}", residuals=data.residuals.tolist())
    return data


def lowest_eigenpairs(
    A: SymmetricOperator,
    k: int,
    tol: float = 1e-8,
    method: str = "auto",
    dense_budget: Optional[int] = None,
    seed: int = 0,
) -> SpectralData:
    """The k lowest eigenpairs of A, each with residual at most tol"""
    n = A.dimension
    if k < 1 or k > n:
        raise DomainError(f"Requested {k} eigenpairs of an operator of dimension {n}")
    budget = dense_budget or get_settings().dense_budget

    if method == "auto":
        method = "dense" if n <= budget else "arpack"
    if k == n or (method == "arpack" and k >= n - 1):
        method = "dense"

    if method == "dense":
        full = dense_eigendecomposition(A, dense_budget=max(budget, n) if k == n else budget)
        if k == n:
            return full
        values = np.array(full.eigenvalues[:k])
        vectors = np.array(full.euclidean_vectors[:, :k])
        return _pack(A, values, vectors, False, "dense")
    if method == "lanczos":
        return lanczos_eigenpairs(A, k, tol=tol, seed=seed)
    if method == "arpack":
        return arpack_eigenpairs(A, k, tol=tol, seed=seed)
    raise DomainError(f"Unknown eigensolver method: {method}")


def eigenpairs_below(
    A: SymmetricOperator,
    threshold: float,
    tol: float = 1e-8,
    start: int = 16,
    max_pairs: Optional[int] = None,
) -> SpectralData:
    """
    Enough lowest eigenpairs to cover every eigenvalue <= threshold: the
    request doubles until the largest retained eigenvalue exceeds threshold
    or the whole spectrum is retained.
    """
    max_pairs = max_pairs or get_settings().max_eigenpairs
    n = A.dimension
    k = min(start, n)
    while True:
        data = lowest_eigenpairs(A, k, tol=tol)
        if data.complete or data.eigenvalues[-1] > threshold:
            return data
        if k >= max_pairs:
            raise BudgetExceededError(
                f"More than {max_pairs} eigenvalues lie below {threshold} (dimension {n})"
            )
        k = min(2 * k, max_pairs, n)


def lowest_eigenvalue(A: SymmetricOperator, tol: float = 1e-10) -> Tuple[float, np.ndarray]:
    """Smallest eigenvalue and its Euclidean-unit eigenvector"""
    n = A.dimension
    if n <= get_settings().dense_budget:
        values, vectors = sla.eigh(A.dense(), subset_by_index=[0, 0])
        return float(values[0]), vectors[:, 0]
    data = lowest_eigenpairs(A, 1, tol=tol)
    return float(data.eigenvalues[0]), data.euclidean_vectors[:, 0]


def counting_function(S: SpectralData, threshold: float) -> CountResult:
    """#{k : lambda_k <= threshold}; flagged as a lower bound when partial data cannot see past threshold"""
    count = int(np.searchsorted(S.eigenvalues, threshold, side="right"))
    lower_bound = (not S.complete) and count == S.count
    if lower_bound:
        logger.warning(f"Count {count} below {threshold} is only a lower bound ({S.count} pairs retained)")
    return CountResult(count, lower_bound)
