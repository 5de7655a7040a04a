"""
The semigroup form inequality ||e^{-tA}f - f||^2 <= 2t h[f] and the super
Poincare inequality ||f||^2 <= r h[f] + beta(r) ||f||_1^2.

Certified beta: with P = e^{-tA},
    ||f||^2 = (f - Pf, f) + (Pf, f) <= (||f - Pf|| + ||Pf||) ||f||,
so ||f|| <= sqrt(2t h[f]) + c_12(t) ||f||_1 and (a + b)^2 <= 2a^2 + 2b^2 gives
    ||f||^2 <= 4t h[f] + 2 c_12(t)^2 ||f||_1^2.
Taking t = r/4 yields beta(r) = 2 c_12(r/4)^2.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from spectra_lab.core.exceptions import DomainError
from spectra_lab.lattice.operators import SymmetricOperator
from spectra_lab.semigroup.heat import heat_kernel_matrix, heat_kernel_norms
from spectra_lab.spectral.eigensolvers import SpectralData, dense_eigendecomposition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SuperPoincareResult:
    r: float
    t: float
    c_12: float
    beta_certified: float
    beta_observed: float

    @property
    def holds(self) -> bool:
        return self.beta_observed <= self.beta_certified + 1e-8


def _require_nonnegative(A: SymmetricOperator, S: SpectralData) -> None:
    if A.gamma is not None and A.gamma < 0:
        raise DomainError(f"Operator lower bound {A.gamma} is negative")
    if S.eigenvalues[0] < -1e-10 * max(1.0, abs(S.eigenvalues[-1])):
        raise DomainError(f"Operator has negative eigenvalue {S.eigenvalues[0]:.3e}")


def _random_unit_samples(A: SymmetricOperator, samples: int, seed: int) -> np.ndarray:
    """Columns with unit weighted norm"""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((A.dimension, samples))
    return X / (np.linalg.norm(X, axis=0) * np.sqrt(A.cell_measure))


def semigroup_form_inequality_check(
    A: SymmetricOperator,
    t: float,
    samples: int = 100,
    seed: int = 0,
    spectrum: Optional[SpectralData] = None,
) -> float:
    """max of ||e^{-tA}f - f||^2 - 2t h[f] over random unit f and every eigenvector"""
    S = spectrum if spectrum is not None else dense_eigendecomposition(A)
    _require_nonnegative(A, S)
    w = A.cell_measure
    K = heat_kernel_matrix(A, t, S)
    X = np.hstack([_random_unit_samples(A, samples, seed), S.eigenvectors])
    diff = K @ X - X
    lhs = w * np.sum(diff * diff, axis=0)
    form = w * np.sum(X * np.asarray(A.matrix @ X), axis=0)
    defect = float(np.max(lhs - 2.0 * t * form))
    logger.debug(f"Semigroup form inequality at t={t}: max defect {defect:.3e}")
    return defect


def super_poincare_beta(
    A: SymmetricOperator,
    r: float,
    samples: int = 100,
    seed: int = 0,
    spectrum: Optional[SpectralData] = None,
) -> SuperPoincareResult:
    """
    Certified beta(r) = 2 c_12(r/4)^2 next to the largest observed
    (||f||^2 - r h[f]) / ||f||_1^2 over random f, eigenvectors and node
    indicators.
    """
    if r <= 0:
        raise DomainError(f"r must be positive, got {r}")
    S = spectrum if spectrum is not None else dense_eigendecomposition(A)
    _require_nonnegative(A, S)
    w = A.cell_measure
    t = r / 4.0
    c_12 = heat_kernel_norms(A, t, S).c_12
    certified = 2.0 * c_12 * c_12

    X = np.hstack([_random_unit_samples(A, samples, seed), S.eigenvectors])
    l2 = w * np.sum(X * X, axis=0)
    form = w * np.sum(X * np.asarray(A.matrix @ X), axis=0)
    l1 = w * np.sum(np.abs(X), axis=0)
    observed = (l2 - r * form) / (l1 * l1)
    # node indicators: ||f||^2 = w, h[f] = w * A_ii, ||f||_1 = w
    indicator = (1.0 - r * A.diagonal()) / w
    beta_observed = float(max(observed.max(), indicator.max()))

    result = SuperPoincareResult(float(r), t, c_12, certified, beta_observed)
    if not result.holds:
        logger.warning(f"Super Poincare sample exceeds certified beta at r={r}: {beta_observed} > {certified}")
    return result


def beta_profile(
    A: SymmetricOperator,
    radii: Sequence[float],
    samples: int = 100,
    seed: int = 0,
    spectrum: Optional[SpectralData] = None,
) -> List[SuperPoincareResult]:
    """super_poincare_beta along a sweep of r sharing one eigendecomposition"""
    S = spectrum if spectrum is not None else dense_eigendecomposition(A)
    return [super_poincare_beta(A, r, samples=samples, seed=seed, spectrum=S) for r in radii]


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x"""
    slope, _ = np.polyfit(np.log(np.asarray(xs, dtype=float)), np.log(np.asarray(ys, dtype=float)), 1)
    return float(slope)
