"""
Av^lambda_G(mu) = inf { mu[u, u] : ||u|| = 1, E[u] <= lambda, supp u in G }

The dual function d(beta) = lambda_min(M + beta*A_G) - beta*lambda is concave
in beta >= 0 and bounds Av from below; primal candidates come from exact
mixing on two-dimensional spans.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from spectra_lab.core.exceptions import ConvergenceError, DomainError
from spectra_lab.lattice.grid import GridFunction
from spectra_lab.lattice.measures import DiscreteMeasure, node_mask
from spectra_lab.lattice.operators import SymmetricOperator

logger = logging.getLogger(__name__)

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0
FEASIBILITY_TOL = 1e-10
FLOOR_TOL = 1e-9
GAP_TOL = 1e-6


@dataclass(frozen=True)
class AvResult:
    lam: float
    region: np.ndarray
    dual_lower: float
    primal_upper: float
    witness: Optional[GridFunction]
    beta_star: float
    profile: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def value(self) -> float:
        """Best estimate of Av: the primal value when a witness exists"""
        return self.primal_upper if np.isfinite(self.primal_upper) else self.dual_lower

    @property
    def gap(self) -> float:
        return self.primal_upper - self.dual_lower


def _lowest(matrix: np.ndarray) -> Tuple[float, np.ndarray]:
    values, vectors = sla.eigh(matrix, subset_by_index=[0, 0])
    return float(values[0]), vectors[:, 0]


def _mix_two(basis: np.ndarray, M: np.ndarray, A: np.ndarray, lam: float) -> Optional[Tuple[float, np.ndarray]]:
    """
    Minimize x^T M x over unit x in span(basis) with x^T A x <= lam, exactly.
    On the circle x(theta) = cos(theta) b1 + sin(theta) b2 the constraint is
    c0 + R cos(2 theta - psi) <= lam, so the optimum is either the
    unconstrained minimizer or one of the two boundary points.
    """
    Q, _ = np.linalg.qr(basis)
    if Q.shape[1] < 2 or np.linalg.matrix_rank(basis, tol=1e-10) < 2:
        Q = Q[:, :1]
    m = Q.T @ M @ Q
    a = Q.T @ A @ Q
    candidates = []
    if Q.shape[1] == 1:
        candidates.append(np.array([1.0]))
    else:
        _, v = np.linalg.eigh((m + m.T) * 0.5)
        candidates.append(v[:, 0])
        p, r, q = a[0, 0], a[1, 1], 0.5 * (a[0, 1] + a[1, 0])
        c0, radius = 0.5 * (p + r), np.hypot(0.5 * (p - r), q)
        if radius > 0:
            psi = np.arctan2(q, 0.5 * (p - r))
            ratio = (lam - c0) / radius
            if -1.0 <= ratio <= 1.0:
                for sign in (1.0, -1.0):
                    theta = 0.5 * (psi + sign * np.arccos(ratio))
                    candidates.append(np.array([np.cos(theta), np.sin(theta)]))
    best = None
    for c in candidates:
        x = Q @ c
        x /= np.linalg.norm(x)
        if x @ A @ x <= lam + FEASIBILITY_TOL * max(1.0, abs(lam)):
            value = float(x @ M @ x)
            if best is None or value < best[0]:
                best = (value, x)
    return best


def _ground_space(A: np.ndarray, M: np.ndarray, floor: float) -> Tuple[float, np.ndarray]:
    """min x^T M x over the (possibly degenerate) lowest eigenspace of A"""
    values, vectors = sla.eigh(A)
    span = vectors[:, values <= floor + FLOOR_TOL * max(1.0, abs(floor))]
    m_values, m_vectors = np.linalg.eigh(span.T @ M @ span)
    x = span @ m_vectors[:, 0]
    return float(m_values[0]), x / np.linalg.norm(x)


def av_lambda(
    mu: DiscreteMeasure,
    G,
    lam: float,
    A0: SymmetricOperator,
    beta_tol: float = 1e-12,
    max_doublings: int = 80,
    gap_tol: float = GAP_TOL,
) -> AvResult:
    """
    Lower bound by golden-section maximization of the concave dual, upper
    bound by the best feasible mix of eigenvectors on either side of the
    maximizer. Nodes of G carrying infinite mass are excluded from the
    support; an empty feasible set gives +inf. At lambda equal to the lowest
    energy on G the feasible set is the ground eigenspace and both bounds are
    the mass of its best vector.

    Raises ConvergenceError when the two bounds differ by more than gap_tol
    relative to the value.
    """
    grid = A0.grid
    if grid is None:
        raise DomainError("Av needs an operator assembled on a grid")
    region = node_mask(G, grid.size)
    if not region.any():
        raise DomainError("Region G is empty")
    if np.any(region & ~A0.active):
        raise DomainError("Region G meets inactive nodes")
    region &= ~mu.infinite_mask
    region_nodes = np.flatnonzero(region)
    inf_result = AvResult(float(lam), region_nodes, np.inf, np.inf, None, np.inf)
    if region_nodes.size == 0:
        return inf_result

    keep = region[A0.active]
    A = A0.compress(keep).dense()
    M = np.diag(mu.form_diagonal()[region_nodes])
    floor, ground = _lowest(A)
    floor_band = FLOOR_TOL * max(1.0, abs(floor))
    if lam < floor - floor_band:
        logger.info(f"Av: lambda={lam} below the lowest energy {floor:.6g} on G; feasible set is empty")
        return inf_result

    w = grid.cell_measure

    def witness_of(x: np.ndarray) -> GridFunction:
        values = np.zeros(grid.size)
        values[region_nodes] = x / np.sqrt(w)
        return GridFunction(grid, values)

    if lam <= floor + floor_band:
        value, x = _ground_space(A, M, floor)
        logger.debug(f"Av at lambda={lam}: ground-space value {value:.10g}")
        return AvResult(float(lam), region_nodes, value, value, witness_of(x), np.inf)

    shifted = A - lam * np.eye(A.shape[0])
    feasible = lam + FEASIBILITY_TOL * max(1.0, abs(lam))
    profile: List[Tuple[float, float]] = []

    def evaluate(beta: float) -> Tuple[float, float, np.ndarray]:
        # lambda_min(M + beta*(A - lam)) is d(beta) without the beta*lam cancellation
        d, vec = _lowest(M + beta * shifted)
        profile.append((beta, d))
        return d, float(vec @ A @ vec), vec

    d0, e0, u0 = evaluate(0.0)
    if e0 <= feasible:
        beta_star, spans = 0.0, [np.column_stack([u0, ground])]
    else:
        lo, hi = 0.0, 1.0
        for _ in range(max_doublings):
            _, e_hi, _ = evaluate(hi)
            if e_hi <= feasible:
                break
            lo = hi
            hi *= 2.0
        else:
            raise ConvergenceError(f"Could not bracket the dual maximizer for lambda={lam}", profile=profile)

        a, b = lo, hi
        x1, x2 = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
        f1, f2 = evaluate(x1)[0], evaluate(x2)[0]
        while b - a > beta_tol * max(1.0, hi):
            if f1 < f2:
                a, x1, f1 = x1, x2, f2
                x2 = a + GOLDEN * (b - a)
                f2 = evaluate(x2)[0]
            else:
                b, x2, f2 = x2, x1, f1
                x1 = b - GOLDEN * (b - a)
                f1 = evaluate(x1)[0]
        beta_star = 0.5 * (a + b)
        # E >= lam at a and E <= lam at b, so a mix of the two meets the constraint
        _, _, u_a = evaluate(a)
        _, _, u_b = evaluate(b)
        _, _, u_star = evaluate(beta_star)
        spans = [np.column_stack([u_a, u_b]), np.column_stack([u_star, ground])]
        if A.shape[0] >= 2:
            _, pair = sla.eigh(M + beta_star * shifted, subset_by_index=[0, 1])
            spans.append(pair)

    dual = max(d for _, d in profile)
    best = None
    for span in spans:
        mixed = _mix_two(span, M, A, lam)
        if mixed is not None and (best is None or mixed[0] < best[0]):
            best = mixed

    if best is None:
        raise ConvergenceError(f"Av: no feasible witness found for lambda={lam}", profile=profile)

    primal, x = best
    slack = gap_tol * max(1.0, abs(primal))
    if dual > primal:
        if dual - primal > slack:
            raise ConvergenceError(
                f"Av dual {dual:.10g} exceeds primal {primal:.10g} at lambda={lam}", profile=profile
            )
        logger.debug(f"Av at lambda={lam}: dual above primal by {dual - primal:.3e}, clipped")
        dual = primal
    if primal - dual > slack:
        raise ConvergenceError(
            f"Av duality gap {primal - dual:.3e} at lambda={lam} exceeds {gap_tol:g}", profile=profile
        )
    logger.debug(f"Av at lambda={lam}: dual {dual:.10g}, primal {primal:.10g}, beta* {beta_star:.6g}")
    return AvResult(float(lam), region_nodes, float(dual), float(primal), witness_of(x), float(beta_star), profile)
