"""
Assembly of the Dirichlet Laplacian and its potential and measure perturbations
"""
import logging
from typing import Callable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from spectra_lab.core.exceptions import DomainError, KLMNViolationError
from spectra_lab.criteria.form_bounds import form_bound_estimate, klmn_scan
from spectra_lab.lattice.grid import Grid, GridFunction
from spectra_lab.lattice.measures import DiscreteMeasure
from spectra_lab.lattice.operators import SymmetricOperator
from spectra_lab.spectral.calculus import apply_scalar_map, functional_calculus
from spectra_lab.spectral.eigensolvers import dense_eigendecomposition

logger = logging.getLogger(__name__)

KLMNSpec = Union[str, Tuple[float, float]]


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), 2.0 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="csr") / (h * h)


def assemble_dirichlet_laplacian(grid: Grid) -> SymmetricOperator:
    """Centered 3-point (1D) or 5-point (2D) stencil with zero boundary values"""
    blocks = [_second_difference(n, h) for n, h in zip(grid.shape, grid.spacing)]
    if grid.dim == 1:
        matrix = blocks[0]
    else:
        # C order: the last axis runs fastest
        nx, ny = grid.shape
        matrix = sp.kron(blocks[0], sp.identity(ny)) + sp.kron(sp.identity(nx), blocks[1])
    return SymmetricOperator(sp.csr_matrix(matrix), grid=grid, gamma=0.0, form_bound=(0.0, 0.0), label="laplacian")


def _values(f, H0: SymmetricOperator, name: str) -> np.ndarray:
    """Nodal values over the whole grid (or the operator space without a grid)"""
    if f is None:
        size = H0.grid.size if H0.grid is not None else H0.dimension
        return np.zeros(size)
    values = f.values if isinstance(f, GridFunction) else np.asarray(f, dtype=float).reshape(-1)
    expected = H0.grid.size if H0.grid is not None else H0.dimension
    if values.size != expected:
        raise DomainError(f"{name} has {values.size} values, expected {expected}")
    return np.array(values, dtype=float)


def _active_values(values: np.ndarray, H0: SymmetricOperator) -> np.ndarray:
    return values if H0.grid is None else values[H0.active]


def _perturb(
    H0: SymmetricOperator,
    removed: np.ndarray,
    plus: np.ndarray,
    minus: np.ndarray,
    klmn: KLMNSpec,
    label: str,
) -> SymmetricOperator:
    """
    Remove the nodes flagged in `removed`, then add diag(plus) - diag(minus)
    on what stays. All arrays are over the active nodes of H0.
    """
    keep = ~removed
    base = H0.compress(keep) if removed.any() else H0
    plus, minus = plus[keep], minus[keep]
    if base.dimension == 0:
        raise DomainError("Every node was removed by the infinite part")

    if plus.any():
        base = base.with_matrix(base.matrix + (sp.diags(plus) if base.is_sparse else np.diag(plus)))
    if not minus.any():
        return base.with_matrix(base.matrix, label=label)

    if klmn == "auto":
        result = klmn_scan(minus, base)
        q, C_q = result.q, result.C_q
    else:
        q, C_q = (float(x) for x in klmn)
        if not 0.0 <= q < 1.0:
            raise KLMNViolationError(f"Declared form bound q={q} is not below 1")
        if q == 0.0:
            raise KLMNViolationError("Declared q=0 but the negative part is nonzero")
        measured = form_bound_estimate(minus, base, C_q / q)
        if measured.q > q + 1e-10:
            raise KLMNViolationError(
                f"Declared (q, C_q)=({q}, {C_q}) fails: measured q={measured.q:.6g} at C={C_q / q:.6g}",
                scan=[(C_q / q, measured.q)],
            )

    gamma0 = base.gamma if base.gamma is not None else 0.0
    matrix = base.matrix - (sp.diags(minus) if base.is_sparse else np.diag(minus))
    logger.info(f"Assembled {label} with q={q:.6g}, C_q={C_q:.6g}")
    return base.with_matrix(matrix, gamma=(1.0 - q) * gamma0 - C_q, form_bound=(q, C_q), label=label)


def assemble_schrodinger(
    H0: SymmetricOperator,
    v_plus: Optional[GridFunction],
    v_minus: Optional[GridFunction] = None,
    klmn: KLMNSpec = "auto",
) -> SymmetricOperator:
    """
    H0 + V+ - V- in the form sense. Nodes where V+ = inf leave the active set;
    V- must be form small with respect to H0 + V+ (q < 1).
    """
    vp = _values(v_plus, H0, "V+")
    vm = _values(v_minus, H0, "V-")
    if np.any(vp < 0):
        raise DomainError("V+ must be nonnegative")
    if np.any(~np.isfinite(vm)) or np.any(vm < 0):
        raise DomainError("V- must be finite and nonnegative")

    vp_act = _active_values(vp, H0)
    vm_act = _active_values(vm, H0)
    removed = np.isposinf(vp_act)
    if not removed.any() and not vp_act.any() and not vm_act.any():
        return H0
    return _perturb(H0, removed, np.where(removed, 0.0, vp_act), vm_act, klmn, "schrodinger")


def add_measure(
    H0: SymmetricOperator,
    mu_plus: Optional[DiscreteMeasure] = None,
    mu_minus: Optional[DiscreteMeasure] = None,
    klmn: KLMNSpec = "auto",
) -> SymmetricOperator:
    """
    H0 + mu+ - mu- in the form sense. An atom of weight w at node i adds
    w/h^d to the diagonal; the infinite mask of mu+ removes nodes.
    """
    if H0.grid is None:
        raise DomainError("Measures need an operator assembled on a grid")
    grid = H0.grid
    mu_plus = mu_plus or DiscreteMeasure.zero(grid)
    mu_minus = mu_minus or DiscreteMeasure.zero(grid)
    for mu in (mu_plus, mu_minus):
        if mu.grid.shape != grid.shape:
            raise DomainError("Measure lives on a different grid")
    if mu_minus.has_infinite:
        raise DomainError("The negative measure must not carry an infinite part")
    for mu in (mu_plus, mu_minus):
        for node, weight in mu.atoms:
            if weight > 0 and not H0.active[node]:
                raise DomainError(f"Atom at node {node} sits on an inactive node")

    removed = mu_plus.infinite_mask[H0.active]
    plus = mu_plus.form_diagonal()[H0.active]
    minus = mu_minus.form_diagonal()[H0.active]
    if not removed.any() and not plus.any() and not minus.any():
        return H0
    return _perturb(H0, removed, plus, minus, klmn, "measure_perturbed")


def assemble_functional_schrodinger(
    H0: SymmetricOperator,
    g: Callable[[np.ndarray], np.ndarray],
    v_plus: Optional[GridFunction],
    v_minus: Optional[GridFunction] = None,
    klmn: KLMNSpec = "auto",
) -> SymmetricOperator:
    """g(H0) + V+ - V- for a scalar map g growing to infinity (fractional or relativistic kinetic terms)"""
    spectrum = dense_eigendecomposition(H0)
    kinetic = functional_calculus(spectrum, g)
    gamma = float(apply_scalar_map(g, spectrum.eigenvalues).min())
    kinetic = kinetic.with_matrix(kinetic.matrix, gamma=gamma, form_bound=(0.0, 0.0), label="functional_kinetic")
    return assemble_schrodinger(kinetic, v_plus, v_minus, klmn)
