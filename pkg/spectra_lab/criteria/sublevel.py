"""
Sublevel sets, unit-cube profiles (thinness at infinity), Strichartz ratios
and the ball-integral scan of 1/(V1 + C).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from spectra_lab.core.exceptions import DomainError
from spectra_lab.lattice.grid import Grid, GridFunction
from spectra_lab.lattice.measures import DiscreteMeasure, node_mask
from spectra_lab.lattice.operators import SymmetricOperator
from spectra_lab.spectral.calculus import singular_values
from spectra_lab.spectral.eigensolvers import SpectralData, dense_eigendecomposition

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScanProfile:
    """Values sampled at scan points, with sup/min tails over |x| >= rho"""

    points: np.ndarray
    values: np.ndarray

    def _tail(self, rho: float) -> np.ndarray:
        far = np.linalg.norm(self.points.reshape(len(self.values), -1), axis=1) >= rho
        return self.values[far]

    def sup_tail(self, rho: float) -> float:
        tail = self._tail(rho)
        return float(tail.max()) if tail.size else 0.0

    def min_tail(self, rho: float) -> float:
        tail = self._tail(rho)
        return float(tail.min()) if tail.size else float("inf")

    def rows(self) -> List[Dict[str, float]]:
        pts = self.points.reshape(len(self.values), -1)
        names = ["x", "y"][: pts.shape[1]]
        return [dict(zip(names, map(float, p)), value=float(v)) for p, v in zip(pts, self.values)]


@dataclass(frozen=True)
class CubeProfile:
    side: float
    rounding_defect: float
    per_cube: List[Tuple[Tuple[int, ...], float]]
    sup_norm: float
    tail_sup: Dict[float, float] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, float]]:
        rows = []
        for k, norm in self.per_cube:
            row = {f"k{a}": idx for a, idx in enumerate(k)}
            row["norm"] = norm
            rows.append(row)
        return rows


@dataclass(frozen=True)
class SublevelCertificate:
    region: np.ndarray
    certified: bool


def sublevel_set(V: GridFunction, n: float) -> np.ndarray:
    """{i : V(i) <= n}; nodes where V = inf never belong"""
    if np.any(np.isnan(V.values)):
        raise DomainError("Potential has undefined entries")
    return np.flatnonzero((V.values <= n) & ~V.infinite)


def _cube_indices(grid: Grid, side: float) -> np.ndarray:
    """Integer cube index k of every node for cubes [k*side, (k+1)*side) anchored at the origin"""
    pts = grid.points()
    return np.floor(pts / side + 1e-9).astype(int)


def cube_profile(
    f: Union[GridFunction, np.ndarray, Sequence[int]],
    cube_side: float = 1.0,
    grid: Optional[Grid] = None,
    radii: Optional[Sequence[float]] = None,
) -> CubeProfile:
    """
    Weighted L2 norm of f on every cube C(k) of the origin-anchored lattice,
    the sup over cubes and tail sups over |k| >= rho. A node set is read as
    its indicator (then `grid` is required). The side is rounded to a
    multiple of h; the rounding is recorded.
    """
    if isinstance(f, GridFunction):
        grid, values = f.grid, f.finite_values()
    else:
        if grid is None:
            raise DomainError("A node set needs its grid")
        values = node_mask(f, grid.size).astype(float)
    h = grid.spacing[0]
    if cube_side < h:
        raise DomainError(f"Cube side {cube_side} is smaller than the spacing {h}")
    side = max(1, int(round(cube_side / h))) * h
    defect = abs(side - cube_side)
    if defect > 1e-12:
        logger.info(f"Cube side rounded from {cube_side} to {side}")

    keys = _cube_indices(grid, side)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    sums = np.bincount(inverse, weights=values * values, minlength=len(uniq))
    norms = np.sqrt(grid.cell_measure * sums)
    per_cube = [(tuple(int(c) for c in k), float(v)) for k, v in zip(uniq, norms)]

    dist = np.linalg.norm(uniq.astype(float), axis=1)
    if radii is None:
        radii = np.arange(0.0, np.floor(dist.max()) + 1.0) if dist.size else [0.0]
    tail = {}
    for rho in radii:
        far = norms[dist >= rho]
        tail[float(rho)] = float(far.max()) if far.size else 0.0
    return CubeProfile(float(side), float(defect), per_cube, float(norms.max()) if norms.size else 0.0, tail)


def strichartz_ratio(
    hfun: GridFunction,
    A: SymmetricOperator,
    p: float,
    spectrum: Optional[SpectralData] = None,
) -> float:
    """||h (A + 1)^{-p}||_op / ||h||_{2;inf} for a Laplacian A, p > d/4"""
    d = hfun.grid.dim
    if p <= d / 4.0:
        raise DomainError(f"Need p > {d / 4}, got {p}")
    denominator = cube_profile(hfun, 1.0).sup_norm
    if denominator == 0:
        raise DomainError("Birman-Solomyak norm of the multiplier is zero")
    S = spectrum if spectrum is not None else dense_eigendecomposition(A)
    multiplier = A.with_matrix(np.diag(A.restrict(hfun.finite_values() * A.active)), gamma=None, form_bound=None)
    top = singular_values(multiplier, S, lambda x: (x + 1.0) ** (-p))[0]
    return float(top / denominator)


def scan_lattice(grid: Grid, stride: float, margin: float = 0.0) -> np.ndarray:
    """Points k*stride (per axis) lying in the box shrunk by margin"""
    axes = []
    for a, b in zip(grid.lower, grid.upper):
        k_lo = int(np.ceil((a + margin) / stride - 1e-9))
        k_hi = int(np.floor((b - margin) / stride + 1e-9))
        axes.append(np.arange(k_lo, k_hi + 1) * stride)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def benci_fortunato_scan(
    V1: GridFunction,
    C: float,
    ball_radius: float = 1.0,
    stride: Optional[float] = None,
) -> ScanProfile:
    """Integral of (V1 + C)^{-1} over the ball of radius ball_radius around each scan point"""
    grid = V1.grid
    finite = ~V1.infinite
    shifted = V1.values[finite] + C
    if np.any(shifted <= 0):
        raise DomainError(f"V1 + C must be positive on finite nodes (minimum {shifted.min():.3e})")
    integrand = np.zeros(grid.size)
    integrand[finite] = 1.0 / shifted

    centers = scan_lattice(grid, stride or ball_radius)
    tree = cKDTree(grid.points())
    neighbourhoods = tree.query_ball_point(centers, r=ball_radius + 1e-12)
    values = np.array([grid.cell_measure * integrand[idx].sum() for idx in neighbourhoods])
    return ScanProfile(centers, values)


def measure_sublevel_certificate(mu_plus: DiscreteMeasure, n: float, A: SymmetricOperator) -> SublevelCertificate:
    """
    M_n = active nodes where the measure form diagonal is below n, so that
    n * ||1_{M_n^c} u||^2 <= mu+[u, u] for every u.
    """
    diag = mu_plus.form_diagonal()
    finite = ~mu_plus.infinite_mask
    active = A.active if A.grid is not None else np.ones(mu_plus.grid.size, dtype=bool)
    inside = active & finite & (diag < n)
    outside = active & finite & ~inside
    certified = bool(np.all(diag[outside] >= n))
    return SublevelCertificate(np.flatnonzero(inside), certified)
