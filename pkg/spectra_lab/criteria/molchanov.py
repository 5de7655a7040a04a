"""
Window masses of a measure on a line: the divergence scan mu([x, x + w)) -> inf
"""
import logging
from typing import Optional

import numpy as np

from spectra_lab.core.exceptions import DomainError
from spectra_lab.criteria.sublevel import ScanProfile, scan_lattice
from spectra_lab.lattice.measures import DiscreteMeasure

logger = logging.getLogger(__name__)


def molchanov_scan(mu: DiscreteMeasure, window: float = 1.0, stride: Optional[float] = None) -> ScanProfile:
    """
    Mass of the half-open window [x, x + window) for x on the stride lattice
    (default stride = window). `min_tail(rho)` of the result is the divergence
    diagnostic.
    """
    grid = mu.grid
    if grid.dim != 1:
        raise DomainError("The window scan is defined on 1D grids only")
    h = grid.spacing[0]
    if window < h:
        raise DomainError(f"Window {window} is smaller than the spacing {h}")

    coords = grid.axes()[0]
    starts = scan_lattice(grid, stride or window)[:, 0]
    starts = starts[starts + window <= grid.upper[0] + 1e-9 * h]
    eps = 1e-9 * h
    lo = np.searchsorted(coords, starts - eps, side="left")
    hi = np.searchsorted(coords, starts + window - eps, side="left")
    cells = mu.cell_masses()
    masses = np.array([cells[a:b].sum() for a, b in zip(lo, hi)])
    logger.debug(f"Window scan over {len(starts)} windows of width {window}")
    return ScanProfile(starts.reshape(-1, 1), masses)
