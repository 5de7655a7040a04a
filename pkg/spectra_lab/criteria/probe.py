"""
Essential-spectrum probe over a family of growing truncation boxes
"""
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from spectra_lab.core.exceptions import DomainError, SpectraLabError
from spectra_lab.core.settings import get_settings
from spectra_lab.criteria.form_bounds import KLMNResult, klmn_scan
from spectra_lab.lattice.assembly import (
    add_measure,
    assemble_dirichlet_laplacian,
    assemble_functional_schrodinger,
    assemble_schrodinger,
)
from spectra_lab.lattice.grid import GridSpec, build_grid, is_commensurate
from spectra_lab.lattice.operators import SymmetricOperator
from spectra_lab.lattice.potentials import ZeroPotential, build_measures
from spectra_lab.spectral.eigensolvers import SpectralData, counting_function, eigenpairs_below

logger = logging.getLogger(__name__)

CAUCHY_TOL = 1e-4


class ProbeClass(str, Enum):
    DISCRETE_BELOW = "discrete_below"
    ESSENTIAL_SUSPECTED = "essential_suspected"
    INCONCLUSIVE = "inconclusive"


class TruncationFamily:
    """
    One potential/measure specification restricted to the boxes (-R, R)^d for
    increasing R, all sharing the spacing h. Operators are built on first use
    and then shared; each entry is assigned once.
    """

    def __init__(
        self,
        radii: Sequence[float],
        spacing: float,
        dim: int = 1,
        potential=None,
        negative=None,
        measures: Sequence = (),
        negative_measures: Sequence = (),
        kinetic: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        klmn="auto",
        node_budget: Optional[int] = None,
    ):
        radii = [float(r) for r in radii]
        if any(r <= 0 for r in radii):
            raise DomainError("Radii must be positive")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise DomainError(f"Radii must be strictly increasing, got {radii}")
        if spacing <= 0:
            raise DomainError(f"Spacing must be positive, got {spacing}")
        off = [r for r in radii if not is_commensurate(2.0 * r, spacing)]
        if off:
            raise DomainError(f"Radii {off} do not give boxes (-R, R) that are whole multiples of h={spacing}")
        self.radii = tuple(radii)
        self.spacing = float(spacing)
        self.dim = int(dim)
        self.potential = potential or ZeroPotential()
        self.negative = negative
        self.measures = tuple(measures)
        self.negative_measures = tuple(negative_measures)
        self.kinetic = kinetic
        self.klmn = klmn
        self.node_budget = node_budget
        self._operators: Dict[int, SymmetricOperator] = {}
        self._locks = {j: threading.Lock() for j in range(len(self.radii))}

    def __len__(self) -> int:
        return len(self.radii)

    def with_measures(self, measures: Sequence = (), negative_measures: Sequence = ()) -> "TruncationFamily":
        """Same family with extra measure perturbations"""
        return TruncationFamily(
            self.radii,
            self.spacing,
            self.dim,
            self.potential,
            self.negative,
            self.measures + tuple(measures),
            self.negative_measures + tuple(negative_measures),
            self.kinetic,
            self.klmn,
            self.node_budget,
        )

    def build(self, j: int, with_negative: bool = True) -> SymmetricOperator:
        """H on the j-th box; with_negative=False gives the base operator H0 + V+ + mu+"""
        grid = build_grid(GridSpec.centered_box(self.radii[j], self.dim, self.spacing), self.node_budget)
        H0 = assemble_dirichlet_laplacian(grid)
        v_plus = self.potential.evaluate(grid)
        v_minus = self.negative.evaluate(grid) if (with_negative and self.negative is not None) else None
        if self.kinetic is not None:
            H = assemble_functional_schrodinger(H0, self.kinetic, v_plus, v_minus, self.klmn)
        else:
            H = assemble_schrodinger(H0, v_plus, v_minus, self.klmn)
        negative_measures = self.negative_measures if with_negative else ()
        if self.measures or negative_measures:
            mu_plus = build_measures(self.measures, grid)
            mu_minus = build_measures(negative_measures, grid)
            H = add_measure(H, mu_plus, mu_minus, self.klmn)
        logger.debug(f"Truncation R={self.radii[j]}: dimension {H.dimension}")
        return H

    def operator(self, j: int) -> SymmetricOperator:
        if j in self._operators:
            return self._operators[j]
        with self._locks[j]:
            if j not in self._operators:
                self._operators[j] = self.build(j)
        return self._operators[j]


@dataclass(frozen=True)
class ProbeVerdict:
    threshold: float
    radii: List[float]
    counts: List[int]
    cauchy: List[List[bool]]
    classification: ProbeClass
    eigenvalues: List[List[float]] = field(default_factory=list)
    diagnostics: List[str] = field(default_factory=list)


def classify(counts: Sequence[int], last_cauchy: Sequence[bool]) -> ProbeClass:
    """Stable counts over the last three radii with Cauchy eigenvalues, or strictly growing counts"""
    a, b, c = counts[-3:]
    if a == b == c and all(last_cauchy):
        return ProbeClass.DISCRETE_BELOW
    if a < b < c:
        return ProbeClass.ESSENTIAL_SUSPECTED
    return ProbeClass.INCONCLUSIVE


def _cauchy_flags(prev: np.ndarray, curr: np.ndarray, tol: float) -> List[bool]:
    k = min(prev.size, curr.size)
    return [bool(abs(curr[i] - prev[i]) < tol * max(1.0, abs(curr[i]))) for i in range(k)]


def ess_spectrum_probe(
    family: TruncationFamily,
    thresholds: Sequence[float],
    tol: float = CAUCHY_TOL,
    eig_tol: float = 1e-8,
    workers: Optional[int] = None,
    solve: Optional[Callable[[SymmetricOperator, float], SpectralData]] = None,
) -> List[ProbeVerdict]:
    """
    Count eigenvalues <= threshold on every box and classify each threshold.
    Radii are solved concurrently when more than one worker is configured.
    `solve(H, top)` replaces the default eigenpairs_below, e.g. with a cached
    lookup; it must return every eigenvalue <= top.
    """
    if len(family) < 3:
        raise DomainError(f"The probe needs at least 3 radii, got {len(family)}")
    thresholds = [float(x) for x in thresholds]
    top = max(thresholds)
    workers = workers or get_settings().workers
    solve_below = solve or (lambda H, level: eigenpairs_below(H, level, tol=eig_tol))

    def solve_radius(j: int):
        try:
            return solve_below(family.operator(j), top)
        except SpectraLabError as e:
            logger.warning(f"Probe solve failed at R={family.radii[j]}: {e}")
            return e

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            spectra = list(pool.map(solve_radius, range(len(family))))
    else:
        spectra = [solve_radius(j) for j in range(len(family))]

    failures = [f"R={family.radii[j]}: {s}" for j, s in enumerate(spectra) if not isinstance(s, SpectralData)]
    verdicts = []
    for threshold in thresholds:
        if failures:
            verdicts.append(
                ProbeVerdict(threshold, list(family.radii), [], [], ProbeClass.INCONCLUSIVE, diagnostics=failures)
            )
            continue
        counts, below, notes = [], [], []
        for R, S in zip(family.radii, spectra):
            result = counting_function(S, threshold)
            counts.append(result.count)
            below.append(np.asarray(S.eigenvalues[: result.count]))
            if result.is_lower_bound:
                notes.append(f"R={R}: count {result.count} is a lower bound")
        cauchy = [_cauchy_flags(p, c, tol) for p, c in zip(below, below[1:])]
        last = cauchy[-1] if len(below[-1]) <= len(below[-2]) else cauchy[-1] + [False]
        classification = ProbeClass.INCONCLUSIVE if notes else classify(counts, last)
        if classification == ProbeClass.INCONCLUSIVE:
            logger.warning(f"Probe inconclusive at threshold {threshold}: counts {counts}")
        verdicts.append(
            ProbeVerdict(
                threshold,
                list(family.radii),
                counts,
                cauchy,
                classification,
                [b.tolist() for b in below],
                notes,
            )
        )
    return verdicts


@dataclass(frozen=True)
class StabilityReport:
    base: List[ProbeVerdict]
    perturbed: List[ProbeVerdict]
    form_bound: Optional[KLMNResult]

    @property
    def agreement(self) -> List[bool]:
        return [a.classification == b.classification for a, b in zip(self.base, self.perturbed)]


def stability_comparison(
    family: TruncationFamily,
    measures: Sequence,
    negative_measures: Sequence,
    thresholds: Sequence[float],
    **probe_kwargs,
) -> StabilityReport:
    """
    Probe H and H + mu+ - mu- on the same radii, with the form bound of mu-
    relative to H + mu+ measured on the largest box.
    """
    perturbed = family.with_measures(measures, negative_measures)
    base_verdicts = ess_spectrum_probe(family, thresholds, **probe_kwargs)
    perturbed_verdicts = ess_spectrum_probe(perturbed, thresholds, **probe_kwargs)

    bound = None
    if negative_measures:
        j = len(family) - 1
        H = family.operator(j)
        grid = H.grid
        base = add_measure(H, build_measures(measures, grid), None) if measures else H
        bound = klmn_scan(build_measures(negative_measures, grid), base)
    return StabilityReport(base_verdicts, perturbed_verdicts, bound)
