"""
Experiment runner - dispatches a validated config to the numerical modules
and produces a ReportRecord (complete or failure-marked)
"""
import logging
import time
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse.linalg import ArpackError

from spectra_lab import __version__
from spectra_lab.core.config import ExperimentConfig
from spectra_lab.core.exceptions import DomainError, NumericalError, SpectraLabError
from spectra_lab.core.models import ReportRecord, RunStatus, TaskName, to_jsonable
from spectra_lab.core.settings import get_settings
from spectra_lab.criteria.averages import av_lambda
from spectra_lab.criteria.capacity import capacity
from spectra_lab.criteria.form_bounds import form_bound_estimate, klmn_scan, threshold_sweep
from spectra_lab.criteria.molchanov import molchanov_scan
from spectra_lab.criteria.probe import TruncationFamily, ess_spectrum_probe, stability_comparison
from spectra_lab.criteria.sublevel import benci_fortunato_scan, cube_profile, strichartz_ratio, sublevel_set
from spectra_lab.lattice.assembly import (
    add_measure,
    assemble_dirichlet_laplacian,
    assemble_functional_schrodinger,
    assemble_schrodinger,
)
from spectra_lab.lattice.grid import Grid, build_grid
from spectra_lab.lattice.operators import SymmetricOperator
from spectra_lab.lattice.potentials import build_measures
from spectra_lab.semigroup.poincare import beta_profile, loglog_slope, semigroup_form_inequality_check
from spectra_lab.services.cache_service import CacheService
from spectra_lab.spectral.eigensolvers import SpectralData, dense_eigendecomposition, eigenpairs_below, lowest_eigenpairs

logger = logging.getLogger(__name__)

Tables = Dict[str, List[dict]]


class ExperimentRunner:
    """Runs one task of an experiment config; tasks run sequentially"""

    def __init__(self, config: ExperimentConfig, cache: Optional[CacheService] = None, out_dir: Optional[str] = None):
        self.config = config
        self.out_dir = Path(out_dir or config.output.dir)
        if cache is None:
            cache_dir = get_settings().cache_dir or str(self.out_dir / ".cache")
            cache = CacheService(cache_dir)
        self.cache = cache
        self.rng = np.random.default_rng(config.seed)
        self.partial: Dict = {}
        self._handlers = {
            TaskName.SPECTRUM: self.run_spectrum,
            TaskName.PROBE: self.run_probe,
            TaskName.AV_SWEEP: self.run_av_sweep,
            TaskName.CAPACITY: self.run_capacity,
            TaskName.MOLCHANOV: self.run_molchanov,
            TaskName.THIN_PROFILE: self.run_thin_profile,
            TaskName.STRICHARTZ: self.run_strichartz,
            TaskName.SUPER_POINCARE: self.run_super_poincare,
            TaskName.FORM_BOUND: self.run_form_bound,
            TaskName.STABILITY: self.run_stability,
        }

    # assembly helpers

    def grid(self) -> Grid:
        return build_grid(self.config.grid.to_spec())

    def operator(self, grid: Grid, with_measures: bool = True, with_negative: bool = True) -> SymmetricOperator:
        op = self.config.operator
        H0 = assemble_dirichlet_laplacian(grid)
        v_plus = op.potential.evaluate(grid)
        v_minus = op.negative.evaluate(grid) if (with_negative and op.negative is not None) else None
        if op.kinetic is not None:
            H = assemble_functional_schrodinger(H0, op.kinetic.function(), v_plus, v_minus, op.klmn)
        else:
            H = assemble_schrodinger(H0, v_plus, v_minus, op.klmn)
        if with_measures and (op.measures or op.negative_measures):
            H = add_measure(H, build_measures(op.measures, grid), build_measures(op.negative_measures, grid), op.klmn)
        return H

    def family(self, with_measures: bool = True) -> TruncationFamily:
        op = self.config.operator
        params = self.config.probe
        spacing = params.spacing or self.grid().spacing[0]
        return TruncationFamily(
            params.radii,
            spacing,
            dim=params.dim or len(self.config.grid.lower),
            potential=op.potential,
            negative=op.negative,
            measures=op.measures if with_measures else (),
            negative_measures=op.negative_measures if with_measures else (),
            kinetic=op.kinetic.function() if op.kinetic is not None else None,
            klmn=op.klmn,
        )

    def _solver_kwargs(self) -> dict:
        solver = self.config.solver
        return {"tol": solver.tol, "method": solver.method, "dense_budget": solver.dense_budget, "seed": self.config.seed}

    # cached spectral data

    def spectral_data(self, A: SymmetricOperator, label: str, compute: Callable[[], SpectralData], *params) -> SpectralData:
        """SpectralData for A from the result cache, computing it on a miss"""
        key = self.cache.key(label, A.digest(), *params)

        def arrays():
            data = compute()
            return {
                "eigenvalues": np.asarray(data.eigenvalues),
                "eigenvectors": np.asarray(data.eigenvectors),
                "residuals": np.asarray(data.residuals),
                "complete": np.array(float(data.complete)),
            }

        stored = self.cache.fetch(key, arrays)
        return SpectralData(
            A, stored["eigenvalues"], stored["eigenvectors"], bool(stored["complete"]), stored["residuals"], method=label
        )

    def eigenpairs_below(self, A: SymmetricOperator, threshold: float) -> SpectralData:
        tol = self.config.solver.tol
        return self.spectral_data(A, "below", lambda: eigenpairs_below(A, threshold, tol=tol), float(threshold), tol)

    def dense_spectrum(self, A: SymmetricOperator) -> SpectralData:
        return self.spectral_data(A, "dense", lambda: dense_eigendecomposition(A))

    # tasks

    def run_spectrum(self) -> Tuple[dict, Tables]:
        params = self.config.spectrum
        grid = self.grid()
        H = self.operator(grid)
        k = min(params.count, H.dimension)
        kwargs = self._solver_kwargs()
        key = self.cache.key("spectrum", self.config.grid.model_dump(), self.config.operator.model_dump(), kwargs, k)

        def compute():
            data = lowest_eigenpairs(H, k, **kwargs)
            return {"eigenvalues": np.array(data.eigenvalues), "residuals": np.array(data.residuals)}

        arrays = self.cache.fetch(key, compute)
        payload = {
            "dimension": H.dimension,
            "gamma": H.gamma,
            "form_bound": H.form_bound,
            "eigenvalues": arrays["eigenvalues"],
            "residuals": arrays["residuals"],
        }
        rows = [{"k": i + 1, "eigenvalue": lam, "residual": res} for i, (lam, res) in enumerate(zip(arrays["eigenvalues"], arrays["residuals"]))]
        return payload, {"main": rows}

    def run_probe(self) -> Tuple[dict, Tables]:
        params = self.config.probe
        family = self.family()
        verdicts = ess_spectrum_probe(
            family,
            params.thresholds,
            tol=params.cauchy_tol,
            eig_tol=self.config.solver.tol,
            workers=self.config.solver.workers,
            solve=self.eigenpairs_below,
        )
        self.partial["verdicts"] = verdicts
        rows = []
        for verdict in verdicts:
            for R, count in zip(verdict.radii, verdict.counts):
                rows.append({"threshold": verdict.threshold, "radius": R, "count": count, "classification": verdict.classification.value})
        payload = {
            "radii": list(family.radii),
            "spacing": family.spacing,
            "verdicts": [
                {
                    "threshold": v.threshold,
                    "counts": v.counts,
                    "classification": v.classification,
                    "cauchy": v.cauchy,
                    "eigenvalues": v.eigenvalues,
                    "diagnostics": v.diagnostics,
                }
                for v in verdicts
            ],
        }
        if params.sublevel_heights:
            j = len(family) - 1
            q, C_q = family.operator(j).form_bound or (0.0, 0.0)
            gamma = family.build(j, with_negative=False).gamma or 0.0
            payload["threshold_sweep"] = threshold_sweep(q, C_q, gamma, params.sublevel_heights)
        return payload, {"main": rows}

    def run_av_sweep(self) -> Tuple[dict, Tables]:
        params = self.config.av_sweep
        grid = self.grid()
        A0 = self.operator(grid, with_measures=False, with_negative=False)
        mu = build_measures(self.config.operator.measures, grid)
        pts = grid.points()
        sup_norm = np.abs(pts).max(axis=1)
        rows = []
        for n in params.exclusion_radii:
            region = (sup_norm > n) & A0.active
            if not region.any():
                logger.warning(f"Av sweep: G_n empty for n={n}")
                continue
            key = self.cache.key("av", A0.digest(), mu.digest(), np.flatnonzero(region).tolist(), params.lam, params.beta_tol)

            def compute(region=region):
                result = av_lambda(mu, region, params.lam, A0, beta_tol=params.beta_tol)
                return {
                    "dual_lower": np.array(result.dual_lower),
                    "primal_upper": np.array(result.primal_upper),
                    "beta_star": np.array(result.beta_star),
                }

            stored = self.cache.fetch(key, compute)
            dual, primal = float(stored["dual_lower"]), float(stored["primal_upper"])
            rows.append(
                {
                    "n": n,
                    "dual_lower": dual,
                    "primal_upper": primal,
                    "gap": primal - dual if np.isfinite(primal) else np.nan,
                    "beta_star": float(stored["beta_star"]),
                }
            )
            self.partial["rows"] = rows
        return {"lam": params.lam, "sweep": rows}, {"main": rows}

    def run_capacity(self) -> Tuple[dict, Tables]:
        grid = self.grid()
        A = self.operator(grid)
        pts = grid.points()
        rows = []
        for i, region in enumerate(self.config.capacity.regions):
            U = np.flatnonzero(region.contains(pts) & A.active)
            key = self.cache.key("capacity", A.digest(), U.tolist())

            def compute(U=U):
                result = capacity(U, A)
                return {"cap": np.array(result.cap), "kkt_ok": np.array(float(result.kkt_ok))}

            stored = self.cache.fetch(key, compute)
            rows.append({"region": i, "nodes": int(U.size), "capacity": float(stored["cap"]), "kkt_ok": bool(stored["kkt_ok"])})
        return {"capacities": rows}, {"main": rows}

    def run_molchanov(self) -> Tuple[dict, Tables]:
        params = self.config.molchanov
        grid = self.grid()
        mu = build_measures(self.config.operator.measures, grid)
        profile = molchanov_scan(mu, params.window, params.stride)
        rows = [{"x": r["x"], "mass": r["value"]} for r in profile.rows()]
        payload = {"window": params.window, "min_tail": {rho: profile.min_tail(rho) for rho in params.tail_radii}}
        return payload, {"main": rows}

    def run_thin_profile(self) -> Tuple[dict, Tables]:
        params = self.config.thin_profile
        grid = self.grid()
        V = self.config.operator.potential.evaluate(grid)
        rows, tails = [], {}
        for level in params.levels:
            nodes = sublevel_set(V, level)
            profile = cube_profile(nodes, params.cube_side, grid=grid, radii=params.tail_radii)
            tails[level] = {"tail_sup": profile.tail_sup, "sup_norm": profile.sup_norm, "rounding_defect": profile.rounding_defect}
            for row in profile.rows():
                rows.append({"level": level, **row})
        scan = benci_fortunato_scan(V, params.shift, params.ball_radius)
        radii = params.tail_radii or sorted({float(np.floor(np.linalg.norm(p))) for p in scan.points})
        payload = {
            "levels": tails,
            "ball_integral_sup_tail": {rho: scan.sup_tail(rho) for rho in radii},
        }
        return payload, {"main": rows, "ball_integrals": scan.rows()}

    def run_strichartz(self) -> Tuple[dict, Tables]:
        params = self.config.strichartz
        grid = self.grid()
        A = assemble_dirichlet_laplacian(grid)
        spectrum = self.dense_spectrum(A)
        rows = []
        for i in range(params.samples):
            values = self.rng.uniform(-params.bound, params.bound, grid.size)
            ratio = strichartz_ratio(grid.function(values), A, params.p, spectrum)
            rows.append({"sample": i, "ratio": ratio})
        ratios = np.array([r["ratio"] for r in rows])
        return {"p": params.p, "max_ratio": float(ratios.max()), "mean_ratio": float(ratios.mean())}, {"main": rows}

    def run_super_poincare(self) -> Tuple[dict, Tables]:
        params = self.config.super_poincare
        grid = self.grid()
        A = self.operator(grid)
        S = self.dense_spectrum(A)
        results = beta_profile(A, params.r_values, samples=params.samples, seed=self.config.seed, spectrum=S)
        rows = [
            {"r": res.r, "t": res.t, "c_12": res.c_12, "beta_certified": res.beta_certified, "beta_observed": res.beta_observed}
            for res in results
        ]
        defects = {t: semigroup_form_inequality_check(A, t, params.samples, self.config.seed, spectrum=S) for t in params.times}
        payload = {
            "all_hold": all(res.holds for res in results),
            "certified_slope": loglog_slope([r["r"] for r in rows], [r["beta_certified"] for r in rows]),
            "semigroup_defects": defects,
        }
        return payload, {"main": rows}

    def run_form_bound(self) -> Tuple[dict, Tables]:
        op = self.config.operator
        if op.negative is None and not op.negative_measures:
            raise DomainError("form-bound needs a negative potential or negative measures")
        grid = self.grid()
        base = self.operator(grid, with_measures=False, with_negative=False)
        if op.measures:
            base = add_measure(base, build_measures(op.measures, grid), None)
        if op.negative_measures:
            minus = build_measures(op.negative_measures, grid)
        else:
            minus = op.negative.evaluate(grid)
        C_values = self.config.form_bound.C_values
        if C_values is None:
            result = klmn_scan(minus, base)
            rows = [{"C": C, "q": q} for C, q in result.scan]
            return {"q": result.q, "C": result.C, "C_q": result.C_q}, {"main": rows}
        rows = [{"C": C, "q": form_bound_estimate(minus, base, C).q} for C in C_values]
        return {"scan": rows}, {"main": rows}

    def run_stability(self) -> Tuple[dict, Tables]:
        op = self.config.operator
        params = self.config.stability
        family = self.family(with_measures=False)
        report = stability_comparison(
            family,
            op.measures,
            op.negative_measures,
            params.thresholds,
            tol=self.config.probe.cauchy_tol,
            solve=self.eigenpairs_below,
        )
        rows = [
            {"threshold": a.threshold, "base": a.classification.value, "perturbed": b.classification.value}
            for a, b in zip(report.base, report.perturbed)
        ]
        payload = {
            "agreement": report.agreement,
            "form_bound": None if report.form_bound is None else {"q": report.form_bound.q, "C_q": report.form_bound.C_q},
            "rows": rows,
        }
        return payload, {"main": rows}

    # orchestration

    def run(self) -> ReportRecord:
        task = self.config.task
        start = time.perf_counter()
        logger.info(f"Running task {task.value} (seed {self.config.seed})")
        record = ReportRecord(
            task=task,
            seed=self.config.seed,
            config_hash=self.config.digest(),
            config=to_jsonable(self.config.echo()),
            library_version=__version__,
        )
        try:
            self._execute(record)
        except SpectraLabError as e:
            logger.error(f"Task {task.value} failed: {e}")
            record.status = RunStatus.FAILED
            record.error = f"{task.value}: {type(e).__name__}: {e}"
            record.payload = to_jsonable({"partial": self._partial_payload()})
        record.wall_time = time.perf_counter() - start
        logger.info(f"Task {task.value} finished with status {record.status.value} in {record.wall_time:.2f}s")
        return record

    def _execute(self, record: ReportRecord) -> None:
        """Run the handler and the cache spot check; backend failures surface as NumericalError"""
        try:
            payload, tables = self._handlers[record.task]()
            record.payload = to_jsonable(payload)
            record.tables = {name: to_jsonable(rows) for name, rows in tables.items()}
            checked = self.cache.spot_check(self.rng)
        except (np.linalg.LinAlgError, ArpackError) as e:
            raise NumericalError(f"{type(e).__name__}: {e}") from e
        if checked is not None:
            record.payload["cache_spot_check"] = checked

    def _partial_payload(self) -> dict:
        partial = {}
        for name, value in self.partial.items():
            if name == "verdicts":
                partial[name] = [{"threshold": v.threshold, "counts": v.counts} for v in value]
            else:
                partial[name] = value
        return partial


def run_experiment(config: ExperimentConfig, cache: Optional[CacheService] = None, out_dir: Optional[str] = None) -> ReportRecord:
    return ExperimentRunner(config, cache=cache, out_dir=out_dir).run()
