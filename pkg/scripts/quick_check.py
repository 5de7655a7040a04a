"""
Quick check script to verify the numerical components on small problems
"""
import os
import sys

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from spectra_lab.criteria.capacity import capacity
from spectra_lab.criteria.probe import ProbeClass, TruncationFamily, ess_spectrum_probe
from spectra_lab.lattice.assembly import assemble_dirichlet_laplacian, assemble_schrodinger
from spectra_lab.lattice.grid import GridSpec, build_grid
from spectra_lab.lattice.potentials import PolynomialPotential
from spectra_lab.semigroup.heat import heat_computation
from spectra_lab.semigroup.poincare import super_poincare_beta
from spectra_lab.spectral.eigensolvers import dense_eigendecomposition, lowest_eigenpairs

HARMONIC = PolynomialPotential(terms=[{"coef": 1.0, "px": 2}])


def check_harmonic_oscillator():
    print("Checking harmonic oscillator eigenvalues...")
    grid = build_grid(GridSpec.centered_box(8.0, 1, 0.02))
    H = assemble_schrodinger(assemble_dirichlet_laplacian(grid), HARMONIC.evaluate(grid))
    data = lowest_eigenpairs(H, 4)
    print(f"  Eigenvalues: {np.round(data.eigenvalues, 4).tolist()} (expected 1, 3, 5, 7)")
    assert np.allclose(data.eigenvalues, [1, 3, 5, 7], atol=1e-2), "Harmonic levels off"
    print("✅ Harmonic oscillator check passed\n")


def check_heat_semigroup():
    print("Checking heat semigroup...")
    grid = build_grid(GridSpec((0.0,), (np.pi,), (99,)))
    A = assemble_dirichlet_laplacian(grid)
    S = dense_eigendecomposition(A)
    v = np.sin(grid.axes()[0])
    result = heat_computation(A, 0.5, v, spectrum=S)
    ratio = np.linalg.norm(result.result) / np.linalg.norm(v)
    print(f"  ||e^(-tA) sin|| / ||sin|| at t=0.5: {ratio:.6f} (expected {np.exp(-0.5):.6f})")
    assert abs(ratio - np.exp(-0.5)) < 1e-3, "Heat decay off"

    sp = super_poincare_beta(A, 0.1, samples=20, spectrum=S)
    print(f"  Super Poincare at r=0.1: observed {sp.beta_observed:.4g} <= certified {sp.beta_certified:.4g}")
    assert sp.holds, "Super Poincare certificate violated"
    print("✅ Heat semigroup check passed\n")


def check_capacity():
    print("Checking capacity...")
    grid = build_grid(GridSpec((0.0,), (1.0,), (20,)))
    result = capacity(np.array([5, 6, 13]), assemble_dirichlet_laplacian(grid))
    print(f"  cap = {result.cap:.6g} (KKT {'ok' if result.kkt_ok else 'FAILED'}, {result.iterations} iterations)")
    assert result.kkt_ok, "Capacity minimizer violates KKT"
    print("✅ Capacity check passed\n")


def check_probe():
    print("Checking essential-spectrum probe...")
    harmonic = TruncationFamily([4.0, 6.0, 8.0], spacing=0.1, potential=HARMONIC)
    free = TruncationFamily([4.0, 8.0, 16.0], spacing=0.1)
    (discrete,) = ess_spectrum_probe(harmonic, [4.0])
    (essential,) = ess_spectrum_probe(free, [1.0])
    print(f"  Harmonic counts {discrete.counts}: {discrete.classification.value}")
    print(f"  Free counts {essential.counts}: {essential.classification.value}")
    assert discrete.classification == ProbeClass.DISCRETE_BELOW
    assert essential.classification == ProbeClass.ESSENTIAL_SUSPECTED
    print("✅ Probe check passed\n")


def main():
    print("=" * 50)
    print("spectra-lab quick check")
    print("=" * 50 + "\n")

    try:
        check_harmonic_oscillator()
        check_heat_semigroup()
        check_capacity()
        check_probe()
        print("=" * 50)
        print("✅ All checks passed!")
        print("=" * 50)
    except Exception as e:
        print(f"\n❌ Check failed: {e}")
        import traceback

        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
