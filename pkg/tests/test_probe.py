"""
Tests for the essential-spectrum probe over truncation families
"""
import numpy as np
import pytest

from spectra_lab.core.exceptions import DomainError
from spectra_lab.criteria.probe import (
    ProbeClass,
    TruncationFamily,
    classify,
    ess_spectrum_probe,
    stability_comparison,
)
from spectra_lab.criteria.form_bounds import essential_threshold
from spectra_lab.lattice.potentials import AtomsMeasure, LebesgueMeasure, PolynomialPotential
from spectra_lab.spectral.eigensolvers import eigenpairs_below

HARMONIC = PolynomialPotential(terms=[{"coef": 1.0, "px": 2}])


@pytest.fixture
def harmonic_family():
    return TruncationFamily([4.0, 6.0, 8.0], spacing=0.1, potential=HARMONIC)


@pytest.fixture
def free_family():
    return TruncationFamily([4.0, 8.0, 16.0], spacing=0.1)


def test_harmonic_counts_stabilize(harmonic_family):
    """Test eigenvalues 1, 3, 5, 7 are discrete below 4 and 8"""
    verdicts = ess_spectrum_probe(harmonic_family, [4.0, 8.0])
    assert [v.counts for v in verdicts] == [[2, 2, 2], [4, 4, 4]]
    assert all(v.classification == ProbeClass.DISCRETE_BELOW for v in verdicts)
    assert verdicts[1].eigenvalues[-1] == pytest.approx([1.0, 3.0, 5.0, 7.0], abs=2e-2)
    assert all(verdicts[1].cauchy[-1])


def test_free_laplacian_counts_grow(free_family):
    """Test (k pi / 2R)^2 <= 1 admits 2, 5 and 10 eigenvalues"""
    (verdict,) = ess_spectrum_probe(free_family, [1.0])
    assert verdict.counts == [2, 5, 10]
    assert verdict.classification == ProbeClass.ESSENTIAL_SUSPECTED


def test_threads_agree_with_sequential(harmonic_family):
    """Test the worker pool gives the same verdicts"""
    sequential = ess_spectrum_probe(harmonic_family, [4.0, 8.0], workers=1)
    fresh = TruncationFamily([4.0, 6.0, 8.0], spacing=0.1, potential=HARMONIC)
    threaded = ess_spectrum_probe(fresh, [4.0, 8.0], workers=3)
    assert [v.counts for v in threaded] == [v.counts for v in sequential]
    assert [v.classification for v in threaded] == [v.classification for v in sequential]


def test_operators_are_shared(harmonic_family):
    """Test each radius is assembled once"""
    assert harmonic_family.operator(1) is harmonic_family.operator(1)
    assert harmonic_family.operator(0).dimension < harmonic_family.operator(2).dimension


def test_probe_needs_three_radii():
    """Test two radii are refused"""
    with pytest.raises(DomainError):
        ess_spectrum_probe(TruncationFamily([4.0, 8.0], spacing=0.1), [1.0])


def test_family_radii_validation():
    """Test radii must be positive and strictly increasing"""
    with pytest.raises(DomainError):
        TruncationFamily([4.0, 4.0, 8.0], spacing=0.1)
    with pytest.raises(DomainError):
        TruncationFamily([-1.0, 4.0, 8.0], spacing=0.1)


def test_family_radii_share_the_spacing():
    """Test every box (-R, R) must be a whole number of cells of width h"""
    with pytest.raises(DomainError):
        TruncationFamily([4.0, 6.03, 8.0], spacing=0.1)
    with pytest.raises(DomainError):
        TruncationFamily([4.0, 6.0, 8.0], spacing=0.0)
    family = TruncationFamily([0.5, 1.25, 2.0], spacing=0.25)
    assert [family.operator(j).grid.spacing[0] for j in range(3)] == pytest.approx([0.25] * 3)


def test_failed_radius_is_inconclusive():
    """Test a node budget hit on one box makes every threshold inconclusive"""
    family = TruncationFamily([4.0, 6.0, 8.0], spacing=0.1, potential=HARMONIC, node_budget=100)
    (verdict,) = ess_spectrum_probe(family, [4.0])
    assert verdict.classification == ProbeClass.INCONCLUSIVE
    assert verdict.diagnostics
    assert verdict.diagnostics[0].startswith("R=6.0")


@pytest.mark.parametrize(
    "counts, cauchy, expected",
    [
        ([3, 3, 3], [True, True, True], ProbeClass.DISCRETE_BELOW),
        ([3, 3, 3], [True, False, True], ProbeClass.INCONCLUSIVE),
        ([1, 2, 4], [True], ProbeClass.ESSENTIAL_SUSPECTED),
        ([1, 2, 2], [True, True], ProbeClass.INCONCLUSIVE),
        ([5, 4, 4], [True], ProbeClass.INCONCLUSIVE),
    ],
)
def test_classify(counts, cauchy, expected):
    """Test the three-radius classification rule"""
    assert classify(counts, cauchy) == expected


def test_stability_under_small_measures(harmonic_family):
    """Test mu+ = 0.5 dx and mu- = 0.25 dx shift eigenvalues by 0.25 and keep the verdicts"""
    report = stability_comparison(
        harmonic_family,
        [LebesgueMeasure(c=0.5)],
        [LebesgueMeasure(c=0.25)],
        [4.0, 8.0],
    )
    assert all(report.agreement)
    assert report.form_bound is not None
    assert report.form_bound.q < 1.0
    shifted = report.perturbed[1].eigenvalues[-1]
    assert shifted == pytest.approx([1.25, 3.25, 5.25, 7.25], abs=2e-2)


def test_stability_on_random_perturbations():
    """Test 20 random form-small measure pairs keep the harmonic verdicts"""
    rng = np.random.default_rng(29)
    family = TruncationFamily([6.0, 8.0, 10.0], spacing=0.1, potential=HARMONIC)
    for _ in range(20):
        plus = [LebesgueMeasure(c=float(rng.uniform(0.0, 0.5)))]
        minus = [
            AtomsMeasure(
                positions=[[float(x)] for x in rng.uniform(-3.0, 3.0, 2)],
                weights=[float(w) for w in rng.uniform(0.0, 0.3, 2)],
            )
        ]
        report = stability_comparison(family, plus, minus, [4.0, 8.0])
        assert report.form_bound.q < 1.0
        assert all(report.agreement)
        assert [v.classification for v in report.perturbed] == [ProbeClass.DISCRETE_BELOW] * 2


def test_counts_below_the_essential_threshold_are_stable():
    """Test the probe sees finitely many, stable eigenvalues below (1-q)(gamma+s) - C_q"""
    rng = np.random.default_rng(31)
    family = TruncationFamily(
        [6.0, 8.0, 10.0],
        spacing=0.1,
        potential=HARMONIC,
        negative=PolynomialPotential(terms=[{"coef": 0.1, "px": 2}]),
    )
    j = len(family) - 1
    q, C_q = family.operator(j).form_bound
    gamma = family.build(j, with_negative=False).gamma
    thresholds = [essential_threshold(q, C_q, gamma, s) - 1e-6 for s in rng.uniform(1.0, 12.0, 10)]
    for verdict in ess_spectrum_probe(family, thresholds):
        assert verdict.classification != ProbeClass.ESSENTIAL_SUSPECTED
        assert verdict.counts[-1] == verdict.counts[-2]


def test_fractional_kinetic_probe():
    """Test |p| + x^2: three eigenvalues below 3.6, the lowest near 1.0188"""
    family = TruncationFamily(
        [4.0, 6.0, 8.0],
        spacing=0.1,
        potential=HARMONIC,
        kinetic=lambda t: np.sqrt(np.clip(t, 0.0, None)),
    )
    (verdict,) = ess_spectrum_probe(family, [3.6])
    assert verdict.counts == [3, 3, 3]
    assert verdict.eigenvalues[-1][0] == pytest.approx(1.0188, abs=2e-2)


def test_probe_uses_the_supplied_solver(harmonic_family):
    """Test a custom solve callable replaces the default eigen solver"""
    calls = []

    def solve(H, top):
        calls.append(H.dimension)
        return eigenpairs_below(H, top)

    (verdict,) = ess_spectrum_probe(harmonic_family, [4.0], solve=solve, workers=1)
    assert sorted(calls) == [79, 119, 159]
    assert verdict.counts == [2, 2, 2]
