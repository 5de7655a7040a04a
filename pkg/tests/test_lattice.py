"""
Tests for grids, measures, potential families and operator assembly
"""
import numpy as np
import pytest

from spectra_lab.core.exceptions import BudgetExceededError, DomainError, GridError, KLMNViolationError
from spectra_lab.criteria.form_bounds import KLMN_LADDER
from spectra_lab.lattice.assembly import (
    add_measure,
    assemble_dirichlet_laplacian,
    assemble_functional_schrodinger,
    assemble_schrodinger,
)
from spectra_lab.lattice.grid import GridFunction, GridSpec, build_grid
from spectra_lab.lattice.measures import DiscreteMeasure, atoms_from_pairs, node_index
from spectra_lab.lattice.operators import quadratic_form
from spectra_lab.lattice.potentials import (
    CombMeasure,
    DisjointBallsPotential,
    IndicatorPotential,
    InfiniteOutsideMeasure,
    PolynomialPotential,
    PowerPotential,
    ProductSquaresPotential,
    Region,
    TabulatedPotential,
)
from spectra_lab.spectral.eigensolvers import dense_eigendecomposition, lowest_eigenpairs


def laplacian_closed_form(n: int, h: float) -> np.ndarray:
    k = np.arange(1, n + 1)
    return 4.0 / h**2 * np.sin(k * np.pi / (2 * (n + 1))) ** 2


# grids


def test_build_grid_1d_spacing():
    """Test (0, pi) with 3 nodes has h = pi/4"""
    grid = build_grid(GridSpec((0.0,), (np.pi,), (3,)))
    assert grid.size == 3
    assert grid.spacing[0] == pytest.approx(np.pi / 4)
    assert grid.axes()[0] == pytest.approx([np.pi / 4, np.pi / 2, 3 * np.pi / 4])


def test_build_grid_2d_counts(grid_2d):
    """Test 10 x 10 nodes on the unit square"""
    assert grid_2d.size == 100
    assert grid_2d.cell_measure == pytest.approx((1 / 11) ** 2)


@pytest.mark.parametrize(
    "spec",
    [
        GridSpec((0.0,), (0.0,), (5,)),
        GridSpec((1.0,), (0.0,), (5,)),
        GridSpec((0.0,), (1.0,), (1,)),
        GridSpec((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (3, 3, 3)),
        GridSpec((0.0,), (1.0, 2.0), (4,)),
    ],
)
def test_build_grid_rejects_bad_boxes(spec):
    """Test degenerate extents, too few nodes and unsupported dimensions"""
    with pytest.raises(GridError):
        build_grid(spec)


def test_build_grid_node_budget():
    """Test the node budget"""
    with pytest.raises(BudgetExceededError):
        build_grid(GridSpec((0.0, 0.0), (1.0, 1.0), (10, 10)), node_budget=50)


def test_index_map_is_bijection(grid_2d):
    """Test node index <-> coordinate round trip"""
    for i in (0, 17, 99):
        assert grid_2d.nearest_node(grid_2d.coordinate(i)) == i
    assert grid_2d.nearest_node([2.0, 0.5]) is None


def test_centered_box_spacing():
    """Test (-R, R) boxes share the requested spacing"""
    spec = GridSpec.centered_box(6.0, 1, 0.05)
    grid = build_grid(spec)
    assert grid.spacing[0] == pytest.approx(0.05)
    assert grid.size == 239


def test_incommensurate_spacing_warns(caplog):
    """Test a side that is not a whole number of cells logs the spacing actually used"""
    with caplog.at_level("WARNING", logger="spectra_lab.lattice.grid"):
        spec = GridSpec.from_spacing((0.0,), (1.04,), 0.1)
    assert spec.nodes == (9,)
    assert "not a multiple" in caplog.text
    caplog.clear()
    with caplog.at_level("WARNING", logger="spectra_lab.lattice.grid"):
        GridSpec.centered_box(4.0, 1, 0.1)
    assert caplog.text == ""


def test_norms_are_cell_weighted(grid_2d):
    """Test ||1||_2^2 equals the active volume and ||1||_1 the same"""
    one = GridFunction(grid_2d, np.ones(grid_2d.size))
    assert one.norm_l2() ** 2 == pytest.approx(grid_2d.volume)
    assert one.norm_l1() == pytest.approx(grid_2d.volume)
    assert one.norm_linf() == 1.0


def test_grid_function_is_immutable(grid_1d):
    """Test values cannot be changed after construction"""
    f = GridFunction(grid_1d, np.zeros(grid_1d.size))
    with pytest.raises(ValueError):
        f.values[0] = 1.0
    with pytest.raises(AttributeError):
        f.values = np.ones(grid_1d.size)


# measures


def test_measure_masses(grid_1d):
    """Test cell masses combine density, atoms and the infinite mask"""
    h = grid_1d.spacing[0]
    mu = DiscreteMeasure(grid_1d, density=np.full(grid_1d.size, 2.0), atoms={3: 0.5})
    assert mu.total_mass([3]) == pytest.approx(2.0 * h + 0.5)
    assert mu.total_mass() == pytest.approx(2.0 * grid_1d.volume + 0.5)
    masked = DiscreteMeasure(grid_1d, infinite_mask=np.arange(grid_1d.size) == 4)
    assert masked.total_mass([4, 5]) == np.inf
    assert masked.total_mass([5]) == 0.0


def test_measure_rejects_negative_values(grid_1d):
    """Test negative density and atom weights"""
    with pytest.raises(DomainError):
        DiscreteMeasure(grid_1d, density=-np.ones(grid_1d.size))
    with pytest.raises(DomainError):
        DiscreteMeasure(grid_1d, atoms={0: -1.0})
    with pytest.raises(GridError):
        DiscreteMeasure(grid_1d, atoms={grid_1d.size: 1.0})


def test_atoms_merge_per_node():
    """Test each node appears at most once among atoms"""
    assert atoms_from_pairs([(1, 0.5), (2, 1.0), (1, 0.25)]) == {1: 0.75, 2: 1.0}
    assert node_index([3, 1, 3], 5).tolist() == [1, 3]


def test_integrate_square_matches_form(grid_1d):
    """Test mu[u, u] = sum of atom weights * u^2 for a pure atom measure"""
    mu = DiscreteMeasure(grid_1d, atoms={2: 0.3, 7: 1.5})
    u = np.linspace(0.0, 1.0, grid_1d.size)
    assert mu.integrate_square(u) == pytest.approx(0.3 * u[2] ** 2 + 1.5 * u[7] ** 2)


# potential and measure families


def test_polynomial_and_power_potentials():
    """Test analytic families on a 2D grid"""
    grid = build_grid(GridSpec((-1.0, -1.0), (1.0, 1.0), (9, 9)))
    pts = grid.points()
    poly = PolynomialPotential(terms=[{"coef": 2.0, "px": 2}, {"coef": -1.0, "px": 1, "py": 1}]).evaluate(grid)
    assert poly.values == pytest.approx(2 * pts[:, 0] ** 2 - pts[:, 0] * pts[:, 1])
    power = PowerPotential(c=3.0, alpha=1.0).evaluate(grid)
    assert power.values == pytest.approx(3.0 * np.hypot(pts[:, 0], pts[:, 1]))
    product = ProductSquaresPotential().evaluate(grid)
    assert product.values == pytest.approx(pts[:, 0] ** 2 * pts[:, 1] ** 2)


def test_product_squares_needs_2d(grid_1d):
    """Test x^2 y^2 on a line"""
    with pytest.raises(GridError):
        ProductSquaresPotential().evaluate(grid_1d)


def test_indicator_potential_is_infinite_outside():
    """Test inf outside a box region"""
    grid = build_grid(GridSpec.centered_box(2.0, 1, 0.1))
    V = IndicatorPotential(region=Region(shape="box", lower=[-1.0], upper=[1.0])).evaluate(grid)
    x = grid.axes()[0]
    assert np.all(np.isposinf(V.values[np.abs(x) > 1.0 + 1e-9]))
    assert np.all(V.values[np.abs(x) <= 1.0 - 1e-9] == 0.0)


def test_disjoint_balls_reject_overlap(grid_2d):
    """Test balls that touch"""
    with pytest.raises(DomainError):
        DisjointBallsPotential(radius=1.0, period=2.0).evaluate(grid_2d)


def test_tabulated_potential_size(grid_1d):
    """Test tabulated values must match the grid"""
    with pytest.raises(GridError):
        TabulatedPotential(values=[1.0, 2.0]).evaluate(grid_1d)


def test_linear_comb_weights():
    """Test atoms at integers with weight |k|"""
    grid = build_grid(GridSpec.centered_box(5.0, 1, 0.1))
    mu = CombMeasure(period=1.0, weight="linear").build(grid)
    positions = {round(float(grid.coordinate(node)[0]), 6): w for node, w in mu.atoms}
    assert positions == {float(k): float(abs(k)) for k in range(-4, 5) if k != 0}


# assembly


def test_laplacian_closed_form_1d():
    """Test eigenvalues equal 4/h^2 sin^2(k pi / 2(n+1))"""
    n = 20
    grid = build_grid(GridSpec((0.0,), (2.0,), (n,)))
    L = assemble_dirichlet_laplacian(grid)
    values = np.linalg.eigvalsh(L.dense())
    expected = laplacian_closed_form(n, grid.spacing[0])
    assert values == pytest.approx(expected, rel=1e-10)
    assert L.gamma == 0.0


def test_laplacian_converges_at_second_order():
    """Test the lowest eigenvalue on (0, pi) approaches 1 with error O(h^2)"""
    errors = []
    for n in (49, 99):
        L = assemble_dirichlet_laplacian(build_grid(GridSpec((0.0,), (np.pi,), (n,))))
        errors.append(abs(dense_eigendecomposition(L).eigenvalues[0] - 1.0))
    assert errors[1] < 1e-3
    assert 3.5 < errors[0] / errors[1] < 4.5


def test_laplacian_2d_is_kronecker_sum(grid_2d):
    """Test 2D eigenvalues are sums of 1D eigenvalues"""
    L = assemble_dirichlet_laplacian(grid_2d)
    one_d = laplacian_closed_form(10, 1 / 11)
    expected = np.sort(np.add.outer(one_d, one_d).ravel())
    assert np.linalg.eigvalsh(L.dense()) == pytest.approx(expected, rel=1e-10)
    assert L.is_exactly_symmetric()


def test_laplacian_form_is_positive_on_constants(grid_2d, rng):
    """Test Dirichlet (not Neumann) boundary: constants have positive energy"""
    L = assemble_dirichlet_laplacian(grid_2d)
    assert quadratic_form(L, np.ones(grid_2d.size)) > 0
    for _ in range(20):
        assert quadratic_form(L, rng.standard_normal(grid_2d.size)) >= 0


def test_schrodinger_identity_case(grid_1d):
    """Test V+ = V- = 0 returns H0 unchanged"""
    L = assemble_dirichlet_laplacian(grid_1d)
    zero = GridFunction(grid_1d, np.zeros(grid_1d.size))
    assert assemble_schrodinger(L, zero, zero) is L


def test_schrodinger_rejects_negative_v_plus(grid_1d):
    """Test V+ must be nonnegative"""
    L = assemble_dirichlet_laplacian(grid_1d)
    with pytest.raises(DomainError):
        assemble_schrodinger(L, GridFunction(grid_1d, -np.ones(grid_1d.size)))


def test_infinite_potential_equals_smaller_box():
    """Test V+ = inf outside (-1, 1) gives the Dirichlet Laplacian of (-1, 1)"""
    grid = build_grid(GridSpec.centered_box(2.0, 1, 0.1))
    L = assemble_dirichlet_laplacian(grid)
    V = IndicatorPotential(region=Region(shape="box", lower=[-0.95], upper=[0.95])).evaluate(grid)
    H = assemble_schrodinger(L, V)
    small = assemble_dirichlet_laplacian(build_grid(GridSpec((-1.0,), (1.0,), (19,))))
    assert H.dimension == 19
    assert H.dense() == pytest.approx(small.dense(), rel=1e-12)
    assert np.abs(grid.points()[H.active, 0]).max() == pytest.approx(0.9)


def test_infinite_measure_equals_infinite_potential():
    """Test the infinite part of a measure acts like V+ = inf"""
    grid = build_grid(GridSpec.centered_box(2.0, 1, 0.1))
    L = assemble_dirichlet_laplacian(grid)
    region = Region(shape="box", lower=[-0.95], upper=[0.95])
    by_potential = assemble_schrodinger(L, IndicatorPotential(region=region).evaluate(grid))
    by_measure = add_measure(L, InfiniteOutsideMeasure(region=region).build(grid))
    assert np.array_equal(by_potential.active, by_measure.active)
    assert by_measure.dense() == pytest.approx(by_potential.dense())


def test_mask_monotonicity():
    """Test enlarging the infinite region never lowers the k-th eigenvalue"""
    grid = build_grid(GridSpec.centered_box(2.0, 1, 0.1))
    L = assemble_dirichlet_laplacian(grid)
    V = IndicatorPotential(region=Region(shape="box", lower=[-1.0], upper=[1.5])).evaluate(grid)
    H = assemble_schrodinger(L, V)
    masked = dense_eigendecomposition(H).eigenvalues
    full = dense_eigendecomposition(L).eigenvalues
    assert H.dimension < L.dimension
    assert np.all(masked >= full[: masked.size] - 1e-10)


def test_lebesgue_measure_shifts_spectrum():
    """Test mu+ = c * Lebesgue shifts every eigenvalue by c"""
    grid = build_grid(GridSpec((0.0,), (10.0,), (9,)))
    L = assemble_dirichlet_laplacian(grid)
    H = add_measure(L, DiscreteMeasure.lebesgue(grid, 0.75))
    shift = dense_eigendecomposition(H).eigenvalues - dense_eigendecomposition(L).eigenvalues
    assert np.max(np.abs(shift - 0.75)) <= 1e-12


def test_atom_adds_weight_over_cell_measure(grid_2d):
    """Test an atom of weight w adds w/h^d to its diagonal entry"""
    L = assemble_dirichlet_laplacian(grid_2d)
    H = add_measure(L, DiscreteMeasure(grid_2d, atoms={5: 0.3}))
    diff = H.diagonal() - L.diagonal()
    assert diff[5] == pytest.approx(0.3 / grid_2d.cell_measure)
    assert np.count_nonzero(diff) == 1


def test_atom_on_inactive_node_is_rejected(grid_1d):
    """Test atoms must sit on active nodes"""
    L = assemble_dirichlet_laplacian(grid_1d)
    values = np.zeros(grid_1d.size)
    values[0] = np.inf
    H = assemble_schrodinger(L, GridFunction(grid_1d, values))
    with pytest.raises(DomainError):
        add_measure(H, DiscreteMeasure(grid_1d, atoms={0: 1.0}))


def test_negative_measure_must_be_finite(grid_1d):
    """Test mu- with an infinite part"""
    L = assemble_dirichlet_laplacian(grid_1d)
    with pytest.raises(DomainError):
        add_measure(L, None, DiscreteMeasure.infinite_on(grid_1d, [3]))


def test_declared_form_bound_is_verified():
    """Test V- = 2 V+ against H0 + V+ at C = 0 is rejected (q close to 2)"""
    grid = build_grid(GridSpec.centered_box(5.0, 1, 0.1))
    L = assemble_dirichlet_laplacian(grid)
    V = PolynomialPotential(terms=[{"coef": 1.0, "px": 2}]).evaluate(grid)
    with pytest.raises(KLMNViolationError):
        assemble_schrodinger(L, V, V * 2.0, klmn=(0.5, 0.0))


def test_auto_klmn_rejects_huge_negative_part(grid_1d):
    """Test the auto scan reports q >= 1 over the whole C ladder"""
    L = assemble_dirichlet_laplacian(grid_1d)
    minus = np.zeros(grid_1d.size)
    minus[10] = 1e9
    with pytest.raises(KLMNViolationError) as info:
        assemble_schrodinger(L, None, GridFunction(grid_1d, minus))
    assert len(info.value.scan) == len(KLMN_LADDER)


def test_auto_klmn_records_bound_and_gamma(grid_1d, rng):
    """Test a small V- is accepted and the lower bound holds"""
    L = assemble_dirichlet_laplacian(grid_1d)
    minus = GridFunction(grid_1d, 0.5 * np.ones(grid_1d.size))
    H = assemble_schrodinger(L, None, minus)
    q, C_q = H.form_bound
    assert q < 1.0
    assert H.gamma == pytest.approx((1 - q) * 0.0 - C_q)
    for _ in range(20):
        u = GridFunction(grid_1d, rng.standard_normal(grid_1d.size))
        assert quadratic_form(H, u) >= H.gamma * u.norm_l2() ** 2 - 1e-10


def test_harmonic_oscillator_low_eigenvalues():
    """Test -u'' + x^2 u on (-10, 10) has eigenvalues near 1, 3, 5, 7, 9"""
    grid = build_grid(GridSpec.centered_box(10.0, 1, 0.02))
    H = assemble_schrodinger(
        assemble_dirichlet_laplacian(grid), PolynomialPotential(terms=[{"coef": 1.0, "px": 2}]).evaluate(grid)
    )
    values = lowest_eigenpairs(H, 5, tol=1e-6, method="arpack").eigenvalues
    assert values == pytest.approx([1, 3, 5, 7, 9], abs=5e-3)


def test_quadratic_form_examples(grid_1d):
    """Test Rayleigh quotients of eigenvectors and the zero function"""
    L = assemble_dirichlet_laplacian(grid_1d)
    S = dense_eigendecomposition(L)
    for k in (0, 3):
        u = S.eigenfunction(k)
        assert u.norm_l2() == pytest.approx(1.0)
        assert quadratic_form(L, u) == pytest.approx(S.eigenvalues[k])
    assert quadratic_form(L, np.zeros(grid_1d.size)) == 0.0


def test_quadratic_form_rejects_off_support(grid_1d):
    """Test u must vanish on removed nodes"""
    L = assemble_dirichlet_laplacian(grid_1d)
    values = np.zeros(grid_1d.size)
    values[0] = np.inf
    H = assemble_schrodinger(L, GridFunction(grid_1d, values))
    with pytest.raises(DomainError):
        quadratic_form(H, np.ones(grid_1d.size))
    with pytest.raises(GridError):
        quadratic_form(H, np.ones(5))


# functional kinetic terms


def test_functional_schrodinger_is_symmetric_with_mapped_spectrum(grid_1d):
    """Test g(H0) + V is symmetric and g(H0) has eigenvalues g(lambda_k)"""
    L = assemble_dirichlet_laplacian(grid_1d)
    root = lambda t: np.sqrt(np.clip(t, 0.0, None))
    V = GridFunction(grid_1d, grid_1d.axes()[0] ** 2)
    H = assemble_functional_schrodinger(L, root, V)
    assert np.array_equal(H.dense(), H.dense().T)
    kinetic = assemble_functional_schrodinger(L, root, None)
    expected = np.sqrt(dense_eigendecomposition(L).eigenvalues)
    assert np.linalg.eigvalsh(kinetic.dense()) == pytest.approx(expected, rel=1e-10)
    assert kinetic.gamma == pytest.approx(expected[0])


def test_functional_schrodinger_identity_map(grid_1d):
    """Test g(t) = t reproduces the ordinary Schrodinger assembly"""
    L = assemble_dirichlet_laplacian(grid_1d)
    V = GridFunction(grid_1d, grid_1d.axes()[0] ** 2)
    minus = GridFunction(grid_1d, 0.5 * np.ones(grid_1d.size))
    direct = assemble_schrodinger(L, V, minus)
    mapped = assemble_functional_schrodinger(L, lambda t: t, V, minus)
    scale = np.abs(direct.dense()).max()
    assert np.abs(mapped.dense() - direct.dense()).max() <= 1e-10 * scale
    assert mapped.form_bound[0] == pytest.approx(direct.form_bound[0], rel=1e-6)
