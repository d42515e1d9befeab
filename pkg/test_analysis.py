# test_analysis.py
import numpy as np
import pytest

from curvem.analysis import (AffineSolution, DiskManufactured, PolynomialSolution, RigidMotion,
                             convergence_slope, error_displacement_skeleton, error_strain_l2,
                             manufactured_forcing, result_at_point, run_convergence_study,
                             solve_manufactured)
from curvem.benchmarks import (CylinderProblem, rigid_motion_error, run_benchmark, run_example2,
                               run_example3, run_example3_displacements, run_example4)
from curvem.errors import ConfigError
from curvem.materials import create_material, lame_parameters
from curvem.meshgen import generate_benchmark_mesh
from curvem.solver import AnalysisConfig, DirichletCondition, Discretization, run_analysis
from curvem.spaces import interpolate
from curvem.types import Domain, MeshFamily, MeshRequest, QuadratureMode, SpaceConfig, Variant
from test_geometry import unit_square

ELASTIC = {'E': 1000.0, 'nu': 0.3}
QUADRATIC = PolynomialSolution({(2, 0): (0.01, -0.02), (1, 1): (0.03, 0.01),
                                (0, 1): (0.0, 0.05), (0, 0): (0.1, 0.0)})


@pytest.fixture(scope="module")
def disk():
    return generate_benchmark_mesh(MeshRequest(Domain.DISK, MeshFamily.QUAD, 50))


def fd_gradient(solution, points, step=1e-6):
    G = np.empty((len(points), 2, 2))
    for j in range(2):
        shift = np.zeros(2)
        shift[j] = step
        G[:, :, j] = (solution(points + shift) - solution(points - shift)) / (2 * step)
    return G


# ==================== EXACT SOLUTIONS ====================

@pytest.mark.parametrize("solution", [QUADRATIC, DiskManufactured(),
                                      AffineSolution([[1.0, 2.0], [3.0, 4.0]])])
def test_gradients_match_finite_differences(solution):
    points = np.random.default_rng(0).uniform(-1, 1, (10, 2))
    np.testing.assert_allclose(solution.gradient(points), fd_gradient(solution, points),
                               atol=1e-7)


def test_rigid_motion_has_zero_strain():
    points = np.random.default_rng(1).uniform(-1, 1, (5, 2))
    np.testing.assert_allclose(RigidMotion((1.0, 2.0), 0.5).strain(points), 0.0)
    np.testing.assert_allclose(RigidMotion(rotation=1.0)(np.array([[1.0, 2.0]])), [[-2.0, 1.0]])


def test_disk_solution_boundary_values():
    points = np.array([[1.0, 0.0], [0.0, -1.0]])
    np.testing.assert_allclose(DiskManufactured()(points), [[0.0, -2.0], [0.0, -2.0]], atol=1e-14)


def test_manufactured_forcing_of_quadratic_field():
    model = create_material('linear_elastic', ELASTIC)
    lam, mu = lame_parameters(**ELASTIC)
    forcing = manufactured_forcing(PolynomialSolution({(2, 0): (1.0, 0.0)}), model, 1e-3)
    values = forcing(np.array([[0.2, 0.3], [-0.5, 0.1]]))
    np.testing.assert_allclose(values, [[-2 * (lam + 2 * mu), 0.0]] * 2, rtol=1e-8)


def test_affine_field_needs_no_forcing():
    model = create_material('linear_elastic', ELASTIC)
    forcing = manufactured_forcing(AffineSolution([[0.1, 0.2], [0.3, -0.1]]), model, 1e-3)
    np.testing.assert_allclose(forcing(np.array([[0.4, 0.4]])), 0.0, atol=1e-8)


# ==================== ERROR NORMS ====================

def test_interpolant_has_no_error():
    mesh = unit_square(2)
    disc = Discretization(mesh, SpaceConfig(2))
    u = interpolate(QUADRATIC, mesh, disc.space, disc.layout)
    e_u, absolute = error_displacement_skeleton(QUADRATIC, u, disc)
    assert e_u <= 1e-15 and not absolute
    e_eps, absolute = error_strain_l2(QUADRATIC.strain, u, disc)
    assert e_eps <= 1e-10 and not absolute


def test_zero_exact_field_reports_absolute_error():
    mesh = unit_square(2)
    disc = Discretization(mesh, SpaceConfig(1))
    u = np.full(disc.n_dofs, 0.5)
    e_u, absolute = error_displacement_skeleton(lambda x: np.zeros_like(x), u, disc)
    assert absolute
    assert e_u == pytest.approx(np.sqrt(0.5))


def test_convergence_slope():
    h = [1.0, 0.5, 0.25, 0.125]
    assert convergence_slope(h, [2 * x ** 2 for x in h]) == pytest.approx(2.0)
    assert np.isnan(convergence_slope(h, [1.0, 1.0, 0.0, 0.0]))


def test_convergence_study_needs_three_meshes():
    with pytest.raises(ConfigError):
        run_convergence_study(SpaceConfig(1), elements=(50, 200))


# ==================== MANUFACTURED SOLUTIONS ====================

def test_quadratic_solution_is_reproduced():
    report = solve_manufactured(unit_square(2), 'square', SpaceConfig(2), QUADRATIC,
                                'linear_elastic', ELASTIC, 'boundary')
    assert report.e_u <= 1e-8
    assert report.e_eps <= 1e-8
    assert report.n_elements == 4
    assert report.dofs == 2 * (9 + 12 + 4)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_rigid_motion_contrast_between_curved_variants(disk, k):
    cv = rigid_motion_error(disk, SpaceConfig(k, Variant.CV, QuadratureMode.REFERENCE))
    co = rigid_motion_error(disk, SpaceConfig(k, Variant.CO, QuadratureMode.REFERENCE))
    assert cv <= 1e-10
    assert co >= 1e-8
    assert co >= 1e4 * cv


@pytest.mark.slow
def test_rigid_motion_benchmark_table(tmp_path):
    frame = run_example2(elements=(500,), out_dir=str(tmp_path))
    cv = frame[frame.variant == 'cv'].set_index('k').e_u
    co = frame[frame.variant == 'co'].set_index('k').e_u
    assert (cv <= 1e-10).all()
    assert (co >= 1e4 * cv).all()
    assert co[1] >= 1e-5


def test_result_at_point():
    mesh = unit_square(2)
    config = AnalysisConfig(space=SpaceConfig(1), material_params=ELASTIC, steps=2,
                            dirichlet=[DirichletCondition('boundary', 'xy', (0.1, 0.0))])
    result = run_analysis(mesh, config)
    node, history = result_at_point(result, (0.5, 0.5))
    assert history.shape == (2, 2)
    np.testing.assert_allclose(history[:, 0], [0.05, 0.1], rtol=1e-8)
    np.testing.assert_allclose(mesh.vertices[node], [0.5, 0.5])


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("variant", [Variant.CO, Variant.CV])
def test_disk_convergence_rates(k, variant):
    table = run_convergence_study(SpaceConfig(k, variant), elements=(50, 200, 800))
    assert table.slope_u >= k + 0.6
    assert table.slope_eps >= k - 0.3
    frame = table.to_frame()
    assert list(frame.columns) == ['mesh', 'N', 'h', 'dofs', 'e_u', 'e_eps', 'slope_u',
                                   'slope_eps']


@pytest.mark.slow
def test_straight_geometry_limits_cubic_convergence():
    elements = (50, 200, 800)
    straight = run_convergence_study(SpaceConfig(3, Variant.STRAIGHT), elements=elements)
    curved = run_convergence_study(SpaceConfig(3, Variant.CV), elements=elements)
    assert straight.slope_u < 3.5
    assert curved.slope_u > straight.slope_u
    assert curved.reports[-1].e_u * 10 <= straight.reports[-1].e_u


# ==================== BENCHMARK DRIVERS ====================

def test_cylinder_creeps_under_constant_pressure(tmp_path):
    problem = CylinderProblem()
    frames = run_example3(k=2, elements=16, steps=3, problem=problem, out_dir=str(tmp_path))
    history = frames['history.csv']
    assert len(history) == 2 * 4
    a = history[history.point == 'A']
    radial = np.hypot(a.ux.to_numpy(), a.uy.to_numpy())
    assert np.all(np.diff(radial) > 0)
    elastic = problem.lame_radial_displacement(problem.inner_radius)
    assert radial[0] == pytest.approx(elastic, rel=0.03)
    assert (tmp_path / 'history.csv').exists()
    assert (tmp_path / 'sigma_rho.csv').exists()
    profile = frames['sigma_rho.csv']
    assert profile.sigma_rr.iloc[0] < 0


@pytest.mark.slow
@pytest.mark.parametrize("k, rel", [(2, 1e-2), (3, 1e-3)])
def test_cylinder_elastic_step_matches_lame(tmp_path, k, rel):
    problem = CylinderProblem()
    history = run_example3(k=k, steps=1, problem=problem, out_dir=str(tmp_path))['history.csv']
    first = history[history.step == 1].set_index('point')
    for point, r in (('A', problem.inner_radius), ('B', problem.outer_radius)):
        radial = np.hypot(first.ux[point], first.uy[point])
        assert radial == pytest.approx(problem.lame_radial_displacement(r), rel=rel)


@pytest.mark.slow
@pytest.mark.parametrize("k", [2, 3])
def test_curved_geometry_beats_chords_on_cylinder(k):
    frame = run_example3_displacements(k=k, meshes=(16, 64))
    for _, rows in frame.groupby('mesh'):
        rows = rows.set_index('variant')
        assert rows.err_A['cv'] <= rows.err_A['straight']
        assert rows.err_B['cv'] <= rows.err_B['straight']


def test_unknown_prony_set():
    with pytest.raises(ConfigError):
        run_example3(prony_set='ve9')


def test_plate_reaction_grows_with_pulling(tmp_path):
    frame = run_example4(k=1, elements=100, increments=10, out_dir=str(tmp_path))
    assert list(frame.step) == list(range(1, 11))
    reaction = frame.reaction.to_numpy()
    assert np.all(reaction > 0)
    assert frame.iterations.max() <= 25
    assert np.all(np.diff(reaction) >= -1e-8 * reaction.max())
    assert (tmp_path / 'history.csv').exists()


@pytest.mark.slow
def test_plate_reaction_reaches_a_plateau():
    frame = run_example4(k=1, elements=100, increments=100)
    assert len(frame) == 100
    assert frame.iterations.max() <= 25
    reaction = frame.reaction.to_numpy()
    assert np.all(np.diff(reaction) >= -1e-8 * reaction.max())
    assert reaction[-1] - reaction[-2] <= 0.05 * reaction[0]


def test_unknown_example():
    with pytest.raises(ConfigError):
        run_benchmark(7)
