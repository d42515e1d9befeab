"""
Error norms, exact solutions and convergence studies for curvem
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from curvem.errors import ConfigError
from curvem.geometry import CurvedMesh
from curvem.materials import ConstitutiveModel, create_material
from curvem.meshgen import generate_benchmark_mesh
from curvem.quadrature import element_rule
from curvem.solver import (AnalysisConfig, AnalysisResult, DirichletCondition, Discretization,
                           run_analysis)
from curvem.spaces import strain_at
from curvem.types import (ConvergenceTable, Domain, ErrorReport, MeshFamily, MeshRequest,
                          SpaceConfig)

logger = logging.getLogger(__name__)

EXAMPLE1_FAMILY = (50, 200, 800, 2000)


class ExactSolution:
    """Displacement field with its gradient"""

    def displacement(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """du_i/dx_j, shape (npts, 2, 2)"""
        raise NotImplementedError

    def strain(self, points: np.ndarray) -> np.ndarray:
        """Voigt strain with engineering shear"""
        G = self.gradient(np.atleast_2d(points))
        return np.column_stack((G[:, 0, 0], G[:, 1, 1], G[:, 0, 1] + G[:, 1, 0]))

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.displacement(np.atleast_2d(points))


class AffineSolution(ExactSolution):
    """u(x) = c + A x"""

    def __init__(self, A, c=(0.0, 0.0)):
        self.A = np.asarray(A, dtype=float)
        self.c = np.asarray(c, dtype=float)

    def displacement(self, points):
        return self.c + np.atleast_2d(points) @ self.A.T

    def gradient(self, points):
        return np.broadcast_to(self.A, (len(np.atleast_2d(points)), 2, 2)).copy()


class RigidMotion(AffineSolution):
    """Translation plus infinitesimal rotation: u = t + theta (-y, x)"""

    def __init__(self, translation=(0.0, 0.0), rotation: float = 1.0):
        super().__init__([[0.0, -rotation], [rotation, 0.0]], translation)


class PolynomialSolution(ExactSolution):
    """Vector polynomial given by coefficient dicts {(a, b): (cx, cy)}"""

    def __init__(self, terms):
        self.terms = {tuple(key): np.asarray(value, dtype=float) for key, value in terms.items()}

    @property
    def degree(self) -> int:
        return max(a + b for a, b in self.terms)

    def displacement(self, points):
        points = np.atleast_2d(points)
        x, y = points[:, 0], points[:, 1]
        u = np.zeros((len(points), 2))
        for (a, b), coef in self.terms.items():
            u += np.outer(x ** a * y ** b, coef)
        return u

    def gradient(self, points):
        points = np.atleast_2d(points)
        x, y = points[:, 0], points[:, 1]
        G = np.zeros((len(points), 2, 2))
        for (a, b), coef in self.terms.items():
            if a:
                G[:, :, 0] += np.outer(a * x ** (a - 1) * y ** b, coef)
            if b:
                G[:, :, 1] += np.outer(b * x ** a * y ** (b - 1), coef)
        return G


class DiskManufactured(ExactSolution):
    """u = (sin(pi r^2), 2 cos(pi r^2)) on the unit disk"""

    def displacement(self, points):
        points = np.atleast_2d(points)
        r2 = np.sum(points ** 2, axis=1)
        return np.column_stack((np.sin(np.pi * r2), 2.0 * np.cos(np.pi * r2)))

    def gradient(self, points):
        points = np.atleast_2d(points)
        r2 = np.sum(points ** 2, axis=1)
        dux = 2.0 * np.pi * np.cos(np.pi * r2)
        duy = -4.0 * np.pi * np.sin(np.pi * r2)
        G = np.empty((len(points), 2, 2))
        G[:, 0, :] = dux[:, None] * points
        G[:, 1, :] = duy[:, None] * points
        return G


def manufactured_forcing(solution: ExactSolution, model: ConstitutiveModel,
                         step: float) -> Callable[[np.ndarray], np.ndarray]:
    """Body force -div sigma(eps(u)) by fourth-order central differences"""

    def stress(points):
        strain = solution.strain(points)
        out, _, _ = model.update(strain, model.initial_history(len(points)), 0.0)
        return out

    def derivative(points, axis):
        shift = np.zeros(2)
        shift[axis] = step
        return (-stress(points + 2 * shift) + 8 * stress(points + shift)
                - 8 * stress(points - shift) + stress(points - 2 * shift)) / (12.0 * step)

    def forcing(points):
        points = np.atleast_2d(points)
        dx, dy = derivative(points, 0), derivative(points, 1)
        return -np.column_stack((dx[:, 0] + dy[:, 2], dx[:, 2] + dy[:, 1]))
    return forcing


def error_displacement_skeleton(exact: Callable[[np.ndarray], np.ndarray], u: np.ndarray,
                                disc: Discretization) -> Tuple[float, bool]:
    """Relative max-norm error at the vertex and edge dof points

    Returns (error, absolute); absolute is set when the exact field vanishes
    on the skeleton and the plain maximum error is reported instead.
    """
    layout = disc.layout
    n = layout.n_skeleton_nodes
    points = layout.skeleton_points(trace=True)
    values = np.asarray(exact(points), dtype=float)
    discrete = np.column_stack((u[0:2 * n:2], u[1:2 * n:2]))
    error = float(np.max(np.linalg.norm(values - discrete, axis=1)))
    scale = float(np.max(np.linalg.norm(values, axis=1)))
    if scale <= 1e-300:
        logger.warning("exact displacement vanishes on the skeleton; reporting absolute error")
        return error, True
    return error / scale, False


def error_strain_l2(exact_strain: Callable[[np.ndarray], np.ndarray], u: np.ndarray,
                    disc: Discretization) -> Tuple[float, bool]:
    """Relative L2 error of the projected strain"""
    order = max(2 * disc.space.k + 2, disc.space.n_vol)
    num = den = 0.0
    weights = np.array([1.0, 1.0, 0.5])
    for ops, dofs in zip(disc.operators, disc.element_dofs):
        rule = element_rule(disc.mesh, ops.element_id, order)
        exact = exact_strain(rule.points)
        approx = strain_at(ops, u[dofs], rule.points)
        num += float(rule.weights @ (((exact - approx) ** 2) @ weights))
        den += float(rule.weights @ ((exact ** 2) @ weights))
    if den <= 1e-300:
        return float(np.sqrt(num)), True
    return float(np.sqrt(num / den)), False


def convergence_slope(h: Sequence[float], errors: Sequence[float], last: int = 3) -> float:
    """Least-squares slope of log(error) against log(h) over the last points"""
    h = np.asarray(h, dtype=float)[-last:]
    errors = np.asarray(errors, dtype=float)[-last:]
    keep = errors > 0
    if keep.sum() < 2:
        return float('nan')
    slope, _ = np.polyfit(np.log(h[keep]), np.log(errors[keep]), 1)
    return float(slope)


def solve_manufactured(mesh: CurvedMesh, label: str, space: SpaceConfig, solution: ExactSolution,
                       material: str, material_params: dict, boundary_group: str,
                       steps: int = 1, forcing_step: Optional[float] = None) -> ErrorReport:
    """Solve a Dirichlet problem with a known solution and measure both errors"""
    started = time.perf_counter()
    model = create_material(material, material_params)
    if forcing_step is None:
        forcing_step = 1e-4 * float(np.ptp(mesh.vertices, axis=0).max())
    config = AnalysisConfig(
        space=space, material=material, material_params=material_params, steps=steps,
        dirichlet=[DirichletCondition(boundary_group, 'xy', solution.displacement)],
        body_force=manufactured_forcing(solution, model, forcing_step))
    result = run_analysis(mesh, config)
    disc = result.discretization
    e_u, abs_u = error_displacement_skeleton(solution, result.u, disc)
    e_eps, abs_eps = error_strain_l2(solution.strain, result.u, disc)
    report = ErrorReport(mesh=label, n_elements=mesh.n_elements, h=mesh.h, e_u=e_u,
                         e_eps=e_eps, dofs=disc.n_dofs, runtime=time.perf_counter() - started,
                         e_u_absolute=abs_u, e_eps_absolute=abs_eps)
    logger.info("%s: N=%d h=%.4g e_u=%.3e e_eps=%.3e", label, report.n_elements, report.h,
                e_u, e_eps)
    return report


def run_convergence_study(space: SpaceConfig, family: MeshFamily = MeshFamily.QUAD,
                          elements: Sequence[int] = EXAMPLE1_FAMILY,
                          solution: Optional[ExactSolution] = None,
                          material: str = 'hencky_von_mises',
                          material_params: Optional[dict] = None,
                          workers: Optional[int] = None, steps: int = 2,
                          seed: int = 0) -> ConvergenceTable:
    """Manufactured-solution study over a refinement family of disk meshes"""
    if len(elements) < 3:
        raise ConfigError("a convergence study needs at least 3 meshes")
    solution = solution or DiskManufactured()
    material_params = material_params or {}
    requests = [MeshRequest(Domain.DISK, family, n, seed=seed) for n in elements]

    def one(request: MeshRequest) -> ErrorReport:
        mesh = generate_benchmark_mesh(request)
        return solve_manufactured(mesh, request.label, space, solution, material,
                                  material_params, 'boundary', steps=steps)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, requests))
    else:
        reports = [one(request) for request in requests]
    reports.sort(key=lambda r: -r.h)
    table = ConvergenceTable(reports=reports)
    h = [r.h for r in reports]
    table.slope_u = convergence_slope(h, [r.e_u for r in reports])
    table.slope_eps = convergence_slope(h, [r.e_eps for r in reports])
    logger.info("slopes: e_u %.2f, e_eps %.2f", table.slope_u, table.slope_eps)
    return table


def result_at_point(result: AnalysisResult, point) -> Tuple[int, np.ndarray]:
    """Nearest skeleton node to a point and its displacement history"""
    layout = result.discretization.layout
    points = layout.skeleton_points(trace=True)
    node = int(np.argmin(np.linalg.norm(points - np.asarray(point, dtype=float), axis=1)))
    history = np.array([[u[2 * node], u[2 * node + 1]] for u in result.history])
    return node, history
