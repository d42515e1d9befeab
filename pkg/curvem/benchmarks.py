"""
Benchmark drivers for curvem and their CSV artifacts

    example 1  manufactured solution on the disk, convergence rates
    example 2  rigid-motion Dirichlet problem on the disk
    example 3  pressurized viscoelastic thick cylinder (quarter annulus)
    example 4  perforated plastic plate under imposed top displacement
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from curvem.analysis import (EXAMPLE1_FAMILY, RigidMotion, error_displacement_skeleton,
                             result_at_point, run_convergence_study)
from curvem.errors import ConfigError
from curvem.geometry import CurvedMesh
from curvem.materials import bulk_shear, lame_parameters
from curvem.meshgen import generate_benchmark_mesh
from curvem.solver import (AnalysisConfig, AnalysisResult, DirichletCondition,
                           TractionCondition, run_analysis)
from curvem.types import (Domain, LoadHistory, MeshFamily, MeshRequest, QuadratureMode,
                          SpaceConfig, Variant)

logger = logging.getLogger(__name__)

ELASTIC = {'E': 1000.0, 'nu': 0.3}
PRONY_SETS = {'ve1': (0.01, 0.99), 've2': (0.3, 0.7)}
PLATE_MATERIAL = {'E': 7000.0, 'nu': 0.3, 'sigma_y': 24.3}


def write_csv(frame: pd.DataFrame, out_dir: Optional[str], name: str) -> Optional[str]:
    if out_dir is None:
        return None
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    frame.to_csv(path, index=False)
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


# ==================== EXAMPLE 1 ====================

def run_example1(k: int, variant: Variant, quadrature: QuadratureMode = QuadratureMode.MINIMAL,
                 family: MeshFamily = MeshFamily.QUAD, elements: Sequence[int] = EXAMPLE1_FAMILY,
                 out_dir: Optional[str] = None, workers: Optional[int] = None) -> pd.DataFrame:
    space = SpaceConfig(k=k, variant=variant, quadrature=quadrature)
    table = run_convergence_study(space, family, elements, workers=workers)
    frame = table.to_frame()
    write_csv(frame, out_dir, 'errors.csv')
    return frame


# ==================== EXAMPLE 2 ====================

def rigid_motion_error(mesh: CurvedMesh, space: SpaceConfig,
                       motion: Optional[RigidMotion] = None) -> float:
    """Skeleton error of the rigid-motion Dirichlet problem"""
    motion = motion or RigidMotion(translation=(0.0, 0.0), rotation=1.0)
    config = AnalysisConfig(space=space, material='linear_elastic', material_params=ELASTIC,
                            dirichlet=[DirichletCondition('boundary', 'xy', motion)])
    result = run_analysis(mesh, config)
    error, _ = error_displacement_skeleton(motion, result.u, result.discretization)
    return error


def run_example2(elements: Sequence[int] = (500,),
                 families: Sequence[MeshFamily] = (MeshFamily.QUAD,),
                 ks: Sequence[int] = (1, 2, 3), variants: Sequence[Variant] = (Variant.CO, Variant.CV),
                 quadrature: QuadratureMode = QuadratureMode.REFERENCE, seed: int = 0,
                 out_dir: Optional[str] = None) -> pd.DataFrame:
    rows = []
    for family in families:
        for n in elements:
            request = MeshRequest(Domain.DISK, family, n, seed=seed)
            mesh = generate_benchmark_mesh(request)
            for variant in variants:
                for k in ks:
                    space = SpaceConfig(k=k, variant=variant, quadrature=quadrature)
                    error = rigid_motion_error(mesh, space)
                    logger.info("%s %s k=%d: e_u=%.3e", request.label, variant.value, k, error)
                    rows.append({'mesh': request.label, 'N': mesh.n_elements,
                                 'variant': variant.value, 'k': k, 'e_u': error})
    frame = pd.DataFrame(rows, columns=['mesh', 'N', 'variant', 'k', 'e_u'])
    write_csv(frame, out_dir, 'errors.csv')
    return frame


# ==================== EXAMPLE 3 ====================

@dataclass
class CylinderProblem:
    """Quarter of a thick-walled cylinder under internal pressure"""
    inner_radius: float = 2.0
    outer_radius: float = 4.0
    pressure: float = 10.0
    E: float = 1000.0
    nu: float = 0.3

    @property
    def point_a(self) -> np.ndarray:
        return np.full(2, self.inner_radius / np.sqrt(2.0))

    @property
    def point_b(self) -> np.ndarray:
        return np.full(2, self.outer_radius / np.sqrt(2.0))

    def request(self, elements: int, distortion: float = 0.0, seed: int = 0) -> MeshRequest:
        return MeshRequest(Domain.ANNULUS, MeshFamily.QUAD, elements,
                           inner_radius=self.inner_radius, outer_radius=self.outer_radius,
                           distortion=distortion, seed=seed)

    def lame_radial_displacement(self, r, shear_modulus: Optional[float] = None) -> np.ndarray:
        """Plane-strain closed form u_r(r) of the elastic cylinder"""
        G = shear_modulus if shear_modulus is not None else lame_parameters(self.E, self.nu)[1]
        ri, ro = self.inner_radius, self.outer_radius
        r = np.asarray(r, dtype=float)
        return self.pressure * ri ** 2 / (2 * G * (ro ** 2 - ri ** 2)) * \
            ((1 - 2 * self.nu) * r + ro ** 2 / r)

    def config(self, space: SpaceConfig, material: str, params: dict, steps: int = 1,
               dt: float = 1.0, instantaneous: bool = False) -> AnalysisConfig:
        return AnalysisConfig(
            space=space, material=material, material_params=params, steps=steps, dt=dt,
            instantaneous_first_step=instantaneous, load_history=LoadHistory.CONSTANT,
            dirichlet=[DirichletCondition('bottom', 'y'), DirichletCondition('left', 'x')],
            tractions=[TractionCondition('inner', pressure=self.pressure)])


def radial_displacement(result: AnalysisResult, point) -> Tuple[np.ndarray, np.ndarray]:
    """Radial displacement history at the skeleton node nearest a point"""
    node, history = result_at_point(result, point)
    position = result.discretization.layout.skeleton_points(trace=True)[node]
    distance = np.linalg.norm(position - np.asarray(point, dtype=float))
    if distance > 1e-8 * np.linalg.norm(point):
        logger.warning("control point %s snapped to node at distance %.3e", tuple(point), distance)
    direction = position / np.linalg.norm(position)
    return history @ direction, history


def elements_along_ray(mesh: CurvedMesh, angle: float, r0: float, r1: float,
                       samples: int = 400) -> List[int]:
    """Elements crossed by the ray segment at a polar angle"""
    r = np.linspace(r0, r1, samples + 2)[1:-1]
    points = np.column_stack((r * np.cos(angle), r * np.sin(angle)))
    centroids = np.array([mesh.measures(e.id).centroid for e in mesh.elements])
    tree = cKDTree(centroids)
    _, candidates = tree.query(points, k=min(6, mesh.n_elements))
    candidates = np.atleast_2d(candidates.T).T
    found = []
    for point, near in zip(points, candidates):
        owner = next((int(e) for e in near if mesh.contains_points(int(e), point[None, :])[0]),
                     int(near[0]))
        if owner not in found:
            found.append(owner)
    return found


def radial_stress_profile(result: AnalysisResult, angle: float = np.pi / 4) -> pd.DataFrame:
    """sigma_rr at the quadrature point nearest the ray in each element it crosses"""
    disc = result.discretization
    mesh = disc.mesh
    radii = np.linalg.norm(mesh.vertices, axis=1)
    rows = []
    for eid in elements_along_ray(mesh, angle, radii.min(), radii.max()):
        points = disc.operators[eid].rule.points
        theta = np.arctan2(points[:, 1], points[:, 0])
        q = int(np.argmin(np.abs(theta - angle)))
        sxx, syy, sxy = result.states[eid].stress[q]
        c, s = np.cos(theta[q]), np.sin(theta[q])
        rows.append({'r': float(np.linalg.norm(points[q])),
                     'sigma_rr': sxx * c * c + syy * s * s + 2 * sxy * s * c})
    return pd.DataFrame(rows, columns=['r', 'sigma_rr']).sort_values('r').reset_index(drop=True)


def run_example3(k: int = 2, variant: Variant = Variant.CV,
                 quadrature: QuadratureMode = QuadratureMode.MINIMAL, elements: int = 272,
                 prony_set: str = 've1', steps: int = 20, dt: float = 1.0,
                 problem: Optional[CylinderProblem] = None,
                 out_dir: Optional[str] = None) -> Dict[str, pd.DataFrame]:
    """Creep of the pressurized cylinder: displacement history and radial stress"""
    if prony_set not in PRONY_SETS:
        raise ConfigError(f"unknown Prony set '{prony_set}' (choose from {sorted(PRONY_SETS)})")
    problem = problem or CylinderProblem()
    mu0, mu1 = PRONY_SETS[prony_set]
    params = {'E': problem.E, 'nu': problem.nu, 'mu0': mu0, 'mu': [mu1], 'lambda': [1.0]}
    mesh = generate_benchmark_mesh(problem.request(elements))
    space = SpaceConfig(k=k, variant=variant, quadrature=quadrature)
    config = problem.config(space, 'maxwell', params, steps=steps, dt=dt, instantaneous=True)
    result = run_analysis(mesh, config)

    rows = []
    times = [record.time for record in result.steps]
    for name, point in (('A', problem.point_a), ('B', problem.point_b)):
        _, history = radial_displacement(result, point)
        for record, t, (ux, uy) in zip(result.steps, times, history):
            rows.append({'step': record.step, 'time': t, 'point': name, 'ux': ux, 'uy': uy})
    frames = {
        'history.csv': pd.DataFrame(rows, columns=['step', 'time', 'point', 'ux', 'uy']),
        'sigma_rho.csv': radial_stress_profile(result),
    }
    for name, frame in frames.items():
        write_csv(frame, out_dir, name)
    return frames


def run_example3_displacements(k: int = 2, meshes: Sequence[int] = (1, 4, 16, 64),
                               reference: Tuple[int, int] = (3, 272),
                               problem: Optional[CylinderProblem] = None,
                               out_dir: Optional[str] = None) -> pd.DataFrame:
    """Elastic radial displacements at A and B, straight against curved geometry"""
    problem = problem or CylinderProblem()
    ref_k, ref_n = reference
    ref_mesh = generate_benchmark_mesh(problem.request(ref_n))
    ref_config = problem.config(SpaceConfig(k=ref_k, variant=Variant.CV), 'linear_elastic',
                                {'E': problem.E, 'nu': problem.nu})
    ref_result = run_analysis(ref_mesh, ref_config)
    ref_a = radial_displacement(ref_result, problem.point_a)[0][-1]
    ref_b = radial_displacement(ref_result, problem.point_b)[0][-1]

    rows = []
    for n in meshes:
        mesh = generate_benchmark_mesh(problem.request(n))
        for variant in (Variant.STRAIGHT, Variant.CV):
            config = problem.config(SpaceConfig(k=k, variant=variant), 'linear_elastic',
                                    {'E': problem.E, 'nu': problem.nu})
            result = run_analysis(mesh, config)
            u_a = radial_displacement(result, problem.point_a)[0][-1]
            u_b = radial_displacement(result, problem.point_b)[0][-1]
            rows.append({'mesh': f"quad{n}", 'variant': variant.value, 'k': k,
                         'u_A': u_a, 'u_B': u_b,
                         'err_A': abs(u_a - ref_a) / abs(ref_a),
                         'err_B': abs(u_b - ref_b) / abs(ref_b)})
    frame = pd.DataFrame(rows, columns=['mesh', 'variant', 'k', 'u_A', 'u_B', 'err_A', 'err_B'])
    write_csv(frame, out_dir, 'dispAB.csv')
    return frame


def moduli_ratios(E: float, nu: float, mu0: float) -> Tuple[float, float]:
    """K/G at t=0 and t=infinity of a standard linear solid"""
    K, G = bulk_shear(E, nu)
    return K / G, K / (G * mu0)


# ==================== EXAMPLE 4 ====================

@dataclass
class PlateProblem:
    """Quarter of a perforated plate pulled by an imposed top displacement"""
    width: float = 100.0
    height: float = 180.0
    hole_radius: float = 50.0
    displacement: float = 2.0
    material: Dict[str, float] = field(default_factory=lambda: dict(PLATE_MATERIAL))

    def request(self, family: MeshFamily, elements: int, seed: int = 0) -> MeshRequest:
        return MeshRequest(Domain.PLATE, family, elements, width=self.width, height=self.height,
                           hole_radius=self.hole_radius, seed=seed)

    def config(self, space: SpaceConfig, increments: int) -> AnalysisConfig:
        return AnalysisConfig(
            space=space, material='j2', material_params=self.material, steps=increments,
            load_history=LoadHistory.RAMP,
            dirichlet=[DirichletCondition('bottom', 'y'), DirichletCondition('left', 'x'),
                       DirichletCondition('top', 'xy', (0.0, self.displacement))])


def run_example4(k: int = 1, variant: Variant = Variant.CV,
                 quadrature: QuadratureMode = QuadratureMode.MINIMAL,
                 family: MeshFamily = MeshFamily.QUAD, elements: int = 100,
                 increments: int = 100, seed: int = 0, problem: Optional[PlateProblem] = None,
                 out_dir: Optional[str] = None) -> pd.DataFrame:
    """Reaction force on the top edge against the load step"""
    problem = problem or PlateProblem()
    mesh = generate_benchmark_mesh(problem.request(family, elements, seed))
    space = SpaceConfig(k=k, variant=variant, quadrature=quadrature)
    result = run_analysis(mesh, problem.config(space, increments))
    reactions = result.reaction_history('top', 1)
    frame = pd.DataFrame({'step': [r.step for r in result.steps], 'reaction': reactions,
                          'iterations': result.iterations})
    write_csv(frame, out_dir, 'history.csv')
    return frame


def run_benchmark(example: int, out_dir: Optional[str] = None, **options) -> Dict[str, pd.DataFrame]:
    """Run one benchmark by number and return its tables keyed by file name"""
    if example == 1:
        return {'errors.csv': run_example1(out_dir=out_dir, **options)}
    if example == 2:
        return {'errors.csv': run_example2(out_dir=out_dir, **options)}
    if example == 3:
        frames = run_example3(out_dir=out_dir, **options)
        frames['dispAB.csv'] = run_example3_displacements(k=options.get('k', 2), out_dir=out_dir)
        return frames
    if example == 4:
        return {'history.csv': run_example4(out_dir=out_dir, **options)}
    raise ConfigError(f"unknown example {example} (choose 1-4)")
