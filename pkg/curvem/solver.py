"""
Assembly, boundary conditions and the incremental Newton solver for curvem

The element form is the projected-strain consistency term plus a dof
stabilization of the non-polynomial remainder, weighted per dof by
max(alpha, M_ii) from the last converged step.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from curvem.errors import ConfigError, ConvergenceError, MaterialError, SolverError
from curvem.geometry import CurvedMesh
from curvem.materials import ConstitutiveModel, MaterialState, create_material, tangent_norm
from curvem.quadrature import element_rule
from curvem.spaces import (DofLayout, VemElementOperators, boundary_table,
                           build_element_operators, element_basis)
from curvem.types import LoadHistory, SpaceConfig, Variant

logger = logging.getLogger(__name__)

VectorField = Union[Tuple[float, float], Callable[[np.ndarray], np.ndarray]]
COMPONENTS = {'x': (0,), 'y': (1,), 'xy': (0, 1)}


def _field_values(value: VectorField, points: np.ndarray) -> np.ndarray:
    if callable(value):
        return np.asarray(value(points), dtype=float).reshape(len(points), 2)
    return np.tile(np.asarray(value, dtype=float), (len(points), 1))


@dataclass
class DirichletCondition:
    """Prescribed displacement components on a boundary group"""
    group: str
    components: str = 'xy'
    value: VectorField = (0.0, 0.0)

    def __post_init__(self):
        if self.components not in COMPONENTS:
            raise ConfigError(f"Dirichlet components must be x, y or xy, got '{self.components}'")


@dataclass
class TractionCondition:
    """Edge traction on a boundary group; a pressure p acts as t = -p n"""
    group: str
    traction: Optional[VectorField] = None
    pressure: Optional[float] = None

    def __post_init__(self):
        if (self.traction is None) == (self.pressure is None):
            raise ConfigError(f"group '{self.group}': give either a traction or a pressure")


@dataclass
class AnalysisConfig:
    """Space, material, loading and Newton settings of one analysis"""
    space: SpaceConfig
    material: str = 'linear_elastic'
    material_params: Dict[str, Any] = field(default_factory=lambda: {'E': 1000.0, 'nu': 0.3})
    steps: int = 1
    dt: float = 1.0
    instantaneous_first_step: bool = False
    load_history: LoadHistory = LoadHistory.RAMP
    tol: float = 1e-8
    max_iter: int = 25
    dirichlet: List[DirichletCondition] = field(default_factory=list)
    tractions: List[TractionCondition] = field(default_factory=list)
    body_force: Optional[VectorField] = None
    output_dir: Optional[str] = None

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"number of load steps must be >= 1, got {self.steps}")
        if not self.tol > 0:
            raise ConfigError("Newton tolerance must be positive")
        if self.max_iter < 1:
            raise ConfigError("Newton iteration cap must be >= 1")
        if self.dt < 0:
            raise ConfigError("time step must be non-negative")

    def load_factor(self, step: int) -> float:
        if self.load_history is LoadHistory.CONSTANT:
            return 1.0
        return step / self.steps

    def schedule(self) -> List[Tuple[float, float]]:
        """(dt, load factor) of every step, in order"""
        steps = [(self.dt, self.load_factor(i)) for i in range(1, self.steps + 1)]
        if self.instantaneous_first_step:
            steps.insert(0, (0.0, self.load_factor(1)))
        return steps

    def build_material(self) -> ConstitutiveModel:
        return create_material(self.material, self.material_params)


class Discretization:
    """Mesh, dof layout and element operators of one space"""

    def __init__(self, mesh: CurvedMesh, space: SpaceConfig, workers: Optional[int] = None):
        if space.variant is Variant.STRAIGHT and mesh.is_curved:
            mesh = mesh.rectified()
        self.mesh = mesh
        self.space = space
        self.layout = DofLayout(mesh, space.k)
        ids = range(mesh.n_elements)
        if workers and workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                self.operators = list(pool.map(
                    lambda eid: build_element_operators(mesh, eid, space), ids))
        else:
            self.operators = [build_element_operators(mesh, eid, space) for eid in ids]
        self.element_dofs = [self.layout.element_dofs(eid) for eid in ids]

    @property
    def n_dofs(self) -> int:
        return self.layout.n_dofs


@dataclass
class GlobalSystem:
    """Assembled tangent, residual and constraint data of one Newton iterate"""
    matrix: sparse.csr_matrix
    residual: np.ndarray
    u: np.ndarray
    constrained: np.ndarray
    prescribed: np.ndarray


def element_force_and_tangent(ops: VemElementOperators, u_local: np.ndarray,
                              state: MaterialState, weights: np.ndarray,
                              dt: float) -> Tuple[np.ndarray, np.ndarray]:
    """Internal force and tangent of one element; updates the trial state"""
    strain = np.einsum('qij,j->qi', ops.B, u_local)
    try:
        stress, D = state.evaluate(strain, dt)
    except MaterialError as e:
        raise MaterialError(f"element {ops.element_id}: {e}")
    w = ops.rule.weights
    force = np.einsum('q,qia,qi->a', w, ops.B, stress)
    tangent = np.einsum('q,qia,qij,qjb->ab', w, ops.B, D, ops.B)
    remainder = ops.stab @ u_local
    force += ops.stab.T @ (weights * remainder)
    tangent += ops.stab.T @ (weights[:, None] * ops.stab)
    return force, tangent


def stabilization_weights(ops: VemElementOperators, u_local: np.ndarray, state: MaterialState,
                          dt: float) -> np.ndarray:
    """Per-dof weights max(alpha, M_ii) at the element centroid"""
    centroid = np.asarray(ops.strain_basis.center)
    nearest = int(np.argmin(np.linalg.norm(ops.rule.points - centroid, axis=1)))
    history = {key: value[nearest:nearest + 1] for key, value in state.committed.items()}
    strain = (ops.centroid_strain @ u_local)[None, :]
    _, D, _ = state.model.update(strain, history, dt)
    D_b = D[0]
    alpha = tangent_norm(D_b)
    B_b = ops.centroid_B
    diag = ops.area * np.einsum('ia,ij,ja->a', B_b, D_b, B_b)
    weights = np.maximum(alpha, diag)
    if not np.all(weights > 0):
        raise SolverError(f"element {ops.element_id}: non-positive stabilization weight")
    return weights


def assemble(disc: Discretization, u: np.ndarray, states: Sequence[MaterialState],
             weights: Sequence[np.ndarray], dt: float) -> Tuple[np.ndarray, sparse.csr_matrix]:
    """Global internal force and tangent"""
    n = disc.n_dofs
    force = np.zeros(n)
    rows, cols, vals = [], [], []
    for ops, dofs, state, w in zip(disc.operators, disc.element_dofs, states, weights):
        f_e, K_e = element_force_and_tangent(ops, u[dofs], state, w, dt)
        np.add.at(force, dofs, f_e)
        rows.append(np.repeat(dofs, len(dofs)))
        cols.append(np.tile(dofs, len(dofs)))
        vals.append(K_e.ravel())
    K = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(n, n)).tocsr()
    return force, K


def external_load(disc: Discretization, config: AnalysisConfig, factor: float = 1.0) -> np.ndarray:
    """Load vector of body force and boundary tractions scaled by factor"""
    mesh = disc.mesh
    load = np.zeros(disc.n_dofs)
    if config.body_force is not None:
        for element in mesh.elements:
            _add_body_force(load, disc, element.id, config.body_force)

    npts = disc.space.n_edge + 4
    for condition in config.tractions:
        if condition.group not in mesh.groups:
            raise SolverError(f"unknown boundary group '{condition.group}'")
        for eid in mesh.group_edges(condition.group):
            element_id = mesh.edge_elements[eid][0]
            position = mesh.elements[element_id].edges.index(eid)
            table = boundary_table(mesh, element_id, position, disc.space, npts)
            if condition.pressure is not None:
                traction = -condition.pressure * table.outward_normals
            else:
                traction = _field_values(condition.traction, table.rule.points)
            local = np.einsum('q,qc,qcd->d', table.rule.weights, traction, table.values)
            np.add.at(load, disc.element_dofs[element_id], local)
    return factor * load


def _add_body_force(load: np.ndarray, disc: Discretization, element_id: int, body: VectorField):
    mesh, k = disc.mesh, disc.space.k
    measures = mesh.measures(element_id)
    rule = element_rule(mesh, element_id, 2 * k)
    values = _field_values(body, rule.points)
    dofs = disc.element_dofs[element_id]
    ops = disc.operators[element_id]
    if k == 1:
        mean = rule.integrate(values) / measures.area
        nv = ops.layout.n_vertices
        share = np.tile(mean * measures.area / nv, nv)
        np.add.at(load, dofs[:2 * nv], share)
        return
    basis = element_basis(mesh, element_id, k - 2)
    m = basis.evaluate(rule.points)
    mass = m.T @ (rule.weights[:, None] * m)
    coef = np.linalg.solve(mass, m.T @ (rule.weights[:, None] * values))
    first = 2 * ops.layout.first_moment
    load[dofs[first::2]] += measures.area * coef[:, 0]
    load[dofs[first + 1::2]] += measures.area * coef[:, 1]


def dirichlet_values(disc: Discretization, config: AnalysisConfig,
                     factor: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Constrained-dof mask and prescribed values at the given load factor"""
    layout = disc.layout
    mask = np.zeros(disc.n_dofs, dtype=bool)
    values = np.zeros(disc.n_dofs)
    points = layout.skeleton_points(trace=True)
    scale = max(float(np.max(np.abs(points))), 1.0)
    for condition in config.dirichlet:
        if condition.group not in disc.mesh.groups:
            raise SolverError(f"unknown boundary group '{condition.group}'")
        nodes = layout.group_nodes(condition.group)
        data = factor * _field_values(condition.value, points[nodes])
        for c in COMPONENTS[condition.components]:
            dofs = 2 * nodes + c
            clash = mask[dofs] & (np.abs(values[dofs] - data[:, c]) > 1e-12 * scale)
            if np.any(clash):
                node = int(nodes[np.argmax(clash)])
                raise SolverError(f"conflicting Dirichlet data at node {node}, component {c} "
                                  f"(group '{condition.group}')")
            mask[dofs] = True
            values[dofs] = data[:, c]
    return mask, values


def apply_dirichlet(system: GlobalSystem) -> GlobalSystem:
    """Zero constrained rows and columns, put ones on their diagonal

    The iterate already carries the prescribed values, so the constrained
    increments are zero.
    """
    constrained = system.constrained
    free = sparse.diags((~constrained).astype(float))
    fixed = sparse.diags(constrained.astype(float))
    K = (free @ system.matrix @ free + fixed).tocsr()
    r = np.where(constrained, 0.0, system.residual)
    return GlobalSystem(K, r, system.u, constrained, system.prescribed)


def solve_linear(matrix: sparse.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    try:
        du = splu(matrix.tocsc()).solve(rhs)
    except RuntimeError as e:
        raise SolverError(f"singular linear system: {e}")
    if not np.all(np.isfinite(du)):
        raise SolverError("singular linear system: non-finite solution")
    return du


@dataclass
class StepRecord:
    """Converged state of one load step"""
    step: int
    time: float
    factor: float
    iterations: int
    residuals: List[float]
    reactions: Dict[str, np.ndarray]


@dataclass
class AnalysisResult:
    """Displacement and reaction histories of an incremental analysis"""
    discretization: Discretization
    u: np.ndarray
    history: List[np.ndarray]
    steps: List[StepRecord]
    states: List[MaterialState]
    runtime: float = 0.0

    @property
    def iterations(self) -> List[int]:
        return [record.iterations for record in self.steps]

    def reaction_history(self, group: str, component: int) -> np.ndarray:
        return np.array([record.reactions[group][component] for record in self.steps])


def _group_reactions(disc: Discretization, config: AnalysisConfig,
                     reaction: np.ndarray, mask: np.ndarray) -> Dict[str, np.ndarray]:
    groups = {condition.group for condition in config.dirichlet}
    result = {}
    for name in sorted(groups):
        nodes = disc.layout.group_nodes(name)
        totals = np.zeros(2)
        for c in (0, 1):
            dofs = 2 * nodes + c
            totals[c] = reaction[dofs[mask[dofs]]].sum()
        result[name] = totals
    return result


def run_analysis(mesh: CurvedMesh, config: AnalysisConfig, workers: Optional[int] = None,
                 discretization: Optional[Discretization] = None) -> AnalysisResult:
    """Incremental loading with Newton-Raphson at every step"""
    started = time.perf_counter()
    disc = discretization or Discretization(mesh, config.space, workers)
    model = config.build_material()
    states = [MaterialState(model, ops.rule.size) for ops in disc.operators]
    u = np.zeros(disc.n_dofs)
    full_load = np.linalg.norm(external_load(disc, config, 1.0))
    logger.info("analysis: %d elements, %d dofs, k=%d, variant %s, %s", disc.mesh.n_elements,
                disc.n_dofs, config.space.k, config.space.variant.value, model.name)

    history, records = [], []
    current_time = 0.0
    for step, (dt, factor) in enumerate(config.schedule(), start=1):
        current_time += dt
        weights = [stabilization_weights(ops, u[dofs], state, dt)
                   for ops, dofs, state in zip(disc.operators, disc.element_dofs, states)]
        mask, prescribed = dirichlet_values(disc, config, factor)
        u[mask] = prescribed[mask]
        f_ext = external_load(disc, config, factor)

        residuals: List[float] = []
        iterations = 0
        scale = None
        while True:
            f_int, K = assemble(disc, u, states, weights, dt)
            residual = f_ext - f_int
            norm = float(np.linalg.norm(residual[~mask]))
            residuals.append(norm)
            if scale is None:
                # displacement-driven steps have no load to scale by
                scale = full_load if full_load > 0 else norm
            if norm <= config.tol * scale or norm <= 1e-14 * max(scale, 1.0):
                break
            if iterations >= config.max_iter:
                raise ConvergenceError("Newton iteration did not converge", step, residuals)
            system = apply_dirichlet(GlobalSystem(K, residual, u, mask, prescribed))
            u += solve_linear(system.matrix, system.residual)
            iterations += 1
            logger.debug("step %d, iteration %d: residual %.3e", step, iterations, norm)

        for state in states:
            state.commit()
        reactions = _group_reactions(disc, config, f_int - f_ext, mask)
        records.append(StepRecord(step, current_time, factor, iterations, residuals, reactions))
        history.append(u.copy())
        logger.info("step %d (t=%.4g, factor %.4g) converged in %d iterations", step,
                    current_time, factor, iterations)

    return AnalysisResult(disc, u, history, records, states, time.perf_counter() - started)
