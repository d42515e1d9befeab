"""
Virtual element spaces for curvem: dof layout, edge shape functions for the
straight, mapped-polynomial (co) and rigid-enriched (cv) edge spaces, the
strain projector, the dof projector and dof interpolation.

Local node order of an element: vertices in loop order, then the interior
nodes of every loop edge in traversal order, then the moment nodes. Local
dof 2*node + c is the c-th displacement component of a node.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import linalg

from curvem.errors import GeometryError, SpaceError
from curvem.geometry import CurvedMesh, Edge
from curvem.quadrature import (EdgeRule, edge_rule, element_rule, gauss_rules_1d,
                               monomial_exponents)
from curvem.types import RuleKind, SpaceConfig, Variant

logger = logging.getLogger(__name__)

GRAM_COND_WARN = 1e12
RANK_TOL = 1e-12


# ==================== RIGID MAPS ====================

@dataclass(frozen=True)
class RigidMap:
    """F(x) = a + A(x) b, a translation composed with a rotation-homotopy"""
    base: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def matrix(self, points: np.ndarray) -> np.ndarray:
        """A(x) for each point, shape (npts, 2, 2)"""
        d = np.atleast_2d(points) - self.base
        A = np.empty((len(d), 2, 2))
        A[:, 0, 0] = d[:, 0]
        A[:, 0, 1] = -d[:, 1]
        A[:, 1, 0] = d[:, 1]
        A[:, 1, 1] = d[:, 0]
        return A

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.a + self.matrix(points) @ self.b

    def strain(self) -> np.ndarray:
        return self.b[0] * np.eye(2)


def _inverse_endpoint_matrix(nu_bar: np.ndarray, nu_prime: np.ndarray) -> np.ndarray:
    d = np.asarray(nu_prime, dtype=float) - np.asarray(nu_bar, dtype=float)
    length2 = float(d @ d)
    if not length2 > 0:
        raise GeometryError("rigid map endpoints coincide")
    return np.array([[d[0], d[1]], [-d[1], d[0]]]) / length2


def rigid_map_from_endpoints(nu_bar, nu_prime, u_bar, u_prime) -> RigidMap:
    """Rigid map taking value u_bar at nu_bar and u_prime at nu_prime"""
    B_inv = _inverse_endpoint_matrix(nu_bar, nu_prime)
    u_bar = np.asarray(u_bar, dtype=float)
    b = B_inv @ (np.asarray(u_prime, dtype=float) - u_bar)
    return RigidMap(base=np.asarray(nu_bar, dtype=float), a=u_bar, b=b)


# ==================== EDGE SPACES ====================

def edge_node_fractions(k: int) -> np.ndarray:
    """Edge node positions in [0, 1]: the k+1 Gauss-Lobatto points"""
    if k == 1:
        return np.array([0.0, 1.0])
    ref = gauss_rules_1d(k + 1, RuleKind.LOBATTO)
    s = 0.5 * (ref.points + 1.0)
    s[0], s[-1] = 0.0, 1.0
    return s


def lagrange_basis(nodes: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Values L_j(s) of the Lagrange basis on nodes, shape (len(s), len(nodes))"""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if len(np.unique(nodes)) != len(nodes):
        raise GeometryError("coincident interpolation nodes")
    values = np.ones((len(s), len(nodes)))
    for j, xj in enumerate(nodes):
        for m, xm in enumerate(nodes):
            if m != j:
                values[:, j] *= (s - xm) / (xj - xm)
    return values


def edge_shape_matrix(edge: Edge, variant: Variant, k: int, t) -> np.ndarray:
    """Coefficients C[q, c, j, d] with u_c(t_q) = sum_jd C[q, c, j, d] u_j[d]

    Nodes j run from v0 (j=0) to v1 (j=k) in the edge's parameter order.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    nodes = edge_node_fractions(k)
    s = (t - edge.ta) / (edge.tb - edge.ta)
    L = lagrange_basis(nodes, s)
    npts = len(t)
    C = np.zeros((npts, 2, k + 1, 2))
    eye = np.eye(2)
    if variant is not Variant.CV:
        C += L[:, None, :, None] * eye[None, :, None, :]
        return C

    node_points = edge.points(edge.params(nodes))
    B_inv = _inverse_endpoint_matrix(node_points[0], node_points[-1])
    base = RigidMap(base=node_points[0], a=np.zeros(2), b=np.zeros(2))
    G = base.matrix(edge.points(t)) @ B_inv
    C[:, :, 0, :] = eye - G
    C[:, :, k, :] = G
    if k > 1:
        G_nodes = base.matrix(node_points[1:-1]) @ B_inv
        bubble = L[:, 1:-1]
        C[:, :, 0, :] -= np.einsum('qj,jcd->qcd', bubble, eye - G_nodes)
        C[:, :, k, :] -= np.einsum('qj,jcd->qcd', bubble, G_nodes)
        C[:, :, 1:k, :] += bubble[:, None, :, None] * eye[None, :, None, :]
    return C


def edge_shape_eval(edge: Edge, variant: Variant, k: int,
                    values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Edge function with the given values at the k+1 edge nodes"""
    values = np.asarray(values, dtype=float)
    if values.shape != (k + 1, 2):
        raise SpaceError(f"expected {k + 1} nodal values on edge {edge.id}, got {values.shape}")

    def evaluate(t) -> np.ndarray:
        return np.einsum('qcjd,jd->qc', edge_shape_matrix(edge, variant, k, t), values)
    return evaluate


# ==================== POLYNOMIALS ====================

@dataclass(frozen=True)
class ScaledMonomialBasis:
    """Monomials m_a(x) = ((x - center) / scale)^a up to a total degree"""
    center: Tuple[float, float]
    scale: float
    degree: int

    @property
    def exponents(self) -> List[Tuple[int, int]]:
        return monomial_exponents(self.degree) if self.degree >= 0 else []

    @property
    def size(self) -> int:
        return (self.degree + 1) * (self.degree + 2) // 2 if self.degree >= 0 else 0

    def index(self, a: int, b: int) -> int:
        d = a + b
        return d * (d + 1) // 2 + b

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        X = (points[:, 0] - self.center[0]) / self.scale
        Y = (points[:, 1] - self.center[1]) / self.scale
        return np.column_stack([X ** a * Y ** b for a, b in self.exponents]) if self.size else \
            np.zeros((len(points), 0))

    def gradient(self, points: np.ndarray) -> np.ndarray:
        """Shape (npts, size, 2)"""
        points = np.atleast_2d(points)
        X = (points[:, 0] - self.center[0]) / self.scale
        Y = (points[:, 1] - self.center[1]) / self.scale
        grad = np.zeros((len(points), self.size, 2))
        for i, (a, b) in enumerate(self.exponents):
            if a:
                grad[:, i, 0] = a * X ** (a - 1) * Y ** b / self.scale
            if b:
                grad[:, i, 1] = b * X ** a * Y ** (b - 1) / self.scale
        return grad


def element_basis(mesh: CurvedMesh, element_id: int, degree: int) -> ScaledMonomialBasis:
    measures = mesh.measures(element_id)
    return ScaledMonomialBasis(center=tuple(measures.centroid), scale=measures.diameter,
                               degree=degree)


# ==================== DOF LAYOUT ====================

@dataclass(frozen=True)
class LocalLayout:
    """Local nodes of one element"""
    n_vertices: int
    k: int
    edge_nodes: Tuple[Tuple[int, ...], ...]

    @property
    def n_moments(self) -> int:
        return self.k * (self.k - 1) // 2

    @property
    def first_moment(self) -> int:
        return self.n_vertices * self.k

    @property
    def n_nodes(self) -> int:
        return self.first_moment + self.n_moments

    @property
    def n_dofs(self) -> int:
        return 2 * self.n_nodes


def local_layout(mesh: CurvedMesh, element_id: int, k: int) -> LocalLayout:
    element = mesh.elements[element_id]
    nv = element.n_vertices
    edge_nodes = []
    for p, sign in enumerate(element.orientations):
        interior = [nv + p * (k - 1) + r for r in range(k - 1)]
        start, end = p, (p + 1) % nv
        if sign > 0:
            edge_nodes.append(tuple([start] + interior + [end]))
        else:
            edge_nodes.append(tuple([end] + interior[::-1] + [start]))
    return LocalLayout(n_vertices=nv, k=k, edge_nodes=tuple(edge_nodes))


class DofLayout:
    """Global numbering of vertex, edge-point and moment dofs

    Global nodes: mesh vertices, then the k-1 interior nodes of every edge
    in the edge's parameter order, then the moment nodes of every element.
    """

    def __init__(self, mesh: CurvedMesh, k: int):
        self.mesh = mesh
        self.k = k
        self.n_moments = k * (k - 1) // 2
        self.first_edge_node = mesh.n_vertices
        self.first_moment_node = mesh.n_vertices + mesh.n_edges * (k - 1)
        self.n_nodes = self.first_moment_node + mesh.n_elements * self.n_moments
        self.n_dofs = 2 * self.n_nodes
        self._element_nodes = [self._build_element_nodes(e.id) for e in mesh.elements]

    def edge_nodes(self, edge_id: int) -> np.ndarray:
        """Global nodes of an edge from v0 to v1"""
        edge = self.mesh.edges[edge_id]
        start = self.first_edge_node + edge_id * (self.k - 1)
        return np.array([edge.v0] + list(range(start, start + self.k - 1)) + [edge.v1])

    def _build_element_nodes(self, element_id: int) -> np.ndarray:
        element = self.mesh.elements[element_id]
        layout = local_layout(self.mesh, element_id, self.k)
        nodes = np.empty(layout.n_nodes, dtype=int)
        nodes[:layout.n_vertices] = element.vertices
        for p, eid in enumerate(element.edges):
            local = np.array(layout.edge_nodes[p])
            nodes[local] = self.edge_nodes(eid)
        start = self.first_moment_node + element_id * self.n_moments
        nodes[layout.first_moment:] = np.arange(start, start + self.n_moments)
        return nodes

    def element_nodes(self, element_id: int) -> np.ndarray:
        return self._element_nodes[element_id]

    def element_dofs(self, element_id: int) -> np.ndarray:
        nodes = self._element_nodes[element_id]
        return np.column_stack((2 * nodes, 2 * nodes + 1)).ravel()

    @property
    def n_skeleton_nodes(self) -> int:
        return self.first_moment_node

    def skeleton_points(self, trace: bool = False) -> np.ndarray:
        """Coordinates of vertex and edge nodes; on the analytic boundary when trace"""
        points = np.empty((self.first_moment_node, 2))
        points[:self.mesh.n_vertices] = self.mesh.vertices
        fractions = edge_node_fractions(self.k)[1:-1]
        for edge in self.mesh.edges:
            if self.k == 1:
                break
            t = edge.params(fractions)
            nodes = self.edge_nodes(edge.id)[1:-1]
            points[nodes] = edge.trace_points(t) if trace else edge.points(t)
        return points

    def group_nodes(self, name: str) -> np.ndarray:
        nodes = set()
        for eid in self.mesh.group_edges(name):
            nodes.update(int(n) for n in self.edge_nodes(eid))
        return np.array(sorted(nodes), dtype=int)


# ==================== PROJECTORS ====================

@dataclass
class BoundaryTable:
    """Local shape functions evaluated on one edge rule of an element"""
    edge_id: int
    orientation: int
    rule: EdgeRule
    values: np.ndarray  # (npts, 2, n_dofs)

    @property
    def outward_normals(self) -> np.ndarray:
        return self.orientation * self.rule.normals


@dataclass
class VemElementOperators:
    """Per-element projector matrices and evaluation tables"""
    element_id: int
    layout: LocalLayout
    config: SpaceConfig
    area: float
    strain_basis: ScaledMonomialBasis
    pi_eps: np.ndarray
    p_coef: np.ndarray
    pi_dof: np.ndarray
    stab: np.ndarray
    rule: object
    B: np.ndarray
    centroid_B: np.ndarray
    centroid_strain: np.ndarray
    boundary: List[BoundaryTable]

    @property
    def n_dofs(self) -> int:
        return self.layout.n_dofs


def boundary_table(mesh: CurvedMesh, element_id: int, position: int, config: SpaceConfig,
                   npts: Optional[int] = None, kind: RuleKind = RuleKind.LOBATTO) -> BoundaryTable:
    """Shape values of all local dofs on the position-th edge of an element"""
    element = mesh.elements[element_id]
    layout = local_layout(mesh, element_id, config.k)
    edge = mesh.edges[element.edges[position]]
    rule = edge_rule(edge, npts or config.n_edge, kind)
    C = edge_shape_matrix(edge, config.variant, config.k, rule.params)
    values = np.zeros((rule.size, 2, layout.n_dofs))
    for j, node in enumerate(layout.edge_nodes[position]):
        values[:, :, 2 * node] += C[:, :, j, 0]
        values[:, :, 2 * node + 1] += C[:, :, j, 1]
    return BoundaryTable(edge.id, element.orientations[position], rule, values)


def _boundary_tables(mesh: CurvedMesh, element_id: int, config: SpaceConfig) -> List[BoundaryTable]:
    return mesh.cached(('boundary_tables', element_id, config), lambda: [
        boundary_table(mesh, element_id, p, config)
        for p in range(mesh.elements[element_id].n_vertices)])


def _qr_solve(A: np.ndarray, rhs: np.ndarray, what: str, element_id: int) -> np.ndarray:
    """Least-squares solve through a column-pivoted QR factorization"""
    Q, R, perm = linalg.qr(A, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[-1] <= RANK_TOL * diag[0]:
        raise SpaceError(f"element {element_id}: rank-deficient {what}")
    cond = diag[0] / diag[-1]
    if cond > GRAM_COND_WARN:
        logger.warning("element %d: %s condition estimate %.2e", element_id, what, cond)
    else:
        logger.debug("element %d: %s condition estimate %.2e", element_id, what, cond)
    solution = np.empty((A.shape[1],) + rhs.shape[1:])
    solution[perm] = linalg.solve_triangular(R, Q.T @ rhs)
    return solution


def build_projector_strain(mesh: CurvedMesh, element_id: int, config: SpaceConfig) -> np.ndarray:
    """Matrix mapping local dofs to coefficients of the projected strain

    Row 3*alpha + s holds the coefficient of m_alpha S_s with S_xx, S_yy and
    S_xy = [[0, 1], [1, 0]].
    """
    k = config.k
    layout = local_layout(mesh, element_id, k)
    measures = mesh.measures(element_id)
    basis = element_basis(mesh, element_id, k - 1)
    rule = element_rule(mesh, element_id, config.n_vol)

    values = basis.evaluate(rule.points)
    mass = values.T @ (rule.weights[:, None] * values)
    gram = np.kron(mass, np.diag([1.0, 1.0, 2.0]))

    rhs = np.zeros((3 * basis.size, layout.n_dofs))
    for table in _boundary_tables(mesh, element_id, config):
        m = basis.evaluate(table.rule.points) * table.rule.weights[:, None]
        n = table.outward_normals
        phi_x, phi_y = table.values[:, 0, :], table.values[:, 1, :]
        rhs[0::3] += m.T @ (n[:, 0:1] * phi_x)
        rhs[1::3] += m.T @ (n[:, 1:2] * phi_y)
        rhs[2::3] += m.T @ (n[:, 1:2] * phi_x + n[:, 0:1] * phi_y)

    if k > 1:
        moments = ScaledMonomialBasis(basis.center, basis.scale, k - 2)
        area, h = measures.area, measures.diameter
        for alpha, (a, b) in enumerate(basis.exponents):
            if a:
                dof = 2 * (layout.first_moment + moments.index(a - 1, b))
                rhs[3 * alpha, dof] -= area * a / h
                rhs[3 * alpha + 2, dof + 1] -= area * a / h
            if b:
                dof = 2 * (layout.first_moment + moments.index(a, b - 1))
                rhs[3 * alpha + 1, dof + 1] -= area * b / h
                rhs[3 * alpha + 2, dof] -= area * b / h

    return _qr_solve(gram, rhs, "strain Gram matrix", element_id)


def _local_node_points(mesh: CurvedMesh, element_id: int, layout: LocalLayout) -> np.ndarray:
    element = mesh.elements[element_id]
    points = np.empty((layout.first_moment, 2))
    points[:layout.n_vertices] = mesh.vertices[list(element.vertices)]
    fractions = edge_node_fractions(layout.k)
    for p, eid in enumerate(element.edges):
        edge = mesh.edges[eid]
        nodes = layout.edge_nodes[p]
        points[list(nodes[1:-1])] = edge.points(edge.params(fractions[1:-1]))
    return points


def dof_matrix(mesh: CurvedMesh, element_id: int, config: SpaceConfig) -> np.ndarray:
    """Local dofs of the vector monomials m_alpha e_c (column 2*alpha + c)"""
    k = config.k
    layout = local_layout(mesh, element_id, k)
    basis = element_basis(mesh, element_id, k)
    D = np.zeros((layout.n_dofs, 2 * basis.size))
    skeleton = basis.evaluate(_local_node_points(mesh, element_id, layout))
    D[0:2 * layout.first_moment:2, 0::2] = skeleton
    D[1:2 * layout.first_moment:2, 1::2] = skeleton
    if layout.n_moments:
        area = mesh.measures(element_id).area
        rule = element_rule(mesh, element_id, config.n_vol)
        moments = ScaledMonomialBasis(basis.center, basis.scale, k - 2).evaluate(rule.points)
        cross = moments.T @ (rule.weights[:, None] * basis.evaluate(rule.points)) / area
        D[2 * layout.first_moment::2, 0::2] = cross
        D[2 * layout.first_moment + 1::2, 1::2] = cross
    return D


def build_projector_dof(mesh: CurvedMesh, element_id: int,
                        config: SpaceConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficient map and dof-space projector of the dof least-squares fit

    Returns (P, Pi): P maps local dofs to coefficients of [P_k]^2 and
    Pi = D P maps them to the dofs of that polynomial.
    """
    D = dof_matrix(mesh, element_id, config)
    P = _qr_solve(D, np.eye(D.shape[0]), "polynomial dof matrix", element_id)
    return P, D @ P


def _strain_rows(values: np.ndarray, pi_eps: np.ndarray) -> np.ndarray:
    """Voigt strain rows (xx, yy, 2xy) at points from monomial values (npts, n)"""
    B = np.stack([values @ pi_eps[s::3] for s in range(3)], axis=1)
    B[:, 2] *= 2.0
    return B


def build_element_operators(mesh: CurvedMesh, element_id: int,
                            config: SpaceConfig) -> VemElementOperators:
    """All per-element operators, cached on the mesh"""
    return mesh.cached(('operators', element_id, config),
                       lambda: _build_element_operators(mesh, element_id, config))


def _build_element_operators(mesh: CurvedMesh, element_id: int,
                             config: SpaceConfig) -> VemElementOperators:
    k = config.k
    layout = local_layout(mesh, element_id, k)
    measures = mesh.measures(element_id)
    pi_eps = build_projector_strain(mesh, element_id, config)
    P, Pi = build_projector_dof(mesh, element_id, config)
    strain_basis = element_basis(mesh, element_id, k - 1)
    rule = element_rule(mesh, element_id, config.n_vol)
    B = _strain_rows(strain_basis.evaluate(rule.points), pi_eps)
    centroid_B = _strain_rows(strain_basis.evaluate(measures.centroid), pi_eps)[0]

    basis = element_basis(mesh, element_id, k)
    i10, i01 = basis.index(1, 0), basis.index(0, 1)
    h = measures.diameter
    centroid_strain = np.vstack([P[2 * i10] / h, P[2 * i01 + 1] / h,
                                 (P[2 * i01] + P[2 * i10 + 1]) / h])
    return VemElementOperators(
        element_id=element_id, layout=layout, config=config, area=measures.area,
        strain_basis=strain_basis, pi_eps=pi_eps, p_coef=P, pi_dof=Pi,
        stab=np.eye(layout.n_dofs) - Pi, rule=rule, B=B, centroid_B=centroid_B,
        centroid_strain=centroid_strain, boundary=_boundary_tables(mesh, element_id, config))


def strain_at(ops: VemElementOperators, u_local: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Voigt projected strain of local dofs at arbitrary points"""
    return _strain_rows(ops.strain_basis.evaluate(points), ops.pi_eps) @ u_local


# ==================== INTERPOLATION ====================

def interpolate(field: Callable[[np.ndarray], np.ndarray], mesh: CurvedMesh, config: SpaceConfig,
                layout: Optional[DofLayout] = None) -> np.ndarray:
    """Global dof vector of an analytic field

    Skeleton dofs are point values; moment dofs are (1/|E|) int_E u_c m_alpha.
    """
    layout = layout or DofLayout(mesh, config.k)
    u = np.zeros(layout.n_dofs)
    skeleton = np.asarray(field(layout.skeleton_points()), dtype=float)
    u[0:2 * layout.n_skeleton_nodes:2] = skeleton[:, 0]
    u[1:2 * layout.n_skeleton_nodes:2] = skeleton[:, 1]
    if layout.n_moments == 0:
        return u
    order = max(2 * config.k, config.n_vol)
    for element in mesh.elements:
        rule = element_rule(mesh, element.id, order)
        basis = element_basis(mesh, element.id, config.k - 2)
        values = np.asarray(field(rule.points), dtype=float)
        moments = basis.evaluate(rule.points).T @ (rule.weights[:, None] * values)
        moments /= mesh.measures(element.id).area
        start = layout.first_moment_node + element.id * layout.n_moments
        nodes = np.arange(start, start + layout.n_moments)
        u[2 * nodes] = moments[:, 0]
        u[2 * nodes + 1] = moments[:, 1]
    return u
