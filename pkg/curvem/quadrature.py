"""
Quadrature rules for curvem: 1D Gauss families, edge rules, element rules
on curved polygons, the boundary-moment oracle and rule compression
"""

import logging
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import TYPE_CHECKING, Iterator, Optional, Sequence, Tuple

import modepy as mp
import numpy as np
from numpy.polynomial import legendre
from scipy.optimize import nnls

from curvem.errors import QuadratureError
from curvem.types import QuadratureRule, RuleKind

if TYPE_CHECKING:
    from curvem.geometry import CurvedMesh, Edge, Element

logger = logging.getLogger(__name__)

BASE_ARC_INCREMENT = 4
MAX_ARC_INCREMENT = 40
MOMENT_TOL = 1e-12


@dataclass
class EdgeRule(QuadratureRule):
    """Edge rule with curve parameters and unit normals at its points"""
    params: Optional[np.ndarray] = None
    normals: Optional[np.ndarray] = None


@lru_cache(maxsize=None)
def _legendre_nodes(npts: int) -> Tuple[np.ndarray, np.ndarray]:
    return legendre.leggauss(npts)


@lru_cache(maxsize=None)
def _lobatto_nodes(npts: int) -> Tuple[np.ndarray, np.ndarray]:
    n = npts - 1
    p_n = legendre.Legendre.basis(n)
    dp, d2p = p_n.deriv(), p_n.deriv(2)
    interior = np.sort(dp.roots().real) if n > 1 else np.zeros(0)
    for _ in range(3):
        interior = interior - dp(interior) / d2p(interior)
    x = np.concatenate(([-1.0], interior, [1.0]))
    weights = 2.0 / (n * npts * p_n(x) ** 2)
    return x, weights


def gauss_rules_1d(npts: int, kind: RuleKind = RuleKind.LEGENDRE) -> QuadratureRule:
    """Gauss-Legendre or Gauss-Lobatto rule on [-1, 1]"""
    if kind is RuleKind.LEGENDRE:
        if npts < 1:
            raise QuadratureError("Gauss-Legendre needs at least 1 point")
        x, w = _legendre_nodes(npts)
        order = 2 * npts - 1
    else:
        if npts < 2:
            raise QuadratureError("Gauss-Lobatto needs at least 2 points")
        x, w = _lobatto_nodes(npts)
        order = 2 * npts - 3
    return QuadratureRule(points=x.copy(), weights=w.copy(), order=order)


def edge_rule(edge: 'Edge', npts: int, kind: RuleKind = RuleKind.LOBATTO) -> EdgeRule:
    """Rule on an edge with arclength weights, ordered from v0 to v1"""
    ref = gauss_rules_1d(npts, kind)
    t = edge.params(0.5 * (ref.points + 1.0))
    weights = ref.weights * edge.speed(t) * abs(edge.tb - edge.ta) / 2.0
    return EdgeRule(points=edge.points(t), weights=weights, order=ref.order,
                    domain_ref=f"edge-{edge.id}", params=t, normals=edge.normals(t))


def monomial_exponents(n: int) -> list:
    """Exponents (a, b) with a + b <= n, graded by total degree"""
    return [(d - b, b) for d in range(n + 1) for b in range(d + 1)]


def boundary_moments(mesh: 'CurvedMesh', element_id: int, n: int,
                     center: Sequence[float] = (0.0, 0.0), scale: float = 1.0) -> np.ndarray:
    """Table m[a, b] = integral over the element of X^a Y^b, a + b <= n

    X = (x - cx)/scale and Y = (y - cy)/scale; computed on the boundary by
    the divergence theorem.
    """
    element = mesh.elements[element_id]
    moments = np.zeros((n + 1, n + 1))
    for eid, sign in zip(element.edges, element.orientations):
        edge = mesh.edges[eid]
        if edge.is_curved:
            moments += sign * _adaptive_edge_moments(edge, n, center, scale)
        else:
            moments += sign * _edge_moments(edge, n, n // 2 + 2, center, scale)[0]
    return moments


def _edge_moments(edge: 'Edge', n: int, npts: int, center, scale) -> Tuple[np.ndarray, np.ndarray]:
    rule = edge_rule(edge, npts, RuleKind.LEGENDRE)
    X = (rule.points[:, 0] - center[0]) / scale
    Y = (rule.points[:, 1] - center[1]) / scale
    flux = rule.weights * rule.normals[:, 0] * scale
    values = np.zeros((n + 1, n + 1))
    magnitude = np.zeros((n + 1, n + 1))
    for a, b in monomial_exponents(n):
        f = X ** (a + 1) * Y ** b / (a + 1)
        values[a, b] = np.dot(flux, f)
        magnitude[a, b] = np.dot(np.abs(flux), np.abs(f))
    return values, magnitude


def _adaptive_edge_moments(edge: 'Edge', n: int, center, scale) -> np.ndarray:
    npts = n + 4
    previous, _ = _edge_moments(edge, n, npts, center, scale)
    while npts < 1024:
        npts *= 2
        current, magnitude = _edge_moments(edge, n, npts, center, scale)
        if np.all(np.abs(current - previous) <= 1e-13 * magnitude + 1e-300):
            return current
        previous = current
    raise QuadratureError(f"boundary moments on edge {edge.id} did not converge")


@lru_cache(maxsize=None)
def _triangle_rule(n: int) -> Tuple[np.ndarray, np.ndarray]:
    rule = mp.XiaoGimbutasSimplexQuadrature(max(n, 1), 2)
    # barycentric coordinates on the biunit triangle (-1,-1), (1,-1), (-1,1)
    bary = 0.5 * (np.asarray(rule.nodes) + 1.0)
    weights = np.asarray(rule.weights)
    return bary.T.copy(), weights / np.sum(weights)


def element_rule(mesh: 'CurvedMesh', element_id: int, n: int) -> QuadratureRule:
    """Positive interior rule exact to degree n on a (curved) element"""
    if n < 0:
        raise QuadratureError(f"negative quadrature order {n}")
    return mesh.cached(('element_rule', element_id, n),
                       lambda: _build_element_rule(mesh, element_id, n))


def _build_element_rule(mesh: 'CurvedMesh', element_id: int, n: int) -> QuadratureRule:
    element = mesh.elements[element_id]
    curved = any(mesh.edges[eid].is_curved for eid in element.edges)
    for star in _star_candidates(mesh, element):
        if not _is_star_point(mesh, element, star):
            continue
        increment = BASE_ARC_INCREMENT
        while True:
            rule = _fan_rule(mesh, element, star, n, increment)
            if not curved:
                return rule
            mismatch = _moment_mismatch(mesh, element_id, rule, n)
            if mismatch <= MOMENT_TOL:
                return rule
            if increment >= MAX_ARC_INCREMENT:
                raise QuadratureError(
                    f"element {element_id}: rule of order {n} misses boundary moments "
                    f"by {mismatch:.2e}")
            increment += 4
            logger.debug("element %d, order %d: arc increment raised to %d (mismatch %.2e)",
                         element_id, n, increment, mismatch)
    raise QuadratureError(f"element {element_id} is not star-shaped with respect to "
                          f"its centroid or any fallback point")


def _star_candidates(mesh: 'CurvedMesh', element: 'Element') -> Iterator[np.ndarray]:
    centroid = mesh.measures(element.id).centroid
    yield centroid
    chords = mesh.chord_polygon(element.id)
    yield chords.mean(axis=0)
    for vertex in chords:
        yield vertex + 0.5 * (centroid - vertex)


def _oriented_edges(mesh: 'CurvedMesh', element: 'Element'):
    for eid, sign in zip(element.edges, element.orientations):
        edge = mesh.edges[eid]
        t_start, t_end = (edge.ta, edge.tb) if sign > 0 else (edge.tb, edge.ta)
        yield edge, t_start, t_end


def _is_star_point(mesh: 'CurvedMesh', element: 'Element', star: np.ndarray) -> bool:
    for edge, t_start, t_end in _oriented_edges(mesh, element):
        u = np.linspace(0.0, 1.0, 33 if edge.is_curved else 2)
        t = t_start + u * (t_end - t_start)
        g = edge.points(t) - star
        dg = edge.derivatives(t) * (t_end - t_start)
        if np.any(g[:, 0] * dg[:, 1] - g[:, 1] * dg[:, 0] <= 0.0):
            return False
    return True


def _fan_rule(mesh: 'CurvedMesh', element: 'Element', star: np.ndarray, n: int,
              increment: int) -> QuadratureRule:
    points, weights = [], []
    for edge, t_start, t_end in _oriented_edges(mesh, element):
        if edge.is_curved:
            p, w = _curved_triangle(edge, t_start, t_end, star, n, increment)
        else:
            a, b = edge.points(np.array([t_start, t_end]))
            p, w = _straight_triangle(star, a, b, n)
        points.append(p)
        weights.append(w)
    return QuadratureRule(points=np.vstack(points), weights=np.concatenate(weights), order=n,
                          domain_ref=f"element-{element.id}")


def _straight_triangle(p: np.ndarray, a: np.ndarray, b: np.ndarray, n: int):
    bary, weights = _triangle_rule(n)
    area = 0.5 * ((a[0] - p[0]) * (b[1] - p[1]) - (a[1] - p[1]) * (b[0] - p[0]))
    points = p[None, :] + bary[:, :1] * (a - p)[None, :] + bary[:, 1:] * (b - p)[None, :]
    return points, weights * area


def _curved_triangle(edge: 'Edge', t_start: float, t_end: float, p: np.ndarray, n: int,
                     increment: int):
    """Collapsed tensor Gauss rule on the region swept from p to the curved side"""
    m = int(np.ceil((n + 1 + increment) / 2))
    ref = gauss_rules_1d(m, RuleKind.LEGENDRE)
    s = 0.5 * (ref.points + 1.0)
    ws = 0.5 * ref.weights
    t = t_start + s * (t_end - t_start)
    g = edge.points(t) - p
    dg = edge.derivatives(t) * (t_end - t_start)
    cross = g[:, 0] * dg[:, 1] - g[:, 1] * dg[:, 0]
    # u runs along the curve (rows), v towards it (columns)
    points = p[None, None, :] + s[None, :, None] * g[:, None, :]
    weights = ws[:, None] * ws[None, :] * s[None, :] * cross[:, None]
    return points.reshape(-1, 2), weights.reshape(-1)


def scaled_moments(rule: QuadratureRule, n: int, center, scale: float) -> np.ndarray:
    X = (rule.points[:, 0] - center[0]) / scale
    Y = (rule.points[:, 1] - center[1]) / scale
    moments = np.zeros((n + 1, n + 1))
    for a, b in monomial_exponents(n):
        moments[a, b] = np.dot(rule.weights, X ** a * Y ** b)
    return moments


def _moment_mismatch(mesh: 'CurvedMesh', element_id: int, rule: QuadratureRule, n: int) -> float:
    measures = mesh.measures(element_id)
    exact = boundary_moments(mesh, element_id, n, measures.centroid, measures.diameter)
    approx = scaled_moments(rule, n, measures.centroid, measures.diameter)
    return float(np.max(np.abs(approx - exact)) / measures.area)


def compress_rule(rule: QuadratureRule, n: int) -> QuadratureRule:
    """Positive rule with (n+1)(n+2)/2 points and the same moments up to degree n

    Nodes are eliminated one at a time and the weights re-fitted by
    non-negative least squares. A rule that cannot be brought to the target
    size within tolerance is returned flagged.
    """
    target = (n + 1) * (n + 2) // 2
    if rule.size <= target:
        return rule
    center = np.average(rule.points, axis=0, weights=rule.weights)
    scale = float(np.max(np.linalg.norm(rule.points - center, axis=1))) or 1.0
    X = (rule.points[:, 0] - center[0]) / scale
    Y = (rule.points[:, 1] - center[1]) / scale
    vandermonde = np.array([X ** a * Y ** b for a, b in monomial_exponents(n)])
    rhs = vandermonde @ rule.weights
    tol = 1e-11 * np.linalg.norm(rhs)

    active = np.arange(rule.size)
    weights, residual = nnls(vandermonde, rhs, maxiter=50 * rule.size)
    if residual > tol:
        logger.warning("rule compression: initial fit residual %.2e", residual)
        return replace(rule, flagged=True)
    keep = weights > 1e-14 * np.max(weights)
    active, weights = active[keep], weights[keep]

    stalled = False
    while len(active) > target:
        removed = False
        for drop in np.argsort(weights):
            trial = np.delete(active, drop)
            trial_weights, trial_residual = nnls(vandermonde[:, trial], rhs,
                                                 maxiter=50 * len(trial))
            if trial_residual <= tol:
                keep = trial_weights > 1e-14 * np.max(trial_weights)
                active, weights = trial[keep], trial_weights[keep]
                removed = True
                break
        if not removed:
            stalled = True
            break
    if stalled or len(active) != target:
        logger.warning("rule compression stalled at %d points (target %d)", len(active), target)
        stalled = True
    return QuadratureRule(points=rule.points[active], weights=weights, order=n,
                          domain_ref=rule.domain_ref, flagged=stalled)
