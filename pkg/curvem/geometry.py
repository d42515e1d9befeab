"""
Curves, curved polygonal meshes and geometric measures for curvem
"""

import logging
import threading
from dataclasses import dataclass, replace
from typing import Any, Callable, Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np
from matplotlib.path import Path
from scipy import integrate
from scipy.spatial.distance import pdist

from curvem.errors import GeometryError, MeshError
from curvem.types import CurveKind

logger = logging.getLogger(__name__)

PARAM_TOL = 1e-12
TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Curve:
    """Parametrized boundary curve (circle or segment)

    Circles are parametrized by the polar angle and have no parameter bound
    unless t0/t1 are given; segments run over t in [0, 1].
    """
    id: int
    kind: CurveKind
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 0.0
    p0: Tuple[float, float] = (0.0, 0.0)
    p1: Tuple[float, float] = (0.0, 0.0)
    t0: Optional[float] = None
    t1: Optional[float] = None

    def __post_init__(self):
        if self.kind is CurveKind.CIRCLE:
            if not self.radius > 0:
                raise GeometryError(f"curve {self.id}: radius must be positive")
            if self.t0 is not None and self.t1 is not None and abs(self.t1 - self.t0) >= TWO_PI:
                raise GeometryError(f"curve {self.id}: arc parameter span must be below 2*pi")
        else:
            if np.allclose(self.p0, self.p1, rtol=0.0, atol=0.0):
                raise GeometryError(f"curve {self.id}: segment endpoints coincide")
            if self.t0 is None:
                object.__setattr__(self, 't0', 0.0)
                object.__setattr__(self, 't1', 1.0)

    @classmethod
    def circle(cls, curve_id: int, center, radius: float,
               t0: Optional[float] = None, t1: Optional[float] = None) -> 'Curve':
        return cls(curve_id, CurveKind.CIRCLE, center=(float(center[0]), float(center[1])),
                   radius=float(radius), t0=t0, t1=t1)

    @classmethod
    def segment(cls, curve_id: int, p0, p1) -> 'Curve':
        return cls(curve_id, CurveKind.SEGMENT, p0=(float(p0[0]), float(p0[1])),
                   p1=(float(p1[0]), float(p1[1])))

    @property
    def bounded(self) -> bool:
        return self.t0 is not None and self.t1 is not None

    def check_parameter(self, t: np.ndarray):
        if not self.bounded:
            return
        lo, hi = min(self.t0, self.t1), max(self.t0, self.t1)
        tol = PARAM_TOL * max(1.0, abs(hi - lo))
        t = np.atleast_1d(t)
        if np.any(t < lo - tol) or np.any(t > hi + tol):
            raise GeometryError(f"curve {self.id}: parameter outside [{lo}, {hi}]")

    def points(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind is CurveKind.CIRCLE:
            cx, cy = self.center
            return np.column_stack((cx + self.radius * np.cos(t), cy + self.radius * np.sin(t)))
        p0, p1 = np.asarray(self.p0), np.asarray(self.p1)
        return p0[None, :] + t[:, None] * (p1 - p0)[None, :]

    def derivatives(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.kind is CurveKind.CIRCLE:
            return np.column_stack((-self.radius * np.sin(t), self.radius * np.cos(t)))
        d = np.asarray(self.p1) - np.asarray(self.p0)
        return np.tile(d, (len(t), 1))

    def parameter_of(self, point, near: Optional[float] = None) -> float:
        """Parameter of a point on the curve, unwrapped next to `near` for circles"""
        if self.kind is CurveKind.CIRCLE:
            t = float(np.arctan2(point[1] - self.center[1], point[0] - self.center[0]))
            if near is not None:
                t += TWO_PI * np.round((near - t) / TWO_PI)
            return t
        d = np.asarray(self.p1) - np.asarray(self.p0)
        return float(np.dot(np.asarray(point) - self.p0, d) / np.dot(d, d))


def eval_curve(curve: Curve, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Point and tangent of a curve at parameter t"""
    curve.check_parameter(t)
    point = curve.points(t)[0]
    tangent = curve.derivatives(t)[0]
    if not np.linalg.norm(tangent) > 0:
        raise GeometryError(f"curve {curve.id}: vanishing tangent at t={t}")
    return point, tangent


@dataclass(frozen=True)
class Edge:
    """Mesh edge: a straight segment or the restriction of a curve to [ta, tb]

    Straight edges are parametrized over [0, 1]. `trace` keeps the curve a
    chord replaces, as (curve, ta, tb), on rectified meshes.
    """
    id: int
    v0: int
    v1: int
    x0: Tuple[float, float]
    x1: Tuple[float, float]
    curve: Optional[Curve] = None
    ta: float = 0.0
    tb: float = 1.0
    trace: Optional[Tuple[Curve, float, float]] = None

    @property
    def is_curved(self) -> bool:
        return self.curve is not None

    @property
    def direction(self) -> float:
        return 1.0 if self.tb >= self.ta else -1.0

    @property
    def chord_length(self) -> float:
        return float(np.hypot(self.x1[0] - self.x0[0], self.x1[1] - self.x0[1]))

    def params(self, s) -> np.ndarray:
        """Map fractions s in [0, 1] to edge parameters"""
        s = np.asarray(s, dtype=float)
        return self.ta + s * (self.tb - self.ta)

    def points(self, t) -> np.ndarray:
        if self.curve is not None:
            return self.curve.points(t)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x0, x1 = np.asarray(self.x0), np.asarray(self.x1)
        return x0[None, :] + t[:, None] * (x1 - x0)[None, :]

    def derivatives(self, t) -> np.ndarray:
        if self.curve is not None:
            return self.curve.derivatives(t)
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.tile(np.asarray(self.x1) - np.asarray(self.x0), (len(t), 1))

    def speed(self, t) -> np.ndarray:
        return np.linalg.norm(self.derivatives(t), axis=1)

    def normals(self, t) -> np.ndarray:
        """Unit normals to the right of the traversal v0 -> v1"""
        d = self.direction * self.derivatives(t)
        d /= np.linalg.norm(d, axis=1)[:, None]
        return np.column_stack((d[:, 1], -d[:, 0]))

    def trace_points(self, t) -> np.ndarray:
        """Points on the analytic boundary matching parameters t"""
        if self.trace is None:
            return self.points(t)
        curve, ta, tb = self.trace
        s = (np.atleast_1d(np.asarray(t, dtype=float)) - self.ta) / (self.tb - self.ta)
        return curve.points(ta + s * (tb - ta))

    def samples(self, count: int) -> np.ndarray:
        """Interior sample points, evenly spaced in the parameter"""
        s = np.arange(1, count + 1) / (count + 1)
        return self.points(self.params(s))


def arc_length(edge: Edge) -> float:
    """Curvilinear length of an edge"""
    if not edge.is_curved:
        return edge.chord_length
    value, _ = integrate.quad(lambda t: float(edge.speed(t)[0]), min(edge.ta, edge.tb),
                              max(edge.ta, edge.tb), epsabs=0.0, epsrel=1e-12, limit=200)
    return value


@dataclass(frozen=True)
class Element:
    """Counterclockwise loop of edges; orientation +1 follows v0 -> v1"""
    id: int
    edges: Tuple[int, ...]
    orientations: Tuple[int, ...]
    vertices: Tuple[int, ...]

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class ElementMeasures:
    """Centroid, diameter and area of an element"""
    centroid: np.ndarray
    diameter: float
    area: float


def close_loop(element_id: int, edge_ids: Sequence[int], edges: Sequence[Edge]) -> Element:
    """Deduce edge orientations and loop vertices from connectivity"""
    if len(edge_ids) < 2:
        raise MeshError("edge loop needs at least two edges", element=element_id)
    first = edges[edge_ids[0]]
    candidates = []
    for sign in (1, -1):
        start, current = (first.v0, first.v1) if sign > 0 else (first.v1, first.v0)
        orientations, vertices = [sign], [start]
        closed = True
        for eid in edge_ids[1:]:
            edge = edges[eid]
            vertices.append(current)
            if edge.v0 == current:
                orientations.append(1)
                current = edge.v1
            elif edge.v1 == current:
                orientations.append(-1)
                current = edge.v0
            else:
                closed = False
                break
        if closed and current == start:
            candidates.append(Element(element_id, tuple(edge_ids), tuple(orientations),
                                      tuple(vertices)))
    if not candidates:
        raise MeshError("edge loop is not closed", element=element_id)
    return candidates[0] if len(candidates) == 1 else _ccw_choice(candidates, edges)


def _ccw_choice(candidates: List[Element], edges: Sequence[Edge]) -> Element:
    # two-edge loops close in both directions; keep the counterclockwise one
    for element in candidates:
        if _signed_area_estimate(element, edges) > 0:
            return element
    return candidates[0]


def _signed_area_estimate(element: Element, edges: Sequence[Edge]) -> float:
    points = []
    for eid, sign in zip(element.edges, element.orientations):
        edge = edges[eid]
        s = np.linspace(0.0, 1.0, 33)[:-1]
        if sign < 0:
            s = 1.0 - s
        points.append(edge.points(edge.params(s)))
    pts = np.vstack(points)
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class CurvedMesh:
    """Polygonal mesh whose boundary edges may be curve restrictions

    Immutable after construction; per-element derived data (measures,
    quadrature rules) live in a lock-protected cache.
    """

    def __init__(self, vertices: np.ndarray, curves: Dict[int, Curve], edges: List[Edge],
                 elements: List[Element], groups: Dict[str, Tuple[int, ...]],
                 validate: bool = True):
        self.vertices = np.asarray(vertices, dtype=float)
        self.vertices.setflags(write=False)
        self.curves = dict(curves)
        self.edges = list(edges)
        self.elements = list(elements)
        self.groups = {name: tuple(ids) for name, ids in groups.items()}
        self._cache: Dict[Hashable, Any] = {}
        self._lock = threading.Lock()

        owners: List[List[int]] = [[] for _ in self.edges]
        for element in self.elements:
            for eid in element.edges:
                owners[eid].append(element.id)
        self.edge_elements = [tuple(o) for o in owners]

        if validate:
            self.validate()

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def boundary_edges(self) -> List[int]:
        return [eid for eid, owners in enumerate(self.edge_elements) if len(owners) == 1]

    @property
    def h(self) -> float:
        """Mean element diameter"""
        return float(np.mean([self.measures(e.id).diameter for e in self.elements]))

    @property
    def area(self) -> float:
        return float(sum(self.measures(e.id).area for e in self.elements))

    @property
    def is_curved(self) -> bool:
        return any(edge.is_curved for edge in self.edges)

    def cached(self, key: Hashable, factory: Callable[[], Any]) -> Any:
        """Return a cached per-mesh value, building it once"""
        with self._lock:
            if key in self._cache:
                return self._cache[key]
        value = factory()
        with self._lock:
            return self._cache.setdefault(key, value)

    def measures(self, element_id: int) -> ElementMeasures:
        return self.cached(('measures', element_id),
                           lambda: element_measures(self.elements[element_id], self))

    def group_edges(self, name: str) -> Tuple[int, ...]:
        if name not in self.groups:
            raise MeshError(f"unknown boundary group '{name}'")
        return self.groups[name]

    def chord_polygon(self, element_id: int) -> np.ndarray:
        return self.vertices[list(self.elements[element_id].vertices)]

    def boundary_polygon(self, element_id: int, samples: int = 32) -> np.ndarray:
        """Counterclockwise polyline through the element boundary"""
        element = self.elements[element_id]
        points = []
        for eid, sign in zip(element.edges, element.orientations):
            edge = self.edges[eid]
            count = samples if edge.is_curved else 1
            s = np.arange(count) / count
            if sign < 0:
                s = 1.0 - s
            points.append(edge.points(edge.params(s)))
        return np.vstack(points)

    def contains_points(self, element_id: int, points: np.ndarray, samples: int = 256) -> np.ndarray:
        """Point-in-element test against a dense boundary polyline"""
        path = Path(self.boundary_polygon(element_id, samples))
        inside = path.contains_points(points)
        return np.asarray(inside, dtype=bool)

    def rectified(self) -> 'CurvedMesh':
        """Same connectivity with each curved edge replaced by its chord"""
        edges = []
        for edge in self.edges:
            if edge.is_curved:
                edge = replace(edge, curve=None, ta=0.0, tb=1.0,
                               trace=(edge.curve, edge.ta, edge.tb))
            edges.append(edge)
        return CurvedMesh(self.vertices, self.curves, edges, self.elements, self.groups,
                          validate=False)

    def validate(self):
        """Check every mesh invariant; raise MeshError naming the culprit"""
        for edge in self.edges:
            self._validate_edge(edge)
        for eid, owners in enumerate(self.edge_elements):
            if len(owners) == 0 or len(owners) > 2:
                raise MeshError(f"shared by {len(owners)} elements", edge=eid)
            if len(owners) == 2:
                if self.edges[eid].is_curved:
                    raise MeshError("interior edges must be straight", edge=eid)
                signs = [self._orientation(owner, eid) for owner in owners]
                if signs[0] == signs[1]:
                    raise MeshError("neighbouring elements traverse the edge the same way",
                                    edge=eid)
        for element in self.elements:
            self._validate_element(element)
        boundary = set(self.boundary_edges)
        for name, ids in self.groups.items():
            for eid in ids:
                if eid not in boundary:
                    raise MeshError(f"group '{name}' lists a non-boundary edge", edge=eid)

    def _orientation(self, element_id: int, edge_id: int) -> int:
        element = self.elements[element_id]
        return element.orientations[element.edges.index(edge_id)]

    def _validate_edge(self, edge: Edge):
        chord = edge.chord_length
        if not chord > 0:
            raise MeshError("zero-length chord", edge=edge.id)
        for v, x in ((edge.v0, edge.x0), (edge.v1, edge.x1)):
            if not np.array_equal(self.vertices[v], np.asarray(x)):
                raise MeshError(f"endpoint does not match vertex {v}", edge=edge.id)
        if not edge.is_curved:
            return
        if abs(edge.tb - edge.ta) >= TWO_PI:
            raise MeshError("arc parameter span must be below 2*pi", edge=edge.id)
        length = arc_length(edge)
        scale = float(np.max(np.abs(self.vertices)))
        tol = 1e-12 * length + 1e-15 * scale
        ends = edge.points(np.array([edge.ta, edge.tb]))
        if (np.linalg.norm(ends[0] - edge.x0) > tol or np.linalg.norm(ends[1] - edge.x1) > tol):
            raise MeshError("curve restriction does not end at the edge vertices", edge=edge.id)
        if length < chord * (1.0 - 1e-12):
            raise MeshError("curvilinear length shorter than chord", edge=edge.id)

    def _validate_element(self, element: Element):
        if len(set(element.vertices)) != len(element.vertices):
            raise MeshError("edge loop visits a vertex twice", element=element.id)
        chords = self.chord_polygon(element.id)
        n = len(chords)
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if _segments_cross(chords[i], chords[(i + 1) % n], chords[j], chords[(j + 1) % n]):
                    raise MeshError("self-intersecting chords", element=element.id)
        if not self.measures(element.id).area > 0:
            raise MeshError("non-positive signed area (loop must be counterclockwise)",
                            element=element.id)


def _segments_cross(a, b, c, d) -> bool:
    def orient(p, q, r):
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])
    d1, d2 = orient(c, d, a), orient(c, d, b)
    d3, d4 = orient(a, b, c), orient(a, b, d)
    return (d1 * d2 < 0) and (d3 * d4 < 0)


def element_measures(element: Element, mesh: CurvedMesh) -> ElementMeasures:
    """Centroid, diameter and area of an element from its boundary"""
    from curvem.quadrature import boundary_moments

    moments = boundary_moments(mesh, element.id, 1)
    area = float(moments[0, 0])
    if not area > 0:
        raise MeshError(f"degenerate element (area {area:.3e})", element=element.id)
    centroid = np.array([moments[1, 0], moments[0, 1]]) / area

    samples = [mesh.vertices[list(element.vertices)]]
    for eid in element.edges:
        edge = mesh.edges[eid]
        if edge.is_curved:
            samples.append(edge.samples(8))
    diameter = float(np.max(pdist(np.vstack(samples))))
    return ElementMeasures(centroid=centroid, diameter=diameter, area=area)
