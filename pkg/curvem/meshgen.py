"""
Benchmark mesh generation for curvem

Structured quadrilateral families are built block by block; the `rhex`
and `voro` families are Voronoi tessellations of a seed set, bounded by
mirroring the seeds across the bounding box and then clipped against the
circular boundaries, with every clipped boundary replaced by its arc.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from matplotlib.path import Path
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import Voronoi, cKDTree

from curvem.errors import MeshError
from curvem.geometry import Curve, CurvedMesh, Edge, close_loop
from curvem.types import Domain, MeshFamily, MeshRequest

logger = logging.getLogger(__name__)

HALF_PI = 0.5 * np.pi
TWO_PI = 2.0 * np.pi

# one loop step: (from vertex, to vertex, (curve id, t_from, t_to) or None)
Step = Tuple[int, int, Optional[Tuple[int, float, float]]]


class MeshBuilder:
    """Accumulates vertices and cell loops into a CurvedMesh"""

    def __init__(self, curves: Dict[int, Curve]):
        self.curves = curves
        self.points: List[np.ndarray] = []
        self.keys: Dict[object, int] = {}
        self.cells: List[List[Step]] = []

    def vertex(self, key, point) -> int:
        """Vertex id for key, creating it at point on first use"""
        if key not in self.keys:
            self.keys[key] = len(self.points)
            self.points.append(np.asarray(point, dtype=float))
        return self.keys[key]

    def cell(self, steps: List[Step]):
        if self._signed_area(steps) < 0:
            steps = [(b, a, None if arc is None else (arc[0], arc[2], arc[1]))
                     for a, b, arc in reversed(steps)]
        self.cells.append(steps)

    def _signed_area(self, steps: List[Step]) -> float:
        pts = []
        for a, b, arc in steps:
            if arc is None:
                pts.append(self.points[a][None, :])
            else:
                t = np.linspace(arc[1], arc[2], 17)[:-1]
                pts.append(self.curves[arc[0]].points(t))
        pts = np.vstack(pts)
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def build(self, classify: Callable[[Edge], Optional[str]]) -> CurvedMesh:
        vertices = np.array(self.points)
        edges: List[Edge] = []
        straight: Dict[frozenset, int] = {}
        loops = []
        for steps in self.cells:
            loop = []
            for a, b, arc in steps:
                if arc is None:
                    key = frozenset((a, b))
                    if key not in straight:
                        straight[key] = len(edges)
                        edges.append(Edge(len(edges), a, b, tuple(vertices[a]), tuple(vertices[b])))
                    loop.append(straight[key])
                else:
                    cid, ta, tb = arc
                    edges.append(Edge(len(edges), a, b, tuple(vertices[a]), tuple(vertices[b]),
                                      curve=self.curves[cid], ta=float(ta), tb=float(tb)))
                    loop.append(len(edges) - 1)
            loops.append(loop)
        elements = [close_loop(i, loop, edges) for i, loop in enumerate(loops)]

        counts = np.zeros(len(edges), dtype=int)
        for loop in loops:
            for eid in loop:
                counts[eid] += 1
        groups: Dict[str, List[int]] = {}
        for eid in np.flatnonzero(counts == 1):
            name = classify(edges[eid])
            if name is None:
                raise MeshError("boundary edge matches no boundary group", edge=int(eid))
            groups.setdefault(name, []).append(int(eid))
        return CurvedMesh(vertices, self.curves, edges, elements,
                          {name: tuple(ids) for name, ids in groups.items()})


@dataclass
class DomainShape:
    """Bounding box, circular boundaries and named boundary pieces of a domain"""
    bbox: Tuple[float, float, float, float]
    curves: Dict[int, Curve]
    clips: List[Tuple[int, bool]]
    curve_groups: Dict[int, str]
    side_groups: Dict[str, str] = field(default_factory=dict)
    area: float = 0.0

    @property
    def size(self) -> float:
        return max(self.bbox[1] - self.bbox[0], self.bbox[3] - self.bbox[2])

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        xmin, xmax, ymin, ymax = self.bbox
        inside = ((points[:, 0] > xmin) & (points[:, 0] < xmax)
                  & (points[:, 1] > ymin) & (points[:, 1] < ymax))
        for cid, keep_inside in self.clips:
            curve = self.curves[cid]
            dist = np.linalg.norm(points - np.asarray(curve.center), axis=1)
            inside &= (dist < curve.radius) if keep_inside else (dist > curve.radius)
        return inside

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        distance = np.full(len(points), np.inf)
        for cid, _ in self.clips:
            curve = self.curves[cid]
            dist = np.linalg.norm(points - np.asarray(curve.center), axis=1)
            distance = np.minimum(distance, np.abs(dist - curve.radius))
        xmin, xmax, ymin, ymax = self.bbox
        sides = {'xmin': points[:, 0] - xmin, 'xmax': xmax - points[:, 0],
                 'ymin': points[:, 1] - ymin, 'ymax': ymax - points[:, 1]}
        for side in self.side_groups:
            distance = np.minimum(distance, np.abs(sides[side]))
        return distance

    def classifier(self) -> Callable[[Edge], Optional[str]]:
        tol = 1e-9 * self.size
        xmin, xmax, ymin, ymax = self.bbox
        lines = {'xmin': (0, xmin), 'xmax': (0, xmax), 'ymin': (1, ymin), 'ymax': (1, ymax)}

        def classify(edge: Edge) -> Optional[str]:
            if edge.is_curved:
                return self.curve_groups.get(edge.curve.id)
            for side, name in self.side_groups.items():
                axis, value = lines[side]
                if abs(edge.x0[axis] - value) < tol and abs(edge.x1[axis] - value) < tol:
                    return name
            return None
        return classify


def domain_shape(request: MeshRequest) -> DomainShape:
    if request.domain is Domain.DISK:
        r = request.radius
        pad = 1.05 * r
        return DomainShape(bbox=(-pad, pad, -pad, pad),
                           curves={0: Curve.circle(0, (0.0, 0.0), r)},
                           clips=[(0, True)], curve_groups={0: 'boundary'},
                           area=np.pi * r * r)
    if request.domain is Domain.ANNULUS:
        ri, ro = request.inner_radius, request.outer_radius
        return DomainShape(bbox=(0.0, ro, 0.0, ro),
                           curves={0: Curve.circle(0, (0.0, 0.0), ri),
                                   1: Curve.circle(1, (0.0, 0.0), ro)},
                           clips=[(1, True), (0, False)],
                           curve_groups={0: 'inner', 1: 'outer'},
                           side_groups={'ymin': 'bottom', 'xmin': 'left'},
                           area=0.25 * np.pi * (ro * ro - ri * ri))
    width, height, r = request.width, request.height, request.hole_radius
    return DomainShape(bbox=(0.0, width, 0.0, height),
                       curves={0: Curve.circle(0, (0.0, 0.0), r)},
                       clips=[(0, False)], curve_groups={0: 'hole'},
                       side_groups={'ymin': 'bottom', 'xmin': 'left', 'xmax': 'right',
                                    'ymax': 'top'},
                       area=width * height - 0.25 * np.pi * r * r)


def generate_benchmark_mesh(request: MeshRequest) -> CurvedMesh:
    """Mesh of a benchmark domain with exact curved boundary cells"""
    shape = domain_shape(request)
    if request.family is MeshFamily.QUAD:
        builders = {
            Domain.DISK: _disk_quad,
            Domain.ANNULUS: _annulus_quad,
            Domain.PLATE: _plate_quad,
        }
        builder = builders[request.domain](request, shape)
    else:
        if request.family is MeshFamily.RHEX:
            seeds = _hex_seeds(request, shape)
        else:
            seeds = _lloyd_seeds(request, shape)
        builder = _voronoi_builder(seeds, shape)
    mesh = builder.build(shape.classifier())
    logger.info("generated %s mesh on %s: %d elements, h=%.4g", request.family.value,
                request.domain.value, mesh.n_elements, mesh.h)
    return mesh


# ==================== STRUCTURED QUADRILATERALS ====================

def _disk_divisions(target: int) -> Tuple[int, int]:
    best = None
    for m in range(1, 200):
        layers = max(1, int(round(0.4 * m)))
        count = m * m + 4 * m * layers
        if best is None or abs(count - target) < abs(best[2] - target):
            best = (m, layers, count)
        if count > 2 * target:
            break
    return best[0], best[1]


def _disk_quad(request: MeshRequest, shape: DomainShape) -> MeshBuilder:
    """Central square block plus a ring of curved-boundary quadrilaterals"""
    circle = shape.curves[0]
    r = circle.radius
    a = 0.5 * r
    m, layers = _disk_divisions(request.elements)
    builder = MeshBuilder(shape.curves)

    def center_node(p, q):
        return builder.vertex(('c', p, q), (-a + 2 * a * p / m, -a + 2 * a * q / m))

    for p in range(m):
        for q in range(m):
            loop = [center_node(p, q), center_node(p + 1, q), center_node(p + 1, q + 1),
                    center_node(p, q + 1)]
            builder.cell([(loop[i], loop[(i + 1) % 4], None) for i in range(4)])

    # square boundary walked counterclockwise from the bottom-right corner
    ring = []
    for i in range(4 * m):
        side, offset = divmod(i, m)
        p, q = [(m, offset), (m - offset, m), (0, m - offset), (offset, 0)][side]
        ring.append((p, q))
    angles = np.array([np.arctan2(-a + 2 * a * q / m, -a + 2 * a * p / m) for p, q in ring])
    angles = np.unwrap(angles)

    def ring_node(i, j):
        i %= 4 * m
        if j == 0:
            return center_node(*ring[i])
        theta = angles[i]
        if j == layers:
            return builder.vertex(('r', i, j), circle.points(theta)[0])
        inner = builder.points[center_node(*ring[i])]
        outer = circle.points(theta)[0]
        return builder.vertex(('r', i, j), inner + (j / layers) * (outer - inner))

    for i in range(4 * m):
        t0 = angles[i]
        t1 = angles[i + 1] if i + 1 < 4 * m else angles[0] + TWO_PI
        for j in range(layers):
            v00, v10 = ring_node(i, j), ring_node(i + 1, j)
            v01, v11 = ring_node(i, j + 1), ring_node(i + 1, j + 1)
            outer = (0, t1, t0) if j + 1 == layers else None
            builder.cell([(v00, v10, None), (v10, v11, None), (v11, v01, outer), (v01, v00, None)])
    return builder


def _annulus_divisions(request: MeshRequest) -> Tuple[int, int]:
    if request.divisions:
        n_r, n_t = request.divisions
        return int(n_r), int(n_t)
    target = request.elements
    root = int(round(np.sqrt(target)))
    if root * root == target:
        return root, root
    ratio = 0.5 * (request.inner_radius + request.outer_radius) * HALF_PI / \
        (request.outer_radius - request.inner_radius)
    pairs = [(d, target // d) for d in range(1, target + 1) if target % d == 0]
    return min(pairs, key=lambda pair: abs(np.log(pair[1] / pair[0] / ratio)))


def _annulus_quad(request: MeshRequest, shape: DomainShape) -> MeshBuilder:
    """Polar grid; inner and outer edges are arcs, the others chords"""
    n_r, n_t = _annulus_divisions(request)
    ri, ro = request.inner_radius, request.outer_radius
    builder = MeshBuilder(shape.curves)
    rng = np.random.default_rng(request.seed)
    radii = ri + (ro - ri) * np.arange(n_r + 1) / n_r
    thetas = HALF_PI * np.arange(n_t + 1) / n_t
    grid_r = np.tile(radii, (n_t + 1, 1))
    grid_t = np.tile(thetas[:, None], (1, n_r + 1))
    if request.distortion > 0 and n_r > 1 and n_t > 1:
        shift = rng.uniform(-0.5, 0.5, size=(n_t - 1, n_r - 1, 2)) * request.distortion
        grid_r[1:-1, 1:-1] += shift[..., 0] * (ro - ri) / n_r
        grid_t[1:-1, 1:-1] += shift[..., 1] * HALF_PI / n_t

    def node(i, j):
        r, t = grid_r[i, j], grid_t[i, j]
        return builder.vertex((i, j), (r * np.cos(t), r * np.sin(t)))

    for i in range(n_t):
        for j in range(n_r):
            v00, v10, v11, v01 = node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)
            inner = (0, thetas[i], thetas[i + 1]) if j == 0 else None
            outer = (1, thetas[i + 1], thetas[i]) if j + 1 == n_r else None
            builder.cell([(v00, v10, inner), (v10, v11, None), (v11, v01, outer),
                          (v01, v00, None)])
    return builder


def _plate_quad(request: MeshRequest, shape: DomainShape) -> MeshBuilder:
    """Ray block around the hole plus a rectangular block above it"""
    width, height, r = request.width, request.height, request.hole_radius
    hole = shape.curves[0]
    fill = (height - width) / width
    n = max(1, int(round(np.sqrt(request.elements / (2.0 + max(fill, 0.0))))))
    n_top = max(1, int(round(n * fill))) if height > width else 0
    builder = MeshBuilder(shape.curves)
    corner = min(width, height)
    phis = HALF_PI * np.arange(2 * n + 1) / (2 * n)

    def outer_point(i):
        if i <= n:
            return np.array([width, corner * i / n])
        return np.array([width * (2 - i / n), corner])

    def ring_node(i, j):
        start = hole.points(phis[i])[0]
        if j == 0:
            return builder.vertex(('ring', i, 0), start)
        return builder.vertex(('ring', i, j), start + (j / n) * (outer_point(i) - start))

    for i in range(2 * n):
        for j in range(n):
            v00, v10 = ring_node(i, j), ring_node(i + 1, j)
            v01, v11 = ring_node(i, j + 1), ring_node(i + 1, j + 1)
            arc = (0, phis[i], phis[i + 1]) if j == 0 else None
            builder.cell([(v00, v10, arc), (v10, v11, None), (v11, v01, None), (v01, v00, None)])

    def top_node(c, level):
        if level == 0:
            return ring_node(n + c, n)
        y = corner + (height - corner) * level / n_top
        return builder.vertex(('top', c, level), (width * (1 - c / n), y))

    for c in range(n):
        for level in range(n_top):
            v00, v10 = top_node(c, level), top_node(c + 1, level)
            v01, v11 = top_node(c, level + 1), top_node(c + 1, level + 1)
            builder.cell([(v00, v10, None), (v10, v11, None), (v11, v01, None), (v01, v00, None)])
    return builder


# ==================== VORONOI FAMILIES ====================

@dataclass
class _Piece:
    """Boundary piece of a clipped cell: a segment, or an arc when curve is set"""
    start: np.ndarray
    end: np.ndarray
    curve: Optional[int] = None
    ta: float = 0.0
    tb: float = 0.0

    def midpoint(self, curves: Dict[int, Curve]) -> np.ndarray:
        if self.curve is None:
            return 0.5 * (self.start + self.end)
        return curves[self.curve].points(0.5 * (self.ta + self.tb))[0]

    def samples(self, curves: Dict[int, Curve], count: int = 16) -> np.ndarray:
        if self.curve is None:
            return self.start[None, :]
        t = np.linspace(self.ta, self.tb, count + 1)[:-1]
        return curves[self.curve].points(t)


def _hex_seeds(request: MeshRequest, shape: DomainShape) -> np.ndarray:
    spacing = np.sqrt(2.0 * shape.area / (np.sqrt(3.0) * request.elements))
    xmin, xmax, ymin, ymax = shape.bbox
    rows = int(np.ceil((ymax - ymin) / (spacing * np.sqrt(3.0) / 2))) + 2
    cols = int(np.ceil((xmax - xmin) / spacing)) + 2
    j, i = np.meshgrid(np.arange(rows), np.arange(cols), indexing='ij')
    x = xmin + (i + 0.5 * (j % 2)) * spacing
    y = ymin + j * spacing * np.sqrt(3.0) / 2
    points = np.column_stack((x.ravel(), y.ravel()))
    center = 0.5 * np.array([xmin + xmax, ymin + ymax])
    points += center - 0.5 * (points.min(axis=0) + points.max(axis=0))
    keep = shape.contains(points) & (shape.boundary_distance(points) > 0.3 * spacing)
    if not np.any(keep):
        raise MeshError(f"target of {request.elements} cells is too small for the domain")
    return points[keep]


def _lloyd_seeds(request: MeshRequest, shape: DomainShape) -> np.ndarray:
    rng = np.random.default_rng(request.seed)
    xmin, xmax, ymin, ymax = shape.bbox
    seeds = np.empty((0, 2))
    while len(seeds) < request.elements:
        batch = rng.uniform((xmin, ymin), (xmax, ymax), size=(2 * request.elements, 2))
        seeds = np.vstack((seeds, batch[shape.contains(batch)]))
    seeds = seeds[:request.elements]
    for _ in range(request.lloyd_iterations):
        cells = _clipped_cells(seeds, shape)
        for index, loops in enumerate(cells):
            centroid = _loops_centroid(loops, shape.curves)
            if centroid is not None and shape.contains(centroid)[0]:
                seeds[index] = centroid
    return seeds


def _loops_centroid(loops: List[List[_Piece]], curves: Dict[int, Curve]) -> Optional[np.ndarray]:
    area, moment = 0.0, np.zeros(2)
    for loop in loops:
        pts = np.vstack([piece.samples(curves) for piece in loop])
        x, y = pts[:, 0], pts[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        area += 0.5 * np.sum(cross)
        moment += np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / 6.0
    if area <= 0:
        return None
    return moment / area


def _bounded_regions(seeds: np.ndarray, shape: DomainShape) -> List[np.ndarray]:
    """Voronoi cells of the seeds cut to the bounding box by mirroring"""
    xmin, xmax, ymin, ymax = shape.bbox
    mirrored = [seeds]
    for axis, value in ((0, xmin), (0, xmax), (1, ymin), (1, ymax)):
        copy = seeds.copy()
        copy[:, axis] = 2 * value - copy[:, axis]
        mirrored.append(copy)
    vor = Voronoi(np.vstack(mirrored))
    tol = 1e-10 * shape.size
    regions = []
    for index in range(len(seeds)):
        region = vor.regions[vor.point_region[index]]
        if -1 in region or len(region) < 3:
            raise MeshError(f"unbounded Voronoi cell for seed {index}")
        polygon = vor.vertices[region].copy()
        for axis, value in ((0, xmin), (0, xmax), (1, ymin), (1, ymax)):
            polygon[np.abs(polygon[:, axis] - value) < tol, axis] = value
        x, y = polygon[:, 0], polygon[:, 1]
        if np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y) < 0:
            polygon = polygon[::-1]
        regions.append(polygon)
    return regions


def _clipped_cells(seeds: np.ndarray, shape: DomainShape) -> List[List[List[_Piece]]]:
    cells = []
    for polygon in _bounded_regions(seeds, shape):
        loops = [[_Piece(polygon[i], polygon[(i + 1) % len(polygon)])
                  for i in range(len(polygon))]]
        for cid, keep_inside in shape.clips:
            clipped = []
            for loop in loops:
                clipped.extend(_clip_loop(loop, shape.curves[cid], keep_inside, shape.curves))
            loops = clipped
        cells.append(loops)
    return cells


def _split_at_circle(piece: _Piece, circle: Curve) -> List[_Piece]:
    if piece.curve is not None:
        return [piece]
    center = np.asarray(circle.center)
    d = piece.end - piece.start
    f = piece.start - center
    a, b, c = d @ d, 2 * f @ d, f @ f - circle.radius ** 2
    disc = b * b - 4 * a * c
    if disc <= 0:
        return [piece]
    root = np.sqrt(disc)
    cuts = sorted(s for s in ((-b - root) / (2 * a), (-b + root) / (2 * a)) if 1e-12 < s < 1 - 1e-12)
    if not cuts:
        return [piece]
    points = [piece.start]
    for s in cuts:
        raw = piece.start + s * d
        points.append(circle.points(circle.parameter_of(raw))[0])
    points.append(piece.end)
    return [_Piece(points[i], points[i + 1]) for i in range(len(points) - 1)]


def _clip_loop(loop: List[_Piece], circle: Curve, keep_inside: bool,
               curves: Dict[int, Curve]) -> List[List[_Piece]]:
    """Intersect a closed loop with the inside (or outside) of a circle"""
    pieces = [sub for piece in loop for sub in _split_at_circle(piece, circle)]
    center = np.asarray(circle.center)
    inside = np.array([np.linalg.norm(p.midpoint(curves) - center) < circle.radius for p in pieces])
    kept = inside if keep_inside else ~inside
    if np.all(kept):
        return [loop]
    if not np.any(kept):
        polygon = np.vstack([p.samples(curves) for p in pieces])
        if keep_inside and _point_in_polygon(center, polygon):
            return [_full_circle(circle)]
        return []

    # chains of consecutive kept pieces, each entering and leaving the circle
    n = len(pieces)
    start = next(i for i in range(n) if kept[i] and not kept[i - 1])
    chains, current = [], []
    for offset in range(n):
        i = (start + offset) % n
        if kept[i]:
            current.append(pieces[i])
        elif current:
            chains.append(current)
            current = []
    if current:
        chains.append(current)

    direction = 1.0 if keep_inside else -1.0
    entry = [circle.parameter_of(chain[0].start) for chain in chains]
    exit_ = [circle.parameter_of(chain[-1].end) for chain in chains]
    successor = []
    for i in range(len(chains)):
        gaps = [(direction * (entry[j] - exit_[i])) % TWO_PI for j in range(len(chains))]
        successor.append(int(np.argmin(gaps)))

    loops, visited = [], set()
    for first in range(len(chains)):
        if first in visited:
            continue
        result, i = [], first
        while i not in visited:
            visited.add(i)
            result.extend(chains[i])
            j = successor[i]
            gap = (direction * (entry[j] - exit_[i])) % TWO_PI
            if 1e-10 < gap < TWO_PI - 1e-10:
                ta = exit_[i]
                tb = ta + direction * gap
                result.append(_Piece(circle.points(ta)[0], circle.points(tb)[0],
                                     circle.id, ta, tb))
            i = j
        loops.append(result)
    return loops


def _full_circle(circle: Curve) -> List[_Piece]:
    t = HALF_PI * np.arange(5)
    pts = circle.points(t)
    return [_Piece(pts[i], pts[i + 1], circle.id, t[i], t[i + 1]) for i in range(4)]


def _point_in_polygon(point: np.ndarray, polygon: np.ndarray) -> bool:
    return bool(Path(polygon).contains_point(point))


def _split_long_arcs(loop: List[_Piece], curves: Dict[int, Curve],
                     limit: float = HALF_PI) -> List[_Piece]:
    result = []
    for piece in loop:
        if piece.curve is None or abs(piece.tb - piece.ta) <= limit:
            result.append(piece)
            continue
        count = int(np.ceil(abs(piece.tb - piece.ta) / limit))
        t = np.linspace(piece.ta, piece.tb, count + 1)
        pts = curves[piece.curve].points(t)
        pts[0], pts[-1] = piece.start, piece.end
        result.extend(_Piece(pts[i], pts[i + 1], piece.curve, t[i], t[i + 1])
                      for i in range(count))
    return result


def _voronoi_builder(seeds: np.ndarray, shape: DomainShape) -> MeshBuilder:
    curves = shape.curves
    loops = [_split_long_arcs(loop, curves)
             for cell in _clipped_cells(seeds, shape) for loop in cell]
    spacing = np.sqrt(shape.area / max(len(seeds), 1))
    cells, coords = _weld(loops, curves, 1e-3 * spacing)

    builder = MeshBuilder(curves)
    builder.points = coords
    for steps in cells:
        builder.cell(steps)
    dropped = len(loops) - len(cells)
    if dropped:
        logger.debug("dropped %d collapsed cell pieces", dropped)
    return builder


def _weld(loops: List[List[_Piece]], curves: Dict[int, Curve],
          tol: float) -> Tuple[List[List[Step]], List[np.ndarray]]:
    """Merge nearby piece endpoints into shared vertices, snapping to curves"""
    points, anchors = [], []
    for loop in loops:
        for piece in loop:
            for point, t in ((piece.start, piece.ta), (piece.end, piece.tb)):
                points.append(point)
                anchors.append((piece.curve, t) if piece.curve is not None else None)
    points = np.array(points)
    pairs = cKDTree(points).query_pairs(tol, output_type='ndarray')
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                       shape=(len(points), len(points)))
    _, labels = connected_components(graph, directed=False)

    coords: Dict[object, np.ndarray] = {}
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        anchored = [anchors[m] for m in members if anchors[m] is not None]
        if anchored:
            cid, t = anchored[0]
            coords[label] = curves[cid].points(t)[0]
        else:
            coords[label] = points[members].mean(axis=0)

    labelled: List[List[Step]] = []
    cursor = 0
    for loop in loops:
        steps: List[Step] = []
        for piece in loop:
            a, b = labels[cursor], labels[cursor + 1]
            cursor += 2
            if a == b:
                continue
            arc = None
            if piece.curve is not None:
                curve = curves[piece.curve]
                arc = (piece.curve, curve.parameter_of(coords[a], near=piece.ta),
                       curve.parameter_of(coords[b], near=piece.tb))
            steps.append((a, b, arc))
        steps = _ensure_three_vertices(steps, curves, coords)
        if steps:
            labelled.append(steps)

    # dense vertex ids in order of first use
    index: Dict[object, int] = {}
    ordered: List[np.ndarray] = []

    def vertex(label) -> int:
        if label not in index:
            index[label] = len(ordered)
            ordered.append(coords[label])
        return index[label]

    cells = [[(vertex(a), vertex(b), arc) for a, b, arc in steps] for steps in labelled]
    return cells, ordered


def _ensure_three_vertices(steps: List[Step], curves: Dict[int, Curve],
                           coords: Dict[object, np.ndarray]) -> List[Step]:
    """Split the longest arc of a loop with fewer than three vertices"""
    if len(steps) >= 3:
        return steps
    arcs = [i for i, (_, _, arc) in enumerate(steps) if arc is not None]
    if not arcs:
        return []
    i = max(arcs, key=lambda idx: abs(steps[idx][2][2] - steps[idx][2][1]))
    a, b, (cid, ta, tb) = steps[i]
    tm = 0.5 * (ta + tb)
    label = ('mid', cid, round(float(tm), 12))
    coords[label] = curves[cid].points(tm)[0]
    split = [(a, label, (cid, ta, tm)), (label, b, (cid, tm, tb))]
    return _ensure_three_vertices(steps[:i] + split + steps[i + 1:], curves, coords)
