"""
Text storage of curved meshes in the "curvem-mesh v1" format

    vertex <id> <x> <y>
    curve <id> circle <cx> <cy> <r> [<t0> <t1>]
    curve <id> segment <x0> <y0> <x1> <y1>
    edge <id> <v0> <v1> [on <curve-id> <ta> <tb>]
    element <id> <edge-id> ...
    bgroup <name> <edge-id> ...

Ids in a file may be sparse; they are remapped to dense indices in order
of first appearance.
"""

import logging
import os
from typing import Dict, List, Tuple

import numpy as np

from curvem.errors import ParseError
from curvem.geometry import Curve, CurvedMesh, Edge, close_loop
from curvem.types import CurveKind

logger = logging.getLogger(__name__)

HEADER = "# curvem-mesh v1"


def _num(value: float) -> str:
    return f"{value:.17g}"


def save_mesh(mesh: CurvedMesh) -> str:
    """Serialize a mesh to text"""
    lines = [HEADER]
    for i, (x, y) in enumerate(mesh.vertices):
        lines.append(f"vertex {i} {_num(x)} {_num(y)}")
    for cid in sorted(mesh.curves):
        curve = mesh.curves[cid]
        if curve.kind is CurveKind.CIRCLE:
            line = f"curve {cid} circle {_num(curve.center[0])} {_num(curve.center[1])} " \
                   f"{_num(curve.radius)}"
            if curve.bounded:
                line += f" {_num(curve.t0)} {_num(curve.t1)}"
        else:
            line = f"curve {cid} segment {_num(curve.p0[0])} {_num(curve.p0[1])} " \
                   f"{_num(curve.p1[0])} {_num(curve.p1[1])}"
        lines.append(line)
    for edge in mesh.edges:
        line = f"edge {edge.id} {edge.v0} {edge.v1}"
        if edge.is_curved:
            line += f" on {edge.curve.id} {_num(edge.ta)} {_num(edge.tb)}"
        lines.append(line)
    for element in mesh.elements:
        lines.append(f"element {element.id} " + " ".join(str(e) for e in element.edges))
    for name, ids in mesh.groups.items():
        lines.append(f"bgroup {name} " + " ".join(str(e) for e in ids))
    return "\n".join(lines) + "\n"


class _Reader:
    """Line-oriented parser state"""

    def __init__(self):
        self.vertices: Dict[int, Tuple[float, float]] = {}
        self.curves: Dict[int, Curve] = {}
        self.edges: Dict[int, Tuple[int, int, object]] = {}
        self.elements: Dict[int, List[int]] = {}
        self.groups: Dict[str, List[int]] = {}

    @staticmethod
    def _ints(tokens: List[str], line_no: int) -> List[int]:
        try:
            return [int(t) for t in tokens]
        except ValueError:
            raise ParseError(f"expected integer ids, got {' '.join(tokens)}", line_no)

    @staticmethod
    def _floats(tokens: List[str], line_no: int) -> List[float]:
        try:
            return [float(t) for t in tokens]
        except ValueError:
            raise ParseError(f"expected numbers, got {' '.join(tokens)}", line_no)

    def _new_id(self, table: Dict, token: str, kind: str, line_no: int) -> int:
        (ident,) = self._ints([token], line_no)
        if ident in table:
            raise ParseError(f"duplicate {kind} id {ident}", line_no)
        return ident

    def feed(self, tokens: List[str], line_no: int):
        keyword, args = tokens[0], tokens[1:]
        if keyword == 'vertex':
            if len(args) != 3:
                raise ParseError("vertex needs <id> <x> <y>", line_no)
            ident = self._new_id(self.vertices, args[0], 'vertex', line_no)
            self.vertices[ident] = tuple(self._floats(args[1:], line_no))
        elif keyword == 'curve':
            self._curve(args, line_no)
        elif keyword == 'edge':
            self._edge(args, line_no)
        elif keyword == 'element':
            if len(args) < 3:
                raise ParseError("element needs an id and at least two edges", line_no)
            ident = self._new_id(self.elements, args[0], 'element', line_no)
            self.elements[ident] = self._ints(args[1:], line_no)
        elif keyword == 'bgroup':
            if len(args) < 2:
                raise ParseError("bgroup needs a name and at least one edge", line_no)
            self.groups.setdefault(args[0], []).extend(self._ints(args[1:], line_no))
        else:
            raise ParseError(f"unknown record '{keyword}'", line_no)

    def _curve(self, args: List[str], line_no: int):
        if len(args) < 2:
            raise ParseError("curve needs <id> <kind> ...", line_no)
        ident = self._new_id(self.curves, args[0], 'curve', line_no)
        kind, values = args[1], self._floats(args[2:], line_no)
        if kind == 'circle' and len(values) in (3, 5):
            bounds = values[3:] if len(values) == 5 else [None, None]
            self.curves[ident] = Curve.circle(ident, values[:2], values[2], *bounds)
        elif kind == 'segment' and len(values) == 4:
            self.curves[ident] = Curve.segment(ident, values[:2], values[2:])
        else:
            raise ParseError(f"malformed {kind} curve", line_no)

    def _edge(self, args: List[str], line_no: int):
        if len(args) not in (3, 7) or (len(args) == 7 and args[3] != 'on'):
            raise ParseError("edge needs <id> <v0> <v1> [on <curve-id> <ta> <tb>]", line_no)
        ident = self._new_id(self.edges, args[0], 'edge', line_no)
        v0, v1 = self._ints(args[1:3], line_no)
        for v in (v0, v1):
            if v not in self.vertices:
                raise ParseError(f"edge references unknown vertex {v}", line_no)
        on = None
        if len(args) == 7:
            (cid,) = self._ints([args[4]], line_no)
            if cid not in self.curves:
                raise ParseError(f"edge references unknown curve {cid}", line_no)
            ta, tb = self._floats(args[5:7], line_no)
            on = (cid, ta, tb)
        self.edges[ident] = (v0, v1, on)

    def mesh(self, line_of: Dict[Tuple[str, int], int]) -> CurvedMesh:
        vertex_index = {v: i for i, v in enumerate(self.vertices)}
        curve_index = {c: i for i, c in enumerate(self.curves)}
        edge_index = {e: i for i, e in enumerate(self.edges)}
        vertices = np.array([self.vertices[v] for v in self.vertices], dtype=float).reshape(-1, 2)
        curves = {curve_index[c]: _renumbered(curve, curve_index[c])
                  for c, curve in self.curves.items()}

        edges = []
        for ident, (v0, v1, on) in self.edges.items():
            a, b = vertex_index[v0], vertex_index[v1]
            edge = Edge(edge_index[ident], a, b, tuple(vertices[a]), tuple(vertices[b]))
            if on is not None:
                cid, ta, tb = on
                edge = Edge(edge.id, a, b, edge.x0, edge.x1, curve=curves[curve_index[cid]],
                            ta=ta, tb=tb)
            edges.append(edge)

        elements = []
        for i, (ident, loop) in enumerate(self.elements.items()):
            missing = [e for e in loop if e not in edge_index]
            if missing:
                raise ParseError(f"element references unknown edge {missing[0]}",
                                 line_of[('element', ident)])
            elements.append(close_loop(i, [edge_index[e] for e in loop], edges))

        groups = {}
        for name, ids in self.groups.items():
            missing = [e for e in ids if e not in edge_index]
            if missing:
                raise ParseError(f"bgroup '{name}' references unknown edge {missing[0]}",
                                 line_of[('bgroup', name)])
            groups[name] = tuple(edge_index[e] for e in ids)
        return CurvedMesh(vertices, curves, edges, elements, groups)


def _renumbered(curve: Curve, ident: int) -> Curve:
    if curve.id == ident:
        return curve
    if curve.kind is CurveKind.CIRCLE:
        return Curve.circle(ident, curve.center, curve.radius, curve.t0, curve.t1)
    return Curve.segment(ident, curve.p0, curve.p1)


def load_mesh(text: str) -> CurvedMesh:
    """Parse mesh text and validate every mesh invariant"""
    reader = _Reader()
    line_of: Dict[Tuple[str, object], int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        reader.feed(tokens, line_no)
        if tokens[0] == 'element':
            line_of[('element', int(tokens[1]))] = line_no
        elif tokens[0] == 'bgroup':
            line_of.setdefault(('bgroup', tokens[1]), line_no)
    if not reader.elements:
        raise ParseError("mesh has no elements")
    mesh = reader.mesh(line_of)
    logger.debug("loaded mesh: %d vertices, %d edges, %d elements", mesh.n_vertices,
                 mesh.n_edges, mesh.n_elements)
    return mesh


def read_mesh_file(path: str) -> CurvedMesh:
    if not os.path.exists(path):
        raise ParseError(f"mesh file not found: {path}")
    with open(path, 'r') as f:
        return load_mesh(f.read())


def write_mesh_file(mesh: CurvedMesh, path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        f.write(save_mesh(mesh))
    logger.info("wrote %d elements to %s", mesh.n_elements, path)
