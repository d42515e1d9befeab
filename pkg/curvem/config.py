"""
Flat key-value analysis configuration for curvem

    # comment
    space.k = 2
    material.model = maxwell
    material.mu = 0.99
    pressure.inner = inner 10
    dirichlet.sym_y = bottom y 0 0
"""

import logging
import re
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple

from curvem.errors import ConfigError, ParseError
from curvem.solver import AnalysisConfig, DirichletCondition, TractionCondition
from curvem.types import (Domain, LoadHistory, MeshFamily, MeshRequest, QuadratureMode,
                          SpaceConfig, Variant)

logger = logging.getLogger(__name__)

LINE_RE = re.compile(r'^\s*([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$')
LABELLED_PREFIXES = ('dirichlet.', 'pressure.', 'traction.')

MESH_KEYS = {
    'mesh.seed': ('seed', int),
    'mesh.lloyd_iterations': ('lloyd_iterations', int),
    'mesh.distortion': ('distortion', float),
    'mesh.radius': ('radius', float),
    'mesh.inner_radius': ('inner_radius', float),
    'mesh.outer_radius': ('outer_radius', float),
    'mesh.width': ('width', float),
    'mesh.height': ('height', float),
    'mesh.hole_radius': ('hole_radius', float),
}
MATERIAL_KEYS = {
    'material.E': ('E', float),
    'material.nu': ('nu', float),
    'material.mu0': ('mu0', float),
    'material.sigma_y': ('sigma_y', float),
    'material.scale': ('scale', float),
}
KNOWN_KEYS = set(MESH_KEYS) | set(MATERIAL_KEYS) | {
    'mesh.file', 'mesh.domain', 'mesh.family', 'mesh.elements',
    'space.k', 'space.variant', 'space.quadrature',
    'material.model', 'material.mu', 'material.lambda',
    'steps', 'dt', 'instantaneous_first_step', 'load_history', 'newton.tol', 'newton.max_iter',
    'body_force', 'output.dir',
}


@dataclass
class ParsedConfig:
    """Analysis settings plus where the mesh comes from"""
    analysis: AnalysisConfig
    mesh_file: Optional[str] = None
    mesh_request: Optional[MeshRequest] = None


def _convert(key: str, value: str, cast: Callable, line: int) -> Any:
    try:
        return cast(value)
    except ValueError:
        raise ParseError(f"'{key}': cannot read '{value}' as {cast.__name__}", line)


def _boolean(value: str) -> bool:
    lowered = value.lower()
    if lowered in ('true', 'yes', '1', 'on'):
        return True
    if lowered in ('false', 'no', '0', 'off'):
        return False
    raise ValueError(value)


def _float_list(value: str) -> List[float]:
    return [float(v) for v in re.split(r'[,\s]+', value) if v]


def read_pairs(text: str) -> Dict[str, Tuple[str, int]]:
    """key -> (raw value, line number); duplicates and malformed lines rejected"""
    pairs: Dict[str, Tuple[str, int]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0]
        if not line.strip():
            continue
        match = LINE_RE.match(line)
        if not match:
            raise ParseError(f"expected 'key = value', got '{raw.strip()}'", line_no)
        key, value = match.group(1), match.group(2)
        if not value:
            raise ParseError(f"'{key}' has no value", line_no)
        if key in pairs:
            raise ParseError(f"duplicate key '{key}' (first on line {pairs[key][1]})", line_no)
        if key not in KNOWN_KEYS and not key.startswith(LABELLED_PREFIXES):
            raise ConfigError(f"line {line_no}: unknown key '{key}'")
        pairs[key] = (value, line_no)
    return pairs


def _enum(enum_cls, key: str, value: str, line: int):
    try:
        if enum_cls is Variant:
            return Variant.parse(value)
        return enum_cls(value.lower())
    except ValueError:
        choices = ", ".join(member.value for member in enum_cls)
        raise ConfigError(f"line {line}: '{key}' must be one of {choices}, got '{value}'")


def _dirichlet(label: str, value: str, line: int) -> DirichletCondition:
    parts = value.split()
    if len(parts) not in (2, 4):
        raise ParseError(f"dirichlet.{label} needs '<group> <x|y|xy> [<ux> <uy>]'", line)
    values = (0.0, 0.0)
    if len(parts) == 4:
        values = tuple(_convert(f"dirichlet.{label}", v, float, line) for v in parts[2:])
    return DirichletCondition(parts[0], parts[1], values)


def _traction(label: str, value: str, line: int) -> TractionCondition:
    parts = value.split()
    if len(parts) != 3:
        raise ParseError(f"traction.{label} needs '<group> <tx> <ty>'", line)
    tx, ty = (_convert(f"traction.{label}", v, float, line) for v in parts[1:])
    return TractionCondition(parts[0], traction=(tx, ty))


def _pressure(label: str, value: str, line: int) -> TractionCondition:
    parts = value.split()
    if len(parts) != 2:
        raise ParseError(f"pressure.{label} needs '<group> <p>'", line)
    return TractionCondition(parts[0], pressure=_convert(f"pressure.{label}", parts[1], float, line))


def parse_config(text: str, require_mesh: bool = True) -> ParsedConfig:
    """Parse configuration text into analysis settings and a mesh source"""
    pairs = read_pairs(text)

    def get(key: str, cast: Callable = str, default: Any = None) -> Any:
        if key not in pairs:
            return default
        value, line = pairs[key]
        return _convert(key, value, cast, line)

    def get_enum(key: str, enum_cls, default):
        if key not in pairs:
            return default
        value, line = pairs[key]
        return _enum(enum_cls, key, value, line)

    space = SpaceConfig(k=get('space.k', int, 2),
                        variant=get_enum('space.variant', Variant, Variant.CV),
                        quadrature=get_enum('space.quadrature', QuadratureMode,
                                            QuadratureMode.MINIMAL))

    params: Dict[str, Any] = {}
    for key, (name, cast) in MATERIAL_KEYS.items():
        if key in pairs:
            params[name] = get(key, cast)
    if 'material.mu' in pairs:
        params['mu'] = get('material.mu', _float_list)
    if 'material.lambda' in pairs:
        params['lambda'] = get('material.lambda', _float_list)
    model = get('material.model', str, 'linear_elastic')
    if model == 'linear_elastic':
        params.setdefault('E', 1000.0)
        params.setdefault('nu', 0.3)
    if model == 'maxwell' and 'mu0' not in params and 'mu' in params:
        params['mu0'] = 1.0 - sum(params['mu'])

    dirichlet, tractions = [], []
    for key, (value, line) in pairs.items():
        prefix, _, label = key.partition('.')
        if prefix == 'dirichlet':
            dirichlet.append(_dirichlet(label, value, line))
        elif prefix == 'traction':
            tractions.append(_traction(label, value, line))
        elif prefix == 'pressure':
            tractions.append(_pressure(label, value, line))

    body_force = None
    if 'body_force' in pairs:
        components = get('body_force', _float_list)
        if len(components) != 2:
            raise ParseError("body_force needs two components", pairs['body_force'][1])
        body_force = tuple(components)

    analysis = AnalysisConfig(
        space=space, material=model, material_params=params,
        steps=get('steps', int, 1), dt=get('dt', float, 1.0),
        instantaneous_first_step=get('instantaneous_first_step', _boolean, False),
        load_history=get_enum('load_history', LoadHistory, LoadHistory.RAMP),
        tol=get('newton.tol', float, 1e-8), max_iter=get('newton.max_iter', int, 25),
        dirichlet=dirichlet, tractions=tractions, body_force=body_force,
        output_dir=get('output.dir'))

    mesh_file = get('mesh.file')
    request = None
    if 'mesh.domain' in pairs:
        if mesh_file:
            raise ConfigError("give either mesh.file or mesh.domain, not both")
        extras = {name: get(key, cast) for key, (name, cast) in MESH_KEYS.items() if key in pairs}
        request = MeshRequest(domain=get_enum('mesh.domain', Domain, None),
                              family=get_enum('mesh.family', MeshFamily, MeshFamily.QUAD),
                              elements=get('mesh.elements', int, 100), **extras)
    elif not mesh_file and require_mesh:
        raise ConfigError("configuration names no mesh (mesh.file or mesh.domain)")
    logger.debug("parsed config: %d keys, material %s", len(pairs), model)
    return ParsedConfig(analysis=analysis, mesh_file=mesh_file, mesh_request=request)


def load_config(path: str) -> ParsedConfig:
    try:
        with open(path, 'r') as f:
            return parse_config(f.read())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
