"""
curvem - curved virtual elements for small-deformation solid mechanics
"""

__version__ = "1.0.0"
__author__ = "curvem Team"

from curvem.errors import (CurvemError, ParseError, MeshError, GeometryError, QuadratureError,
                           SpaceError, MaterialError, SolverError, ConvergenceError, ConfigError)
from curvem.types import (CurveKind, Variant, QuadratureMode, RuleKind, Domain, MeshFamily,
                          LoadHistory, QuadratureRule, SpaceConfig, MeshRequest, ErrorReport,
                          ConvergenceTable)
from curvem.geometry import Curve, Edge, Element, CurvedMesh, element_measures
from curvem.meshgen import generate_benchmark_mesh
from curvem.mesh_io import load_mesh, save_mesh, read_mesh_file, write_mesh_file
from curvem.quadrature import gauss_rules_1d, edge_rule, element_rule, boundary_moments, compress_rule
from curvem.spaces import (DofLayout, build_element_operators, build_projector_strain,
                           build_projector_dof, edge_shape_eval, rigid_map_from_endpoints,
                           interpolate)
from curvem.materials import (ConstitutiveModel, LinearElastic, HenckyVonMises,
                              MaxwellViscoelastic, J2Plasticity, MaterialState, create_material)
from curvem.solver import (AnalysisConfig, DirichletCondition, TractionCondition, Discretization,
                           assemble, apply_dirichlet, run_analysis)
from curvem.analysis import (error_displacement_skeleton, error_strain_l2, run_convergence_study,
                             convergence_slope)
from curvem.config import parse_config, load_config

__all__ = [
    'CurvemError', 'ParseError', 'MeshError', 'GeometryError', 'QuadratureError', 'SpaceError',
    'MaterialError', 'SolverError', 'ConvergenceError', 'ConfigError',
    'CurveKind', 'Variant', 'QuadratureMode', 'RuleKind', 'Domain', 'MeshFamily', 'LoadHistory',
    'QuadratureRule', 'SpaceConfig', 'MeshRequest', 'ErrorReport', 'ConvergenceTable',
    'Curve', 'Edge', 'Element', 'CurvedMesh', 'element_measures',
    'generate_benchmark_mesh', 'load_mesh', 'save_mesh', 'read_mesh_file', 'write_mesh_file',
    'gauss_rules_1d', 'edge_rule', 'element_rule', 'boundary_moments', 'compress_rule',
    'DofLayout', 'build_element_operators', 'build_projector_strain', 'build_projector_dof',
    'edge_shape_eval', 'rigid_map_from_endpoints', 'interpolate',
    'ConstitutiveModel', 'LinearElastic', 'HenckyVonMises', 'MaxwellViscoelastic',
    'J2Plasticity', 'MaterialState', 'create_material',
    'AnalysisConfig', 'DirichletCondition', 'TractionCondition', 'Discretization', 'assemble',
    'apply_dirichlet', 'run_analysis',
    'error_displacement_skeleton', 'error_strain_l2', 'run_convergence_study',
    'convergence_slope', 'parse_config', 'load_config',
]
