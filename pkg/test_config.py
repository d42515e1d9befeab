# test_config.py
import pytest

from curvem.config import load_config, parse_config, read_pairs
from curvem.errors import ConfigError, ParseError
from curvem.types import Domain, LoadHistory, MeshFamily, QuadratureMode, Variant

CYLINDER = """
# creep of a thick cylinder
mesh.domain = annulus
mesh.elements = 272
space.k = 2
space.variant = cv
material.model = maxwell
material.E = 1000
material.nu = 0.3
material.mu = 0.99
material.lambda = 1.0
load_history = constant
instantaneous_first_step = yes
steps = 20
pressure.inner = inner 10
dirichlet.sym_y = bottom y
dirichlet.sym_x = left x   # symmetry
"""


def test_cylinder_config():
    parsed = parse_config(CYLINDER)
    analysis = parsed.analysis
    assert parsed.mesh_request.domain is Domain.ANNULUS
    assert parsed.mesh_request.family is MeshFamily.QUAD
    assert parsed.mesh_request.elements == 272
    assert parsed.mesh_file is None
    assert analysis.space.k == 2 and analysis.space.variant is Variant.CV
    assert analysis.material == 'maxwell'
    assert analysis.material_params['mu'] == [0.99]
    assert analysis.material_params['mu0'] == pytest.approx(0.01)
    assert analysis.load_history is LoadHistory.CONSTANT
    assert analysis.instantaneous_first_step
    assert analysis.steps == 20
    assert [(c.group, c.components) for c in analysis.dirichlet] == [('bottom', 'y'),
                                                                     ('left', 'x')]
    (pressure,) = analysis.tractions
    assert pressure.group == 'inner' and pressure.pressure == 10.0
    analysis.build_material()


def test_defaults():
    parsed = parse_config("mesh.file = plate.mesh\n")
    analysis = parsed.analysis
    assert parsed.mesh_file == 'plate.mesh'
    assert analysis.space.k == 2
    assert analysis.space.quadrature is QuadratureMode.MINIMAL
    assert analysis.material_params == {'E': 1000.0, 'nu': 0.3}
    assert analysis.steps == 1 and analysis.dt == 1.0
    assert analysis.load_history is LoadHistory.RAMP
    assert analysis.tol == 1e-8 and analysis.max_iter == 25


def test_plate_config_with_displacement_and_traction():
    parsed = parse_config("""
mesh.domain = plate
mesh.family = voro
mesh.seed = 3
mesh.hole_radius = 40
material.model = j2
material.E = 7000
material.nu = 0.3
material.sigma_y = 24.3
space.variant = straight
space.quadrature = higher
dirichlet.top = top xy 0 2
traction.side = right 1.5 -0.5
body_force = 0, -9.81
output.dir = out
""")
    request = parsed.mesh_request
    assert request.family is MeshFamily.VORO
    assert request.seed == 3 and request.hole_radius == 40.0
    analysis = parsed.analysis
    assert analysis.space.variant is Variant.STRAIGHT
    assert analysis.space.quadrature is QuadratureMode.HIGHER
    (top,) = analysis.dirichlet
    assert top.value == (0.0, 2.0)
    assert analysis.tractions[0].traction == (1.5, -0.5)
    assert analysis.body_force == (0.0, -9.81)
    assert analysis.output_dir == 'out'


def test_read_pairs_keeps_line_numbers():
    pairs = read_pairs("# header\n\nsteps = 4\n  dt=0.5  \n")
    assert pairs == {'steps': ('4', 3), 'dt': ('0.5', 4)}


@pytest.mark.parametrize("text, line", [
    ("steps = 2\nsteps = 3\n", 2),
    ("mesh.file = a.mesh\nno equals sign here\n", 2),
    ("dt =\n", 1),
    ("mesh.file = a.mesh\nsteps = many\n", 2),
    ("mesh.file = a.mesh\n\ndirichlet.a = left\n", 3),
    ("mesh.file = a.mesh\npressure.p = inner high\n", 2),
    ("mesh.file = a.mesh\ntraction.t = right 1\n", 2),
    ("mesh.file = a.mesh\nbody_force = 1 2 3\n", 2),
])
def test_parse_errors_report_line(text, line):
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert info.value.line == line


def test_unknown_key():
    with pytest.raises(ConfigError, match='line 2'):
        parse_config("mesh.file = a.mesh\nmaterial.colour = red\n")


@pytest.mark.parametrize("text", [
    "mesh.domain = cube\n",
    "mesh.domain = disk\nmesh.family = hex\n",
    "mesh.file = a.mesh\nspace.variant = bent\n",
    "mesh.file = a.mesh\nload_history = sometimes\n",
])
def test_bad_enum_values(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_mesh_source_rules():
    with pytest.raises(ConfigError, match='either'):
        parse_config("mesh.file = a.mesh\nmesh.domain = disk\n")
    with pytest.raises(ConfigError, match='no mesh'):
        parse_config("steps = 2\n")
    parsed = parse_config("steps = 2\n", require_mesh=False)
    assert parsed.mesh_file is None and parsed.mesh_request is None


def test_invalid_values_fail_validation():
    with pytest.raises(ConfigError):
        parse_config("mesh.file = a.mesh\nsteps = 0\n")
    with pytest.raises(ConfigError):
        parse_config("mesh.file = a.mesh\ndirichlet.d = left z\n")


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("mesh.domain = disk\nmesh.elements = 50\n")
    assert load_config(str(path)).mesh_request.elements == 50
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))
