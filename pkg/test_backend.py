# test_backend.py
import pytest

from api.server import app
from curvem import __version__
from curvem.mesh_io import save_mesh
from test_geometry import unit_square

TRANSLATE = """
space.k = 1
dirichlet.all = boundary xy 0.1 0
steps = 2
"""


@pytest.fixture
def client():
    app.config['TESTING'] = True
    with app.test_client() as client:
        yield client


def test_health(client):
    response = client.get('/api/health')
    assert response.status_code == 200
    data = response.get_json()
    assert data['success'] and data['status'] == 'healthy'
    assert data['version'] == __version__


def test_info(client):
    data = client.get('/api/info').get_json()
    assert 'annulus' in data['domains']
    assert set(data['variants']) == {'straight', 'co', 'cv'}
    assert 'j2' in data['materials']


# ==================== MESHES ====================

def test_create_mesh(client):
    response = client.post('/api/meshes', json={'domain': 'disk', 'elements': 50})
    assert response.status_code == 200
    data = response.get_json()
    assert data['stats']['elements'] == 50
    assert data['stats']['curved']
    assert data['request']['family'] == 'quad'
    assert data['mesh'].startswith('# curvem-mesh')


def test_create_mesh_needs_domain(client):
    response = client.post('/api/meshes', json={'elements': 50})
    assert response.status_code == 400
    assert not response.get_json()['success']


def test_create_mesh_rejects_bad_family(client):
    response = client.post('/api/meshes', json={'domain': 'disk', 'family': 'hex'})
    assert response.status_code == 400
    assert 'Invalid mesh request' in response.get_json()['error']


# ==================== ANALYSES ====================

def test_solve_with_mesh_text(client):
    response = client.post('/api/solve', json={'config': TRANSLATE,
                                               'mesh': save_mesh(unit_square(2))})
    assert response.status_code == 200
    data = response.get_json()
    assert data['mesh']['elements'] == 4
    assert data['dofs'] == 18
    assert [step['load_factor'] for step in data['steps']] == [0.5, 1.0]
    assert data['max_displacement'] == pytest.approx(0.1, rel=1e-10)
    assert set(data['steps'][0]['reactions']) == {'all'}


def test_solve_with_generated_mesh(client):
    config = "mesh.domain = annulus\nmesh.elements = 16\nspace.k = 1\n" \
             "dirichlet.b = bottom y\ndirichlet.l = left x\npressure.p = inner 10\n"
    response = client.post('/api/solve', json={'config': config})
    assert response.status_code == 200
    assert response.get_json()['max_displacement'] > 0


def test_solve_needs_config(client):
    assert client.post('/api/solve', json={}).status_code == 400


@pytest.mark.parametrize("payload, status, kind", [
    ({'config': 'mesh.file = secret.mesh\n'}, 400, 'ConfigError'),
    ({'config': 'steps == 2\n', 'mesh': 'x'}, 400, 'ParseError'),
    ({'config': TRANSLATE, 'mesh': 'vertex 0 0 0\nedge 0 0 5\n'}, 400, 'ParseError'),
    ({'config': 'mesh.domain = disk\nmesh.elements = 50\ndirichlet.x = rim xy\n'}, 422,
     'SolverError'),
    ({'config': 'mesh.domain = disk\nmesh.elements = 50\nmaterial.model = rubber\n'}, 422,
     'MaterialError'),
])
def test_solve_error_mapping(client, payload, status, kind):
    response = client.post('/api/solve', json=payload)
    assert response.status_code == status
    data = response.get_json()
    assert not data['success']
    assert data['type'] == kind
