"""
curvem REST API Server
Provides HTTP interface to mesh generation and analyses
"""

from flask import Flask, jsonify, request
from flask_cors import CORS
import numpy as np

from curvem import __version__
from curvem.config import parse_config
from curvem.errors import ConfigError, CurvemError, MeshError, ParseError
from curvem.mesh_io import load_mesh, save_mesh
from curvem.meshgen import generate_benchmark_mesh
from curvem.materials import MATERIAL_MODELS
from curvem.solver import run_analysis
from curvem.types import Domain, MeshFamily, MeshRequest, QuadratureMode, Variant

app = Flask(__name__)
CORS(app)

CLIENT_ERRORS = (ParseError, ConfigError, MeshError)


def error_response(error: Exception):
    """Map an exception to a JSON error payload and status code"""
    if isinstance(error, CLIENT_ERRORS):
        status = 400
    elif isinstance(error, CurvemError):
        status = 422
    else:
        app.logger.error("unexpected failure", exc_info=True)
        return jsonify({
            'success': False,
            'error': f'Internal error: {str(error)}'
        }), 500
    app.logger.info("request rejected (%d): %s", status, error)
    return jsonify({
        'success': False,
        'error': str(error),
        'type': type(error).__name__
    }), status


def mesh_summary(mesh):
    return {
        'elements': mesh.n_elements,
        'vertices': mesh.n_vertices,
        'edges': len(mesh.edges),
        'h': mesh.h,
        'area': mesh.area,
        'curved': mesh.is_curved,
        'groups': {name: len(ids) for name, ids in mesh.groups.items()}
    }


# ==================== INFO ENDPOINTS ====================

@app.route('/api/health', methods=['GET'])
def health_check():
    """Health check endpoint"""
    return jsonify({
        'success': True,
        'status': 'healthy',
        'service': 'curvem',
        'version': __version__
    })


@app.route('/api/info', methods=['GET'])
def get_info():
    """Supported domains, variants and material models"""
    return jsonify({
        'success': True,
        'domains': [d.value for d in Domain],
        'families': [f.value for f in MeshFamily],
        'variants': [v.value for v in Variant],
        'quadrature': [m.value for m in QuadratureMode],
        'materials': sorted(MATERIAL_MODELS)
    })


# ==================== MESH ENDPOINTS ====================

@app.route('/api/meshes', methods=['POST'])
def create_mesh():
    """Generate a benchmark mesh"""
    data = request.get_json(silent=True)
    if not data or 'domain' not in data:
        return jsonify({
            'success': False,
            'error': 'Mesh domain required'
        }), 400

    try:
        mesh_request = MeshRequest(
            domain=Domain(data['domain']),
            family=MeshFamily(data.get('family', 'quad')),
            elements=int(data.get('elements', 100)),
            seed=int(data.get('seed', 0)),
            distortion=float(data.get('distortion', 0.0))
        )
    except (ValueError, TypeError) as e:
        return jsonify({
            'success': False,
            'error': f'Invalid mesh request: {str(e)}'
        }), 400

    try:
        mesh = generate_benchmark_mesh(mesh_request)
        return jsonify({
            'success': True,
            'request': mesh_request.to_dict(),
            'mesh': save_mesh(mesh),
            'stats': mesh_summary(mesh)
        })
    except Exception as e:
        return error_response(e)


# ==================== ANALYSIS ENDPOINTS ====================

@app.route('/api/solve', methods=['POST'])
def solve():
    """Run an analysis from config text and an optional mesh text"""
    data = request.get_json(silent=True)
    config_text = data.get('config') if data else None

    if not config_text:
        return jsonify({
            'success': False,
            'error': 'Config text required'
        }), 400

    try:
        mesh_text = data.get('mesh')
        parsed = parse_config(config_text, require_mesh=not mesh_text)
        if mesh_text:
            mesh = load_mesh(mesh_text)
        elif parsed.mesh_request is not None:
            mesh = generate_benchmark_mesh(parsed.mesh_request)
        else:
            # server never reads files named by a client
            raise ConfigError("mesh.file is not accepted over the API; send the mesh text")

        result = run_analysis(mesh, parsed.analysis)
        layout = result.discretization.layout
        n = layout.n_skeleton_nodes
        u = result.u
        return jsonify({
            'success': True,
            'mesh': mesh_summary(mesh),
            'dofs': int(result.discretization.n_dofs),
            'runtime': result.runtime,
            'steps': [{
                'step': record.step,
                'time': record.time,
                'load_factor': record.factor,
                'iterations': record.iterations,
                'reactions': {g: [float(v) for v in r] for g, r in record.reactions.items()}
            } for record in result.steps],
            'max_displacement': float(np.max(np.hypot(u[0:2 * n:2], u[1:2 * n:2])))
        })
    except Exception as e:
        return error_response(e)


if __name__ == '__main__':
    app.run(debug=True, port=5000)
