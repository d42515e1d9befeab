"""
Command line interface for curvem

    curvem mesh --domain disk --family voro --elements 500 --out disk.mesh
    curvem solve --config cylinder.cfg
    curvem study --example 1 --variant cv --k 2 --out results/
    curvem serve --port 5000
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import numpy as np
import pandas as pd

from curvem import __version__
from curvem.benchmarks import run_benchmark, write_csv
from curvem.config import load_config
from curvem.errors import CurvemError
from curvem.mesh_io import read_mesh_file, write_mesh_file
from curvem.meshgen import generate_benchmark_mesh
from curvem.quadrature import compress_rule, element_rule
from curvem.solver import run_analysis
from curvem.types import Domain, MeshFamily, MeshRequest, QuadratureMode, Variant

logger = logging.getLogger('curvem')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='curvem',
                                     description='Curved virtual element solver and benchmarks')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    verbosity.add_argument('-q', '--quiet', action='store_true', help='warnings only')
    commands = parser.add_subparsers(dest='command', required=True)

    mesh = commands.add_parser('mesh', help='generate a benchmark mesh or inspect a mesh file')
    source = mesh.add_mutually_exclusive_group(required=True)
    source.add_argument('--domain', choices=[d.value for d in Domain])
    source.add_argument('--file', help='existing mesh file')
    mesh.add_argument('--family', choices=[f.value for f in MeshFamily], default='quad')
    mesh.add_argument('--elements', type=int, default=100)
    mesh.add_argument('--seed', type=int, default=0)
    mesh.add_argument('--distortion', type=float, default=0.0)
    mesh.add_argument('--out', help='write the mesh here')
    mesh.add_argument('--dump-rule', type=int, metavar='ELEMENT',
                      help='print the quadrature rule of an element as CSV x,y,w')
    mesh.add_argument('--order', type=int, default=4, help='exactness order of the dumped rule')
    mesh.add_argument('--compress', action='store_true', help='compress the dumped rule')

    solve = commands.add_parser('solve', help='run an analysis from a config file')
    solve.add_argument('--config', required=True)
    solve.add_argument('--workers', type=int, default=None)

    study = commands.add_parser('study', help='run a benchmark example')
    study.add_argument('--example', type=int, choices=[1, 2, 3, 4], required=True)
    study.add_argument('--variant', choices=['s', 'co', 'cv'], default='cv')
    study.add_argument('--k', type=int, choices=[1, 2, 3], default=2)
    study.add_argument('--quadrature', choices=[m.value for m in QuadratureMode],
                       default='minimal')
    study.add_argument('--family', choices=[f.value for f in MeshFamily], default='quad')
    study.add_argument('--elements', type=int, nargs='+',
                       help='mesh sizes (one for examples 3 and 4)')
    study.add_argument('--prony-set', choices=['ve1', 've2'], default='ve1')
    study.add_argument('--increments', type=int, default=100)
    study.add_argument('--workers', type=int, default=None)
    study.add_argument('--out', required=True, help='output directory for CSV files')

    serve = commands.add_parser('serve', help='start the JSON API')
    serve.add_argument('--host', default='127.0.0.1')
    serve.add_argument('--port', type=int, default=5000)
    serve.add_argument('--debug', action='store_true')
    return parser


def cmd_mesh(args) -> int:
    if args.file:
        mesh = read_mesh_file(args.file)
    else:
        request = MeshRequest(Domain(args.domain), MeshFamily(args.family), args.elements,
                              seed=args.seed, distortion=args.distortion)
        mesh = generate_benchmark_mesh(request)
    if args.out:
        write_mesh_file(mesh, args.out)
    if args.dump_rule is not None:
        if not 0 <= args.dump_rule < mesh.n_elements:
            raise CurvemError(f"element {args.dump_rule} out of range (mesh has "
                              f"{mesh.n_elements})")
        rule = element_rule(mesh, args.dump_rule, args.order)
        if args.compress:
            rule = compress_rule(rule, args.order)
            if rule.flagged:
                logger.warning("compression did not reach the target point count")
        frame = pd.DataFrame(np.column_stack((rule.points, rule.weights)), columns=['x', 'y', 'w'])
        frame.to_csv(sys.stdout, index=False, float_format='%.17g')
        return 0
    print(f"elements: {mesh.n_elements}")
    print(f"vertices: {len(mesh.vertices)}")
    print(f"edges:    {len(mesh.edges)}")
    print(f"h:        {mesh.h:.6g}")
    print(f"area:     {mesh.area:.12g}")
    print(f"groups:   {', '.join(sorted(mesh.groups))}")
    return 0


def cmd_solve(args) -> int:
    parsed = load_config(args.config)
    if parsed.mesh_request is not None:
        mesh = generate_benchmark_mesh(parsed.mesh_request)
    else:
        base = os.path.dirname(os.path.abspath(args.config))
        mesh = read_mesh_file(os.path.join(base, parsed.mesh_file))
    result = run_analysis(mesh, parsed.analysis, workers=args.workers)
    rows = []
    for record in result.steps:
        row = {'step': record.step, 'time': record.time, 'load_factor': record.factor,
               'iterations': record.iterations}
        for group, reaction in sorted(record.reactions.items()):
            row[f'{group}_rx'] = reaction[0]
            row[f'{group}_ry'] = reaction[1]
        rows.append(row)
    frame = pd.DataFrame(rows)
    print(frame.to_string(index=False))
    out_dir = parsed.analysis.output_dir
    if out_dir:
        write_csv(frame, out_dir, 'history.csv')
        layout = result.discretization.layout
        points = layout.skeleton_points(trace=True)
        n = layout.n_skeleton_nodes
        nodes = pd.DataFrame({'x': points[:, 0], 'y': points[:, 1],
                              'ux': result.u[0:2 * n:2], 'uy': result.u[1:2 * n:2]})
        write_csv(nodes, out_dir, 'displacement.csv')
    return 0


def cmd_study(args) -> int:
    variant = Variant.parse(args.variant)
    quadrature = QuadratureMode(args.quadrature)
    family = MeshFamily(args.family)
    options = {}
    if args.example == 1:
        options = dict(k=args.k, variant=variant, quadrature=quadrature, family=family,
                       workers=args.workers)
        if args.elements:
            options['elements'] = args.elements
    elif args.example == 2:
        options = dict(ks=(args.k,), variants=(variant,), families=(family,))
        if args.quadrature != 'minimal':
            options['quadrature'] = quadrature
        if args.elements:
            options['elements'] = args.elements
    elif args.example == 3:
        options = dict(k=args.k, variant=variant, quadrature=quadrature,
                       prony_set=args.prony_set)
        if args.elements:
            options['elements'] = args.elements[0]
    elif args.example == 4:
        options = dict(k=args.k, variant=variant, quadrature=quadrature, family=family,
                       increments=args.increments)
        if args.elements:
            options['elements'] = args.elements[0]
    frames = run_benchmark(args.example, out_dir=args.out, **options)
    for name, frame in frames.items():
        print(f"== {name} ==")
        print(frame.to_string(index=False))
    return 0


def cmd_serve(args) -> int:
    from api.server import app
    logger.info("starting API on http://%s:%d", args.host, args.port)
    app.run(host=args.host, port=args.port, debug=args.debug, use_reloader=False)
    return 0


COMMANDS = {'mesh': cmd_mesh, 'solve': cmd_solve, 'study': cmd_study, 'serve': cmd_serve}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except CurvemError as e:
        print(f"curvem: error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("\ninterrupted", file=sys.stderr)
        return 130
