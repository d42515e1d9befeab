# test_cli.py
import pandas as pd
import pytest

from curvem.cli import build_parser, main
from curvem.mesh_io import write_mesh_file
from test_geometry import unit_square


def test_mesh_stats(capsys):
    assert main(['-q', 'mesh', '--domain', 'disk', '--elements', '50']) == 0
    out = capsys.readouterr().out
    assert 'elements: 50' in out
    assert 'groups:   boundary' in out


def test_mesh_written_and_reread(tmp_path, capsys):
    path = tmp_path / 'annulus.mesh'
    assert main(['-q', 'mesh', '--domain', 'annulus', '--elements', '16', '--out', str(path)]) == 0
    capsys.readouterr()
    assert main(['-q', 'mesh', '--file', str(path)]) == 0
    assert 'elements: 16' in capsys.readouterr().out


def test_dump_rule(tmp_path, capsys):
    assert main(['-q', 'mesh', '--domain', 'annulus', '--elements', '16', '--dump-rule', '0',
                 '--order', '3']) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == 'x,y,w'
    assert len(lines) > 4


def test_dump_rule_out_of_range(capsys):
    assert main(['-q', 'mesh', '--domain', 'annulus', '--elements', '16',
                 '--dump-rule', '99']) == 1
    assert 'out of range' in capsys.readouterr().err


def test_solve_with_mesh_file(tmp_path, capsys):
    write_mesh_file(unit_square(2), str(tmp_path / 'square.mesh'))
    out_dir = tmp_path / 'out'
    (tmp_path / 'run.cfg').write_text(
        "mesh.file = square.mesh\nspace.k = 2\nsteps = 2\n"
        "dirichlet.all = boundary xy 0.1 0\n"
        f"output.dir = {out_dir}\n")
    assert main(['-q', 'solve', '--config', str(tmp_path / 'run.cfg')]) == 0
    assert 'boundary_rx' in capsys.readouterr().out
    history = pd.read_csv(out_dir / 'history.csv')
    assert list(history.load_factor) == [0.5, 1.0]
    nodes = pd.read_csv(out_dir / 'displacement.csv')
    assert nodes.ux.to_numpy() == pytest.approx(0.1)


def test_solve_reports_config_errors(tmp_path, capsys):
    (tmp_path / 'bad.cfg').write_text("mesh.file = square.mesh\nsteps = lots\n")
    assert main(['solve', '--config', str(tmp_path / 'bad.cfg')]) == 1
    assert 'line 2' in capsys.readouterr().err
    assert main(['solve', '--config', str(tmp_path / 'missing.cfg')]) == 1


def test_study_example2(tmp_path, capsys):
    assert main(['-q', 'study', '--example', '2', '--k', '1', '--elements', '50',
                 '--out', str(tmp_path)]) == 0
    assert '== errors.csv ==' in capsys.readouterr().out
    frame = pd.read_csv(tmp_path / 'errors.csv')
    assert list(frame.columns) == ['mesh', 'N', 'variant', 'k', 'e_u']
    assert frame.e_u.iloc[0] < 1e-9


def test_parser_rejects_unknown_example():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['study', '--example', '5', '--out', 'x'])


def test_verbosity_flags_are_exclusive():
    with pytest.raises(SystemExit):
        build_parser().parse_args(['-v', '-q', 'serve'])
