import json

import pandas as pd
import pytest

from ..__main__ import main
from ..tools import experiment
from ..tools.config import parse_config
from ..tools.experiment import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, run, run_text
from ..tools.reports import dumps_json

AFFINE_MAX_PRINCIPLE = """
grid.n = 17
boundary.kind = affine
boundary.p = 0.5, -0.25
analysis.checks = max_principle
"""

LINEAR_DECAY = """
grid.n = 129
boundary.kind = custom_odd
boundary.slope = 1.0
analysis.checks = decay
analysis.center = origin
analysis.k_max = 5
analysis.alpha = {alpha}
"""


def read_manifest(out_dir):
    return json.loads((out_dir / 'manifest.json').read_text(encoding='utf-8'))


def test_passing_run(tmp_path):
    manifest = run_text(AFFINE_MAX_PRINCIPLE, tmp_path)
    assert manifest.exit_code == EXIT_PASS
    assert manifest.verdicts == {'max_principle': True}
    assert manifest.files == ['residual.csv', 'summary.json', 'manifest.json']
    for name in manifest.files:
        assert (tmp_path / name).is_file()
    written = read_manifest(tmp_path)
    assert written['status'] == 'pass'
    assert set(written['phases']) == {'build', 'solve', 'analyze', 'report'}


def test_decay_table_and_summary(tmp_path):
    manifest = run_text(LINEAR_DECAY.format(alpha='fit'), tmp_path)
    assert manifest.exit_code == EXIT_PASS
    decay = pd.read_csv(tmp_path / 'decay.csv')
    assert len(decay) == 6
    assert list(decay.columns) == ['center_x', 'center_y', 'k', 'r', 'sup_abs', 'sup_pos', 'sup_neg']
    summary = json.loads((tmp_path / 'summary.json').read_text(encoding='utf-8'))
    assert summary['alpha_fit'] == pytest.approx(1.0, abs=1e-6)
    assert summary['alpha_pred'] is None
    assert summary['verdicts']['decay'] is None
    assert summary['converged'] is True
    assert 'elapsed' not in summary


def test_failed_verdict_exits_two(tmp_path):
    manifest = run_text(LINEAR_DECAY.format(alpha='2.0'), tmp_path)
    assert manifest.exit_code == EXIT_FAIL
    assert manifest.verdicts['decay'] is False
    written = read_manifest(tmp_path)
    assert written['status'] == 'fail'
    assert 'decay' in written['failure']


def test_deterministic_summaries_are_identical(tmp_path):
    text = LINEAR_DECAY.format(alpha='2.0')
    run_text(text, tmp_path / 'first')
    run_text(text, tmp_path / 'second')
    first = (tmp_path / 'first' / 'summary.json').read_bytes()
    assert first == (tmp_path / 'second' / 'summary.json').read_bytes()
    assert (tmp_path / 'first' / 'decay.csv').read_bytes() == (tmp_path / 'second' / 'decay.csv').read_bytes()


def test_non_deterministic_run_reports_elapsed(tmp_path):
    run(parse_config(AFFINE_MAX_PRINCIPLE), tmp_path, deterministic=False)
    summary = json.loads((tmp_path / 'summary.json').read_text(encoding='utf-8'))
    assert summary['elapsed'] >= 0.0


def test_inadmissible_model_exits_one_with_manifest(tmp_path):
    manifest = run_text("model.kind = general\nmodel.m = 2.5\nmodel.kappa = 0.5\n", tmp_path)
    assert manifest.exit_code == EXIT_ERROR
    written = read_manifest(tmp_path)
    assert written['status'] == 'error'
    assert written['files'] == ['manifest.json']
    assert 'model' in written['failure']


def test_analysis_error_exits_one(tmp_path):
    text = "grid.n = 33\nboundary.kind = custom_odd\nanalysis.checks = decay\n"
    manifest = run_text(text, tmp_path)
    assert manifest.exit_code == EXIT_ERROR
    assert (tmp_path / 'manifest.json').is_file()
    assert not (tmp_path / 'summary.json').exists()


def test_unexpected_exception_is_recorded_as_error(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("kernel crashed")

    monkeypatch.setattr(experiment, 'solve', boom)
    manifest = run_text(AFFINE_MAX_PRINCIPLE, tmp_path)
    assert manifest.exit_code == EXIT_ERROR
    written = read_manifest(tmp_path)
    assert written['status'] == 'error'
    assert written['exit_code'] == EXIT_ERROR
    assert 'RuntimeError' in written['failure']


def test_json_floats_keep_seventeen_digits():
    text = dumps_json({'third': 1.0 / 3.0, 'missing': float('nan'), 'flag': True, 'rows': [1, 2.5]})
    data = json.loads(text)
    assert data['third'] == 1.0 / 3.0
    assert data['missing'] is None
    assert data['rows'] == [1, 2.5]
    assert text.endswith('\n')


def test_cli_presets_list(capsys):
    with pytest.raises(SystemExit) as info:
        main(['presets', 'list'])
    assert info.value.code == 0
    listed = capsys.readouterr().out.split()
    assert 'deadcore-decay' in listed and 'aronsson-refinement' in listed


def test_cli_run(tmp_path):
    config = tmp_path / 'affine.cfg'
    config.write_text(AFFINE_MAX_PRINCIPLE, encoding='utf-8')
    with pytest.raises(SystemExit) as info:
        main(['run', str(config), '--out', str(tmp_path / 'out'), '--deterministic'])
    assert info.value.code == EXIT_PASS
    assert read_manifest(tmp_path / 'out')['exit_code'] == EXIT_PASS


def test_cli_run_missing_file(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(['run', str(tmp_path / 'absent.cfg'), '--out', str(tmp_path / 'out')])
    assert info.value.code == EXIT_ERROR


def test_cli_prints_errors_on_stderr(tmp_path, capsys):
    config = tmp_path / 'bad.cfg'
    config.write_text("model.kind = general\nmodel.m = 2.5\nmodel.kappa = 0.5\n", encoding='utf-8')
    with pytest.raises(SystemExit) as info:
        main(['run', str(config), '--out', str(tmp_path / 'out')])
    assert info.value.code == EXIT_ERROR
    captured = capsys.readouterr()
    assert 'Error:' in captured.err
    assert 'Reason:' not in captured.out


def test_cli_prints_failed_verdicts_as_reason(tmp_path, capsys):
    config = tmp_path / 'decay.cfg'
    config.write_text(LINEAR_DECAY.format(alpha='2.0'), encoding='utf-8')
    with pytest.raises(SystemExit) as info:
        main(['run', str(config), '--out', str(tmp_path / 'out')])
    assert info.value.code == EXIT_FAIL
    captured = capsys.readouterr()
    assert 'Reason:' in captured.out
    assert 'Error:' not in captured.err


def test_cli_check_unknown_preset(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(['check', 'no-such-preset', '--out', str(tmp_path / 'out')])
    assert info.value.code == EXIT_ERROR
    assert 'Error:' in capsys.readouterr().err


@pytest.mark.slow
@pytest.mark.parametrize('name', [
    'deadcore-decay',
    'obstacle-growth',
    'twophase-reflection',
    'nondegeneracy',
    'aronsson-refinement',
])
def test_preset_check_passes(tmp_path, name):
    with pytest.raises(SystemExit) as info:
        main(['check', name, '--out', str(tmp_path / name)])
    assert info.value.code == EXIT_PASS
    assert read_manifest(tmp_path / name)['status'] == 'pass'


@pytest.mark.slow
def test_preset_check_reruns_are_identical(tmp_path):
    for out in ('first', 'second'):
        with pytest.raises(SystemExit) as info:
            main(['check', 'nondegeneracy', '--out', str(tmp_path / out)])
        assert info.value.code == EXIT_PASS
    first = (tmp_path / 'first' / 'summary.json').read_bytes()
    assert first == (tmp_path / 'second' / 'summary.json').read_bytes()
