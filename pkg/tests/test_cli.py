"""
Tests für die Kommandozeile
"""

import json

import numpy as np
import pytest
from click.testing import CliRunner

import src.cli.base
from main import cli
from src.utils.matrix_io import read_csv, read_matrix_market, write_matrix_market


@pytest.fixture
def runner(config, monkeypatch):
    # Jede Invocation bekommt die Test-Konfiguration statt der globalen Instanz
    monkeypatch.setattr(src.cli.base, 'get_config', lambda path=None: config)
    return CliRunner()


@pytest.fixture
def mild_matrix(tmp_path):
    a = np.diag(np.arange(1.0, 13.0)) + 0.1 * np.triu(np.ones((12, 12)), 1)
    return str(write_matrix_market(tmp_path / 'a.mtx', a))


def test_selftest(runner):
    result = runner.invoke(cli, ['selftest'])
    assert result.exit_code == 0, result.output
    assert "Prüfungen bestanden" in result.output


def test_config_info(runner):
    result = runner.invoke(cli, ['config-info'])
    assert result.exit_code == 0
    assert "TOLERANZEN" in result.output
    assert "example1" in result.output


def test_create_and_set_config(runner, config):
    result = runner.invoke(cli, ['create-config'])
    assert result.exit_code == 0
    assert config.user_config_path.exists()

    result = runner.invoke(cli, ['set-config', 'lanczos.rebiorth', 'true'])
    assert result.exit_code == 0
    assert config.get('lanczos.rebiorth') is True

    result = runner.invoke(cli, ['set-config', 'tolerances.rank', 'abc'])
    assert result.exit_code == 1
    assert config.tolerance('rank') == pytest.approx(1e-10)


def test_arnoldi_writes_pencil(runner, tmp_path):
    out = tmp_path / 'arnoldi'
    result = runner.invoke(cli, ['arnoldi', '--gen', 'random:m=10', '--seed', '3',
                                 '--poles-k', 'inf,1+1i', '--n', '4', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert read_matrix_market(out / 'H.mtx').shape == (5, 4)
    assert read_matrix_market(out / 'V.mtx').shape == (10, 5)


def test_lanczos_and_ritz(runner, tmp_path, mild_matrix):
    out = tmp_path / 'pencil'
    result = runner.invoke(cli, ['lanczos', '--matrix', mild_matrix, '--poles-k', '0.5i,6.5i',
                                 '--poles-l', 'inf', '--n', '5', '--out', str(out), '--save-basis'])
    assert result.exit_code == 0, result.output
    assert read_matrix_market(out / 'T.mtx').shape == (6, 5)
    assert (out / 'W.mtx').exists()

    result = runner.invoke(cli, ['ritz', '--pencil-dir', str(out), '--matrix', mild_matrix])
    assert result.exit_code == 0, result.output
    rows = read_csv(out / 'ritz.csv')
    assert len(rows) == 15
    assert {r['class'] for r in rows} <= {'red', 'yellow', 'green', 'blue'}


def test_oracle_check(runner, mild_matrix):
    result = runner.invoke(cli, ['oracle-check', '--matrix', mild_matrix, '--poles-k', '0.5,6.5',
                                 '--poles-l', '0.5,6.5', '--n', '5'])
    assert result.exit_code == 0, result.output
    assert "stimmen überein" in result.output


def test_reproduce(runner, tmp_path):
    out = tmp_path / 'example1'
    result = runner.invoke(cli, ['reproduce', 'example1', '--n', '6', '--out', str(out), '--no-progress'])
    assert result.exit_code == 0, result.output
    summary = json.loads((out / 'summary.json').read_text(encoding='utf-8'))
    assert summary['completed_steps'] == 6
    assert summary['config']['name'] == 'example1'


def test_experiment_invalid_n(runner, tmp_path, mild_matrix):
    result = runner.invoke(cli, ['experiment', '--matrix', mild_matrix, '--poles-k', 'inf',
                                 '--poles-l', 'inf', '--n', '20', '--out', str(tmp_path / 'x'), '--no-progress'])
    assert result.exit_code == 1
    assert not (tmp_path / 'x').exists()


def test_missing_source(runner):
    result = runner.invoke(cli, ['lanczos', '--poles-k', 'inf', '--poles-l', 'inf'])
    assert result.exit_code == 2


def test_n_too_large(runner):
    result = runner.invoke(cli, ['lanczos', '--gen', 'triangular:m=8', '--poles-k', 'inf',
                                 '--poles-l', 'inf', '--n', '8'])
    assert result.exit_code == 2


def test_pole_on_spectrum(runner):
    result = runner.invoke(cli, ['lanczos', '--gen', 'triangular:m=8', '--poles-k', '3',
                                 '--poles-l', 'inf', '--n', '4'])
    assert result.exit_code == 1


def test_early_breakdown(runner):
    # e1 ist Eigenvektor einer oberen Dreiecksmatrix
    result = runner.invoke(cli, ['lanczos', '--gen', 'triangular:m=8', '--start', 'e1',
                                 '--poles-k', 'inf', '--poles-l', 'inf', '--n', '4', '--min-n', '2'])
    assert result.exit_code == 2
    assert "Zusammenbruch" in result.output
