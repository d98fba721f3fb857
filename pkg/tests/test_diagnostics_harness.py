"""
Tests für Testmatrizen, Messgrößen, Experimente und Selbsttest
"""

import json

import numpy as np
import pytest

from src.diagnostics_harness import (
    EXIT_EARLY_BREAKDOWN,
    EXIT_OK,
    AccuracyClass,
    ExperimentConfig,
    biorthogonality_measure,
    first_convergence_step,
    first_red_eigenvalues,
    loss_onset_step,
    gen_hermitian,
    gen_unitary,
    gen_upper_triangular,
    generate_matrix,
    projection_residual,
    ritz_convergence,
    ritz_history,
    ritz_values,
    run_experiment,
    run_selftest,
    start_vector,
    two_sided_lanczos,
)
from src.exceptions import ConfigValidationError, KrylovError, SingularMatrixError
from src.pencils import parse_pole_list
from src.rational_lanczos import rat_lan
from src.utils.matrix_io import parse_generator_spec, read_csv, write_matrix_market

from conftest import complex_normal


class TestGenerators:

    def test_upper_triangular(self):
        a = gen_upper_triangular(6, np.arange(1, 7), seed=3)
        assert np.allclose(np.tril(a, -1), 0.0)
        assert np.allclose(np.diag(a), np.arange(1, 7))
        assert np.array_equal(a, gen_upper_triangular(6, np.arange(1, 7), seed=3))

    def test_upper_triangular_wrong_count(self):
        with pytest.raises(ValueError):
            gen_upper_triangular(5, [1, 2], seed=0)

    def test_generate_triangular_default_eigs(self):
        a, spectrum = generate_matrix(parse_generator_spec("triangular:m=8"), 1)
        assert a.shape == (8, 8)
        assert np.allclose(np.sort(spectrum.real), np.arange(1, 9))

    def test_generate_triangular_with_eigs(self):
        a, spectrum = generate_matrix(parse_generator_spec("triangular:eigs=1;2;3+1i"), 0)
        assert a.shape == (3, 3)
        assert np.allclose(spectrum, [1, 2, 3 + 1j])

    def test_hermitian_and_unitary(self):
        h = gen_hermitian(7, 2)
        assert np.allclose(h, h.conj().T)
        u = gen_unitary(7, 2)
        assert np.allclose(u.conj().T @ u, np.eye(7))

    def test_generated_spectrum(self):
        a, spectrum = generate_matrix(parse_generator_spec("random:m=6"), 5)
        assert np.allclose(np.sort_complex(np.linalg.eigvals(a)), np.sort_complex(spectrum))

    @pytest.mark.parametrize("kind", ["ones", "e1", "random"])
    def test_start_vectors(self, kind):
        v = start_vector(kind, 10, seed=4)
        assert v.shape == (10,)
        assert np.linalg.norm(v) == pytest.approx(1.0)

    def test_unknown_start_vector(self):
        with pytest.raises(ValueError):
            start_vector("zeros", 10)


class TestMeasures:

    def test_biorthogonality_measure(self, rng):
        v = complex_normal(rng, (8, 3))
        w = np.linalg.pinv(v).conj().T
        assert biorthogonality_measure(v, w) < 1e-12
        with pytest.raises(ValueError):
            biorthogonality_measure(v, w[:, :2])

    def test_projection_residual_dimensions(self, rng):
        a = complex_normal(rng, (8, 8))
        v = complex_normal(rng, (8, 4))
        with pytest.raises(ValueError):
            projection_residual(a, v, v, np.zeros((4, 4)), np.zeros((4, 4)))

    def test_projection_residual_of_lanczos(self, rng):
        a = np.diag(np.arange(1.0, 13.0)) + 0.1 * np.triu(complex_normal(rng, (12, 12)), 1)
        poles = parse_pole_list("0.5i,6.5i,0.5i,6.5i")
        result = rat_lan(a, np.ones(12), np.ones(12), 4, poles, poles)
        assert projection_residual(a, result.V, result.W, result.S, result.T) < 1e-10

    def test_ritz_values_regular(self):
        t = np.diag([2.0, 6.0])
        s = np.diag([1.0, 2.0])
        assert np.allclose(np.sort(ritz_values(t, s).real), [2.0, 3.0])

    def test_ritz_values_infinite(self):
        t = np.eye(2)
        s = np.diag([1.0, 0.0])
        values = ritz_values(t, s)
        assert np.sum(np.isinf(values)) == 1
        assert np.any(np.isclose(values, 1.0))

    def test_ritz_values_singular_pencil(self):
        t = np.diag([1.0, 0.0])
        s = np.diag([1.0, 0.0])
        with pytest.raises(SingularMatrixError):
            ritz_values(t, s)

    @pytest.mark.parametrize("distance,expected", [
        (0.0, AccuracyClass.RED),
        (9.9e-9, AccuracyClass.RED),
        (1e-8, AccuracyClass.YELLOW),
        (1e-5, AccuracyClass.GREEN),
        (5e-3, AccuracyClass.GREEN),
        (1e-2, AccuracyClass.BLUE),
        (float('inf'), AccuracyClass.BLUE),
    ])
    def test_accuracy_classes(self, distance, expected):
        assert AccuracyClass.classify(distance) is expected

    def test_ritz_convergence_records(self):
        spectrum = np.array([1.0, 2.0, 3.0])
        records = ritz_convergence(spectrum, {1: np.array([1.0 + 1e-10]),
                                              2: np.array([2.5, complex(np.inf)])})
        assert [r.step for r in records] == [1, 2]
        assert records[0].classes == [AccuracyClass.RED]
        assert records[1].classes == [AccuracyClass.BLUE, AccuracyClass.BLUE]
        rows = records[1].rows()
        assert rows[1]['theta_real'] == float('inf')
        assert rows[1]['class'] == 'blue'
        assert first_convergence_step(records, 1.0) == 1
        assert first_convergence_step(records, 3.0) is None
        assert first_red_eigenvalues(records, spectrum) == {1.0: 1}


class TestTwoSidedLanczos:

    def test_classical_relations(self, rng):
        a = complex_normal(rng, (12, 12))
        result = two_sided_lanczos(a, complex_normal(rng, 12), complex_normal(rng, 12), 5)
        assert np.allclose(result.W.conj().T @ result.V, np.eye(5), atol=1e-8)
        assert np.allclose(result.W.conj().T @ a @ result.V, result.tridiagonal(), atol=1e-8)

    def test_orthogonal_start(self):
        e = np.eye(4)
        with pytest.raises(KrylovError):
            two_sided_lanczos(np.eye(4), e[:, 0], e[:, 1], 2)


class TestExperimentConfig:

    def _config(self, **kwargs):
        data = {'generator': 'triangular:m=10', 'seed': 1, 'poles_k': '0,5.5', 'poles_l': '0,5.5', 'n': 5}
        data.update(kwargs)
        return ExperimentConfig.from_dict('test', data)

    def test_valid(self):
        cfg = self._config()
        cfg.validate()
        assert cfg.echo()['poles_k'] == '0.0,5.5'

    @pytest.mark.parametrize("changes", [
        {'seed': None},
        {'n': 0},
        {'n': 10},
        {'min_n': 6},
        {'matrix': 'a.mtx'},
        {'generator': 'nonsense:m=3'},
    ])
    def test_invalid(self, changes):
        cfg = self._config(**changes)
        with pytest.raises(ConfigValidationError):
            cfg.validate()

    def test_no_source(self):
        cfg = self._config(generator=None)
        with pytest.raises(ConfigValidationError):
            cfg.validate(10)

    def test_unparsable(self):
        with pytest.raises(ConfigValidationError):
            self._config(poles_k='0,foo')
        with pytest.raises(ConfigValidationError):
            ExperimentConfig.from_dict('broken', {'poles_k': '0'})

    def test_from_preset(self, config):
        cfg = ExperimentConfig.from_preset(config, 'example1', n=10, seed=None)
        assert cfg.n == 10
        assert cfg.seed == 42
        assert cfg.target == 24
        assert cfg.breakdown_tol == config.tolerance('breakdown_lanczos')
        assert [str(p) for p in cfg.poles_k] == ['0.0', '24.1']

    def test_unknown_preset(self, config):
        with pytest.raises(ConfigValidationError):
            ExperimentConfig.from_preset(config, 'example3')


class TestRunExperiment:

    def test_writes_files(self, config, tmp_path):
        cfg = ExperimentConfig.from_preset(config, 'example1', n=8, output_dir=str(tmp_path / 'run'))
        result = run_experiment(cfg, progress=False)
        assert result.exit_code == EXIT_OK
        names = sorted(p.name for p in result.files)
        assert names == ['biorthogonality.csv', 'projection.csv', 'ritz.csv', 'summary.json']

        with open(tmp_path / 'run' / 'biorthogonality.csv', encoding='utf-8') as f:
            assert f.readline().startswith('# ratkrylov-csv v1 biorthogonality')
        rows = read_csv(tmp_path / 'run' / 'biorthogonality.csv')
        assert [int(r['n']) for r in rows] == list(range(1, 9))
        ritz_rows = read_csv(tmp_path / 'run' / 'ritz.csv')
        assert len(ritz_rows) == sum(range(1, 9))

        summary = json.loads((tmp_path / 'run' / 'summary.json').read_text(encoding='utf-8'))
        assert summary['format'] == 'ratkrylov-summary'
        assert summary['completed_steps'] == 8
        assert summary['config']['seed'] == 42
        assert summary['pole_recovery']['passed']
        assert 'target' in summary

    def test_requires_output_dir(self, config):
        cfg = ExperimentConfig.from_preset(config, 'example1', n=5)
        with pytest.raises(ConfigValidationError):
            run_experiment(cfg, progress=False)

    def test_invalid_config_writes_nothing(self, config, tmp_path):
        cfg = ExperimentConfig.from_preset(config, 'example1', n=60, output_dir=str(tmp_path / 'run'))
        with pytest.raises(ConfigValidationError):
            run_experiment(cfg, progress=False)
        assert not (tmp_path / 'run').exists()

    def test_matrix_file_source(self, tmp_path):
        a = np.diag(np.arange(1.0, 11.0)) + np.triu(np.ones((10, 10)), 1) * 0.1
        path = write_matrix_market(tmp_path / 'a.mtx', a)
        cfg = ExperimentConfig.from_dict('file', {'matrix': str(path), 'poles_k': '0.5i', 'poles_l': 'inf', 'n': 4})
        result = run_experiment(cfg, write=False, progress=False)
        assert result.lanczos.n == 4
        assert len(result.biorthogonality) == 4
        assert np.allclose(np.sort(result.spectrum.real), np.arange(1, 11))

    def test_early_breakdown_exit_code(self, tmp_path):
        a = np.diag(np.arange(1.0, 9.0))
        path = write_matrix_market(tmp_path / 'a.mtx', a)
        cfg = ExperimentConfig.from_dict('breakdown', {
            'matrix': str(path), 'poles_k': 'inf', 'poles_l': 'inf', 'n': 3,
            'start_vector': 'e1', 'min_n': 2,
        })
        result = run_experiment(cfg, write=False, progress=False)
        # e1 ist ein Eigenvektor: Zusammenbruch sofort
        assert result.lanczos.breakdown is not None
        assert result.exit_code == EXIT_EARLY_BREAKDOWN
        assert result.summary['breakdown'] is not None

    def test_ritz_history(self, config):
        cfg = ExperimentConfig.from_preset(config, 'example1', n=6)
        result = run_experiment(cfg, write=False, progress=False)
        history = ritz_history(result.lanczos)
        assert sorted(history) == list(range(1, 7))
        assert all(history[k].size == k for k in history)


class TestReferenceExperiments:
    """Qualitatives Verhalten der beiden eingebauten Experimente."""

    @pytest.fixture
    def example1(self, config):
        return run_experiment(ExperimentConfig.from_preset(config, 'example1'), write=False, progress=False)

    @pytest.fixture
    def example2(self, config):
        return run_experiment(ExperimentConfig.from_preset(config, 'example2'), write=False, progress=False)

    def test_example1_biorthogonality(self, example1):
        measures = example1.biorthogonality
        assert max(measures[:5]) < 1e-10
        assert max(measures) > 1e-2

    def test_example1_projection_while_biorthogonal(self, example1):
        for biorth, proj in zip(example1.biorthogonality, example1.projection):
            if biorth < 1e-10:
                assert proj < 1e-8

    def test_example1_convergence_near_poles(self, example1):
        first = first_red_eigenvalues(example1.ritz, example1.spectrum)
        assert first
        earliest = min(first.values())
        early_eigs = [eig for eig, step in first.items() if step == earliest]
        assert all(min(abs(eig - 0.0), abs(eig - 24.1)) <= 3 for eig in early_eigs)
        near_zero = [step for eig, step in first.items() if abs(eig) <= 3]
        near_24 = [step for eig, step in first.items() if abs(eig - 24.1) <= 3]
        assert near_zero and near_24
        # 50 liegt fern beider Pole und darf nicht früher konvergieren
        assert first.get(50, float('inf')) >= max(min(near_zero), min(near_24))

    def test_example2_converges_faster(self, example1, example2):
        step1 = first_convergence_step(example1.ritz, 24)
        step2 = first_convergence_step(example2.ritz, 24)
        assert step1 is not None
        assert step2 is not None
        assert step2 < step1
        # gleiche Dimension: beim Konvergenzschritt von Beispiel 1 ist Beispiel 2 weiter von W^H V = I entfernt
        assert example2.biorthogonality[step1 - 1] > example1.biorthogonality[step1 - 1]
        onset1 = loss_onset_step(example1.biorthogonality)
        onset2 = loss_onset_step(example2.biorthogonality)
        assert onset2 is not None
        assert onset1 is not None
        assert onset2 < onset1
        assert example2.summary['target']['loss_onset_step'] == onset2

    def test_loss_onset_step(self):
        assert loss_onset_step([1e-15, 1e-12, 3e-8, 1e-9, 0.5]) == 3
        assert loss_onset_step([1e-15, 1e-12]) is None
        assert loss_onset_step([1e-3], level=1e-2) is None


def test_selftest_passes():
    checks = run_selftest(seed=0)
    failed = [(c.name, c.value, c.message) for c in checks if not c.passed]
    assert not failed
    assert {c.name for c in checks} == {
        'turnover', 'qr_hessenberg', 'transfer_through', 'rational_arnoldi',
        'to_inv_hessenberg', 'pole_sequence', 'oracle_equivalence',
    }
