import csv
import json
import math
import os

import pytest

import main as cli
from errors import EXIT_CONFIG_ERROR, EXIT_NUMERICAL_FAILURE, EXIT_OK, ArtifactError
from main import main

CONFIG_DIR = os.path.join(os.path.dirname(__file__), '..', 'configs')

NARROW = {
    'experiment': 'narrow',
    'params': {'m': 1.0, 'mu': 1.0, 'N': 1},
    'packet': {'k0': 1.0, 'sigma0': 20.0},
}


def _run(experiment, config_path, out, *extra):
    return main([experiment, '--config', config_path, '--out', str(out), *extra])


def _read_csv(path):
    with open(path, newline='', encoding='utf-8') as handle:
        return list(csv.DictReader(handle))


def _read_json(path):
    with open(path, encoding='utf-8') as handle:
        return json.load(handle)


def test_narrow_run_writes_artifacts_and_manifest(write_config, tmp_path):
    out = tmp_path / 'out'
    assert _run('narrow', write_config(NARROW), out) == EXIT_OK
    rows = _read_csv(out / 'narrow.csv')
    assert len(rows) == 1
    assert float(rows[0]['p_R [1]']) == pytest.approx(0.2, abs=1e-15)
    assert float(rows[0]['entropy [nat]']) == pytest.approx(0.5004024235381878, abs=1e-12)
    manifest = _read_json(out / 'manifest.json')
    assert manifest['experiment'] == 'narrow'
    assert len(manifest['config_sha256']) == 64
    assert [entry['name'] for entry in manifest['artifacts']] == ['narrow.csv', 'narrow.json']


def test_repeated_runs_are_byte_identical(write_config, tmp_path):
    path = write_config(NARROW)
    assert _run('narrow', path, tmp_path / 'a') == EXIT_OK
    assert _run('narrow', path, tmp_path / 'b') == EXIT_OK
    names = sorted(os.listdir(tmp_path / 'a'))
    assert names == sorted(os.listdir(tmp_path / 'b'))
    for name in names:
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_format_option_limits_outputs(write_config, tmp_path):
    out = tmp_path / 'out'
    assert _run('narrow', write_config(NARROW), out, '--format', 'json') == EXIT_OK
    assert sorted(os.listdir(out)) == ['manifest.json', 'narrow.json']


@pytest.mark.parametrize('extra', [['--format', 'xml'], ['--threads', '0']])
def test_bad_options_are_config_errors(write_config, tmp_path, extra):
    assert _run('narrow', write_config(NARROW), tmp_path / 'out', *extra) == EXIT_CONFIG_ERROR


def test_config_problems_exit_with_config_error(write_config, tmp_path):
    out = tmp_path / 'out'
    assert _run('narrow', str(tmp_path / 'missing.json'), out) == EXIT_CONFIG_ERROR
    assert _run('amplitudes', write_config(NARROW), out) == EXIT_CONFIG_ERROR
    broken = dict(NARROW, packet={'k0': 1.0, 'sigma0': 20.0, 'width': 2.0})
    assert _run('narrow', write_config(broken, 'broken.json'), out) == EXIT_CONFIG_ERROR


def test_unknown_experiment_is_rejected_by_parser(write_config, tmp_path):
    with pytest.raises(SystemExit):
        _run('tunnel', write_config(NARROW), tmp_path / 'out')


def test_broad_packet_on_narrow_path_is_numerical_failure(write_config, tmp_path):
    broad = dict(NARROW, packet={'k0': 1.0, 'sigma0': 2.0})
    assert _run('narrow', write_config(broad), tmp_path / 'out') == EXIT_NUMERICAL_FAILURE


def test_amplitudes_without_coupling(write_config, tmp_path):
    document = {'experiment': 'amplitudes', 'params': {'m': 1.0, 'mu': 0.0, 'N': 2},
                'k_values': [0.5, 1.0, 4.0]}
    out = tmp_path / 'out'
    assert _run('amplitudes', write_config(document), out) == EXIT_OK
    rows = _read_csv(out / 'amplitudes.csv')
    assert len(rows) == 9
    for row in rows:
        assert float(row['abs_A_sq [1]']) == 0.0
        assert float(row['abs_B_sq [1]']) == 1.0
        assert row['reflected_phase [rad]'] == 'nan'
    summary = _read_json(out / 'amplitudes.json')
    assert summary['max_unitarity_error'] == 0.0


def test_amplitudes_sweep_over_coupling(write_config, tmp_path):
    document = {'experiment': 'amplitudes', 'params': {'m': 1.0, 'mu': 1.0, 'N': 1},
                'k_values': [1.0], 'sweep': {'parameter': 'mu', 'values': [0.5, 1.0]}}
    out = tmp_path / 'out'
    assert _run('amplitudes', write_config(document), out, '--threads', '2') == EXIT_OK
    rows = _read_csv(out / 'amplitudes.csv')
    assert [float(row['mu [energy*length]']) for row in rows] == [0.5, 0.5, 1.0, 1.0]
    assert float(rows[2]['abs_A_sq [1]']) == pytest.approx(0.2, abs=1e-15)


def test_entropy_scan_finds_ln2(tmp_path):
    out = tmp_path / 'scan'
    assert _run('entropy-scan', os.path.join(CONFIG_DIR, 'entropy_scan.json'), out) == EXIT_OK
    summary = _read_json(out / 'entropy_scan.json')
    assert summary['bound_ok'] is True
    assert summary['max_entropy'] <= math.log(2.0) + 1e-10
    assert summary['max_entropy'] == pytest.approx(math.log(2.0), abs=1e-3)
    assert summary['refined_k0'] == pytest.approx(0.5, rel=1e-6)
    assert summary['argmax'] == pytest.approx(0.5, rel=0.03)
    assert len(_read_csv(out / 'entropy_scan.csv')) == 201


def test_entropy_scan_over_coupling_includes_zero(write_config, tmp_path):
    document = dict(NARROW, experiment='entropy-scan', scan={'mode': 'narrow'},
                    sweep={'parameter': 'mu', 'values': [0.0, 0.5, 1.0]})
    out = tmp_path / 'out'
    assert _run('entropy-scan', write_config(document), out) == EXIT_OK
    rows = _read_csv(out / 'entropy_scan.csv')
    assert float(rows[0]['entropy [nat]']) == 0.0
    assert all(float(row['entropy [nat]']) > 0 for row in rows[1:])
    summary = _read_json(out / 'entropy_scan.json')
    assert summary['argmax'] == 1.0
    assert 'refined_k0' not in summary


def test_full_density_on_small_grid(write_config, tmp_path):
    document = {'experiment': 'full-density', 'params': {'m': 1.0, 'mu': 0.3, 'N': 4},
                'packet': {'k0': 2.0, 'sigma0': 1.0}, 'grid': {'n': 256}}
    out = tmp_path / 'out'
    assert _run('full-density', write_config(document), out) == EXIT_OK
    for name in ('full_density.csv', 'full_density_diagonal.csv', 'full_density_coherence.csv',
                 'full_density_spectrum.csv', 'full_density.json', 'manifest.json'):
        assert (out / name).exists()
    row = _read_csv(out / 'full_density.csv')[0]
    assert float(row['entropy [nat]']) > 0
    assert abs(float(row['kinetic_energy_rel_change [1]'])) < 1e-10
    assert float(row['mirror_coherence_rel [1]']) < 1e-12
    assert len(_read_csv(out / 'full_density_spectrum.csv')) == 5


def test_lindblad_and_contrast_runs(write_config, tmp_path):
    lindblad = {'experiment': 'lindblad', 'params': {'m': 1.0, 'mu': 1.0, 'N': 1},
                'packet': {'k0': 0.5, 'sigma0': 1.0},
                'lindblad': {'gamma': 0.25, 't_final': 0.2}}
    out = tmp_path / 'lindblad'
    assert _run('lindblad', write_config(lindblad, 'lindblad.json'), out) == EXIT_OK
    record = _read_json(out / 'lindblad.json')
    assert record['p2_rate_expected'] == pytest.approx(0.25)
    assert record['trace_drift'] < 1e-6

    contrast = dict(lindblad, experiment='contrast', params={'m': 1.0, 'mu': 0.1, 'N': 100},
                    packet={'k0': 2.0, 'sigma0': 1.0}, grid={'n': 1024},
                    lindblad={'gamma': 0.25, 't_final': 0.2, 'k0': 0.5})
    out = tmp_path / 'contrast'
    assert _run('contrast', write_config(contrast, 'contrast.json'), out) == EXIT_OK
    report = _read_json(out / 'contrast_report.json')
    assert report['exact_decoheres_at_fixed_energy'] is True
    assert report['lindblad_changes_energy'] is True
    assert 'oracle_max_kinetic_energy_change' not in report


@pytest.mark.slow
def test_oracle_validation_report(write_config, tmp_path):
    document = {'experiment': 'oracle-validate', 'params': {'m': 1.0, 'mu': 1.0, 'N': 1},
                'packet': {'k0': 10.0, 'sigma0': 2.0, 'y0': -30.0},
                'benchmark': {'N': [1], 'mu': [1.0]}}
    out = tmp_path / 'out'
    assert _run('oracle-validate', write_config(document), out, '--threads', '2') == EXIT_OK
    report = _read_json(out / 'oracle_report.json')
    assert report['passed'] is True
    assert report['max_channel_deviation'] < 1e-3
    assert report['max_density_matrix_deviation_rel'] < 1e-3
    assert len(_read_csv(out / 'oracle_channels.csv')) == 2


@pytest.mark.slow
def test_shipped_oracle_benchmark_set_passes(tmp_path):
    out = tmp_path / 'oracle'
    path = os.path.join(CONFIG_DIR, 'oracle_validate.json')
    assert _run('oracle-validate', path, out, '--threads', '4') == EXIT_OK
    report = _read_json(out / 'oracle_report.json')
    assert report['passed'] is True
    assert [(b['N'], b['mu']) for b in report['benchmarks']] == [
        (1, 0.5), (1, 1.0), (2, 0.5), (2, 1.0), (4, 0.5), (4, 1.0)]
    assert all(b['passed'] for b in report['benchmarks'])
    assert report['max_channel_deviation'] < 1e-3
    assert report['max_density_matrix_deviation_rel'] < 1e-3
    assert report['max_entropy_deviation'] < 5e-3
    assert len(_read_csv(out / 'oracle_channels.csv')) == 2 * (2 + 3 + 5)


def test_artifact_failure_exits_with_numerical_code(write_config, tmp_path, monkeypatch):
    def broken_run(config, output_dir=None):
        raise ArtifactError('narrow.csv: row has 2 cells, header has 3')

    monkeypatch.setattr(cli, 'run', broken_run)
    assert _run('narrow', write_config(NARROW), tmp_path / 'out') == EXIT_NUMERICAL_FAILURE


def test_entropy_scan_with_repeated_momenta(write_config, tmp_path):
    document = dict(NARROW, experiment='entropy-scan', scan={'mode': 'narrow'},
                    sweep={'parameter': 'k0', 'values': [0.5, 0.5]})
    out = tmp_path / 'repeated'
    assert _run('entropy-scan', write_config(document), out) == EXIT_OK
    assert 'refined_k0' not in _read_json(out / 'entropy_scan.json')

    document['sweep'] = {'parameter': 'k0', 'values': [1.0, 0.5, 0.5, 0.25]}
    out = tmp_path / 'mixed'
    assert _run('entropy-scan', write_config(document, 'mixed.json'), out) == EXIT_OK
    summary = _read_json(out / 'entropy_scan.json')
    assert summary['argmax'] == 0.5
    assert summary['refined_k0'] == pytest.approx(0.5, rel=1e-6)
