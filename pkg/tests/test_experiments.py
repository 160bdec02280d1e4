import logging

import numpy as np
import pytest

import main
from data_manager import DataManager
from exceptions import NumericalError
from experiments import COMMANDS, Experiment
from experiments.ref_sweep import PROJECTION_LIMIT, det_sign, singular_alphas, sweep_alphas, sweep_row
from kernels import KernelSpec, PolyBasis
from models.run_config import RunConfig


def small_config(tmp_path, **changes):
    values = dict(out=str(tmp_path), domain='disk', spacing=0.2, eps_grid=(0.5,), dmin_grid=(0.7,),
                  n_iter=3, alpha_samples=5)
    values.update(changes)
    return RunConfig(**values).validate()


def run(command, config):
    data = DataManager(config.out)
    return COMMANDS[command](config, data).run(), data


def header(path):
    with open(path) as handle:
        return handle.readline().strip().split(',')


def test_every_command_is_registered():
    assert set(COMMANDS) == {'ref-sweep', 'vmap', 'optdir', 'stability', 'poisson', 'appendixc', 'nodegen'}
    assert all(issubclass(cls, Experiment) for cls in COMMANDS.values())


def test_sweep_alphas_limits_projection():
    assert len(sweep_alphas(721, 'none')) == 721
    projected = sweep_alphas(721, 'approach2')
    assert np.abs(projected).max() <= PROJECTION_LIMIT + 1e-12
    assert len(projected) < 721


def test_nodegen(tmp_path):
    written, data = run('nodegen', small_config(tmp_path, mode='both'))
    assert [p.rsplit('/', 1)[-1] for p in written] == ['nodes.txt', 'nodes_projected.txt']
    nodes = data.read_node_set('nodes.txt')
    assert nodes.spacing == 0.2
    assert nodes.n_boundary > 0 and nodes.n_interior > 0

    written, _ = run('nodegen', small_config(tmp_path, mode='select'))
    assert len(written) == 1


def test_nodegen_is_reproducible(tmp_path):
    first, _ = run('nodegen', small_config(tmp_path / 'a'))
    second, _ = run('nodegen', small_config(tmp_path / 'b'))
    for a, b in zip(first, second):
        assert open(a, 'rb').read() == open(b, 'rb').read()


def test_ref_sweep(tmp_path):
    written, data = run('ref-sweep', small_config(tmp_path))
    names = [p.rsplit('/', 1)[-1] for p in written]
    assert names == ['ref_sweep_none.csv', 'ref_sweep_approach1.csv', 'ref_sweep_approach2.csv']
    assert header(written[0]) == ['alpha', 'kappa', 'lambda_I', 'lambda_B', 'interp_err', 'N_rem']

    plain = data.read_csv('ref_sweep_none.csv')
    assert len(plain) >= 5
    alphas = [float(row['alpha']) for row in plain]
    assert alphas == sorted(alphas)
    for alpha in sweep_alphas(5, 'none'):
        assert min(abs(a - alpha) for a in alphas) < 1e-12
    assert all(row['N_rem'] == '0' for row in plain)
    assert all(int(row['N_rem']) % 2 == 0 for row in data.read_csv('ref_sweep_approach1.csv'))
    assert len(data.read_csv('ref_sweep_approach2.csv')) == 3


def test_ref_sweep_logs_a_summary_per_mode(tmp_path, caplog):
    with caplog.at_level(logging.INFO, logger='experiments.ref_sweep'):
        run('ref-sweep', small_config(tmp_path, mode='project'))
    summaries = [r.getMessage() for r in caplog.records if 'without a finite error' in r.getMessage()]
    assert [s.split(':')[0] for s in summaries] == ['none', 'approach2']
    assert 'over 3 samples' in summaries[1]


def test_projection_sweep_reaches_its_last_angle():
    alpha = sweep_alphas(721, 'approach2')[-1]
    row = sweep_row(float(alpha), 'approach2', KernelSpec.from_name('mq', 0.5, 0.1), PolyBasis(2), 0.1, 0.6)
    assert np.isfinite(row[1])


def test_singular_alphas_land_on_spikes():
    kernel, basis = KernelSpec.from_name('mq', 0.5, 0.1), PolyBasis(2)
    alphas = sweep_alphas(181, 'none')
    signs = np.array([det_sign(float(a), kernel, basis, 0.1) for a in alphas])
    for alpha in singular_alphas(alphas, signs, kernel, basis, 0.1):
        i = int(np.searchsorted(alphas, alpha))
        assert alphas[i - 1] <= alpha <= alphas[i]
        assert signs[i - 1] * signs[i] < 0
        assert sweep_row(alpha, 'none', kernel, basis, 0.1, 0.6)[1] > 1e10


def test_vmap(tmp_path):
    written, data = run('vmap', small_config(tmp_path, arrangement='hex3', spacing=None))
    assert [p.rsplit('/', 1)[-1] for p in written] == ['vmap.csv', 'vmap_envelope.csv', 'vmap_coefficients.csv']
    rows = data.read_csv('vmap.csv')
    assert rows
    norms = np.array([float(row['vnorm']) for row in rows])
    assert np.all(norms >= 0)
    assert header(written[2]) == ['x', 'y', 'node', 'w']
    coefficients = data.read_csv('vmap_coefficients.csv')
    assert len(coefficients) == 3 * len(data.read_csv('vmap_envelope.csv'))


def test_optdir(tmp_path):
    written, data = run('optdir', small_config(tmp_path, spacing=None))
    assert header(written[0])[:3] == ['eps_s', 'perturbed', 'node']
    rows = data.read_csv('optdir.csv')
    assert rows and len(rows) % 7 == 0
    assert {row['perturbed'] for row in rows} == {'0', '1'}


def test_stability(tmp_path):
    written, data = run('stability', small_config(tmp_path, mode='select'))
    names = [p.rsplit('/', 1)[-1] for p in written]
    assert names[-1] == 'stability_select.csv'
    assert 'hhd_history_select_P2_eps0.5_dmin0.7.csv' in names
    rows = data.read_csv('stability_select.csv')
    assert [row['P'] for row in rows] == ['2', '3', '4']
    assert all(row['stable'] in ('0', '1') for row in rows)


def test_poisson(tmp_path):
    written, data = run('poisson', small_config(tmp_path, mode='none', poly=2))
    assert [p.rsplit('/', 1)[-1] for p in written] == ['poisson_none.csv', 'poisson_refinement.csv']
    assert header(written[0]) == ['P', 'eps_s', 'dmin', 'nrmse']
    refinement = data.read_csv('poisson_refinement.csv')
    assert [float(row['spacing']) for row in refinement] == [0.2, 0.1]
    assert int(refinement[1]['N_I']) > int(refinement[0]['N_I'])


@pytest.mark.slow
def test_appendixc(tmp_path):
    written, data = run('appendixc', small_config(tmp_path, spacing=None))
    assert [p.rsplit('/', 1)[-1] for p in written] == [
        'appendixc_positions.csv', 'appendixc_history.csv', 'appendixc_projected.csv', 'appendixc_summary.csv']
    for row in data.read_csv('appendixc_summary.csv'):
        assert float(row['final_cost']) <= float(row['initial_cost'])


def test_main_runs_and_records(tmp_path):
    out = str(tmp_path)
    assert main.main(['nodegen', '--domain', 'disk', '--spacing', '0.2', '--mode', 'none', '--out', out]) == 0
    log = DataManager(out).load_run_log()
    assert log[-1]['command'] == 'nodegen'
    assert log[-1]['config']['spacing'] == 0.2


def test_main_rejects_bad_config(tmp_path):
    assert main.main(['nodegen', '--eps-s', '0.1', '--out', str(tmp_path)]) == main.EXIT_CONFIG


def test_main_reports_numerical_failure(tmp_path, monkeypatch):
    class Failing(Experiment):
        name = 'nodegen'

        def run(self):
            raise NumericalError("boom")

    monkeypatch.setitem(COMMANDS, 'nodegen', Failing)
    assert main.main(['nodegen', '--out', str(tmp_path)]) == main.EXIT_NUMERICAL


def column(rows, name):
    return np.array([float(row[name]) for row in rows])


def top_spikes(values, count=3):
    """Indices of the largest local maxima, ties broken by position."""
    padded = np.concatenate(([-np.inf], values, [-np.inf]))
    peaks = [i for i in range(len(values)) if padded[i + 1] >= padded[i] and padded[i + 1] > padded[i + 2]]
    return sorted(peaks, key=lambda i: (-values[i], i))[:count]


@pytest.fixture(scope='module')
def full_sweep(tmp_path_factory):
    config = RunConfig(out=str(tmp_path_factory.mktemp('sweep')), mode='both', dmin=0.6).validate()
    _, data = run('ref-sweep', config)
    return {mode: data.read_csv(f"ref_sweep_{mode}.csv") for mode in ('none', 'approach1', 'approach2')}


@pytest.mark.slow
def test_full_sweep_conditioning(full_sweep):
    plain = column(full_sweep['none'], 'kappa')
    selected = column(full_sweep['approach1'], 'kappa')
    assert plain.max() > 1e8
    assert np.all(np.isfinite(selected))
    assert selected.max() * 1e3 <= plain.max()
    assert all(int(row['N_rem']) % 2 == 0 for row in full_sweep['approach1'])

    alphas = column(full_sweep['approach2'], 'alpha')
    projected = column(full_sweep['approach2'], 'kappa')[(alphas >= -np.pi / 8) & (alphas <= np.pi / 3 + 1e-12)]
    assert np.all(np.isfinite(projected))
    assert projected.max() <= 1e4 * np.median(projected)


@pytest.mark.slow
def test_full_sweep_error_follows_conditioning(full_sweep):
    alphas = column(full_sweep['none'], 'alpha')
    kappa = column(full_sweep['none'], 'kappa')
    error = column(full_sweep['none'], 'interp_err')
    kappa_spikes = alphas[top_spikes(kappa)]
    for i in top_spikes(error):
        assert np.abs(kappa_spikes - alphas[i]).min() <= np.pi / 720 + 1e-12

    selected = column(full_sweep['approach1'], 'interp_err')
    assert np.all(np.isfinite(selected))
    assert selected.max() * 1e2 <= error.max()


@pytest.mark.slow
def test_stability_map_on_the_test_domain(tmp_path):
    config = RunConfig(out=str(tmp_path), mode='both', eps_grid=(0.5,), dmin_grid=(0.05, 0.7)).validate()
    _, data = run('stability', config)
    for row in data.read_csv('stability_none.csv'):
        assert float(row['growth']) >= 0
    selected = data.read_csv('stability_select.csv')
    for row in selected:
        assert float(row['growth']) >= 0
    chosen = [row for row in selected if row['P'] == '2' and float(row['dmin']) == 0.7]
    assert [row['stable'] for row in chosen] == ['1']
