import json
import os
import numpy as np
import pandas as pd
import pytest
from src.analysis.experiments import (
    ExperimentPlan,
    RejectionTable,
    cdf_overlay,
    run_experiment,
    run_plan,
    s_sweep,
    size_power_curve,
    limit_convergence,
    trig_sum_covariance,
)
from src.core.errors import PlanError, PlanReadError
from src.core.models import TestConfig
from src.simulation.dgp import memory_to_spec

PLANS = os.path.join(os.path.dirname(__file__), os.pardir, 'config', 'plans')


def small_plan(**overrides):
    document = {
        'name': 'small',
        'kind': 'size_power',
        'n': 500,
        'replications': 100,
        'master_seed': 11,
        'config': {'s': 2, 'alpha': 0.05, 'ell': 10},
        'family': 'farima',
        'values': [0.0, 0.5, 1.0],
    }
    document.update(overrides)
    return ExperimentPlan.from_dict(document)


class TestExperimentPlan:
    def test_from_json_round_trip(self, tmp_path):
        plan = small_plan()
        path = tmp_path / 'plan.json'
        path.write_text(json.dumps(plan.to_dict()))
        assert ExperimentPlan.from_json(str(path)) == plan

    def test_bundled_plans_load(self):
        for name in ('fig1_cdf', 'fig2_farima', 'fig2_ar1', 's_sweep', 'convergence', 'covariance',
                     'variance_growth'):
            plan = ExperimentPlan.from_json(os.path.join(PLANS, f'{name}.json'))
            assert plan.name == name
            assert plan.ell == 10

    def test_minimum_replications(self):
        with pytest.raises(PlanError):
            small_plan(replications=99)

    @pytest.mark.parametrize("overrides", [
        {'kind': 'bootstrap'},
        {'family': 'arma'},
        {'values': []},
        {'kind': 'convergence'},
        {'kind': 's_sweep', 's_values': [1, 5]},
        {'config': {'s': 5, 'ell': 10}},
        {'n': 'many'},
    ])
    def test_invalid_plans(self, overrides):
        with pytest.raises(PlanError):
            small_plan(**overrides)

    def test_missing_field(self):
        with pytest.raises(PlanError, match="master_seed"):
            ExperimentPlan.from_dict({'name': 'x', 'kind': 'size_power', 'n': 500, 'replications': 100})

    def test_unreadable_plan(self, tmp_path):
        with pytest.raises(PlanReadError) as excinfo:
            ExperimentPlan.from_json(str(tmp_path / 'nope.json'))
        assert excinfo.value.exit_code == 2
        bad = tmp_path / 'bad.json'
        bad.write_text('{')
        with pytest.raises(PlanError):
            ExperimentPlan.from_json(str(bad))

    def test_grid_realizes_boundary_and_random_walk(self):
        farima = small_plan().grid()
        assert [p.spec.kind for p in farima] == ['farima', 'integrated', 'integrated']
        assert farima[1].spec.d == -0.5
        assert farima[1].generator == 'integrated(d_increment=-0.5)'
        ar1 = small_plan(family='ar1', values=[0.0, 0.5, 1.0]).grid()
        assert [p.spec.kind for p in ar1] == ['ar1', 'ar1', 'integrated']
        assert ar1[2].generator.endswith('random walk')

    def test_invalid_grid_value(self):
        with pytest.raises(PlanError):
            small_plan(family='ar1', values=[1.2]).grid()


class TestRejectionTable:
    def test_rates_and_standard_errors(self):
        table = RejectionTable(parameter='d')
        table.add(0.0, 'farima(d=0)', 0.0, 95, 100)
        table.add(0.5, 'integrated(d_increment=-0.5)', 0.5, 5, 100)
        np.testing.assert_allclose(table.rates, [0.95, 0.05])
        np.testing.assert_allclose(table.standard_errors, np.sqrt(0.95 * 0.05 / 100))
        assert list(table.frame.columns) == ['d', 'generator', 'memory', 'rejections', 'replications',
                                             'rate', 'se']


class TestSizePower:
    def test_endpoints(self):
        table = size_power_curve(small_plan())
        rates = table.rates
        assert rates[0] >= 0.9
        assert rates[1] <= 0.2
        assert rates[2] <= 0.15
        assert np.all((0.0 <= rates) & (rates <= 1.0))

    def test_independent_of_worker_count(self, tmp_path):
        plan = small_plan(values=[0.3, 0.5])
        serial = run_experiment(plan, str(tmp_path / 'one'), threads=1)
        parallel = run_experiment(plan, str(tmp_path / 'two'), threads=2)
        with open(serial['rejections'], 'rb') as a, open(parallel['rejections'], 'rb') as b:
            assert a.read() == b.read()

    def test_ar1_curve(self):
        table = size_power_curve(small_plan(family='ar1', values=[0.0, 0.6, 1.0]))
        assert table.rates[0] >= 0.9
        assert table.rates[2] <= 0.15
        assert table.frame['phi'].tolist() == [0.0, 0.6, 1.0]


class TestSSweep:
    def test_one_row_per_s_and_generator(self):
        frame = s_sweep(small_plan(kind='s_sweep', values=[0.0, 1.0], s_values=[1, 2, 3]))
        assert len(frame) == 6
        assert frame['s'].tolist() == [1, 1, 2, 2, 3, 3]
        white = frame[(frame['d'] == 0.0) & (frame['s'] >= 2)]
        assert np.all(white['rate'] >= 0.9)


class TestCdfOverlay:
    def test_white_noise_close_to_limit(self):
        overlay, limit_cdf = cdf_overlay(memory_to_spec(0.0, 500), TestConfig(), 200, master_seed=3)
        assert overlay.statistics.shape == (200,)
        assert overlay.ks_distance <= 0.15
        frame = overlay.frame(limit_cdf)
        assert list(frame.columns) == ['d', 'q', 'empirical_cdf', 'limit_cdf']
        assert frame['empirical_cdf'].iloc[-1] == 1.0
        assert frame['q'].is_monotonic_increasing

    def test_convergence_table(self):
        frame = limit_convergence([0.0], [200, 400], TestConfig(), 100, master_seed=5)
        assert frame[['d', 'n', 'ell', 'm']].values.tolist() == [[0.0, 200, 10, 20], [0.0, 400, 10, 40]]
        assert np.all((frame['ks_distance'] > 0.0) & (frame['ks_distance'] < 0.3))


class TestTrigSumCovariance:
    def test_white_noise_matches_identity(self):
        check = trig_sum_covariance(0.0, 200, 400, seed=1, s=2)
        np.testing.assert_allclose(check.limit, 0.25 * np.eye(4), atol=1e-6)
        assert check.max_deviation <= 0.08
        assert len(check.frame()) == 16


class TestRunPlan:
    def test_outputs_and_manifest(self, tmp_path):
        plan = small_plan(kind='variance_growth', values=[0.0], n_grid=[200, 400])
        paths = run_experiment(plan, str(tmp_path))
        frame = pd.read_csv(paths['variance_growth'])
        assert frame['n'].tolist() == [200, 400]
        manifest = json.loads(open(paths['manifest']).read())
        assert manifest['plan']['name'] == 'small'
        assert manifest['version']
        assert manifest['wall_time_s'] >= 0.0

    def test_covariance_plan(self):
        tables = run_plan(small_plan(kind='covariance', values=[0.0], n=200))
        assert set(tables['covariance']['row']) == {'cos1', 'cos2', 'sin1', 'sin2'}


@pytest.mark.slow
class TestAcceptance:
    def test_farima_size_and_power(self):
        plan = ExperimentPlan.from_json(os.path.join(PLANS, 'fig2_farima.json'))
        frame = size_power_curve(plan, threads=4).frame.set_index('d')
        assert 0.03 <= frame.loc[0.5, 'rate'] <= 0.08
        assert frame.loc[0.0, 'rate'] >= 0.95
        assert frame.loc[1.0, 'rate'] <= 0.08
        curve = frame.loc[[0.0, 0.1, 0.2, 0.3, 0.4, 0.45, 0.5]]
        rates, se = curve['rate'].to_numpy(), curve['se'].to_numpy()
        pooled = np.sqrt(se[:-1] ** 2 + se[1:] ** 2)
        assert np.all(np.diff(rates) <= 2 * pooled)

    def test_ar1_size_and_power(self):
        plan = ExperimentPlan.from_json(os.path.join(PLANS, 'fig2_ar1.json'))
        frame = size_power_curve(plan, threads=4).frame
        rates, se = frame['rate'].to_numpy(), frame['se'].to_numpy()
        assert rates[0] >= 0.95
        assert rates[-1] <= 0.08
        pooled = np.sqrt(se[:-1] ** 2 + se[1:] ** 2)
        assert np.all(np.diff(rates) <= 2 * pooled)

    def test_cdf_overlays(self):
        plan = ExperimentPlan.from_json(os.path.join(PLANS, 'fig1_cdf.json'))
        ks = run_plan(plan, threads=4)['ks']
        assert np.all(ks['ks_distance'] <= 0.05)

    def test_convergence_in_n(self):
        frame = limit_convergence([0.0, 0.3, 1.2], [500, 2000, 8000], TestConfig(), 3000,
                                     master_seed=20251018, threads=4)
        for _, rows in frame.groupby('d'):
            ks = rows.set_index('n')['ks_distance']
            assert ks[8000] < ks[500] + 0.01

    def test_worker_count_does_not_change_tables(self, tmp_path):
        plan = ExperimentPlan.from_json(os.path.join(PLANS, 'fig2_ar1.json'))
        one = run_experiment(plan, str(tmp_path / 'one'), threads=1)
        eight = run_experiment(plan, str(tmp_path / 'eight'), threads=8)
        with open(one['rejections'], 'rb') as a, open(eight['rejections'], 'rb') as b:
            assert a.read() == b.read()
