import numpy as np
import pytest
from src.analysis import epoch_test
from src.analysis.epoch_test import FAIL_TO_REJECT, REJECT, EpochPeriodogramTest, run_test
from src.core.errors import BlockTooLong, ConfigError, InversionFailure
from src.core.models import TestConfig, TimeSeries
from src.simulation.dgp import DgpSpec, generate


@pytest.fixture(scope='module')
def default_test():
    return EpochPeriodogramTest(TestConfig())


def white_noise(n, seed):
    return generate(DgpSpec(kind='whitenoise', n=n, seed=seed))


def random_walk(n, seed):
    return generate(DgpSpec(kind='integrated', n=n, d=0.0, seed=seed))


def assert_affine_outcome(test, rng):
    n = int(rng.integers(500, 3000))
    a = float(rng.choice([-1.0, 1.0]) * 10.0 ** rng.uniform(-3, 3))
    b = abs(a) * float(rng.uniform(-1e6, 1e6))
    series = generate(DgpSpec(kind='farima', n=n, d=float(rng.uniform(-0.4, 0.45)),
                              seed=int(rng.integers(2 ** 31))))
    base = test.run(series)
    moved = test.run(TimeSeries(a * series.values + b))
    assert moved.statistic == pytest.approx(base.statistic, rel=1e-6), (n, a, b)
    assert moved.p_value == pytest.approx(base.p_value, abs=2e-6), (n, a, b)
    if abs(base.statistic - base.critical_value) > 1e-5 * base.critical_value:
        assert moved.decision == base.decision, (n, a, b)


class TestDecision:
    def test_white_noise_is_declared_stationary(self, default_test):
        rejections = sum(default_test.run(white_noise(2000, s)).rejected for s in range(20))
        assert rejections >= 18

    def test_random_walk_is_not_rejected(self, default_test):
        rejections = sum(default_test.run(random_walk(2000, s)).rejected for s in range(20))
        assert rejections <= 4

    def test_outcome_fields(self, default_test):
        outcome = default_test.run(white_noise(2005, 1))
        assert outcome.decision == REJECT
        assert outcome.label == 'stationary'
        assert outcome.config_echo == {
            'n': 2005, 'ell': 10, 'm': 200, 's': 2, 'usable_n': 2000, 'block_length_heuristic': False,
        }
        assert len(outcome.weights) == 4
        assert sum(outcome.weights) == pytest.approx(2.0, abs=1e-8)
        assert 0.0 <= outcome.p_value < outcome.alpha
        assert outcome.statistic < outcome.critical_value

    def test_fail_to_reject_label(self, default_test):
        outcome = default_test.run(random_walk(2000, 99))
        if outcome.decision == FAIL_TO_REJECT:
            assert outcome.label == 'not-rejected (I(1) plausible)'
            assert outcome.p_value >= outcome.alpha

    def test_to_dict(self, default_test):
        document = default_test.run(white_noise(500, 2)).to_dict()
        assert set(document) >= {'statistic', 'critical_value', 'p_value', 'alpha', 'decision', 'config'}

    def test_ties_do_not_reject(self, default_test):
        q = default_test.critical_value
        assert default_test.decide(q) is False
        assert default_test.decide(np.nextafter(q, 0.0)) is True

    def test_decision_matches_p_value(self, default_test):
        q = default_test.critical_value
        rng = np.random.default_rng(0)
        for statistic in rng.uniform(0.0, 4.0 * q, 200):
            if abs(statistic - q) < 1e-8 * q:
                continue
            p_value, _ = default_test.p_value(statistic)
            assert 0.0 <= p_value <= 1.0
            assert default_test.decide(statistic) == (p_value < default_test.config.alpha)


class TestInvariances:
    @pytest.mark.parametrize("a,b", [(2.5, 0.0), (-1.0, 3.0), (0.01, -100.0)])
    def test_affine_transformations(self, default_test, a, b):
        series = generate(DgpSpec(kind='farima', n=1000, d=0.2, seed=4))
        base = default_test.run(series)
        moved = default_test.run(TimeSeries(a * series.values + b))
        assert moved.statistic == pytest.approx(base.statistic, rel=1e-8)
        assert moved.p_value == pytest.approx(base.p_value, abs=1e-8)
        assert moved.decision == base.decision

    @pytest.mark.parametrize("case", range(20))
    def test_random_affine_transformations(self, default_test, case):
        assert_affine_outcome(default_test, np.random.default_rng(40 + case))

    def test_deterministic(self, default_test):
        series = random_walk(1000, 3)
        assert default_test.run(series) == default_test.run(series)


class TestConfiguration:
    def test_short_series(self):
        with pytest.raises(BlockTooLong):
            run_test(white_noise(15, 1), TestConfig(ell=10))

    def test_two_s_not_below_block_length(self):
        with pytest.raises(ConfigError):
            run_test(white_noise(200, 1), TestConfig(s=6, ell=10))

    def test_small_sample_heuristic_is_flagged(self):
        outcome = run_test(white_noise(490, 1), TestConfig(ell=None))
        assert outcome.config_echo['ell'] == 11
        assert outcome.config_echo['block_length_heuristic'] is True

    def test_weights_are_cached_between_instances(self):
        EpochPeriodogramTest(TestConfig(s=1)).weights
        assert EpochPeriodogramTest(TestConfig(s=1)).cache_hit is True

    def test_cache_can_be_disabled(self):
        assert EpochPeriodogramTest(TestConfig(s=1, use_cache=False)).cache_hit is False


class TestFallbacks:
    def test_p_value_falls_back_to_sampling(self, monkeypatch):
        def failing(dist, x):
            raise InversionFailure("no convergence")

        monkeypatch.setattr(epoch_test, 'wchisq_cdf', failing)
        test = EpochPeriodogramTest(TestConfig(mc_fallback_draws=50_000))
        outcome = test.run(white_noise(2000, 5))
        assert outcome.p_value_method == 'sampling'
        assert outcome.p_value < 0.05
        assert outcome.rejected

    def test_quantile_falls_back_to_sampling(self, monkeypatch):
        def failing(dist, p):
            raise InversionFailure("no convergence")

        reference = EpochPeriodogramTest(TestConfig()).critical_value
        monkeypatch.setattr(epoch_test, 'wchisq_quantile', failing)
        test = EpochPeriodogramTest(TestConfig(mc_fallback_draws=200_000))
        assert test.critical_value == pytest.approx(reference, rel=0.05)


@pytest.mark.slow
def test_size_and_power_endpoints_full():
    test = EpochPeriodogramTest(TestConfig())
    walk = np.mean([test.run(random_walk(2000, 50_000 + r)).rejected for r in range(1000)])
    noise = np.mean([test.run(white_noise(2000, 60_000 + r)).rejected for r in range(1000)])
    assert walk <= 0.08
    assert noise >= 0.95


@pytest.mark.slow
def test_decision_matches_p_value_many_statistics():
    test = EpochPeriodogramTest(TestConfig())
    q = test.critical_value
    for statistic in np.random.default_rng(1).uniform(0.0, 4.0 * q, 10_000):
        if abs(statistic - q) < 1e-5 * q:
            continue
        p_value, _ = test.p_value(statistic)
        assert test.decide(statistic) == (p_value < test.config.alpha), statistic


@pytest.mark.slow
def test_affine_invariance_many_series():
    test = EpochPeriodogramTest(TestConfig())
    rng = np.random.default_rng(2025)
    for _ in range(2000):
        assert_affine_outcome(test, rng)
