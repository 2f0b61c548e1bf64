import numpy as np
import pytest
from src.core.errors import FrequencyOutOfRange
from src.core.models import TimeSeries, make_partition
from src.spectral.periodogram import (
    block_average,
    block_periodograms,
    full_periodogram,
    periodogram_value,
)


@pytest.fixture
def noise():
    return TimeSeries(np.random.default_rng(11).standard_normal(1000))


def assert_constant_vanishes(rng: np.random.Generator) -> None:
    n = int(rng.integers(4, 4097))
    j = int(rng.integers(1, (n - 1) // 2 + 1))
    c = float(rng.uniform(-1e3, 1e3))
    assert periodogram_value(np.full(n, c), j) <= 1e-20 * max(1.0, c * c), (n, j, c)


class TestFullPeriodogram:
    def test_hand_computed_value(self):
        # sum_t X_t e^{i t pi/2} = 2i for X = (1, 0, -1, 0)
        assert periodogram_value(np.array([1.0, 0.0, -1.0, 0.0]), 1) == pytest.approx(1.0 / (2.0 * np.pi))

    def test_single_cosine(self):
        t = np.arange(1, 9)
        assert periodogram_value(np.cos(2.0 * np.pi * t / 8), 1) == pytest.approx(1.0 / np.pi, rel=1e-12)

    @pytest.mark.parametrize("j", [1, 3, 9])
    def test_unit_impulse_is_flat(self, j):
        impulse = np.zeros(20)
        impulse[0] = 1.0
        assert periodogram_value(impulse, j) == pytest.approx(1.0 / (2.0 * np.pi * 20), rel=1e-12)

    @pytest.mark.parametrize("c", [-3.0, 0.01, 250.0])
    def test_quadratic_in_scale(self, noise, c):
        assert periodogram_value(c * noise.values, 4) == pytest.approx(c * c * periodogram_value(noise.values, 4),
                                                                       rel=1e-12)

    @pytest.mark.parametrize("case", range(50))
    def test_random_constant_series_vanishes(self, case):
        assert_constant_vanishes(np.random.default_rng(900 + case))

    def test_ordinate_frequency(self, noise):
        ordinate = full_periodogram(noise, 3)
        assert ordinate.j == 3
        assert ordinate.lam == pytest.approx(2.0 * np.pi * 3 / 1000)
        assert ordinate.value >= 0.0

    @pytest.mark.parametrize("j", [1, 2, 7, 499])
    def test_direct_matches_fft(self, noise, j):
        direct = periodogram_value(noise.values, j, 'direct')
        fft = periodogram_value(noise.values, j, 'fft')
        assert direct == pytest.approx(fft, rel=1e-10)

    def test_compensated_summation_for_long_series(self):
        values = np.random.default_rng(5).standard_normal(100_000) + 50.0
        direct = periodogram_value(values, 2, 'direct')
        fft = periodogram_value(values, 2, 'fft')
        assert direct == pytest.approx(fft, rel=1e-7)

    def test_constant_series_vanishes(self):
        assert periodogram_value(np.full(240, 3.7), 1) == pytest.approx(0.0, abs=1e-20)
        assert periodogram_value(np.full(240, 3.7), 5) == pytest.approx(0.0, abs=1e-20)

    def test_mean_shift_invariance(self, noise):
        shifted = noise.values + 12.5
        assert periodogram_value(shifted, 2) == pytest.approx(periodogram_value(noise.values, 2), rel=1e-9)

    @pytest.mark.parametrize("j", [0, -1, 500, 600])
    def test_frequency_out_of_range(self, noise, j):
        with pytest.raises(FrequencyOutOfRange):
            full_periodogram(noise, j)

    def test_unknown_method(self, noise):
        with pytest.raises(ValueError):
            periodogram_value(noise.values, 1, 'welch')


class TestBlockPeriodograms:
    def test_one_ordinate_per_block(self, noise):
        part = make_partition(noise, 10)
        ordinates = block_periodograms(noise, part, 2)
        assert len(ordinates) == part.m
        assert all(o.lam == pytest.approx(2.0 * np.pi * 2 / 10) for o in ordinates)

    def test_matches_periodogram_of_each_block(self, noise):
        part = make_partition(noise, 10)
        ordinates = block_periodograms(noise, part, 1)
        for h in (1, 17, part.m):
            start, stop = part.block_bounds(h)
            expected = periodogram_value(noise.values[start - 1:stop], 1)
            assert ordinates[h - 1].value == pytest.approx(expected, rel=1e-12)

    def test_global_phase_gives_same_ordinates(self, noise):
        part = make_partition(noise, 10)
        local = [o.value for o in block_periodograms(noise, part, 3)]
        global_ = [o.value for o in block_periodograms(noise, part, 3, global_index=True)]
        np.testing.assert_allclose(local, global_, rtol=1e-9)

    def test_block_average(self, noise):
        part = make_partition(noise, 10)
        ordinates = block_periodograms(noise, part, 4)
        assert block_average(noise, part, 4) == pytest.approx(np.mean([o.value for o in ordinates]), rel=1e-12)

    def test_identical_blocks_share_ordinates(self):
        block = np.random.default_rng(3).standard_normal(12)
        series = TimeSeries(np.tile(block, 2))
        first, second = block_periodograms(series, make_partition(series, 12), 2)
        assert first.value == pytest.approx(second.value, rel=1e-14)

    def test_white_noise_block_average_is_flat_spectrum(self):
        averages = []
        for seed in range(100):
            series = TimeSeries(np.random.default_rng(3000 + seed).standard_normal(2000))
            averages.append(block_average(series, make_partition(series, 10), 1))
        assert np.mean(averages) == pytest.approx(1.0 / (2.0 * np.pi), abs=0.01)

    def test_block_frequency_bound(self, noise):
        part = make_partition(noise, 10)
        with pytest.raises(FrequencyOutOfRange):
            block_periodograms(noise, part, 5)


@pytest.mark.slow
def test_constant_series_vanishes_many_cases():
    rng = np.random.default_rng(77)
    for _ in range(10_000):
        assert_constant_vanishes(rng)
