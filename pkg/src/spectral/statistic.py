"""Self-normalized epoch-periodogram statistic."""

from dataclasses import dataclass
from typing import Tuple
import numpy as np
from src.core.errors import ConfigError, DegenerateDenominator
from src.core.models import MemoryParameter, TimeSeries, make_partition
from src.spectral.periodogram import block_average, periodogram_value

# Block averages below this fraction of the centered energy var(X)/(2*pi) are a floating-point zero
DEGENERATE_RELATIVE = 1e-20


@dataclass(frozen=True)
class QStatistic:
    """Sum of self-normalized periodograms, scaled by m^(-2d)"""

    value: float
    s: int
    d: MemoryParameter
    per_frequency: Tuple[float, ...]
    m: int
    ell: int
    usable_n: int

    @property
    def normalization(self) -> float:
        return float(self.m) ** (-2.0 * self.d.d)


def q_statistic(series: TimeSeries, ell: int, s: int, d: MemoryParameter) -> QStatistic:
    """Q(s, d) = m^(-2d) * sum_{j=1..s} I_n(2 pi j / (m ell)) / avg_h I_{n,h}(2 pi j / ell).

    The series is truncated to m * ell values and centered first. Raises ConfigError
    unless 1 <= s and 2s < ell, and DegenerateDenominator naming the first j whose
    epoch average vanishes.
    """

    part = make_partition(series, ell)
    if s < 1 or 2 * s >= part.ell:
        raise ConfigError(f"need 1 <= s and 2s < block length, got s={s}, ell={part.ell}")

    # Numerator and denominator both use the truncated series of length m*ell. Ordinates at
    # j >= 1 do not depend on the mean, so it is removed before summing.
    values = series.values[:part.usable_n]
    truncated = TimeSeries(values - np.mean(values))
    energy = float(np.mean(truncated.values ** 2)) / (2.0 * np.pi)

    ratios = []
    for j in range(1, s + 1):
        denominator = block_average(truncated, part, j)
        if denominator <= DEGENERATE_RELATIVE * energy or denominator == 0.0:
            raise DegenerateDenominator(
                f"block-average periodogram vanishes at frequency j={j}", frequency=j
            )
        numerator = periodogram_value(truncated.values, j)
        ratios.append(numerator / denominator)

    total = 0.0
    for ratio in ratios:
        total += ratio
    value = float(part.m) ** (-2.0 * d.d) * total
    return QStatistic(
        value=value,
        s=s,
        d=d,
        per_frequency=tuple(ratios),
        m=part.m,
        ell=part.ell,
        usable_n=part.usable_n,
    )
