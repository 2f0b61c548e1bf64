"""Full-series and per-epoch periodogram ordinates at the first Fourier frequencies.

I_N(lambda_j) = |sum_{t=1}^N X_t exp(i t lambda_j)|^2 / (2 pi N), lambda_j = 2 pi j / N.
No tapering and no mean removal: the mean cancels exactly at Fourier frequencies.
"""

import math
from dataclasses import dataclass
from typing import List
import numpy as np
from src.core.errors import FrequencyOutOfRange
from src.core.models import EpochPartition, TimeSeries

COMPENSATED_THRESHOLD = 100_000


@dataclass(frozen=True)
class PeriodogramOrdinate:
    """Periodogram value at frequency index j, lambda = 2*pi*j/length"""

    j: int
    lam: float
    value: float


def _check_frequency(j: int, length: int) -> None:
    if j < 1 or 2 * j >= length:
        raise FrequencyOutOfRange(f"frequency index j={j} must satisfy 1 <= j < {length}/2")


def _trig_sums(values: np.ndarray, j: int, compensated: bool) -> tuple:
    length = values.size
    t = np.arange(1, length + 1, dtype=float)
    angle = 2.0 * np.pi * ((j * t) % length) / length
    cos_terms = values * np.cos(angle)
    sin_terms = values * np.sin(angle)
    if compensated:
        return math.fsum(cos_terms), math.fsum(sin_terms)
    return float(np.sum(cos_terms)), float(np.sum(sin_terms))


def periodogram_value(values: np.ndarray, j: int, method: str = 'direct') -> float:
    """Periodogram of a raw 1-D array at 2*pi*j/len(values)"""
    values = np.asarray(values, dtype=float)
    length = values.size
    _check_frequency(j, length)
    if method == 'fft':
        coefficient = np.fft.rfft(values)[j]
        return float(coefficient.real ** 2 + coefficient.imag ** 2) / (2.0 * np.pi * length)
    if method != 'direct':
        raise ValueError(f"unknown periodogram method {method!r}")
    c, s = _trig_sums(values, j, compensated=length >= COMPENSATED_THRESHOLD)
    return (c * c + s * s) / (2.0 * np.pi * length)


def full_periodogram(series: TimeSeries, j: int, method: str = 'direct') -> PeriodogramOrdinate:
    """Ordinate of the whole series at 2*pi*j/n"""
    values = series.values
    value = periodogram_value(values, j, method)
    return PeriodogramOrdinate(j=j, lam=2.0 * np.pi * j / values.size, value=value)


def block_periodograms(series: TimeSeries, part: EpochPartition, j: int,
                       global_index: bool = False) -> List[PeriodogramOrdinate]:
    """Periodogram of each epoch at 2*pi*j/ell, ordered by block index.

    With ``global_index`` the phase uses the position t in the whole sample; the
    result only differs by a unit-modulus factor, so the ordinates coincide.
    """

    ell = part.ell
    _check_frequency(j, ell)
    blocks = part.blocks(series.values)
    lam = 2.0 * np.pi * j / ell
    if global_index:
        t = np.arange(1, part.usable_n + 1, dtype=float).reshape(part.m, ell)
        angle = lam * t
        cos_sums = np.sum(blocks * np.cos(angle), axis=1)
        sin_sums = np.sum(blocks * np.sin(angle), axis=1)
    else:
        t = np.arange(1, ell + 1, dtype=float)
        angle = 2.0 * np.pi * ((j * t) % ell) / ell
        cos_sums = blocks @ np.cos(angle)
        sin_sums = blocks @ np.sin(angle)
    values = (cos_sums ** 2 + sin_sums ** 2) / (2.0 * np.pi * ell)
    return [PeriodogramOrdinate(j=j, lam=lam, value=float(v)) for v in values]


def block_average(series: TimeSeries, part: EpochPartition, j: int) -> float:
    """(1/m) * sum_h I_{n,h}(lambda'_j)"""
    blocks = part.blocks(series.values)
    ell = part.ell
    _check_frequency(j, ell)
    t = np.arange(1, ell + 1, dtype=float)
    angle = 2.0 * np.pi * ((j * t) % ell) / ell
    cos_sums = blocks @ np.cos(angle)
    sin_sums = blocks @ np.sin(angle)
    return float(np.mean(cos_sums ** 2 + sin_sums ** 2) / (2.0 * np.pi * ell))
