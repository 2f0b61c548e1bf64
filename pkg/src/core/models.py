"""Shared domain types: the sample, its epoch partition, the memory parameter
and the test configuration. All of them are immutable once built."""

from dataclasses import dataclass
from typing import Iterable, Optional, Tuple
import numpy as np
from src.core.errors import (
    BlockTooLong,
    ConfigError,
    InvalidLength,
    InvalidMemoryParameter,
    InvalidSeries,
)

D_LOWER = -0.5
D_UPPER = 1.5
BOUNDARY_D = 0.5
DEFAULT_BLOCK_LENGTH = 10
LARGE_SAMPLE = 500


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Read-only vector of at least two finite observations"""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        if values.size < 2:
            raise InvalidSeries(f"series needs at least 2 observations, got {values.size}")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise InvalidSeries(f"non-finite value at position {bad + 1}")
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    @classmethod
    def from_iterable(cls, values: Iterable[float]) -> 'TimeSeries':
        return cls(np.fromiter((float(v) for v in values), dtype=float))

    @property
    def n(self) -> int:
        return int(self.values.size)

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class EpochPartition:
    """m consecutive blocks of length ell; the tail beyond m*ell is dropped"""

    ell: int
    m: int
    n: int

    @property
    def usable_n(self) -> int:
        return self.m * self.ell

    @property
    def dropped(self) -> int:
        return self.n - self.usable_n

    def block_bounds(self, h: int) -> Tuple[int, int]:
        """1-based inclusive indices covered by block h (1 <= h <= m)"""
        if not 1 <= h <= self.m:
            raise IndexError(f"block {h} outside 1..{self.m}")
        return (h - 1) * self.ell + 1, h * self.ell

    def blocks(self, values: np.ndarray) -> np.ndarray:
        """(m, ell) view of the truncated series"""
        return np.asarray(values)[:self.usable_n].reshape(self.m, self.ell)


def make_partition(series: TimeSeries, ell: int) -> EpochPartition:
    """m = n // ell epochs of length ell; the trailing n - m*ell values are left out"""
    ell = int(ell)
    if ell < 2:
        raise InvalidLength(f"block length must be >= 2, got {ell}")
    m = series.n // ell
    if m < 2:
        raise BlockTooLong(f"block length {ell} leaves {m} block(s) for n={series.n}; need at least 2")
    return EpochPartition(ell=ell, m=m, n=series.n)


@dataclass(frozen=True)
class MemoryParameter:
    """Memory parameter d in (-1/2, 3/2); d >= 1/2 is the I(1) side"""

    d: float

    def __post_init__(self):
        d = float(self.d)
        if not (D_LOWER < d < D_UPPER) or not np.isfinite(d):
            raise InvalidMemoryParameter(f"memory parameter d={self.d} outside (-1/2, 3/2)")
        object.__setattr__(self, 'd', d)

    @property
    def regime(self) -> str:
        return 'I(0)' if self.d < BOUNDARY_D else 'I(1)'

    @property
    def is_boundary(self) -> bool:
        return self.d == BOUNDARY_D


@dataclass(frozen=True)
class TestConfig:
    """Settings of one test run; ell=None selects the block length from n"""

    s: int = 2
    alpha: float = 0.05
    ell: Optional[int] = DEFAULT_BLOCK_LENGTH
    d_null: float = BOUNDARY_D
    quadrature_tol: float = 1e-6
    mc_fallback_draws: int = 1_000_000
    use_cache: bool = True
    cache_path: Optional[str] = None
    seed: int = 20251018

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if int(self.s) < 1:
            raise ConfigError(f"s must be >= 1, got {self.s}")
        if not 0.0 < float(self.alpha) < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.ell is not None:
            if int(self.ell) < 2:
                raise InvalidLength(f"block length must be >= 2, got {self.ell}")
            if 2 * int(self.s) >= int(self.ell):
                raise ConfigError(
                    f"2s={2 * int(self.s)} must be smaller than the block length {self.ell}"
                )
        if self.quadrature_tol <= 0:
            raise ConfigError(f"quadrature_tol must be positive, got {self.quadrature_tol}")
        if int(self.mc_fallback_draws) < 1:
            raise ConfigError("mc_fallback_draws must be positive")
        MemoryParameter(self.d_null)

    def block_length_for(self, n: int) -> Tuple[int, bool]:
        """Block length to use for a sample of size n and whether it came from the small-n heuristic"""
        if self.ell is not None:
            return int(self.ell), False
        if n >= LARGE_SAMPLE:
            ell = DEFAULT_BLOCK_LENGTH
            heuristic = False
        else:
            ell = max(DEFAULT_BLOCK_LENGTH, int(round(np.sqrt(n) / 2)))
            heuristic = True
        if 2 * self.s >= ell:
            raise ConfigError(f"2s={2 * self.s} must be smaller than the block length {ell}")
        return ell, heuristic
