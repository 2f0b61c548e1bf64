"""Synthetic series for experiments: FARIMA(0,d,0), AR(1), integrated FARIMA and white noise.

FARIMA paths are exact Gaussian by default (circulant embedding of the
autocovariance); the truncated moving-average mode convolves innovations with
the fractional-differencing weights instead.
"""

import math
from dataclasses import asdict, dataclass, replace
from typing import Dict, List, Optional, Sequence
import numpy as np
import pandas as pd
from scipy import signal
from scipy.special import gammaln
from src.core.errors import EmbeddingFailure, InvalidDgpSpec
from src.core.models import BOUNDARY_D, D_LOWER, D_UPPER, TimeSeries
from src.utils.logger import setup_logger
from src.utils.seeds import derive_seed, make_rng

logger = setup_logger('dgp')

KINDS = ('farima', 'ar1', 'integrated', 'whitenoise')
MODES = ('exact', 'truncated')
INNOVATIONS = ('gaussian', 'uniform')
MIN_MA_TRUNCATION = 10_000
EMBEDDING_RTOL = 1e-10


@dataclass(frozen=True)
class DgpSpec:
    """Data generating process: kind, length, seed and kind-specific parameters.

    For ``integrated`` the field ``d`` is the memory of the increments; the
    generated series has memory d + 1.
    """

    kind: str
    n: int
    seed: int = 0
    d: float = 0.0
    phi: float = 0.0
    sigma_eps: float = 1.0
    mode: str = 'exact'
    ma_truncation: Optional[int] = None
    innovations: str = 'gaussian'

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidDgpSpec(f"unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        if self.mode not in MODES:
            raise InvalidDgpSpec(f"unknown mode {self.mode!r}; expected one of {', '.join(MODES)}")
        if self.innovations not in INNOVATIONS:
            raise InvalidDgpSpec(f"unknown innovations {self.innovations!r}")
        if int(self.n) < 2:
            raise InvalidDgpSpec(f"series length must be >= 2, got {self.n}")
        if not self.sigma_eps > 0:
            raise InvalidDgpSpec(f"sigma_eps must be positive, got {self.sigma_eps}")
        if self.kind == 'farima' and not -0.5 < self.d < 0.5:
            raise InvalidDgpSpec(
                f"FARIMA(0,d,0) needs d in (-1/2, 1/2), got {self.d}; "
                f"use kind 'integrated' (increments FARIMA(0, d - 1, 0)) for d >= 1/2"
            )
        if self.kind == 'integrated' and not -0.5 <= self.d < 0.5:
            raise InvalidDgpSpec(f"integrated FARIMA needs d_increment in [-1/2, 1/2), got {self.d}")
        if self.kind == 'ar1' and not abs(self.phi) < 1:
            raise InvalidDgpSpec(f"AR(1) needs |phi| < 1, got {self.phi}")
        if self.ma_truncation is not None and int(self.ma_truncation) < 1:
            raise InvalidDgpSpec(f"ma_truncation must be >= 1, got {self.ma_truncation}")
        if self.innovations == 'uniform' and self.kind in ('farima', 'integrated') and self.mode == 'exact':
            raise InvalidDgpSpec("uniform innovations need mode 'truncated' for FARIMA kinds")

    @property
    def memory(self) -> float:
        """Memory parameter of the generated series"""
        if self.kind == 'farima':
            return self.d
        if self.kind == 'integrated':
            return self.d + 1.0
        return 0.0

    @property
    def truncation(self) -> int:
        return int(self.ma_truncation or max(MIN_MA_TRUNCATION, 10 * int(self.n)))

    def metadata(self) -> Dict[str, object]:
        """Spec fields plus derived memory, truncation and burn-in, for file headers"""
        info = asdict(self)
        info['memory'] = self.memory
        if self.kind in ('farima', 'integrated') and self.mode == 'truncated':
            info['ma_truncation'] = self.truncation
        if self.kind == 'ar1':
            info['burn_in'] = ar1_burn_in(self.phi)
        return info


def memory_to_spec(d: float, n: int, seed: int = 0, **options) -> DgpSpec:
    """Generator realizing memory parameter d: FARIMA below 1/2, cumulated FARIMA(d-1) from 1/2 on"""
    if not D_LOWER < d < D_UPPER:
        raise InvalidDgpSpec(f"memory parameter d={d} outside (-1/2, 3/2)")
    if d < BOUNDARY_D:
        return DgpSpec(kind='farima', n=n, seed=seed, d=d, **options)
    return DgpSpec(kind='integrated', n=n, seed=seed, d=d - 1.0, **options)


def ar1_burn_in(phi: float) -> int:
    """Discarded start-up values: ceil(10 / (1 - |phi|))"""
    return int(math.ceil(10.0 / (1.0 - abs(phi))))


def farima_coefficients(d: float, M: int) -> np.ndarray:
    """MA weights a_0..a_M of (1 - B)^(-d): a_0 = 1, a_j = a_{j-1} (j - 1 + d) / j"""
    if not -0.5 <= d < 0.5:
        raise InvalidDgpSpec(f"FARIMA weights need d in [-1/2, 1/2), got {d}")
    if M < 1:
        raise InvalidDgpSpec(f"truncation M must be >= 1, got {M}")
    j = np.arange(1, M + 1, dtype=float)
    coefficients = np.empty(M + 1)
    coefficients[0] = 1.0
    coefficients[1:] = np.cumprod((j - 1.0 + d) / j)
    return coefficients


def farima_autocovariance(d: float, max_lag: int, sigma: float = 1.0) -> np.ndarray:
    """gamma(0..max_lag): gamma(0) = sigma^2 Gamma(1-2d)/Gamma(1-d)^2, gamma(h+1) = gamma(h)(h+d)/(h+1-d)"""
    if not -0.5 <= d < 0.5:
        raise InvalidDgpSpec(f"FARIMA autocovariance needs d in [-1/2, 1/2), got {d}")
    gamma0 = sigma ** 2 * math.exp(gammaln(1.0 - 2.0 * d) - 2.0 * gammaln(1.0 - d))
    h = np.arange(0, max_lag, dtype=float)
    ratios = (h + d) / (h + 1.0 - d)
    return gamma0 * np.concatenate([[1.0], np.cumprod(ratios)])


def _innovations(rng: np.random.Generator, size: int, sigma: float, kind: str) -> np.ndarray:
    if kind == 'uniform':
        half_width = math.sqrt(3.0) * sigma
        return rng.uniform(-half_width, half_width, size)
    return sigma * rng.standard_normal(size)


def _circulant_farima(d: float, n: int, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Exact Gaussian FARIMA(0,d,0) path by circulant embedding of size 2n"""
    gamma = farima_autocovariance(d, n, sigma)
    row = np.concatenate([gamma[:n + 1], gamma[n - 1:0:-1]])
    eigenvalues = np.fft.fft(row).real
    floor = -EMBEDDING_RTOL * float(np.max(np.abs(eigenvalues)))
    if np.min(eigenvalues) < floor:
        raise EmbeddingFailure(f"circulant embedding has negative eigenvalue {np.min(eigenvalues):.3e} for d={d}")
    eigenvalues = np.clip(eigenvalues, 0.0, None)

    size = row.size
    z = np.zeros(size, dtype=complex)
    z[0] = rng.standard_normal()
    z[n] = rng.standard_normal()
    pairs = rng.standard_normal((n - 1, 2))
    z[1:n] = (pairs[:, 0] + 1j * pairs[:, 1]) / math.sqrt(2.0)
    z[n + 1:] = np.conj(z[1:n][::-1])
    path = math.sqrt(size) * np.fft.ifft(np.sqrt(eigenvalues) * z).real
    return path[:n]


def _truncated_farima(spec: DgpSpec, d: float, rng: np.random.Generator) -> np.ndarray:
    n, M = int(spec.n), spec.truncation
    weights = farima_coefficients(d, M)
    eps = _innovations(rng, n + M, spec.sigma_eps, spec.innovations)
    return signal.fftconvolve(eps, weights, mode='full')[M:M + n]


def _farima_path(spec: DgpSpec, d: float, rng: np.random.Generator) -> np.ndarray:
    if spec.mode == 'exact':
        try:
            return _circulant_farima(d, int(spec.n), spec.sigma_eps, rng)
        except EmbeddingFailure as e:
            logger.warning(f"{e}; falling back to truncated MA with M={spec.truncation}")
    return _truncated_farima(spec, d, rng)


def _ar1_path(spec: DgpSpec, rng: np.random.Generator) -> np.ndarray:
    n = int(spec.n)
    burn = ar1_burn_in(spec.phi)
    # Kept innovations are drawn first, so phi = 0 reproduces white noise with the same seed
    kept = _innovations(rng, n, spec.sigma_eps, spec.innovations)
    warmup = _innovations(rng, burn, spec.sigma_eps, spec.innovations)
    path = signal.lfilter([1.0], [1.0, -spec.phi], np.concatenate([warmup, kept]))
    return path[burn:]


def generate_values(spec: DgpSpec) -> np.ndarray:
    """Draw the series described by ``spec``; the same spec gives the same values"""
    rng = make_rng(spec.seed)
    if spec.kind == 'whitenoise':
        return _innovations(rng, int(spec.n), spec.sigma_eps, spec.innovations)
    if spec.kind == 'ar1':
        return _ar1_path(spec, rng)
    if spec.kind == 'farima':
        return _farima_path(spec, spec.d, rng)
    # integrated: X_t = Y_1 + ... + Y_t with X_0 = 0
    return np.cumsum(_farima_path(spec, spec.d, rng))


def generate(spec: DgpSpec) -> TimeSeries:
    """generate_values wrapped as a TimeSeries"""
    return TimeSeries(generate_values(spec))


def first_difference(values: np.ndarray) -> np.ndarray:
    """Y_t = X_t - X_{t-1} with the X_0 = 0 convention"""
    values = np.asarray(values, dtype=float)
    return np.diff(values, prepend=0.0)


def exact_partial_sum_variance(d_increment: float, n: int, sigma: float = 1.0) -> float:
    """Var(Y_1 + ... + Y_n) = sum_{|k|<n} (n - |k|) gamma(k) for FARIMA(0, d_increment, 0) increments"""
    gamma = farima_autocovariance(d_increment, n - 1, sigma)
    k = np.arange(1, n, dtype=float)
    return float(n * gamma[0] + 2.0 * np.sum((n - k) * gamma[1:]))


def growth_scale(d_increment: float, n: int) -> float:
    """log n at the d = 1/2 boundary, n^(1 + 2 d_increment) otherwise"""
    if d_increment == -0.5:
        return math.log(n)
    return float(n) ** (1.0 + 2.0 * d_increment)


def variance_growth_table(d_increment: float = -0.5, n_grid: Sequence[int] = (1_000, 10_000, 100_000),
                          replications: int = 2000, seed: int = 0,
                          mode: str = 'exact') -> pd.DataFrame:
    """Monte Carlo Var(S_n) divided by its growth scale, next to the exact value"""
    rows: List[Dict[str, float]] = []
    for grid_index, n in enumerate(n_grid):
        sums = np.empty(replications)
        for rep in range(replications):
            spec = DgpSpec(kind='farima' if d_increment > -0.5 else 'integrated', n=int(n),
                           seed=derive_seed(seed, grid_index, rep), d=d_increment, mode=mode)
            path = _farima_path(spec, d_increment, make_rng(spec.seed))
            sums[rep] = float(np.sum(path))
        variance = float(np.mean(sums ** 2))
        scale = growth_scale(d_increment, int(n))
        exact = exact_partial_sum_variance(d_increment, int(n))
        rows.append({
            'n': int(n),
            'variance': variance,
            'ratio': variance / scale,
            'ratio_se': float(np.std(sums ** 2, ddof=1) / math.sqrt(replications)) / scale,
            'exact_ratio': exact / scale,
        })
        logger.info(f"Var(S_n) growth d_increment={d_increment}, n={n}: ratio={variance / scale:.4g} "
                    f"(exact {exact / scale:.4g})")
    return pd.DataFrame(rows)


def with_seed(spec: DgpSpec, seed: int) -> DgpSpec:
    return replace(spec, seed=int(seed))
