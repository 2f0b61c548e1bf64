"""Law of Q = sum_k zeta_k N_k^2 with N_k i.i.d. standard normal.

The CDF is computed by Imhof's inversion of the characteristic function
prod_k (1 - 2 i zeta_k t)^(-1/2):

    P(Q <= x) = 1/2 - (1/pi) * int_0^inf sin(theta(u)) / (u rho(u)) du
    theta(u)  = (1/2) sum_k arctan(zeta_k u) - x u / 2
    rho(u)    = prod_k (1 + zeta_k^2 u^2)^(1/4)

The integral is taken adaptively on [0, U] and the oscillatory tail [U, inf)
is handled by QUADPACK's Fourier-weighted integration, which truncates
adaptively cycle by cycle.

At or below the smallest weight the CDF is summed as a chi-square mixture instead.
"""

from dataclasses import dataclass
from typing import Callable, Optional
import numpy as np
from scipy import integrate, interpolate, optimize, stats
from src.core.errors import InversionFailure
from src.limit.covariance import ChiSqWeights
from src.utils.logger import setup_logger

logger = setup_logger('weighted_chisq')

CDF_ABS_TOL = 1e-6
_PIECE_EPSABS = 1e-10
_QUAD_LIMIT = 1000
_SERIES_MAX_TERMS = 500
_SERIES_TAIL = 1e-15


@dataclass(frozen=True)
class WeightedChiSq:
    """Distribution of sum_k zeta_k N_k^2 for the given weights"""

    weights: ChiSqWeights

    @property
    def zeta(self) -> np.ndarray:
        return self.weights.array

    @property
    def mean(self) -> float:
        return self.weights.mean

    @property
    def variance(self) -> float:
        return self.weights.variance

    @property
    def sd(self) -> float:
        return float(np.sqrt(self.variance))


def _imhof_integral(zeta: np.ndarray, x: float) -> float:
    omega = 0.5 * x

    def half_phase(u):
        return 0.5 * np.sum(np.arctan(zeta * u))

    def rho(u):
        return np.prod((1.0 + (zeta * u) ** 2) ** 0.25)

    def integrand(u):
        return np.sin(half_phase(u) - omega * u) / (u * rho(u))

    def tail_cos(u):
        return np.sin(half_phase(u)) / (u * rho(u))

    def tail_sin(u):
        return np.cos(half_phase(u)) / (u * rho(u))

    zeta_min = float(np.min(zeta))
    split = float(np.clip(2.0 * np.pi / omega, 1.0 / zeta_min, 200.0 / zeta_min))

    pieces = [
        integrate.quad(integrand, 0.0, split, epsabs=_PIECE_EPSABS, epsrel=1e-10,
                       limit=_QUAD_LIMIT, full_output=1),
        integrate.quad(tail_cos, split, np.inf, weight='cos', wvar=omega,
                       epsabs=_PIECE_EPSABS, limlst=200, limit=_QUAD_LIMIT, full_output=1),
        integrate.quad(tail_sin, split, np.inf, weight='sin', wvar=omega,
                       epsabs=_PIECE_EPSABS, limlst=200, limit=_QUAD_LIMIT, full_output=1),
    ]
    for result in pieces:
        if len(result) > 3 and not result[1] <= 1e-7:
            raise InversionFailure(f"Imhof integration did not converge at x={x}: {result[3]}")
    return pieces[0][0] + pieces[1][0] - pieces[2][0]


def _mixture_series(zeta: np.ndarray, x: float) -> float:
    """P(Q <= x) as a chi-square mixture sum_k c_k F_{n+2k}(x / beta), beta = min(zeta).

    The c_k are non-negative and sum to one, so partial sums are monotone in x and the
    truncation error is below the last chi-square CDF term.
    Used below min(zeta), where the inversion integral loses its relative accuracy.
    """

    beta = float(np.min(zeta))
    n = zeta.size
    gamma = 1.0 - beta / zeta
    coefficients = [float(np.prod(np.sqrt(beta / zeta)))]
    g = []
    total = coefficients[0] * stats.chi2.cdf(x / beta, n)
    for k in range(1, _SERIES_MAX_TERMS):
        g.append(0.5 * float(np.sum(gamma ** k)))
        c_k = sum(g[k - 1 - r] * coefficients[r] for r in range(k)) / k
        coefficients.append(c_k)
        term_cdf = stats.chi2.cdf(x / beta, n + 2 * k)
        total += c_k * term_cdf
        if term_cdf <= _SERIES_TAIL * total:
            break
    return float(total)


def wchisq_cdf(dist: WeightedChiSq, x: float) -> float:
    """P(Q <= x) with absolute error below 1e-6"""
    x = float(x)
    if x <= 0.0:
        return 0.0
    if not np.isfinite(x):
        return 1.0
    if x <= float(np.min(dist.zeta)):
        return _mixture_series(dist.zeta, x)
    value = 0.5 - _imhof_integral(dist.zeta, x) / np.pi
    if not np.isfinite(value) or value < -CDF_ABS_TOL or value > 1.0 + CDF_ABS_TOL:
        raise InversionFailure(f"Imhof inversion produced {value!r} at x={x}")
    return float(min(1.0, max(0.0, value)))


def wchisq_quantile(dist: WeightedChiSq, p: float) -> float:
    """Root of wchisq_cdf(x) = p by Brent's method; raises InversionFailure through the CDF"""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    upper = dist.mean + 10.0 * dist.sd
    while wchisq_cdf(dist, upper) < p:
        upper *= 2.0
    return float(optimize.brentq(lambda x: wchisq_cdf(dist, x) - p, 0.0, upper,
                                 xtol=1e-12, rtol=1e-12, maxiter=200))


def wchisq_sample(dist: WeightedChiSq, rng: np.random.Generator, k: int) -> np.ndarray:
    """k i.i.d. draws of sum_i zeta_i N_i^2"""
    if k < 1:
        raise ValueError(f"sample size must be >= 1, got {k}")
    normals = rng.standard_normal((int(k), dist.zeta.size))
    return (normals ** 2) @ dist.zeta


def sampled_cdf(dist: WeightedChiSq, x: float, rng: np.random.Generator, draws: int) -> float:
    """Sampling estimate of P(Q <= x), the fallback when inversion fails"""
    return float(np.mean(wchisq_sample(dist, rng, draws) <= x))


def sampled_quantile(dist: WeightedChiSq, p: float, rng: np.random.Generator, draws: int) -> float:
    """Empirical p-quantile of `draws` samples, the fallback when inversion fails"""
    return float(np.quantile(wchisq_sample(dist, rng, draws), p))


def cdf_interpolator(dist: WeightedChiSq, points: int = 400,
                     upper: Optional[float] = None) -> Callable[[np.ndarray], np.ndarray]:
    """Monotone interpolant of the inversion CDF, for evaluating it at thousands of points"""
    upper = upper if upper is not None else dist.mean + 30.0 * dist.sd
    grid = upper * np.linspace(0.0, 1.0, points) ** 2
    values = np.array([wchisq_cdf(dist, x) for x in grid])
    values = np.maximum.accumulate(values)
    spline = interpolate.PchipInterpolator(grid, values, extrapolate=False)

    def cdf(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.where(x <= 0.0, 0.0, np.where(x >= upper, 1.0, 0.0))
        inside = (x > 0.0) & (x < upper)
        out = np.array(out, dtype=float)
        out[inside] = np.clip(spline(x[inside]), 0.0, 1.0)
        return out

    logger.debug(f"CDF interpolant built on {points} points up to {upper:.4g}")
    return cdf
