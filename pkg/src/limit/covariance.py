"""Limit covariance Sigma(d) = diag(Sigma_c, Sigma_s), its normalizer D and the
chi-square weights zeta(d), for d in (-1/2, 3/2).

Every entry is a double integral over [0,1]^2 of a trigonometric product against
a kernel of |x - y|. It is reduced to a one-dimensional integral over u = |x - y|
using the closed-form overlap correlation of the trigonometric factors, then
integrated with QUADPACK's algebraic/logarithmic endpoint weights, which grade
the subdivision toward the singular point u = 0. A tensor-product 2-D
quadrature split along the diagonal is the fallback.

The common scalar factor delta of all entries is left out (set to 1): it also
multiplies D, so Sigma D^-1 and the weights do not depend on it.
"""

from dataclasses import dataclass, replace
from typing import Optional, Tuple
import warnings
import numpy as np
from scipy import integrate
from src.core.errors import (
    EigenFailure,
    NotPositiveDefinite,
    QuadratureNonConvergence,
    RegimeError,
)
from src.core.models import BOUNDARY_D, MemoryParameter
from src.utils.logger import setup_logger

logger = setup_logger('limit_covariance')

EVALUATION_BUDGET = 10_000_000
QUAD_LIMIT = 2000
SYMMETRY_RTOL = 1e-9
TRACE_ATOL = 1e-8


@dataclass(frozen=True)
class LimitCovariance:
    """Sigma(d) as its cosine and sine blocks, with the diagonal normalizer D"""

    d: MemoryParameter
    s: int
    sigma_cos: np.ndarray
    sigma_sin: np.ndarray
    d_diag: np.ndarray
    tol: float = 1e-6
    scale_note: str = 'delta factor omitted (set to 1); weights are invariant to it'

    @property
    def sigma(self) -> np.ndarray:
        """2s x 2s block-diagonal matrix"""
        s = self.s
        full = np.zeros((2 * s, 2 * s))
        full[:s, :s] = self.sigma_cos
        full[s:, s:] = self.sigma_sin
        return full

    @property
    def d_full(self) -> np.ndarray:
        """D repeated once for the cosine block and once for the sine block"""
        return np.concatenate([self.d_diag, self.d_diag])

    def scaled(self, factor: float) -> 'LimitCovariance':
        """Same covariance with every entry multiplied by ``factor``"""
        return replace(
            self,
            sigma_cos=self.sigma_cos * factor,
            sigma_sin=self.sigma_sin * factor,
            d_diag=self.d_diag * factor,
        )


@dataclass(frozen=True)
class ChiSqWeights:
    """Positive weights of sum_k zeta_k chi2_1, sorted in descending order"""

    zeta: Tuple[float, ...]

    def __post_init__(self):
        zeta = tuple(sorted((float(z) for z in self.zeta), reverse=True))
        if not zeta or zeta[-1] <= 0:
            raise EigenFailure(f"weights must be positive, got {zeta}")
        object.__setattr__(self, 'zeta', zeta)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.zeta)

    @property
    def mean(self) -> float:
        return float(np.sum(self.array))

    @property
    def variance(self) -> float:
        return float(2.0 * np.sum(self.array ** 2))


def _as_memory(d) -> MemoryParameter:
    return d if isinstance(d, MemoryParameter) else MemoryParameter(d)


def _cos_segment(k: float, phase: np.ndarray, length: np.ndarray) -> np.ndarray:
    """integral_0^length cos(k x + phase) dx"""
    if k == 0.0:
        return length * np.cos(phase)
    return (np.sin(k * length + phase) - np.sin(phase)) / k


def overlap_correlation(kind: str, i: int, j: int, u) -> np.ndarray:
    """R(u) = integral_0^{1-u} [f_i(x) f_j(x+u) + f_i(x+u) f_j(x)] dx for f_k = cos or sin(2 pi k x)"""
    u = np.asarray(u, dtype=float)
    a = 2.0 * np.pi * i
    b = 2.0 * np.pi * j
    length = 1.0 - u
    difference = 0.5 * (_cos_segment(a - b, -b * u, length) + _cos_segment(a - b, a * u, length))
    total = 0.5 * (_cos_segment(a + b, b * u, length) + _cos_segment(a + b, a * u, length))
    if kind == 'cos':
        return difference + total
    if kind == 'sin':
        return difference - total
    raise ValueError(f"unknown trigonometric kind {kind!r}")


def _trig(kind: str, k: int, x):
    return np.cos(2.0 * np.pi * k * x) if kind == 'cos' else np.sin(2.0 * np.pi * k * x)


def _kernel(kernel: str, exponent: Optional[float], u):
    if kernel == 'neglog':
        return -np.log(u)
    return np.power(u, exponent)


def _double_integral_2d(kind: str, i: int, j: int, kernel: str, exponent: Optional[float],
                        tol: float) -> float:
    """Fallback: tensor-product quadrature on the two triangles on either side of x = y"""

    def below(y, x):
        return _trig(kind, i, x) * _trig(kind, j, y) * _kernel(kernel, exponent, x - y)

    def above(y, x):
        return _trig(kind, i, x) * _trig(kind, j, y) * _kernel(kernel, exponent, y - x)

    with warnings.catch_warnings():
        warnings.simplefilter('error', integrate.IntegrationWarning)
        try:
            lower, _ = integrate.dblquad(below, 0.0, 1.0, 0.0, lambda x: x, epsabs=tol * 1e-3, epsrel=tol)
            upper, _ = integrate.dblquad(above, 0.0, 1.0, lambda x: x, 1.0, epsabs=tol * 1e-3, epsrel=tol)
        except integrate.IntegrationWarning as e:
            raise QuadratureNonConvergence(
                f"2-D quadrature failed for {kind}({i},{j}) with {kernel} kernel: {e}"
            ) from e
    return lower + upper


def trig_double_integral(kind: str, i: int, j: int, kernel: str, exponent: Optional[float] = None,
                         tol: float = 1e-6) -> float:
    """integral over [0,1]^2 of f_i(x) f_j(y) K(|x-y|), K = -log u ('neglog') or u**exponent ('power')"""
    if kernel == 'neglog':
        weight, wvar, sign = 'alg-loga', (0.0, 0.0), -1.0
    elif kernel == 'power':
        if exponent is None or exponent <= -1.0:
            raise ValueError(f"power kernel needs exponent > -1, got {exponent}")
        weight, wvar, sign = 'alg', (float(exponent), 0.0), 1.0
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    result = integrate.quad(
        lambda u: overlap_correlation(kind, i, j, u),
        0.0, 1.0,
        weight=weight, wvar=wvar,
        epsabs=tol * 1e-3, epsrel=tol,
        limit=QUAD_LIMIT, full_output=1,
    )
    value, abserr, info = result[0], result[1], result[2]
    converged = (len(result) == 3 or abserr <= max(tol * 1e-3, tol * abs(value))) \
        and info.get('neval', 0) <= EVALUATION_BUDGET
    if converged:
        return sign * value

    logger.warning(f"1-D quadrature did not converge for {kind}({i},{j}) {kernel} "
                   f"exponent={exponent}; falling back to 2-D quadrature")
    return _double_integral_2d(kind, i, j, kernel, exponent, tol)


def a_term(d, i: int, j: int, tol: float = 1e-10) -> float:
    """1 - (2d+1) * integral_0^1 x^(2d) (cos(2 pi i x) + cos(2 pi j x)) dx, for -1/2 < d < 1/2"""
    memory = _as_memory(d)
    if not -0.5 < memory.d < 0.5:
        raise RegimeError(f"a-term is defined for -1/2 < d < 1/2, got d={memory.d}")
    result = integrate.quad(
        lambda x: np.cos(2.0 * np.pi * i * x) + np.cos(2.0 * np.pi * j * x),
        0.0, 1.0,
        weight='alg', wvar=(2.0 * memory.d, 0.0),
        epsabs=tol * 1e-2, epsrel=tol, limit=QUAD_LIMIT, full_output=1,
    )
    if len(result) > 3 and result[1] > max(tol, tol * abs(result[0])):
        raise QuadratureNonConvergence(f"a-term quadrature failed for d={memory.d}, ({i},{j})")
    return 1.0 - (2.0 * memory.d + 1.0) * result[0]


def kernel_integral_cos(d, i: int, j: int, tol: float = 1e-6) -> float:
    """Entry (i, j) of the cosine block, delta omitted, sign fixed so the block is positive definite"""
    memory = _as_memory(d)
    if memory.d == BOUNDARY_D:
        return 0.5 * trig_double_integral('cos', i, j, 'neglog', tol=tol)
    if memory.d > BOUNDARY_D:
        return -0.5 * trig_double_integral('cos', i, j, 'power', 2.0 * memory.d - 1.0, tol)
    integral = trig_double_integral('sin', i, j, 'power', 2.0 * memory.d + 1.0, tol)
    return -(a_term(memory, i, j) + 2.0 * np.pi ** 2 * i * j * integral)


def kernel_integral_sin(d, i: int, j: int, tol: float = 1e-6) -> float:
    """Entry (i, j) of the sine block, delta omitted, sign fixed so the block is positive definite"""
    memory = _as_memory(d)
    if memory.d == BOUNDARY_D:
        return 0.5 * trig_double_integral('sin', i, j, 'neglog', tol=tol)
    if memory.d > BOUNDARY_D:
        return -0.5 * trig_double_integral('sin', i, j, 'power', 2.0 * memory.d - 1.0, tol)
    integral = trig_double_integral('cos', i, j, 'power', 2.0 * memory.d + 1.0, tol)
    return -2.0 * np.pi ** 2 * i * j * integral


def _check_symmetric(matrix: np.ndarray, label: str, d: float) -> None:
    scale = max(float(np.max(np.abs(matrix))), np.finfo(float).tiny)
    asymmetry = float(np.max(np.abs(matrix - matrix.T)))
    if asymmetry > SYMMETRY_RTOL * scale:
        raise NotPositiveDefinite(f"{label} block not symmetric at d={d}: max |A - A'| = {asymmetry:.3e}")


def _check_positive_definite(matrix: np.ndarray, label: str, d: float) -> float:
    smallest = float(np.linalg.eigvalsh(matrix)[0])
    if not smallest > 0.0:
        raise NotPositiveDefinite(f"{label} block not positive definite at d={d}: smallest eigenvalue {smallest:.3e}")
    return smallest


def build_limit_covariance(d, s: int, tol: float = 1e-6) -> LimitCovariance:
    """Sigma_c, Sigma_s and the diagonal normalizer D for frequencies 1..s at memory d.

    Entries come from one-dimensional quadrature in u = |x - y| for every d,
    d = 0 included. Raises InvalidMemoryParameter, QuadratureNonConvergence or
    NotPositiveDefinite.
    """

    memory = _as_memory(d)
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    logger.debug(f"Building Σ(d) for d={memory.d}, s={s}, tol={tol:g}")

    sigma_cos = np.empty((s, s))
    sigma_sin = np.empty((s, s))
    for i in range(1, s + 1):
        for j in range(1, s + 1):
            sigma_cos[i - 1, j - 1] = kernel_integral_cos(memory, i, j, tol)
            sigma_sin[i - 1, j - 1] = kernel_integral_sin(memory, i, j, tol)

    _check_symmetric(sigma_cos, 'cosine', memory.d)
    _check_symmetric(sigma_sin, 'sine', memory.d)
    sigma_cos = 0.5 * (sigma_cos + sigma_cos.T)
    sigma_sin = 0.5 * (sigma_sin + sigma_sin.T)

    min_cos = _check_positive_definite(sigma_cos, 'cosine', memory.d)
    min_sin = _check_positive_definite(sigma_sin, 'sine', memory.d)

    d_diag = np.diag(sigma_cos) + np.diag(sigma_sin)
    if not np.all(d_diag > 0):
        raise NotPositiveDefinite(f"normalizer D has non-positive entries at d={memory.d}: {d_diag}")

    logger.info(f"Σ(d) built for d={memory.d}, s={s} (min eigenvalues {min_cos:.4g} / {min_sin:.4g})")
    return LimitCovariance(d=memory, s=s, sigma_cos=sigma_cos, sigma_sin=sigma_sin, d_diag=d_diag, tol=tol)


def chi_squared_weights(cov: LimitCovariance) -> ChiSqWeights:
    """Eigenvalues of Sigma D^-1 via the symmetric matrix D^-1/2 Sigma D^-1/2"""
    scale = 1.0 / np.sqrt(cov.d_full)
    symmetric = cov.sigma * np.outer(scale, scale)
    try:
        eigenvalues = np.linalg.eigvalsh(symmetric)
    except np.linalg.LinAlgError as e:
        raise EigenFailure(f"eigen-decomposition failed for d={cov.d.d}: {e}") from e

    if not np.all(np.isfinite(eigenvalues)) or eigenvalues[0] <= 0:
        raise EigenFailure(f"non-positive weights for d={cov.d.d}: {eigenvalues}")
    total = float(np.sum(eigenvalues))
    if abs(total - cov.s) > TRACE_ATOL:
        raise EigenFailure(f"weights sum to {total!r}, expected {cov.s}")
    return ChiSqWeights(tuple(eigenvalues[::-1]))


def limit_weights(d, s: int, tol: float = 1e-6) -> ChiSqWeights:
    """The 2s weights at (d, s), computed directly without the cache"""
    return chi_squared_weights(build_limit_covariance(d, s, tol))
