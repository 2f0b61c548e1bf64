import json
import os
import tempfile
from datetime import datetime
from typing import Dict, Optional, Tuple
import numpy as np
from src.core.models import MemoryParameter
from src.limit.covariance import ChiSqWeights, build_limit_covariance, chi_squared_weights
from src.utils.logger import setup_logger

SCHEMA = 'epochspec.weights/v1'
DEFAULT_CACHE_PATH = os.path.join('data', 'weight_cache.json')


def cache_key(d: float, s: int, tol: float) -> str:
    """d to 12 decimals, s, tol in scientific notation"""
    return f"d={round(float(d), 12):.12f}|s={int(s)}|tol={float(tol):.3e}"


class WeightCache:
    """Advisory JSON cache of chi-square weights keyed by (d, s, tol).

    Reads are read-check, writes replace the whole file atomically; concurrent
    writers race with last-writer-wins. Any cache problem means recomputation.
    """

    def __init__(self, path: Optional[str] = None, enabled: bool = True):
        self.logger = setup_logger('weight_cache')
        self.path = path or os.getenv('EPOCHSPEC_CACHE_PATH') or DEFAULT_CACHE_PATH
        self.enabled = enabled

    def _load(self) -> Dict[str, dict]:
        if not os.path.exists(self.path):
            return {}
        try:
            with open(self.path, 'r', encoding='utf-8') as handle:
                document = json.load(handle)
        except (OSError, ValueError) as e:
            self.logger.warning(f"Ignoring unreadable weight cache {self.path}: {e}")
            return {}
        if not isinstance(document, dict) or document.get('schema') != SCHEMA:
            self.logger.warning(f"Ignoring weight cache {self.path} with unexpected schema")
            return {}
        entries = document.get('entries', {})
        return entries if isinstance(entries, dict) else {}

    def lookup(self, d: float, s: int, tol: float) -> Optional[ChiSqWeights]:
        """Cached weights, or None when disabled, absent or unusable"""
        if not self.enabled:
            return None
        entry = self._load().get(cache_key(d, s, tol))
        if not entry:
            return None
        try:
            weights = ChiSqWeights(tuple(float(z) for z in entry['weights']))
        except (KeyError, TypeError, ValueError, ArithmeticError) as e:
            self.logger.warning(f"Ignoring corrupt cache entry {cache_key(d, s, tol)}: {e}")
            return None
        if len(weights.zeta) != 2 * int(s) or abs(weights.mean - s) > 1e-8:
            self.logger.warning(f"Ignoring inconsistent cache entry {cache_key(d, s, tol)}")
            return None
        return weights

    def store(self, d: float, s: int, tol: float, weights: ChiSqWeights,
              sigma_cos: np.ndarray, sigma_sin: np.ndarray, d_diag: np.ndarray) -> None:
        """Merge one entry into the file and replace it atomically"""
        if not self.enabled:
            return
        entries = self._load()
        entries[cache_key(d, s, tol)] = {
            'd': float(d),
            's': int(s),
            'tol': float(tol),
            'weights': [float(z) for z in weights.zeta],
            'sigma_cos': np.asarray(sigma_cos).tolist(),
            'sigma_sin': np.asarray(sigma_sin).tolist(),
            'd_diag': np.asarray(d_diag).tolist(),
            'created': datetime.now().isoformat(timespec='seconds'),
        }
        document = {'schema': SCHEMA, 'entries': entries}
        directory = os.path.dirname(os.path.abspath(self.path))
        try:
            os.makedirs(directory, exist_ok=True)
            fd, tmp_path = tempfile.mkstemp(prefix='.weights-', suffix='.json', dir=directory)
            with os.fdopen(fd, 'w', encoding='utf-8') as handle:
                json.dump(document, handle, indent=2, sort_keys=True)
            os.replace(tmp_path, self.path)
        except OSError as e:
            self.logger.warning(f"Could not write weight cache {self.path}: {e}")


class WeightProvider:
    """Cache-aware access to the weights of Q(s, d)"""

    def __init__(self, cache: Optional[WeightCache] = None):
        self.logger = setup_logger('weight_provider')
        self.cache = cache if cache is not None else WeightCache()

    def get(self, d, s: int, tol: float = 1e-6) -> Tuple[ChiSqWeights, bool]:
        """Weights for (d, s) and whether they came from the cache"""
        memory = d if isinstance(d, MemoryParameter) else MemoryParameter(d)
        cached = self.cache.lookup(memory.d, s, tol)
        if cached is not None:
            self.logger.debug(f"Weight cache hit for d={memory.d}, s={s}")
            return cached, True

        cov = build_limit_covariance(memory, s, tol)
        weights = chi_squared_weights(cov)
        self.cache.store(memory.d, s, tol, weights, cov.sigma_cos, cov.sigma_sin, cov.d_diag)
        self.logger.info(f"Weights for d={memory.d}, s={s}: {', '.join(f'{z:.6g}' for z in weights.zeta)}")
        return weights, False
