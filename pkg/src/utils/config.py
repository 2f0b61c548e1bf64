import os
from dataclasses import dataclass, field
from typing import Any, Callable, Optional
from dotenv import load_dotenv
from src.utils.logger import setup_logger

ENV_PREFIX = 'EPOCHSPEC_'


def _parse_bool(value: str) -> bool:
    return value.strip().lower() in ('1', 'true', 'yes', 'on')


@dataclass
class Settings:
    """Runtime defaults read from EPOCHSPEC_* environment variables"""

    block_length: Optional[int] = None
    s: int = 2
    alpha: float = 0.05
    quadrature_tol: float = 1e-6
    mc_fallback_draws: int = 1_000_000
    cache_path: str = os.path.join('data', 'weight_cache.json')
    no_cache: bool = False
    threads: Optional[int] = None
    seed: int = 20251018
    output_format: str = 'json'
    invalid: dict = field(default_factory=dict)

    @classmethod
    def from_env(cls, load_env_file: bool = True) -> 'Settings':
        """Read EPOCHSPEC_* variables (and .env); bad values are collected in ``invalid``"""
        if load_env_file:
            load_dotenv()
        logger = setup_logger('config')
        settings = cls()

        readers = {
            'block_length': ('BLOCK_LENGTH', int),
            's': ('S', int),
            'alpha': ('ALPHA', float),
            'quadrature_tol': ('QUADRATURE_TOL', float),
            'mc_fallback_draws': ('MC_FALLBACK_DRAWS', int),
            'cache_path': ('CACHE_PATH', str),
            'no_cache': ('NO_CACHE', _parse_bool),
            'threads': ('THREADS', int),
            'seed': ('SEED', int),
            'output_format': ('FORMAT', str),
        }
        for attr, (suffix, parser) in readers.items():
            raw = os.getenv(ENV_PREFIX + suffix)
            if raw is None or raw == '':
                continue
            try:
                setattr(settings, attr, parser(raw))
            except ValueError:
                # Keep the default; the CLI reports it as a config error
                logger.error(f"Invalid value for {ENV_PREFIX}{suffix}: {raw!r}")
                settings.invalid[ENV_PREFIX + suffix] = raw
        return settings

    def resolve(self, attr: str, flag_value: Optional[Any],
                cast: Optional[Callable[[Any], Any]] = None) -> Any:
        """Flag wins over environment, environment over default"""
        if flag_value is not None:
            return cast(flag_value) if cast else flag_value
        return getattr(self, attr)
