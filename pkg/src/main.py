#!/usr/bin/env python3
"""
Command-line entry point for the epoch-periodogram stationarity test
"""

import argparse
import json
import os
import sys
import time
from dataclasses import replace
from typing import Dict, List, Optional
import numpy as np
from src.analysis.epoch_test import EpochPeriodogramTest
from src.analysis.experiments import ExperimentPlan, describe_version, run_plan, write_outputs
from src.core.errors import ConfigError, EpochSpecError, InversionFailure
from src.core.models import MemoryParameter, TestConfig
from src.core.series_io import format_series, read_series, write_series
from src.limit.weight_cache import WeightCache, WeightProvider
from src.limit.weighted_chisq import WeightedChiSq, sampled_quantile, wchisq_quantile
from src.simulation.dgp import DgpSpec, generate
from src.utils.config import Settings
from src.utils.logger import set_level, setup_logger
from src.utils.seeds import derive_seed, make_rng

INLINE_TABLE_ROWS = 1000
# Sampling-fallback stream for limit quantiles, apart from the test and experiment streams
LIMIT_QUANTILE_STREAM = 0xC3


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


class EpochSpecCli:
    """Command handlers; each returns the inputs, outcome and seed of its report"""

    def __init__(self, settings: Settings, debug: bool = False):
        self.logger = setup_logger('main', 'DEBUG' if debug else None)
        self.settings = settings

    def _cache(self, args) -> WeightCache:
        no_cache = bool(args.no_cache) or self.settings.no_cache
        return WeightCache(self.settings.cache_path, enabled=not no_cache)

    def _test_config(self, args) -> TestConfig:
        settings = self.settings
        return TestConfig(
            s=settings.resolve('s', args.s, int),
            alpha=settings.resolve('alpha', args.alpha, float),
            ell=settings.resolve('block_length', args.block_length, int),
            quadrature_tol=settings.quadrature_tol,
            mc_fallback_draws=settings.mc_fallback_draws,
            use_cache=not (bool(args.no_cache) or settings.no_cache),
            cache_path=settings.cache_path,
            seed=settings.resolve('seed', args.seed, int),
        )

    def cmd_test(self, args) -> Dict:
        """Read the series, run the test and report decision, p-value and weights"""
        config = self._test_config(args)
        series = read_series(args.path)
        test = EpochPeriodogramTest(config, WeightProvider(self._cache(args)))
        outcome = test.run(series)
        inputs = {
            'path': args.path,
            'block_length': outcome.config_echo['ell'],
            's': config.s,
            'alpha': config.alpha,
        }
        return {'inputs': inputs, 'outcome': outcome.to_dict(), 'seed': config.seed}

    def cmd_limit(self, args) -> Dict:
        """Weights of the limit law at d, with quantiles when --quantile is given"""
        memory = MemoryParameter(args.d)
        s = self.settings.resolve('s', args.s, int)
        if s < 1:
            raise ConfigError(f"s must be >= 1, got {s}")
        probabilities: List[float] = args.quantile or []
        for p in probabilities:
            if not 0.0 < p < 1.0:
                raise ConfigError(f"quantile probability must lie in (0, 1), got {p}")

        provider = WeightProvider(self._cache(args))
        weights, cache_hit = provider.get(memory, s, self.settings.quadrature_tol)
        dist = WeightedChiSq(weights)
        seed = self.settings.resolve('seed', args.seed, int)
        quantiles = [self._quantile(dist, p, seed, index) for index, p in enumerate(probabilities)]
        outcome = {
            'weights': list(weights.zeta),
            'weight_sum': weights.mean,
            'variance': weights.variance,
            'quantiles': quantiles,
            'cache_hit': cache_hit,
        }
        inputs = {'d': memory.d, 's': s, 'quantile': probabilities, 'tol': self.settings.quadrature_tol}
        return {'inputs': inputs, 'outcome': outcome, 'seed': seed}

    def _quantile(self, dist: WeightedChiSq, p: float, seed: int, index: int) -> Dict:
        """Quantile by inversion, or by sampling on a seeded stream when inversion fails"""
        try:
            return {'p': p, 'value': wchisq_quantile(dist, p), 'method': 'inversion'}
        except InversionFailure as e:
            self.logger.warning(f"Quantile {p} by inversion failed ({e}); using sampling estimate")
            rng = make_rng(derive_seed(seed, LIMIT_QUANTILE_STREAM, index))
            value = sampled_quantile(dist, p, rng, self.settings.mc_fallback_draws)
            return {'p': p, 'value': value, 'method': 'sampling'}

    def _dgp_spec(self, args) -> DgpSpec:
        seed = self.settings.resolve('seed', args.seed, int)
        options = {
            'n': args.n,
            'seed': seed,
            'sigma_eps': args.sigma,
            'mode': args.mode,
            'ma_truncation': args.ma_truncation,
            'innovations': args.innovations,
        }
        if args.kind == 'ar1':
            return DgpSpec(kind='ar1', phi=args.phi if args.phi is not None else 0.0, **options)
        if args.kind == 'whitenoise':
            return DgpSpec(kind='whitenoise', **options)
        if args.d is None:
            raise ConfigError(f"--kind {args.kind} needs --d")
        if args.kind == 'integrated':
            if not 0.5 <= args.d < 1.5:
                raise ConfigError(
                    f"--kind integrated needs d in [1/2, 3/2), got {args.d}; "
                    f"use --kind farima for stationary d in (-1/2, 1/2)"
                )
            # --d is the memory of the output; the increments are FARIMA(0, d - 1, 0)
            return DgpSpec(kind='integrated', d=args.d - 1.0, **options)
        if args.d >= 0.5:
            raise ConfigError(
                f"--kind farima needs d in (-1/2, 1/2), got {args.d}; "
                f"use --kind integrated for nonstationary d in [1/2, 3/2)"
            )
        return DgpSpec(kind='farima', d=args.d, **options)

    def cmd_simulate(self, args) -> Optional[Dict]:
        """Generate a series; written to --out with a report, or to stdout with no report"""
        spec = self._dgp_spec(args)
        series = generate(spec)
        metadata = spec.metadata()
        if not args.out:
            sys.stdout.write(format_series(series.values, metadata))
            return None
        write_series(args.out, series.values, metadata)
        self.logger.info(f"Wrote {series.n} values to {args.out}")
        outcome = {'path': args.out, 'n': series.n, 'metadata': metadata}
        keys = ('kind', 'd', 'phi', 'n', 'sigma', 'mode', 'innovations', 'out')
        inputs = {key: getattr(args, key) for key in keys}
        return {'inputs': inputs, 'outcome': outcome, 'seed': spec.seed}

    def cmd_experiment(self, args) -> Dict:
        """Run a Monte Carlo plan and write its CSV tables and manifest under --out"""
        plan = ExperimentPlan.from_json(args.plan)
        if args.seed is not None:
            plan = replace(plan, master_seed=int(args.seed))
        if args.no_cache or self.settings.no_cache:
            plan = replace(plan, config=replace(plan.config, use_cache=False))
        threads = self.settings.resolve('threads', args.threads, int) or plan.threads
        if threads < 1:
            raise ConfigError(f"threads must be >= 1, got {threads}")

        started = time.perf_counter()
        tables = run_plan(plan, threads)
        paths = write_outputs(args.out, plan, tables, time.perf_counter() - started)
        table = {
            name: frame.to_dict(orient='records')
            for name, frame in tables.items() if len(frame) <= INLINE_TABLE_ROWS
        }
        outcome = {'files': paths, 'rows': {name: len(frame) for name, frame in tables.items()}}
        inputs = {'plan': args.plan, 'out': args.out, 'threads': threads}
        return {'inputs': inputs, 'outcome': outcome, 'table': table, 'seed': plan.master_seed}


def render_text(document: Dict) -> str:
    """One header line, then one `key: value` line per outcome field"""
    lines = [f"{document['command']} ({document['version']}, {document['elapsed_ms']} ms)"]
    outcome = document.get('outcome') or {}
    for key, value in outcome.items():
        if isinstance(value, float):
            value = f"{value:.10g}"
        elif isinstance(value, list) and value and isinstance(value[0], float):
            value = ', '.join(f"{v:.10g}" for v in value)
        lines.append(f"  {key}: {value}")
    return '\n'.join(lines) + '\n'


def build_parser() -> argparse.ArgumentParser:
    """Sub-commands test, limit, simulate and experiment, sharing the common flags"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--debug', action='store_true', help='Enable debug logging')
    common.add_argument('--no-cache', action='store_true', help='Neither read nor write the weight cache')
    common.add_argument('--format', choices=('json', 'text'), help='Report format (default json)')
    common.add_argument('--threads', type=int, help='Worker processes for experiments')
    common.add_argument('--seed', type=int, help='Seed for generators and sampling fallbacks')

    parser = argparse.ArgumentParser(description='Epoch-periodogram test of I(1) against I(0)')
    commands = parser.add_subparsers(dest='command', required=True)

    test = commands.add_parser('test', parents=[common], help='Run the test on a one-column series file')
    test.add_argument('path', help='Text/CSV file with one value per line')
    test.add_argument('--block-length', type=int, help='Epoch length ell (default 10, smaller-n heuristic below 500)')
    test.add_argument('--s', type=int, help='Number of Fourier frequencies (default 2)')
    test.add_argument('--alpha', type=float, help='Level of the test (default 0.05)')

    limit = commands.add_parser('limit', parents=[common], help='Weights and quantiles of the limit law')
    limit.add_argument('--d', type=float, required=True, help='Memory parameter in (-1/2, 3/2)')
    limit.add_argument('--s', type=int, help='Number of Fourier frequencies (default 2)')
    limit.add_argument('--quantile', type=float, nargs='+', help='Probabilities to invert')

    simulate = commands.add_parser('simulate', parents=[common], help='Generate a synthetic series')
    simulate.add_argument('--kind', choices=('farima', 'ar1', 'integrated', 'whitenoise'), required=True)
    simulate.add_argument('--d', type=float, help='Memory parameter (integrated: d in [1/2, 3/2))')
    simulate.add_argument('--phi', type=float, help='AR(1) coefficient')
    simulate.add_argument('--n', type=int, default=2000, help='Series length')
    simulate.add_argument('--sigma', type=float, default=1.0, help='Innovation standard deviation')
    simulate.add_argument('--mode', choices=('exact', 'truncated'), default='exact')
    simulate.add_argument('--ma-truncation', type=int, help='MA truncation M for truncated mode')
    simulate.add_argument('--innovations', choices=('gaussian', 'uniform'), default='gaussian')
    simulate.add_argument('--out', help='Output file (stdout when omitted)')

    experiment = commands.add_parser('experiment', parents=[common], help='Run a Monte Carlo plan')
    experiment.add_argument('--plan', required=True, help='Experiment plan JSON')
    experiment.add_argument('--out', default='results', help='Output directory')

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Dispatch one command and return its exit code (0, or the EpochSpecError code)"""
    args = build_parser().parse_args(argv)

    if args.debug:
        os.environ['EPOCHSPEC_LOG_LEVEL'] = 'DEBUG'
        set_level('DEBUG')

    settings = Settings.from_env()
    cli = EpochSpecCli(settings, debug=args.debug)
    handlers = {
        'test': cli.cmd_test,
        'limit': cli.cmd_limit,
        'simulate': cli.cmd_simulate,
        'experiment': cli.cmd_experiment,
    }

    started = time.perf_counter()
    try:
        if settings.invalid:
            raise ConfigError(f"invalid environment values: {', '.join(sorted(settings.invalid))}")
        result = handlers[args.command](args)
    except EpochSpecError as e:
        cli.logger.debug(f"{type(e).__name__} in {args.command}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code

    if result is None:
        return 0

    document = {
        'command': args.command,
        'inputs': result['inputs'],
        'seed': result.get('seed'),
        'version': describe_version(),
        'elapsed_ms': round((time.perf_counter() - started) * 1000.0, 3),
    }
    if 'outcome' in result:
        document['outcome'] = result['outcome']
    if 'table' in result:
        document['table'] = result['table']

    output_format = settings.resolve('output_format', args.format)
    if output_format == 'text':
        sys.stdout.write(render_text(document))
    else:
        sys.stdout.write(json.dumps(document, indent=2, default=_json_default) + '\n')
    return 0


if __name__ == "__main__":
    sys.exit(main())
