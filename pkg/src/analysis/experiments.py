"""Monte Carlo harness: size/power curves, CDF overlays against the limit law,
convergence in n, the scan over s and the trigonometric-sum covariance check.

Every replicate draws its seed from (master seed, grid index, replicate index)
and results are stored by index, so tables do not depend on the worker count.
"""

import json
import math
import os
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import numpy as np
import pandas as pd
from scipy import stats
from src import __version__
from src.analysis.epoch_test import EpochPeriodogramTest
from src.core.errors import ConfigError, InvalidDgpSpec, PlanError, PlanReadError
from src.core.models import MemoryParameter, TestConfig
from src.limit.covariance import ChiSqWeights, build_limit_covariance
from src.limit.weight_cache import WeightCache, WeightProvider
from src.limit.weighted_chisq import WeightedChiSq, cdf_interpolator
from src.simulation.dgp import (
    DgpSpec,
    generate,
    generate_values,
    memory_to_spec,
    variance_growth_table,
    with_seed,
)
from src.spectral.statistic import q_statistic
from src.utils.logger import setup_logger
from src.utils.seeds import derive_seed, replicate_seeds

logger = setup_logger('experiments')

PLAN_KINDS = ('size_power', 'cdf_overlay', 'convergence', 's_sweep', 'covariance', 'variance_growth')
FAMILIES = ('farima', 'ar1')
MIN_REPLICATIONS = 100
CHUNK_SIZE = 50
CSV_FLOAT_FORMAT = '%.15g'


@dataclass(frozen=True)
class GridPoint:
    """One value of a plan grid with the generator that realizes it"""

    index: int
    value: float
    spec: DgpSpec

    @property
    def generator(self) -> str:
        spec = self.spec
        if spec.kind == 'ar1':
            return f"ar1(phi={spec.phi:g})"
        if spec.kind == 'integrated':
            label = f"integrated(d_increment={spec.d:g})"
            return label + ' random walk' if spec.d == 0.0 else label
        if spec.kind == 'farima':
            return f"farima(d={spec.d:g})"
        return 'whitenoise'


@dataclass(frozen=True)
class ExperimentPlan:
    """A Monte Carlo plan as read from JSON; ``kind`` selects the experiment"""

    name: str
    kind: str
    n: int
    replications: int
    master_seed: int
    config: TestConfig = field(default_factory=TestConfig)
    family: str = 'farima'
    values: Tuple[float, ...] = ()
    n_grid: Tuple[int, ...] = ()
    s_values: Tuple[int, ...] = ()
    mode: str = 'exact'
    innovations: str = 'gaussian'
    threads: int = 1

    def __post_init__(self):
        if self.kind not in PLAN_KINDS:
            raise PlanError(f"unknown experiment kind {self.kind!r}; expected one of {', '.join(PLAN_KINDS)}")
        if self.family not in FAMILIES:
            raise PlanError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if int(self.replications) < MIN_REPLICATIONS:
            raise PlanError(f"replications must be >= {MIN_REPLICATIONS}, got {self.replications}")
        if not self.values:
            raise PlanError(f"plan {self.name!r} has an empty parameter grid")
        if self.kind in ('convergence', 'variance_growth') and not self.n_grid:
            raise PlanError(f"plan {self.name!r} needs a non-empty n_grid")
        if self.kind == 's_sweep' and not self.s_values:
            raise PlanError(f"plan {self.name!r} needs s_values")
        if int(self.threads) < 1:
            raise PlanError(f"threads must be >= 1, got {self.threads}")
        ell = self.ell
        for s in self.s_values:
            if int(s) < 1 or 2 * int(s) >= ell:
                raise PlanError(f"s={s} needs 1 <= s and 2s < block length {ell}")

    @property
    def ell(self) -> int:
        """Block length shared by every grid point"""
        return self.config.block_length_for(int(self.n))[0]

    @classmethod
    def from_dict(cls, document: Dict) -> 'ExperimentPlan':
        """Validate a plan document; every problem is a PlanError"""
        try:
            config_doc = dict(document.get('config', {}))
            config = TestConfig(
                s=int(config_doc.get('s', 2)),
                alpha=float(config_doc.get('alpha', 0.05)),
                ell=int(config_doc['ell']) if config_doc.get('ell') is not None else None,
                quadrature_tol=float(config_doc.get('quadrature_tol', 1e-6)),
                mc_fallback_draws=int(config_doc.get('mc_fallback_draws', 1_000_000)),
            )
            return cls(
                name=str(document['name']),
                kind=str(document['kind']),
                n=int(document['n']),
                replications=int(document['replications']),
                master_seed=int(document['master_seed']),
                config=config,
                family=str(document.get('family', 'farima')),
                values=tuple(float(v) for v in document.get('values', ())),
                n_grid=tuple(int(v) for v in document.get('n_grid', ())),
                s_values=tuple(int(v) for v in document.get('s_values', ())),
                mode=str(document.get('mode', 'exact')),
                innovations=str(document.get('innovations', 'gaussian')),
                threads=int(document.get('threads', 1)),
            )
        except KeyError as e:
            raise PlanError(f"plan is missing required field {e}") from e
        except ConfigError as e:
            raise PlanError(f"invalid plan configuration: {e}") from e
        except (TypeError, ValueError, AttributeError) as e:
            raise PlanError(f"malformed plan: {e}") from e

    @classmethod
    def from_json(cls, path: str) -> 'ExperimentPlan':
        """Load and validate a plan; PlanReadError if unreadable, PlanError if invalid"""
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                document = json.load(handle)
        except OSError as e:
            raise PlanReadError(f"cannot read plan {path}: {e}") from e
        except ValueError as e:
            raise PlanError(f"plan {path} is not valid JSON: {e}") from e
        if not isinstance(document, dict):
            raise PlanError(f"plan {path} must be a JSON object")
        return cls.from_dict(document)

    def to_dict(self) -> Dict:
        """The plan as run, for the manifest"""
        document = asdict(self)
        document['config'] = {
            's': self.config.s,
            'alpha': self.config.alpha,
            'ell': self.ell,
            'quadrature_tol': self.config.quadrature_tol,
            'mc_fallback_draws': self.config.mc_fallback_draws,
        }
        for key in ('values', 'n_grid', 's_values'):
            document[key] = list(document[key])
        return document

    def spec_for(self, value: float, n: Optional[int] = None) -> DgpSpec:
        """Generator for one grid value of the plan family"""
        n = int(n or self.n)
        options = {'mode': self.mode, 'innovations': self.innovations}
        try:
            if self.family == 'ar1':
                if value == 1.0:
                    return DgpSpec(kind='integrated', n=n, d=0.0, **options)
                return DgpSpec(kind='ar1', n=n, phi=value, innovations=self.innovations)
            return memory_to_spec(value, n, **options)
        except InvalidDgpSpec as e:
            raise PlanError(f"grid value {value} of plan {self.name!r}: {e}") from e

    def grid(self) -> List[GridPoint]:
        """One generator per value of the plan, in plan order"""
        return [GridPoint(index=k, value=v, spec=self.spec_for(v)) for k, v in enumerate(self.values)]


@dataclass
class RejectionTable:
    """Rejection counts per grid value with binomial standard errors"""

    parameter: str
    rows: List[Dict[str, object]] = field(default_factory=list)

    def add(self, value: float, generator: str, memory: float, rejections: int, replications: int) -> None:
        """Append one grid value with its rate and binomial standard error"""
        rate = rejections / replications
        if not 0.0 <= rate <= 1.0:
            raise ValueError(f"rejection rate {rate} outside [0, 1]")
        self.rows.append({
            self.parameter: value,
            'generator': generator,
            'memory': memory,
            'rejections': int(rejections),
            'replications': int(replications),
            'rate': rate,
            'se': math.sqrt(rate * (1.0 - rate) / replications),
        })

    @property
    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    @property
    def rates(self) -> np.ndarray:
        return np.array([row['rate'] for row in self.rows])

    @property
    def standard_errors(self) -> np.ndarray:
        return np.array([row['se'] for row in self.rows])


@dataclass(frozen=True)
class CdfOverlay:
    """Simulated statistics at one (d, n) with their KS distance to the limit CDF"""

    d: float
    n: int
    statistics: np.ndarray
    weights: ChiSqWeights
    ks_distance: float
    ks_pvalue: float
    generator: str

    def frame(self, limit_cdf: Callable[[np.ndarray], np.ndarray]) -> pd.DataFrame:
        ordered = np.sort(self.statistics)
        R = ordered.size
        return pd.DataFrame({
            'd': self.d,
            'q': ordered,
            'empirical_cdf': np.arange(1, R + 1) / R,
            'limit_cdf': limit_cdf(ordered),
        })


@dataclass(frozen=True)
class TrigCovarianceCheck:
    """Empirical covariance of the normalized trigonometric sums next to the limit"""

    d: float
    n: int
    replications: int
    empirical: np.ndarray
    limit: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(np.max(np.abs(self.empirical - self.limit)))

    def frame(self) -> pd.DataFrame:
        """Long format, one row per (row, col) entry"""
        size = self.limit.shape[0]
        s = size // 2
        rows = []
        for i in range(size):
            for j in range(size):
                rows.append({
                    'd': self.d,
                    'n': self.n,
                    'row': f"{'cos' if i < s else 'sin'}{i % s + 1}",
                    'col': f"{'cos' if j < s else 'sin'}{j % s + 1}",
                    'empirical': self.empirical[i, j],
                    'limit': self.limit[i, j],
                })
        return pd.DataFrame(rows)


# Worker tasks are top-level functions so they can be sent to worker processes

def _statistics_task(task) -> Tuple[int, int, np.ndarray]:
    """Q statistics of one chunk of replicates, one column per s"""
    grid_index, start, template, seeds, ell, s_values, d = task
    memory = MemoryParameter(d)
    values = np.empty((len(seeds), len(s_values)))
    for k, seed in enumerate(seeds):
        series = generate(with_seed(template, seed))
        for c, s in enumerate(s_values):
            values[k, c] = q_statistic(series, ell, s, memory).value
    return grid_index, start, values


def _trig_sums_task(task) -> Tuple[int, int, np.ndarray]:
    """Normalized cosine and sine sums at the first s Fourier frequencies"""
    grid_index, start, template, seeds, s = task
    n = template.n
    t = np.arange(1, n + 1, dtype=float)
    j = np.arange(1, s + 1, dtype=float)[:, None]
    angle = 2.0 * np.pi * j * t[None, :] / n
    basis = np.vstack([np.cos(angle), np.sin(angle)])
    values = np.empty((len(seeds), 2 * s))
    for k, seed in enumerate(seeds):
        values[k] = basis @ generate_values(with_seed(template, seed))
    return grid_index, start, values


def _run_tasks(fn: Callable, tasks: List, threads: int) -> List:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    results: List = [None] * len(tasks)
    with ProcessPoolExecutor(max_workers=threads) as executor:
        futures = {executor.submit(fn, task): k for k, task in enumerate(tasks)}
        for future in as_completed(futures):
            results[futures[future]] = future.result()
    return results


def _chunked(grid_index: int, seeds: Sequence[int]) -> List[Tuple[int, int, List[int]]]:
    return [(grid_index, start, list(seeds[start:start + CHUNK_SIZE]))
            for start in range(0, len(seeds), CHUNK_SIZE)]


def simulate_statistics(points: Sequence[GridPoint], replications: int, master_seed: int, ell: int,
                        s_values: Sequence[int], d: Optional[float] = None,
                        threads: int = 1) -> Dict[int, np.ndarray]:
    """(replications, len(s_values)) array of statistics per grid point.

    The statistic is normalized at ``d`` when given, otherwise at each point's
    own memory parameter.
    """

    tasks = []
    for point in points:
        seeds = replicate_seeds(master_seed, point.index, replications)
        point_d = point.spec.memory if d is None else d
        for grid_index, start, chunk in _chunked(point.index, seeds):
            tasks.append((grid_index, start, point.spec, chunk, ell, tuple(s_values), point_d))

    results = {point.index: np.empty((replications, len(s_values))) for point in points}
    for grid_index, start, values in _run_tasks(_statistics_task, tasks, threads):
        results[grid_index][start:start + values.shape[0]] = values
    return results


def _provider_for(config: TestConfig) -> WeightProvider:
    return WeightProvider(WeightCache(config.cache_path, enabled=config.use_cache))


def size_power_curve(plan: ExperimentPlan, threads: Optional[int] = None,
                     test: Optional[EpochPeriodogramTest] = None) -> RejectionTable:
    """Rejection rate of the test at each grid value of the plan.

    The critical value is computed once; replications draw from independent
    streams derived from the master seed, so the table does not depend on threads.
    """
    threads = int(threads or plan.threads)
    config = replace(plan.config, ell=plan.ell)
    test = test or EpochPeriodogramTest(config)
    critical_value = test.critical_value
    points = plan.grid()
    logger.info(f"Size/power '{plan.name}': {len(points)} grid points x {plan.replications} replications, "
                f"q_alpha={critical_value:.6g}, threads={threads}")

    statistics = simulate_statistics(points, plan.replications, plan.master_seed, plan.ell,
                                     (config.s,), d=config.d_null, threads=threads)
    table = RejectionTable(parameter='phi' if plan.family == 'ar1' else 'd')
    for point in points:
        values = statistics[point.index][:, 0]
        rejections = sum(test.decide(v) for v in values)
        table.add(point.value, point.generator, point.spec.memory, rejections, plan.replications)
        logger.info(f"{point.generator}: rejection rate {rejections / plan.replications:.4f}")
    return table


def s_sweep(plan: ExperimentPlan, threads: Optional[int] = None) -> pd.DataFrame:
    """Rejection rates over the number of Fourier frequencies s at fixed generators"""
    threads = int(threads or plan.threads)
    points = plan.grid()
    statistics = simulate_statistics(points, plan.replications, plan.master_seed, plan.ell,
                                     plan.s_values, d=plan.config.d_null, threads=threads)
    rows = []
    for c, s in enumerate(plan.s_values):
        test = EpochPeriodogramTest(replace(plan.config, s=int(s), ell=plan.ell))
        table = RejectionTable(parameter='phi' if plan.family == 'ar1' else 'd')
        for point in points:
            rejections = sum(test.decide(v) for v in statistics[point.index][:, c])
            table.add(point.value, point.generator, point.spec.memory, rejections, plan.replications)
        frame = table.frame
        frame.insert(0, 's', int(s))
        rows.append(frame)
        logger.info(f"s={s}: rates {', '.join(f'{r:.3f}' for r in table.rates)}")
    return pd.concat(rows, ignore_index=True)


def ks_distance(sample: np.ndarray, cdf: Callable[[np.ndarray], np.ndarray]) -> Tuple[float, float]:
    """One-sample Kolmogorov-Smirnov distance against a continuous reference CDF"""
    result = stats.kstest(np.asarray(sample, dtype=float), cdf)
    return float(result.statistic), float(result.pvalue)


def cdf_overlay(dgp: DgpSpec, config: TestConfig, replications: int, master_seed: int = 0,
                threads: int = 1, grid_index: int = 0,
                provider: Optional[WeightProvider] = None,
                limit_cdf: Optional[Callable] = None) -> Tuple[CdfOverlay, Callable]:
    """Replicated Q(s, d) at the generator's own d next to the limit law for that d"""
    memory = MemoryParameter(dgp.memory)
    ell = config.block_length_for(dgp.n)[0]
    provider = provider or _provider_for(config)
    weights, _ = provider.get(memory, config.s, config.quadrature_tol)
    if limit_cdf is None:
        limit_cdf = cdf_interpolator(WeightedChiSq(weights))

    point = GridPoint(index=grid_index, value=memory.d, spec=dgp)
    sample = simulate_statistics([point], replications, master_seed, ell, (config.s,),
                                 threads=threads)[grid_index][:, 0]
    distance, pvalue = ks_distance(sample, limit_cdf)
    logger.info(f"CDF overlay {point.generator}, n={dgp.n}: KS distance {distance:.4f}")
    overlay = CdfOverlay(d=memory.d, n=int(dgp.n), statistics=sample, weights=weights,
                         ks_distance=distance, ks_pvalue=pvalue, generator=point.generator)
    return overlay, limit_cdf


def limit_convergence(d_grid: Sequence[float], n_grid: Sequence[int], config: TestConfig,
                         replications: int, master_seed: int = 0, threads: int = 1,
                         mode: str = 'exact') -> pd.DataFrame:
    """KS distance between replicated Q(s, d) and its limit law, per (d, n)"""
    if not d_grid or not n_grid:
        raise PlanError("convergence needs non-empty d and n grids")
    provider = _provider_for(config)
    rows = []
    for a, d in enumerate(d_grid):
        limit_cdf = None
        for b, n in enumerate(n_grid):
            spec = memory_to_spec(d, int(n), mode=mode)
            overlay, limit_cdf = cdf_overlay(spec, config, replications, master_seed, threads,
                                             grid_index=a * len(n_grid) + b, provider=provider,
                                             limit_cdf=limit_cdf)
            ell = config.block_length_for(int(n))[0]
            rows.append({
                'd': float(d),
                'n': int(n),
                'ell': ell,
                'm': int(n) // ell,
                'generator': overlay.generator,
                'replications': replications,
                'ks_distance': overlay.ks_distance,
                'ks_pvalue': overlay.ks_pvalue,
            })
    return pd.DataFrame(rows)


def trig_sum_covariance(d: float, n: int, replications: int, seed: int = 0, s: int = 2,
                        tol: float = 1e-6, threads: int = 1, mode: str = 'exact') -> TrigCovarianceCheck:
    """Empirical covariance of the cosine/sine sums against Sigma(d), both divided by their trace"""
    spec = memory_to_spec(d, int(n), mode=mode)
    seeds = replicate_seeds(seed, 0, replications)
    tasks = [(g, start, spec, chunk, s) for g, start, chunk in _chunked(0, seeds)]
    sums = np.empty((replications, 2 * s))
    for _, start, values in _run_tasks(_trig_sums_task, tasks, threads):
        sums[start:start + values.shape[0]] = values

    empirical = sums.T @ sums / replications
    limit = build_limit_covariance(d, s, tol).sigma
    check = TrigCovarianceCheck(
        d=float(d),
        n=int(n),
        replications=replications,
        empirical=empirical / np.trace(empirical),
        limit=limit / np.trace(limit),
    )
    logger.info(f"Trig-sum covariance d={d}, n={n}: max deviation {check.max_deviation:.4f}")
    return check


def describe_version() -> str:
    """git describe of the working tree, or the package version outside a checkout"""
    try:
        completed = subprocess.run(['git', 'describe', '--tags', '--always', '--dirty'],
                                   capture_output=True, text=True, timeout=5, check=True)
        described = completed.stdout.strip()
        if described:
            return described
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def run_plan(plan: ExperimentPlan, threads: Optional[int] = None) -> Dict[str, pd.DataFrame]:
    """Tables produced by a plan, keyed by table name"""
    threads = int(threads or plan.threads)
    config = replace(plan.config, ell=plan.ell)
    if plan.kind == 'size_power':
        return {'rejections': size_power_curve(plan, threads).frame}
    if plan.kind == 's_sweep':
        return {'s_sweep': s_sweep(plan, threads)}
    if plan.kind == 'convergence':
        return {'convergence': limit_convergence(plan.values, plan.n_grid, plan.config,
                                                    plan.replications, plan.master_seed, threads,
                                                    mode=plan.mode)}
    if plan.kind == 'covariance':
        frames = [trig_sum_covariance(d, plan.n, plan.replications, derive_seed(plan.master_seed, k),
                                      config.s, config.quadrature_tol, threads, plan.mode).frame()
                  for k, d in enumerate(plan.values)]
        return {'covariance': pd.concat(frames, ignore_index=True)}
    if plan.kind == 'variance_growth':
        frames = []
        for k, d_increment in enumerate(plan.values):
            frame = variance_growth_table(d_increment, plan.n_grid, plan.replications,
                                          derive_seed(plan.master_seed, k), mode=plan.mode)
            frame.insert(0, 'd_increment', d_increment)
            frames.append(frame)
        return {'variance_growth': pd.concat(frames, ignore_index=True)}

    provider = _provider_for(config)
    overlays, summary = [], []
    for point in plan.grid():
        overlay, limit_cdf = cdf_overlay(point.spec, config, plan.replications, plan.master_seed,
                                         threads, grid_index=point.index, provider=provider)
        overlays.append(overlay.frame(limit_cdf))
        summary.append({
            'd': overlay.d,
            'generator': overlay.generator,
            'n': overlay.n,
            'replications': plan.replications,
            'ks_distance': overlay.ks_distance,
            'ks_pvalue': overlay.ks_pvalue,
            'weights': ' '.join(f"{z:.15g}" for z in overlay.weights.zeta),
        })
    return {'cdf_overlay': pd.concat(overlays, ignore_index=True), 'ks': pd.DataFrame(summary)}


def write_outputs(out_dir: str, plan: ExperimentPlan, tables: Dict[str, pd.DataFrame],
                  wall_time: float) -> Dict[str, str]:
    """CSV per table plus a JSON manifest; returns table name -> file path"""
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    for table_name, frame in tables.items():
        path = os.path.join(out_dir, f"{plan.name}_{table_name}.csv")
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        paths[table_name] = path

    manifest = {
        'plan': plan.to_dict(),
        'version': describe_version(),
        'wall_time_s': round(wall_time, 3),
        'tables': {name: os.path.basename(path) for name, path in paths.items()},
    }
    manifest_path = os.path.join(out_dir, f"{plan.name}_manifest.json")
    with open(manifest_path, 'w', encoding='utf-8') as handle:
        json.dump(manifest, handle, indent=2)
    paths['manifest'] = manifest_path
    logger.info(f"Experiment '{plan.name}' written to {out_dir} in {wall_time:.1f}s")
    return paths


def run_experiment(plan: ExperimentPlan, out_dir: str, threads: Optional[int] = None) -> Dict[str, str]:
    """run_plan followed by write_outputs"""
    started = time.perf_counter()
    tables = run_plan(plan, threads)
    return write_outputs(out_dir, plan, tables, time.perf_counter() - started)
