"""
Experiment Service - scalability methodology
Bisection for the minimal population size, sweeps over problem sizes,
exhaustive spin-glass oracle and power-law fitting
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import get_settings
from app.core.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    UnsolvableAtCeilingError,
)
from app.core.genome import Problem, RandomSource
from app.db.best_known import BestKnownStore
from app.models.schemas import (
    BisectionResult,
    ExperimentRecord,
    HboaConfig,
    ProblemKind,
    RunMode,
    RunRecord,
    RunResult,
    ScheduleConfig,
)
from app.services.benchmark_service import BenchmarkService
from app.services.hboa_service import HBOAService
from app.services.parameterless_service import ParameterlessService
from app.services.spinglass_service import SpinGlassInstance, SpinGlassProblem, SpinGlassService

logger = logging.getLogger(__name__)

ORACLE_CHUNK = 1 << 16


@dataclass
class ExperimentOutput:
    records: List[ExperimentRecord]
    runs: List[RunRecord]


# =====================================================
# Exhaustive ground-state oracle
# =====================================================
def brute_force_ground_state(
    instance: SpinGlassInstance,
    max_spins: Optional[int] = None,
) -> Tuple[int, np.ndarray]:
    """
    Exact minimum energy by enumeration of 2^(n-1) assignments

    Spin 0 is fixed to +1 (global flip symmetry). Returns (energy, witness bits);
    the witness is the first minimiser in enumeration order.
    """
    max_spins = max_spins if max_spins is not None else get_settings().oracle_max_spins
    n, side = instance.n, instance.side
    if n > max_spins:
        raise InvalidArgumentError(f"oracle limited to {max_spins} spins, instance has {n}")

    right = instance.right.astype(np.int32)
    down = instance.down.astype(np.int32)
    shifts = np.arange(n - 1, dtype=np.int64)
    total = 1 << (n - 1)

    best_energy: Optional[int] = None
    best_code = 0
    for start in range(0, total, ORACLE_CHUNK):
        codes = np.arange(start, min(start + ORACLE_CHUNK, total), dtype=np.int64)
        spins = np.ones((codes.size, n), dtype=np.int8)
        spins[:, 1:] = ((codes[:, None] >> shifts) & 1).astype(np.int8) * 2 - 1
        grid = spins.reshape(-1, side, side)
        energies = (
            (grid * np.roll(grid, -1, axis=2) * right).sum(axis=(1, 2), dtype=np.int32)
            + (grid * np.roll(grid, -1, axis=1) * down).sum(axis=(1, 2), dtype=np.int32)
        )
        position = int(np.argmin(energies))
        if best_energy is None or energies[position] < best_energy:
            best_energy = int(energies[position])
            best_code = int(codes[position])

    witness = np.ones(n, dtype=np.uint8)
    witness[1:] = (best_code >> np.arange(n - 1)) & 1
    logger.info(f"🔎 Oracle {side}x{side}: ground-state energy {best_energy}")
    return best_energy, witness


# =====================================================
# Power-law fit
# =====================================================
def power_law_fit(points: Iterable) -> float:
    """
    Least-squares slope of log(mean evaluations) against log(n)

    Accepts ExperimentRecords or (n, mean) pairs; records without a mean are skipped.
    """
    pairs: List[Tuple[float, float]] = []
    for point in points:
        if isinstance(point, ExperimentRecord):
            if point.mean_evals is None:
                continue
            pairs.append((float(point.n), float(point.mean_evals)))
        else:
            n, mean = point
            pairs.append((float(n), float(mean)))

    if len(pairs) < 3:
        raise InvalidArgumentError(f"power-law fit needs at least 3 points, got {len(pairs)}")
    sizes, means = np.array(pairs).T
    if (means <= 0).any() or (sizes <= 0).any():
        raise InvalidArgumentError("power-law fit needs positive sizes and means")
    slope, _ = np.polyfit(np.log(sizes), np.log(means), 1)
    return float(slope)


class ExperimentService:
    """Bisection, sweeps and ground-truth bookkeeping"""

    def __init__(
        self,
        hboa: Optional[HBOAService] = None,
        parameterless: Optional[ParameterlessService] = None,
        best_known: Optional[BestKnownStore] = None,
        benchmarks: Optional[BenchmarkService] = None,
        spinglass: Optional[SpinGlassService] = None,
    ):
        self.hboa = hboa or HBOAService()
        self.benchmarks = benchmarks or BenchmarkService()
        self.spinglass = spinglass or SpinGlassService()
        self.parameterless = parameterless or ParameterlessService(self.hboa)
        self.best_known = best_known
        self.settings = get_settings()
        self._oracle_cache: Dict[str, int] = {}

    # =====================================================
    # Bisection
    # =====================================================
    def bisect_population_size(
        self,
        problem: Problem,
        cfg: HboaConfig,
        runs: int = 30,
        master_seed: int = 0,
        base_population: int = 10,
        ceiling: Optional[int] = None,
    ) -> BisectionResult:
        """
        Minimal N at which `runs` independent fixed-size runs all succeed

        Doubling from the base size brackets [last failing, first passing]; the
        bracket is then bisected until upper - lower <= 0.1 * lower, or until the
        sizes are adjacent.
        """
        if problem.known_optimum is None:
            raise InvalidArgumentError("bisection needs a problem with a known optimum")
        if runs < 1:
            raise InvalidArgumentError(f"runs must be positive, got {runs}")
        ceiling = ceiling if ceiling is not None else self.settings.bisection_ceiling

        tried_sizes: List[int] = []
        size = base_population
        lower: Optional[int] = None
        while True:
            if size > ceiling:
                raise UnsolvableAtCeilingError(ceiling, problem.describe())
            tried_sizes.append(size)
            if self._passes(problem, size, cfg, runs, master_seed):
                upper = size
                break
            lower = size
            size *= 2

        if lower is None:
            logger.info(f"✅ {problem.describe()}: base size {upper} already passes")
            return BisectionResult(n_min=upper, lower=upper, upper=upper, tried_sizes=tried_sizes)

        while upper - lower > max(0.1 * lower, 1):
            mid = self._midpoint(lower, upper)
            tried_sizes.append(mid)
            if self._passes(problem, mid, cfg, runs, master_seed):
                upper = mid
            else:
                lower = mid

        logger.info(f"✅ {problem.describe()}: N_min={upper} (interval [{lower}, {upper}])")
        return BisectionResult(n_min=upper, lower=lower, upper=upper, tried_sizes=tried_sizes)

    @staticmethod
    def _midpoint(lower: int, upper: int) -> int:
        """Even midpoint when one lies strictly inside the bracket, else the integer midpoint"""
        mid = 2 * round((lower + upper) / 4)
        if lower < mid < upper:
            return mid
        return (lower + upper) // 2

    def _passes(self, problem: Problem, size: int, cfg: HboaConfig, runs: int, master_seed: int) -> bool:
        for run in range(runs):
            seed = RandomSource.derive_seed(master_seed, problem.problem_id, problem.n, "bisect", size, run)
            result = self.hboa.run_fixed(problem, size, cfg, seed)
            if not result.success:
                logger.info(f"❌ N={size}: run {run + 1}/{runs} failed")
                return False
        logger.info(f"✅ N={size}: {runs}/{runs} runs succeeded")
        return True

    # =====================================================
    # Sweeps
    # =====================================================
    def run_experiment(
        self,
        kind,
        sizes: Sequence[int],
        runs: int = 100,
        mode=RunMode.parameterless,
        master_seed: int = 0,
        cfg: Optional[HboaConfig] = None,
        schedule: Optional[ScheduleConfig] = None,
        local_search: Optional[bool] = None,
        bisection_runs: int = 30,
        instances: Optional[int] = None,
        on_record: Optional[Callable[[ExperimentRecord], None]] = None,
    ) -> ExperimentOutput:
        """
        One record per size

        parameterless: `runs` seeded parameter-less runs.
        fixed-bisected: bisection first, then `runs` fixed-size runs at N_min.
        Spin glasses run once on each of `instances` (default `runs`) random
        instances, with ground truth from the oracle (small sizes) or the
        best-known store.
        """
        kind = ProblemKind(kind)
        mode = RunMode(mode)
        if runs < 1:
            raise InvalidArgumentError(f"runs must be positive, got {runs}")
        if instances is not None and instances < 1:
            raise InvalidArgumentError(f"instances must be positive, got {instances}")
        if mode not in (RunMode.parameterless, RunMode.fixed_bisected):
            raise InvalidArgumentError(f"experiment mode must be pl or fixed-bisected, got {mode.value}")
        if not sizes:
            raise InvalidArgumentError("at least one size is required")
        cfg = cfg or HboaConfig()
        schedule = schedule or ScheduleConfig(
            budget=self.settings.default_budget,
            base_population=self.settings.base_population,
            k=self.settings.schedule_k,
        )

        # validate every size before spending any evaluations
        for n in sizes:
            if kind == ProblemKind.spinglass:
                self.benchmarks.side_for(n)
            else:
                self.benchmarks.build(kind, n, local_search=local_search)

        records: List[ExperimentRecord] = []
        run_rows: List[RunRecord] = []
        for n in sizes:
            logger.info(f"📊 {kind.value} n={n}: {runs} run(s) in mode {mode.value}")
            if kind == ProblemKind.spinglass:
                results, nmin = self._spinglass_point(
                    n, instances or runs, mode, master_seed, cfg, schedule, local_search, bisection_runs
                )
            else:
                problem = self.benchmarks.build(kind, n, local_search=local_search)
                results, nmin = self._benchmark_point(
                    problem, runs, mode, master_seed, cfg, schedule, bisection_runs
                )

            for index, result in enumerate(results):
                run_rows.append(
                    RunRecord(
                        problem=kind.value,
                        n=n,
                        mode=mode,
                        run=index,
                        seed=result.seed,
                        population_size=result.population_size,
                        success=result.success,
                        evaluations=result.evaluations,
                        flips=result.flips,
                        best_fitness=result.best_fitness,
                        generations=result.generations,
                    )
                )
            record = self._summarize(kind.value, n, mode, results, nmin, master_seed)
            records.append(record)
            logger.info(
                f"✅ {kind.value} n={n}: {record.successes}/{record.runs} successes, "
                f"mean evaluations {record.mean_evals}"
            )
            if on_record is not None:
                on_record(record)

        return ExperimentOutput(records=records, runs=run_rows)

    def _benchmark_point(self, problem, runs, mode, master_seed, cfg, schedule, bisection_runs):
        nmin = None
        if mode == RunMode.fixed_bisected:
            bisection = self.bisect_population_size(
                problem,
                cfg,
                runs=bisection_runs,
                master_seed=master_seed,
                base_population=schedule.base_population,
            )
            nmin = bisection.n_min

        results = []
        for run in range(runs):
            seed = RandomSource.derive_seed(master_seed, problem.problem_id, problem.n, mode.value, run)
            results.append(self._single_run(problem, mode, seed, cfg, schedule, nmin))
        return results, nmin

    def _spinglass_point(self, n, runs, mode, master_seed, cfg, schedule, local_search, bisection_runs):
        side = self.benchmarks.side_for(n)
        results: List[RunResult] = []
        sizes: List[int] = []
        for run in range(runs):
            instance_seed = self.spinglass.instance_seed(master_seed, n, run)
            instance = self.spinglass.generate(side, instance_seed)
            ground = self.ground_truth(instance)
            problem = self.benchmarks.build(
                ProblemKind.spinglass, n, local_search=local_search, instance=instance, ground_energy=ground
            )

            nmin = None
            if mode == RunMode.fixed_bisected:
                nmin = self.bisect_population_size(
                    problem,
                    cfg,
                    runs=bisection_runs,
                    master_seed=instance_seed,
                    base_population=schedule.base_population,
                ).n_min
                sizes.append(nmin)

            seed = RandomSource.derive_seed(master_seed, "spinglass", n, mode.value, run)
            result = self._single_run(problem, mode, seed, cfg, schedule, nmin)
            self.record_energy(problem, result)
            results.append(result)

        nmin = int(round(float(np.mean(sizes)))) if sizes else None
        return results, nmin

    def _single_run(self, problem, mode, seed, cfg, schedule, nmin) -> RunResult:
        if mode == RunMode.parameterless:
            return self.parameterless.run_parameterless(problem, cfg, seed, config=schedule)
        return self.hboa.run_fixed(problem, nmin, cfg, seed)

    @staticmethod
    def _summarize(problem_id, n, mode, results, nmin, master_seed) -> ExperimentRecord:
        evaluations = np.array([r.evaluations for r in results if r.success], dtype=np.float64)
        mean = float(evaluations.mean()) if evaluations.size else None
        std = None
        if evaluations.size:
            std = float(evaluations.std(ddof=1)) if evaluations.size > 1 else 0.0
        return ExperimentRecord(
            problem=problem_id,
            n=n,
            mode=mode,
            runs=len(results),
            successes=int(evaluations.size),
            mean_evals=mean,
            std_evals=std,
            nmin=nmin,
            master_seed=master_seed,
        )

    # =====================================================
    # Spin-glass ground truth
    # =====================================================
    def ground_state(self, instance: SpinGlassInstance) -> Tuple[int, np.ndarray]:
        """Exhaustive (energy, witness) within the configured oracle limit"""
        return brute_force_ground_state(instance, self.settings.oracle_max_spins)

    def ground_truth(self, instance: SpinGlassInstance) -> int:
        """Oracle energy for small grids, else the best-known store entry"""
        fingerprint = instance.fingerprint()
        if instance.n <= self.settings.oracle_max_spins:
            if fingerprint not in self._oracle_cache:
                energy, _ = self.ground_state(instance)
                self._oracle_cache[fingerprint] = energy
            return self._oracle_cache[fingerprint]

        energy = self.best_known.get_energy(fingerprint) if self.best_known else None
        if energy is None:
            raise ConfigurationError(
                f"no ground truth for {instance.side}x{instance.side} instance {fingerprint[:8]}: "
                f"too large for the oracle and missing from the best-known file"
            )
        return energy

    def record_energy(self, problem: SpinGlassProblem, result: RunResult) -> bool:
        """Lower the best-known entry when a run beat it"""
        if self.best_known is None or problem.n <= self.settings.oracle_max_spins:
            return False
        energy = int(round(-result.best_fitness))
        return self.best_known.update(
            problem.instance.fingerprint(), energy, problem.instance.side, problem.instance.seed
        )

    # =====================================================
    # Scaling
    # =====================================================
    def fit_exponent(self, records: Iterable[ExperimentRecord]) -> Dict[Tuple[str, str], Tuple[float, int]]:
        """Power-law exponent per (problem, mode) group: {(problem, mode): (exponent, points)}"""
        groups: Dict[Tuple[str, str], List[ExperimentRecord]] = {}
        for record in records:
            groups.setdefault((record.problem, record.mode.value), []).append(record)
        return {key: (power_law_fit(group), len(group)) for key, group in sorted(groups.items())}
