"""
hBOA Service - one fixed-size population of the hierarchical BOA
Selection, model building, sampling and restricted tournament replacement
"""

import logging
import time
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.core.exceptions import ContractViolationError, InvalidArgumentError
from app.core.genome import (
    EvalCounter,
    Population,
    Problem,
    RandomSource,
    evaluate_population,
    hamming_distances,
    random_population,
)
from app.models.schemas import (
    FailureReason,
    GenerationStats,
    HboaConfig,
    RunMode,
    RunResult,
)
from app.services.bayesnet_service import BayesNetService

logger = logging.getLogger(__name__)

# (offspring index, window member indices, chosen member, replaced?)
RtrDecision = Tuple[int, np.ndarray, int, bool]


class HBOAService:
    """Generation loop of the hierarchical BOA for a single population size"""

    def __init__(self, bayesnet: Optional[BayesNetService] = None):
        self.bayesnet = bayesnet or BayesNetService()

    # =====================================================
    # Operators
    # =====================================================
    def select(self, population: Population, count: int, s: int, rng: RandomSource) -> Population:
        """
        count independent s-ary tournaments, contestants drawn with replacement

        Winner is the fittest contestant; ties go to the first drawn.
        """
        if count < 1:
            raise InvalidArgumentError(f"selection count must be positive, got {count}")
        if s < 1:
            raise InvalidArgumentError(f"tournament size must be positive, got {s}")
        if not population.evaluated:
            raise ContractViolationError("selection requires an evaluated population")

        contestants = rng.integers(population.size, size=(count, s))
        scores = population.fitness[contestants]
        winners = contestants[np.arange(count), np.argmax(scores, axis=1)]
        return Population(population.bits[winners], population.fitness[winners])

    def rtr_incorporate(
        self,
        population: Population,
        offspring: Population,
        w: int,
        rng: RandomSource,
        decisions: Optional[List[RtrDecision]] = None,
    ) -> Population:
        """
        Restricted tournament replacement

        Each offspring, in order, competes with the closest (Hamming) member of a
        window of w distinct members (ties -> lowest member index) and replaces it
        only when strictly fitter.
        """
        if w < 1 or w > population.size:
            raise InvalidArgumentError(f"RTR window {w} must lie in [1, {population.size}]")
        if not population.evaluated or not offspring.evaluated:
            raise ContractViolationError("RTR requires evaluated populations")
        if offspring.n != population.n:
            raise InvalidArgumentError("offspring and population genome lengths differ")

        result = population.copy()
        bits, fitness = result.bits, result.fitness
        for index in range(offspring.size):
            candidate = offspring.bits[index]
            window = rng.choice_distinct(result.size, w)
            distances = hamming_distances(bits[window], candidate)
            closest = int(window[distances == distances.min()].min())

            replaced = offspring.fitness[index] > fitness[closest]
            if replaced:
                bits[closest] = candidate
                fitness[closest] = offspring.fitness[index]
            if decisions is not None:
                decisions.append((index, window.copy(), closest, bool(replaced)))
        return result

    # =====================================================
    # One generation
    # =====================================================
    def generation(
        self,
        population: Population,
        cfg: HboaConfig,
        problem: Problem,
        rng: RandomSource,
        counter: EvalCounter,
        generation_index: int = 0,
    ) -> Tuple[Population, GenerationStats]:
        """select -> learn -> sample -> evaluate -> RTR"""
        population.require_evaluated()
        size = population.size

        offspring_count = cfg.offspring_count(size)
        if offspring_count < 1:
            raise InvalidArgumentError(
                f"offspring_fraction {cfg.offspring_fraction} yields no offspring for N={size}"
            )

        selected = self.select(population, size, cfg.tournament_size, rng)
        model = self.bayesnet.learn_model(selected, cfg.split_penalty)
        offspring = self.bayesnet.sample_model(model, offspring_count, rng)
        evaluate_population(offspring, problem, counter)

        window = cfg.window_for(problem.n, size)
        result = self.rtr_incorporate(population, offspring, window, rng)

        stats = GenerationStats(
            generation=generation_index,
            best_fitness=result.best_fitness(),
            average_fitness=result.average_fitness(),
            evaluations=counter.evaluations,
        )
        logger.debug(
            f"🔁 N={size} gen {generation_index}: best={stats.best_fitness:.4f} "
            f"avg={stats.average_fitness:.4f} evals={stats.evaluations}"
        )
        return result, stats

    # =====================================================
    # Complete fixed-size run
    # =====================================================
    def run_fixed(
        self,
        problem: Problem,
        population_size: int,
        cfg: HboaConfig,
        seed: int,
        on_generation: Optional[Callable[[GenerationStats], None]] = None,
    ) -> RunResult:
        """
        Run one population until the optimum is found or the generation cap hits

        Returns the evaluations consumed on failure as well as on success.
        """
        if population_size < 2:
            raise InvalidArgumentError(f"population size must be at least 2, got {population_size}")
        limit = cfg.generation_limit(problem.n)
        if limit is None and problem.known_optimum is None:
            raise InvalidArgumentError(
                "a run needs a stopping rule: known optimum or a generation cap"
            )

        started = time.perf_counter()
        rng = RandomSource(seed)
        counter = EvalCounter()

        population = random_population(problem.n, population_size, rng)
        evaluate_population(population, problem, counter)

        best_index = population.best_index()
        best_bits = population.bits[best_index].copy()
        best_fitness = float(population.fitness[best_index])
        generations = 0
        stalled_for = 0
        failure: Optional[FailureReason] = None

        while not problem.is_optimal(best_fitness):
            if limit is not None and generations >= limit:
                failure = FailureReason.generation_cap
                break
            if cfg.stall_generations is not None and stalled_for >= cfg.stall_generations:
                failure = FailureReason.stalled
                break

            generations += 1
            population, stats = self.generation(
                population, cfg, problem, rng, counter, generation_index=generations
            )
            if on_generation is not None:
                on_generation(stats)

            if stats.best_fitness > best_fitness:
                best_index = population.best_index()
                best_bits = population.bits[best_index].copy()
                best_fitness = stats.best_fitness
                stalled_for = 0
            else:
                stalled_for += 1

        success = problem.is_optimal(best_fitness)
        if success:
            logger.debug(f"✅ {problem.describe()} N={population_size}: optimum after {counter.evaluations} evaluations")
        else:
            logger.debug(f"⚠️ {problem.describe()} N={population_size}: {failure.value} after {generations} generations")

        return RunResult(
            problem=problem.problem_id,
            n=problem.n,
            mode=RunMode.fixed,
            success=success,
            evaluations=counter.evaluations,
            flips=counter.flips,
            best_fitness=best_fitness,
            best_bits="".join(map(str, best_bits.tolist())),
            generations=generations,
            seed=seed,
            population_size=population_size,
            failure_reason=None if success else failure,
            wall_time=time.perf_counter() - started,
        )
