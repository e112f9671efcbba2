"""
Parameter-less Service - simulate a doubling collection of hBOA populations
Populations P_i of size N_0 * 2^i; one generation of P_i per k generations of P_(i-1)
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.core.exceptions import InvalidArgumentError
from app.core.genome import (
    EvalCounter,
    Population,
    Problem,
    RandomSource,
    evaluate_population,
    random_population,
)
from app.models.schemas import (
    EntryStatus,
    FailureReason,
    HboaConfig,
    RunMode,
    RunResult,
    ScheduleConfig,
    TerminationReason,
    TraceRecord,
)
from app.services.hboa_service import HBOAService

logger = logging.getLogger(__name__)


@dataclass
class PopulationEntry:
    """One member of the population collection"""

    index: int
    size: int
    population: Population
    generation: int = 0
    status: EntryStatus = EntryStatus.active
    reason: Optional[TerminationReason] = None
    init_evaluations: int = 0
    # offspring evaluations only; the pacing invariant is stated over this
    generation_evaluations: int = 0

    @property
    def active(self) -> bool:
        return self.status == EntryStatus.active

    def terminate(self, reason: TerminationReason) -> None:
        self.status = EntryStatus.terminated
        self.reason = reason


@dataclass
class TerminationVerdict:
    """Logged evidence behind each termination"""

    step: int
    index: int
    reason: TerminationReason
    average: float
    # for `dominated`: index and average of the dominating population
    dominating_index: Optional[int] = None
    dominating_average: Optional[float] = None


@dataclass
class ScheduleState:
    """
    Collection of populations plus the scheduling cursor

    Entries are created lazily and in index order, never skipping an index.
    """

    problem: Problem
    config: ScheduleConfig
    hboa_config: HboaConfig
    rng: RandomSource
    counter: EvalCounter = field(default_factory=EvalCounter)
    entries: List[PopulationEntry] = field(default_factory=list)
    cursor: int = 0
    steps: int = 0
    best_fitness: float = -np.inf
    best_bits: Optional[np.ndarray] = None
    verdicts: List[TerminationVerdict] = field(default_factory=list)
    exhausted: bool = False

    @property
    def k(self) -> int:
        return self.config.k

    @property
    def max_initialized(self) -> int:
        return len(self.entries) - 1

    def active_indices(self) -> List[int]:
        return [entry.index for entry in self.entries if entry.active]


class ParameterlessService:
    """Drive the population collection until the optimum is found or the budget runs out"""

    def __init__(self, hboa: Optional[HBOAService] = None):
        self.hboa = hboa or HBOAService()

    # =====================================================
    # PUBLIC API
    # =====================================================
    def new_state(
        self,
        problem: Problem,
        config: ScheduleConfig,
        hboa_config: HboaConfig,
        seed: int,
    ) -> ScheduleState:
        return ScheduleState(
            problem=problem,
            config=config,
            hboa_config=hboa_config,
            rng=RandomSource(seed),
        )

    def schedule_step(self, state: ScheduleState) -> int:
        """
        Execute one generation of the population at the cursor and move the cursor

        After the generation: if generation mod k == 0 the cursor advances to the
        next larger active-or-uncreated index (creating it when needed); otherwise
        it resets to the smallest active index. Returns the executed index.
        """
        if not state.entries:
            self._initialize_entry(state)
            state.cursor = 0

        index = state.cursor
        entry = state.entries[index]
        if not entry.active:
            raise InvalidArgumentError(f"population {index} is terminated and cannot run")

        before = state.counter.evaluations
        entry.population, stats = self.hboa.generation(
            entry.population,
            state.hboa_config,
            state.problem,
            state.rng,
            state.counter,
            generation_index=entry.generation + 1,
        )
        entry.generation += 1
        entry.generation_evaluations += state.counter.evaluations - before
        state.steps += 1
        self._record_best(state, entry.population)

        if state.config.terminate_populations or state.config.generation_cap:
            reason = self.check_termination(state, index)
            if reason is not None:
                self._terminate(state, index, reason)
            if state.config.terminate_populations:
                self._recheck_dominance(state, below=index)

        if entry.generation % state.k == 0:
            self._advance_cursor(state, index)
        else:
            self._reset_cursor(state)
        return index

    def check_termination(self, state: ScheduleState, index: int) -> Optional[TerminationReason]:
        """
        converged: every member identical
        dominated: an initialized larger population has a strictly greater average
        generation-cap: generation >= n
        """
        entry = state.entries[index]
        if state.config.terminate_populations:
            if entry.population.is_converged():
                return TerminationReason.converged
            if self._dominating(state, index) is not None:
                return TerminationReason.dominated
        if state.config.generation_cap and entry.generation >= state.problem.n:
            return TerminationReason.generation_cap
        return None

    def run_parameterless(
        self,
        problem: Problem,
        hboa_config: HboaConfig,
        seed: int,
        budget: Optional[int] = None,
        config: Optional[ScheduleConfig] = None,
        on_step: Optional[Callable[[TraceRecord], None]] = None,
    ) -> RunResult:
        """
        Repeat schedule steps until some population holds an optimal genome
        (success) or total evaluations exceed the budget (failure)
        """
        config = config or ScheduleConfig()
        if budget is not None:
            if budget < config.base_population:
                raise InvalidArgumentError(
                    f"budget {budget} is smaller than the base population {config.base_population}"
                )
            config = config.model_copy(update={"budget": budget})

        started = time.perf_counter()
        state = self.new_state(problem, config, hboa_config, seed)
        logger.info(
            f"🚀 Parameter-less hBOA on {problem.describe()} (seed={seed}, budget={config.budget})"
        )

        self._initialize_entry(state)
        failure: Optional[FailureReason] = None
        while not problem.is_optimal(state.best_fitness):
            if state.counter.evaluations > config.budget:
                failure = FailureReason.budget
                break
            if state.exhausted:
                failure = FailureReason.exhausted
                break

            executed = self.schedule_step(state)
            if on_step is not None:
                entry = state.entries[executed]
                on_step(
                    TraceRecord(
                        step=state.steps,
                        population=executed,
                        size=entry.size,
                        generation=entry.generation,
                        best_fitness=entry.population.best_fitness(),
                        average_fitness=entry.population.average_fitness(),
                        evaluations=state.counter.evaluations,
                        best_ever_fitness=float(state.best_fitness),
                    )
                )

        success = problem.is_optimal(state.best_fitness)
        if success:
            logger.info(
                f"✅ Optimum found after {state.counter.evaluations} evaluations "
                f"(largest population P{state.max_initialized}, N={state.entries[-1].size})"
            )
        else:
            logger.warning(
                f"⚠️ Run failed ({failure.value}) after {state.counter.evaluations} evaluations, "
                f"best={state.best_fitness:.6g}"
            )

        return RunResult(
            problem=problem.problem_id,
            n=problem.n,
            mode=RunMode.parameterless,
            success=success,
            evaluations=state.counter.evaluations,
            flips=state.counter.flips,
            best_fitness=float(state.best_fitness),
            best_bits="".join(map(str, state.best_bits.tolist())),
            generations=state.steps,
            seed=seed,
            largest_population=state.max_initialized,
            failure_reason=None if success else failure,
            wall_time=time.perf_counter() - started,
        )

    # =====================================================
    # Cursor movement
    # =====================================================
    def _advance_cursor(self, state: ScheduleState, index: int) -> None:
        for candidate in range(index + 1, len(state.entries)):
            if state.entries[candidate].active:
                state.cursor = candidate
                return
        self._create_next(state)

    def _reset_cursor(self, state: ScheduleState) -> None:
        active = state.active_indices()
        if active:
            state.cursor = active[0]
        else:
            self._create_next(state)

    def _create_next(self, state: ScheduleState) -> None:
        size = state.config.population_size(len(state.entries))
        remaining = state.config.budget - state.counter.evaluations
        if size > remaining and not state.active_indices():
            # nothing left to run and no room to start a larger population
            state.exhausted = True
            return
        self._initialize_entry(state)
        state.cursor = state.max_initialized

    # =====================================================
    # Populations
    # =====================================================
    def _initialize_entry(self, state: ScheduleState) -> PopulationEntry:
        index = len(state.entries)
        size = state.config.population_size(index)
        before = state.counter.evaluations
        population = random_population(state.problem.n, size, state.rng)
        evaluate_population(population, state.problem, state.counter)

        entry = PopulationEntry(
            index=index,
            size=size,
            population=population,
            init_evaluations=state.counter.evaluations - before,
        )
        state.entries.append(entry)
        self._record_best(state, population)
        logger.info(f"📊 Population P{index} created (N={size})")
        return entry

    def _record_best(self, state: ScheduleState, population: Population) -> None:
        best_index = population.best_index()
        fitness = float(population.fitness[best_index])
        if fitness > state.best_fitness:
            state.best_fitness = fitness
            state.best_bits = population.bits[best_index].copy()

    def _dominating(self, state: ScheduleState, index: int) -> Optional[Tuple[int, float]]:
        """First initialized larger population with a strictly greater average fitness"""
        average = state.entries[index].population.average_fitness()
        for larger in state.entries[index + 1:]:
            larger_average = larger.population.average_fitness()
            if larger_average > average:
                return larger.index, larger_average
        return None

    def _terminate(self, state: ScheduleState, index: int, reason: TerminationReason) -> None:
        entry = state.entries[index]
        average = entry.population.average_fitness()
        verdict = TerminationVerdict(step=state.steps, index=index, reason=reason, average=average)
        if reason == TerminationReason.dominated:
            verdict.dominating_index, verdict.dominating_average = self._dominating(state, index)
        entry.terminate(reason)
        state.verdicts.append(verdict)
        logger.info(
            f"🛑 Population P{index} (N={entry.size}) terminated: {reason.value} "
            f"after {entry.generation} generations"
        )

    def _recheck_dominance(self, state: ScheduleState, below: int) -> None:
        for entry in state.entries[:below]:
            if entry.active and self._dominating(state, entry.index) is not None:
                self._terminate(state, entry.index, TerminationReason.dominated)
