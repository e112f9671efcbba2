"""
Pydantic models for configuration, run results and experiment records
"""

from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.exceptions import InvalidArgumentError


# ========== ENUMS ==========

class ProblemKind(str, Enum):
    onemax = "onemax"
    dec3 = "dec3"
    htrap = "htrap"
    spinglass = "spinglass"


class RunMode(str, Enum):
    parameterless = "pl"
    fixed = "fixed"
    fixed_bisected = "fixed-bisected"


class EntryStatus(str, Enum):
    active = "active"
    terminated = "terminated"


class TerminationReason(str, Enum):
    converged = "converged"
    dominated = "dominated"
    generation_cap = "generation-cap"


class FailureReason(str, Enum):
    budget = "budget"
    exhausted = "exhausted"
    generation_cap = "generation-cap"
    stalled = "stalled"


# ========== ALGORITHM CONFIGURATION ==========

class HboaConfig(BaseModel):
    """Parameters of one fixed-size hBOA population"""

    model_config = ConfigDict(frozen=True)

    tournament_size: int = Field(2, ge=2)
    offspring_fraction: float = Field(1.0, gt=0.0, le=1.0)
    # None -> min(n, N // 20), at least 1
    rtr_window: Optional[int] = Field(None, ge=1)
    # None -> n (genome length)
    max_generations: Optional[int] = Field(None, ge=1)
    unbounded_generations: bool = False
    stall_generations: Optional[int] = Field(None, ge=1)
    # model-building penalty per accepted split, in units of ln(N)
    split_penalty: float = Field(1.0, gt=0.0)

    def window_for(self, n: int, population_size: int) -> int:
        """RTR window for a population of the given size"""
        if self.rtr_window is not None:
            if self.rtr_window > population_size:
                raise InvalidArgumentError(
                    f"rtr_window {self.rtr_window} exceeds the population size {population_size}"
                )
            return self.rtr_window
        return max(1, min(n, population_size // 20))

    def generation_limit(self, n: int) -> Optional[int]:
        if self.unbounded_generations:
            return None
        return self.max_generations if self.max_generations is not None else n

    def offspring_count(self, population_size: int) -> int:
        return int(self.offspring_fraction * population_size)


class ScheduleConfig(BaseModel):
    """Parameter-less scheduler settings"""

    model_config = ConfigDict(frozen=True)

    k: int = Field(2, ge=2)
    base_population: int = Field(10, ge=2)
    budget: int = Field(10**8, ge=1)
    terminate_populations: bool = True
    generation_cap: bool = True

    @model_validator(mode="after")
    def check_budget(self):
        if self.budget < self.base_population:
            raise ValueError(
                f"budget {self.budget} is smaller than the base population {self.base_population}"
            )
        return self

    def population_size(self, index: int) -> int:
        """N_i = N_0 * 2^i"""
        return self.base_population * (2 ** index)


# ========== PER-GENERATION RECORDS ==========

class GenerationStats(BaseModel):
    """Summary of a population after one generation"""

    generation: int
    best_fitness: float
    average_fitness: float
    evaluations: int

    @model_validator(mode="after")
    def check_order(self):
        if self.average_fitness > self.best_fitness + 1e-9:
            raise ValueError("average fitness exceeds best fitness")
        return self


class TraceRecord(BaseModel):
    """One scheduler step (or one fixed-size generation)"""

    step: int
    population: int
    size: int
    generation: int
    best_fitness: float
    average_fitness: float
    evaluations: int
    # parameter-less runs: best fitness seen in any population so far
    best_ever_fitness: Optional[float] = None


# ========== RESULTS ==========

class RunResult(BaseModel):
    """Outcome of one run"""

    problem: str
    n: int
    mode: RunMode
    success: bool
    evaluations: int
    flips: int = 0
    best_fitness: float
    best_bits: str
    generations: int
    seed: int
    population_size: Optional[int] = None
    largest_population: Optional[int] = None
    failure_reason: Optional[FailureReason] = None
    wall_time: float = 0.0


class RunRecord(BaseModel):
    """Per-run row of an experiment, enough to replay the run from its seed"""

    problem: str
    n: int
    mode: RunMode
    run: int
    seed: int
    population_size: Optional[int] = None
    success: bool
    evaluations: int
    flips: int
    best_fitness: float
    generations: int


class BisectionResult(BaseModel):
    """Minimal population size and the final bracketing interval"""

    n_min: int
    lower: int
    upper: int
    tried_sizes: List[int] = Field(default_factory=list)

    @property
    def interval(self):
        return self.lower, self.upper


class ExperimentRecord(BaseModel):
    """One (problem, size, mode) sweep point"""

    problem: str
    n: int
    mode: RunMode
    runs: int = Field(ge=1)
    successes: int = Field(ge=0)
    mean_evals: Optional[float] = None
    std_evals: Optional[float] = None
    nmin: Optional[int] = None
    master_seed: int

    @field_validator("successes")
    @classmethod
    def successes_within_runs(cls, v, info):
        runs = info.data.get("runs")
        if runs is not None and v > runs:
            raise ValueError(f"successes ({v}) exceed runs ({runs})")
        return v
