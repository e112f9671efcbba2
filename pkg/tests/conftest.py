import numpy as np
import pytest

from app.core.config import get_settings
from app.core.genome import EvalCounter, Population, RandomSource
from app.models.schemas import GenerationStats, RunMode, RunResult
from app.services.spinglass_service import SpinGlassInstance


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def rng():
    return RandomSource(12345)


@pytest.fixture
def counter():
    return EvalCounter()


def uniform_instance(side: int, coupling: int) -> SpinGlassInstance:
    couplings = np.full((side, side), coupling, dtype=np.int8)
    return SpinGlassInstance(side=side, right=couplings, down=couplings.copy())


@pytest.fixture
def ferromagnet4():
    return uniform_instance(4, -1)


class StandingHBOA:
    """
    Stand-in generation operator: keeps the population as is and charges
    one evaluation per member, so scheduler bookkeeping can be traced cheaply
    """

    def generation(self, population, cfg, problem, rng, counter, generation_index=0):
        counter.add_evaluations(population.size)
        stats = GenerationStats(
            generation=generation_index,
            best_fitness=population.best_fitness(),
            average_fitness=population.average_fitness(),
            evaluations=counter.evaluations,
        )
        return population, stats


class ThresholdHBOA:
    """Fixed-size runs succeed exactly when the population is at least `threshold`"""

    def __init__(self, threshold):
        self.threshold = threshold
        self.calls = []

    def run_fixed(self, problem, population_size, cfg, seed, on_generation=None):
        self.calls.append((population_size, seed))
        success = population_size >= self.threshold
        return RunResult(
            problem=problem.problem_id,
            n=problem.n,
            mode=RunMode.fixed,
            success=success,
            evaluations=population_size,
            best_fitness=float(problem.known_optimum if success else 0.0),
            best_bits="0" * problem.n,
            generations=1,
            seed=seed,
            population_size=population_size,
        )


@pytest.fixture
def standing_hboa():
    return StandingHBOA()


def population_of(rows, fitness=None) -> Population:
    bits = np.array([[int(c) for c in row] for row in rows], dtype=np.uint8)
    return Population(bits, fitness)
