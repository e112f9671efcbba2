import numpy as np
import pytest

from app.core.exceptions import ContractViolationError, InvalidArgumentError
from app.core.genome import (
    EvalCounter,
    OneMaxProblem,
    RandomSource,
    evaluate_population,
    hamming_distances,
    random_population,
)
from app.models.schemas import FailureReason, HboaConfig
from app.services.benchmark_service import build_problem
from app.services.hboa_service import HBOAService
from conftest import population_of


@pytest.fixture
def hboa():
    return HBOAService()


# ========== select ==========

def test_select_from_identical_population(hboa, rng):
    population = population_of(["0110"] * 5, [2.0] * 5)
    selected = hboa.select(population, 12, 2, rng)
    assert selected.size == 12
    assert (selected.bits == population.bits[0]).all()


def test_binary_tournament_winner_frequency(hboa, rng):
    population = population_of(["0", "1"], [0.0, 1.0])
    selected = hboa.select(population, 10000, 2, rng)
    assert (selected.fitness == 1.0).mean() == pytest.approx(0.75, abs=0.02)


def test_quaternary_tournament_best_frequency(hboa, rng):
    population = population_of(["00", "01", "10", "11"], [0.0, 1.0, 2.0, 3.0])
    selected = hboa.select(population, 10000, 4, rng)
    assert (selected.fitness == 3.0).mean() == pytest.approx(1 - 0.75**4, abs=0.02)


def test_select_requires_evaluated_population(hboa, rng):
    with pytest.raises(ContractViolationError):
        hboa.select(population_of(["01", "10"]), 2, 2, rng)


# ========== rtr_incorporate ==========

def test_rtr_replaces_nearest_worse_member(hboa, rng):
    population = population_of(["000", "111"], [0.0, 3.0])
    offspring = population_of(["001"], [1.0])
    result = hboa.rtr_incorporate(population, offspring, 2, rng)
    assert [list(row) for row in result.bits] == [[0, 0, 1], [1, 1, 1]]
    assert result.fitness.tolist() == [1.0, 3.0]


def test_rtr_equal_fitness_duplicate_changes_nothing(hboa, rng):
    population = population_of(["010", "111", "100"], [1.0, 3.0, 1.0])
    offspring = population_of(["010"], [1.0])
    result = hboa.rtr_incorporate(population, offspring, 3, rng)
    assert np.array_equal(result.bits, population.bits)
    assert np.array_equal(result.fitness, population.fitness)


@pytest.mark.parametrize("w", [1, 2, 3])
def test_rtr_worse_offspring_changes_nothing(hboa, rng, w):
    population = population_of(["010", "111", "100"], [1.0, 3.0, 1.0])
    offspring = population_of(["000", "011"], [0.0, 0.5])
    result = hboa.rtr_incorporate(population, offspring, w, rng)
    assert np.array_equal(result.bits, population.bits)


def test_rtr_rejects_bad_window(hboa, rng):
    population = population_of(["0", "1"], [0.0, 1.0])
    with pytest.raises(InvalidArgumentError):
        hboa.rtr_incorporate(population, population, 3, rng)


def test_rtr_decisions_pick_a_nearest_window_member(hboa):
    rng = RandomSource(31)
    problem = build_problem("dec3", 12)
    counter = EvalCounter()
    population = evaluate_population(random_population(12, 40, rng), problem, counter)
    offspring = evaluate_population(random_population(12, 40, rng), problem, counter)

    decisions = []
    result = hboa.rtr_incorporate(population, offspring, 6, rng, decisions=decisions)

    replay = population.copy()
    assert len(decisions) == offspring.size
    for index, window, closest, replaced in decisions:
        assert len(set(window.tolist())) == 6
        distances = hamming_distances(replay.bits[window], offspring.bits[index])
        nearest = window[distances == distances.min()]
        assert closest == nearest.min()
        assert replaced == (offspring.fitness[index] > replay.fitness[closest])
        if replaced:
            replay.bits[closest] = offspring.bits[index]
            replay.fitness[closest] = offspring.fitness[index]
    assert np.array_equal(replay.bits, result.bits)
    assert result.best_fitness() >= population.best_fitness()


# ========== generation ==========

def test_generation_keeps_an_optimal_converged_population(hboa, rng, counter):
    problem = OneMaxProblem(6)
    population = population_of(["111111"] * 20, [6.0] * 20)
    result, stats = hboa.generation(population, HboaConfig(), problem, rng, counter)
    assert np.array_equal(result.bits, population.bits)
    assert stats.best_fitness == stats.average_fitness == 6.0
    assert counter.evaluations == 20


def test_generation_never_loses_the_best(hboa, rng, counter):
    problem = OneMaxProblem(10)
    population = evaluate_population(random_population(10, 100, rng), problem, counter)
    before = population.best_fitness()
    result, stats = hboa.generation(population, HboaConfig(), problem, rng, counter, generation_index=1)
    assert result.size == 100
    assert stats.best_fitness >= before
    assert counter.evaluations == 200


def test_generation_honours_offspring_fraction(hboa, rng, counter):
    problem = OneMaxProblem(10)
    population = evaluate_population(random_population(10, 40, rng), problem, counter)
    hboa.generation(population, HboaConfig(offspring_fraction=0.5), problem, rng, counter)
    assert counter.evaluations == 40 + 20


def test_generation_without_offspring_is_rejected(hboa, rng, counter):
    problem = OneMaxProblem(4)
    population = evaluate_population(random_population(4, 4, rng), problem, counter)
    with pytest.raises(InvalidArgumentError):
        hboa.generation(population, HboaConfig(offspring_fraction=0.1), problem, rng, counter)


# ========== run_fixed ==========

def test_run_fixed_onemax_within_generation_bound(hboa):
    results = [hboa.run_fixed(OneMaxProblem(5), 50, HboaConfig(), seed=seed) for seed in range(10)]
    solved = [r for r in results if r.success]

    assert len(solved) >= 8
    for result in solved:
        assert result.evaluations <= 50 * (5 + 1)
        assert result.evaluations == 50 * (result.generations + 1)
        assert result.best_bits == "11111"


def test_run_fixed_failure_reports_consumed_evaluations(hboa):
    result = hboa.run_fixed(build_problem("dec3", 30), 2, HboaConfig(), seed=3)
    assert result.evaluations >= 2
    if not result.success:
        assert result.failure_reason == FailureReason.generation_cap
        assert result.generations == 30
        assert result.evaluations == 2 * 31


def test_run_fixed_is_deterministic(hboa):
    problem = build_problem("dec3", 12)
    first = hboa.run_fixed(problem, 30, HboaConfig(), seed=77)
    second = hboa.run_fixed(problem, 30, HboaConfig(), seed=77)
    assert first.model_dump(exclude={"wall_time"}) == second.model_dump(exclude={"wall_time"})


def test_run_fixed_stall_rule(hboa):
    cfg = HboaConfig(stall_generations=1, max_generations=500)
    result = hboa.run_fixed(build_problem("dec3", 30), 4, cfg, seed=5)
    if not result.success:
        assert result.failure_reason in (FailureReason.stalled, FailureReason.generation_cap)


def test_run_fixed_rejects_tiny_population(hboa):
    with pytest.raises(InvalidArgumentError):
        hboa.run_fixed(OneMaxProblem(5), 1, HboaConfig(), seed=0)


def test_unbounded_run_needs_known_optimum(hboa):
    problem = build_problem("spinglass", 9, seed=1)
    with pytest.raises(InvalidArgumentError):
        hboa.run_fixed(problem, 10, HboaConfig(unbounded_generations=True), seed=0)


def test_config_validation():
    with pytest.raises(ValueError):
        HboaConfig(tournament_size=1)
    with pytest.raises(ValueError):
        HboaConfig(offspring_fraction=0.0)
    assert HboaConfig().window_for(30, 1000) == 30
    assert HboaConfig().window_for(30, 10) == 1
    assert HboaConfig(rtr_window=5).window_for(30, 5) == 5
    with pytest.raises(ValueError):
        HboaConfig(split_penalty=0.0)


def test_explicit_window_larger_than_population_is_rejected():
    with pytest.raises(InvalidArgumentError):
        HboaConfig(rtr_window=8).window_for(30, 5)
