import itertools

import numpy as np
import pytest

from app.core.exceptions import (
    ConfigurationError,
    InvalidArgumentError,
    UnsolvableAtCeilingError,
)
from app.core.genome import OneMaxProblem, RandomSource
from app.db.best_known import BestKnownStore
from app.models.schemas import ExperimentRecord, HboaConfig, RunMode, ScheduleConfig
from app.services.benchmark_service import build_problem
from app.services.experiment_service import (
    ExperimentService,
    brute_force_ground_state,
    power_law_fit,
)
from app.services.spinglass_service import generate_instance, spin_energy, spin_energy_batch
from conftest import ThresholdHBOA, uniform_instance


# ========== bisection ==========

def test_bisection_brackets_and_narrows():
    fake = ThresholdHBOA(threshold=37)
    result = ExperimentService(hboa=fake).bisect_population_size(OneMaxProblem(10), HboaConfig(), runs=3)

    assert result.tried_sizes == [10, 20, 40, 30, 36, 38]
    assert result.n_min == 38
    assert result.interval == (36, 38)
    lower, upper = result.interval
    assert upper - lower <= 0.1 * lower


def test_bisection_returns_base_size_when_it_passes():
    result = ExperimentService(hboa=ThresholdHBOA(threshold=0)).bisect_population_size(
        OneMaxProblem(10), HboaConfig(), runs=30
    )
    assert result.n_min == 10
    assert result.interval == (10, 10)


def test_bisection_uses_fresh_seeds_per_size_and_stops_at_first_failure():
    fake = ThresholdHBOA(threshold=37)
    ExperimentService(hboa=fake).bisect_population_size(OneMaxProblem(10), HboaConfig(), runs=3)

    assert [size for size, _ in fake.calls].count(10) == 1
    assert [size for size, _ in fake.calls].count(40) == 3
    assert len(set(seed for _, seed in fake.calls)) == len(fake.calls)


def test_bisection_gives_up_at_the_ceiling():
    fake = ThresholdHBOA(threshold=10**9)
    with pytest.raises(UnsolvableAtCeilingError):
        ExperimentService(hboa=fake).bisect_population_size(
            OneMaxProblem(10), HboaConfig(), runs=2, ceiling=100
        )


def test_midpoint_falls_back_to_odd_sizes():
    assert ExperimentService._midpoint(20, 40) == 30
    assert ExperimentService._midpoint(30, 40) == 36
    assert ExperimentService._midpoint(18, 20) == 19


def test_bisection_on_onemax_is_deterministic():
    service = ExperimentService()
    first = service.bisect_population_size(OneMaxProblem(10), HboaConfig(), runs=5, master_seed=3)
    second = service.bisect_population_size(OneMaxProblem(10), HboaConfig(), runs=5, master_seed=3)

    assert first == second
    assert first.n_min in first.tried_sizes
    assert first.n_min <= 160
    lower, upper = first.interval
    assert upper - lower <= 0.1 * lower


def test_onemax_is_mostly_solved_at_small_fixed_sizes():
    hboa = ExperimentService().hboa
    results = [hboa.run_fixed(OneMaxProblem(10), 40, HboaConfig(), seed=seed) for seed in range(20)]
    assert sum(r.success for r in results) >= 14


def test_bisection_stops_on_adjacent_sizes_below_ten():
    fake = ThresholdHBOA(threshold=9)
    result = ExperimentService(hboa=fake).bisect_population_size(
        OneMaxProblem(5), HboaConfig(), runs=1, base_population=4
    )
    assert result.tried_sizes == [4, 8, 16, 12, 10, 9]
    assert result.n_min == 9
    assert result.interval == (8, 9)


def test_bisection_needs_known_optimum():
    problem = OneMaxProblem(5)
    problem.known_optimum = None
    with pytest.raises(InvalidArgumentError):
        ExperimentService().bisect_population_size(problem, HboaConfig())


# ========== run_experiment ==========

SMALL_SCHEDULE = ScheduleConfig(budget=10**5)


def test_experiment_rejects_zero_runs():
    with pytest.raises(InvalidArgumentError):
        ExperimentService().run_experiment("onemax", [8], runs=0)


def test_experiment_validates_sizes_up_front():
    with pytest.raises(InvalidArgumentError):
        ExperimentService().run_experiment("dec3", [30, 31], runs=1)


def test_parameterless_sweep_records():
    output = ExperimentService().run_experiment(
        "onemax", [8, 12], runs=3, master_seed=5, schedule=SMALL_SCHEDULE
    )
    assert [(r.n, r.runs, r.successes) for r in output.records] == [(8, 3, 3), (12, 3, 3)]
    assert all(r.mode == RunMode.parameterless for r in output.records)
    assert all(r.nmin is None for r in output.records)
    assert len(output.runs) == 6
    evaluations = [row.evaluations for row in output.runs if row.n == 8]
    assert output.records[0].mean_evals == pytest.approx(np.mean(evaluations))


def test_sweep_is_replayable_from_recorded_seeds():
    service = ExperimentService()
    output = service.run_experiment("dec3", [12], runs=2, master_seed=8, schedule=SMALL_SCHEDULE)
    row = output.runs[1]
    replay = service.parameterless.run_parameterless(
        build_problem("dec3", 12), HboaConfig(), row.seed, config=SMALL_SCHEDULE
    )
    assert replay.evaluations == row.evaluations
    assert replay.best_fitness == row.best_fitness


def test_sweeps_with_equal_master_seed_are_identical():
    first = ExperimentService().run_experiment("dec3", [12], runs=2, master_seed=1, schedule=SMALL_SCHEDULE)
    second = ExperimentService().run_experiment("dec3", [12], runs=2, master_seed=1, schedule=SMALL_SCHEDULE)
    assert first.records == second.records
    assert first.runs == second.runs


def test_fixed_bisected_sweep_reports_nmin():
    fake = ThresholdHBOA(threshold=15)
    output = ExperimentService(hboa=fake).run_experiment(
        "onemax", [6], runs=4, mode="fixed-bisected", bisection_runs=2
    )
    record = output.records[0]
    assert record.nmin == 15
    assert record.successes == 4
    assert record.mean_evals == 15


def test_spinglass_sweep_uses_the_oracle():
    output = ExperimentService().run_experiment("spinglass", [9], runs=3, master_seed=2, schedule=SMALL_SCHEDULE)
    assert output.records[0].successes == 3
    assert len({row.seed for row in output.runs}) == 3


def test_large_spinglass_without_ground_truth_is_a_configuration_error(tmp_path):
    store = BestKnownStore(tmp_path / "best.json")
    with pytest.raises(ConfigurationError):
        ExperimentService(best_known=store).run_experiment("spinglass", [36], runs=1)


def test_large_spinglass_ground_truth_comes_from_the_store(tmp_path):
    store = BestKnownStore(tmp_path / "best.json")
    service = ExperimentService(best_known=store)
    seed = RandomSource.derive_seed(0, "spinglass", 36, "instance", 0)
    instance = generate_instance(6, RandomSource(seed))
    store.update(instance.fingerprint(), -72, 6, seed)

    assert service.ground_truth(instance) == -72


# ========== oracle ==========

def test_oracle_on_ferromagnet(ferromagnet4):
    energy, witness = brute_force_ground_state(ferromagnet4)
    assert energy == -32
    assert witness.all()


def test_oracle_on_antiferromagnet():
    energy, witness = brute_force_ground_state(uniform_instance(4, 1))
    assert energy == -32
    assert spin_energy(uniform_instance(4, 1), witness) == -32


def test_oracle_matches_full_enumeration():
    instance = generate_instance(4, RandomSource(77))
    energy, witness = brute_force_ground_state(instance)
    everything = np.array(list(itertools.product([0, 1], repeat=16)), dtype=np.uint8)
    assert energy == spin_energy_batch(instance, everything).min()
    assert spin_energy(instance, witness) == energy
    assert witness[0] == 1


def test_oracle_beats_random_assignments():
    instance = generate_instance(4, RandomSource(5))
    energy, _ = brute_force_ground_state(instance)
    sampled = spin_energy_batch(instance, RandomSource(6).bits(1000, 16))
    assert (energy <= sampled).all()
    assert (energy < sampled).any()


def test_oracle_refuses_large_grids():
    with pytest.raises(InvalidArgumentError):
        brute_force_ground_state(generate_instance(6, RandomSource(0)))


# ========== power-law fit ==========

def test_power_law_of_quadratic_means():
    assert power_law_fit([(n, 3.0 * n**2) for n in (10, 20, 40, 80)]) == pytest.approx(2.0, abs=1e-6)


def test_power_law_with_noise():
    rng = RandomSource(1)
    sizes = [30, 60, 90, 120, 150]
    noise = 1 + rng.random(len(sizes)) * 0.02 - 0.01
    points = [(n, 5.0 * n**1.5 * e) for n, e in zip(sizes, noise)]
    assert power_law_fit(points) == pytest.approx(1.5, abs=0.05)


def test_power_law_of_constant_means():
    assert power_law_fit([(n, 42.0) for n in (3, 9, 27)]) == pytest.approx(0.0, abs=1e-6)


def test_power_law_from_records_skips_missing_means():
    records = [
        ExperimentRecord(problem="dec3", n=n, mode="pl", runs=1, successes=1, mean_evals=float(n), master_seed=0)
        for n in (30, 60, 90)
    ]
    records.append(ExperimentRecord(problem="dec3", n=120, mode="pl", runs=1, successes=0, master_seed=0))
    assert power_law_fit(records) == pytest.approx(1.0, abs=1e-6)


def test_power_law_needs_three_points():
    with pytest.raises(InvalidArgumentError):
        power_law_fit([(10, 100.0), (20, 400.0)])


def test_fit_exponent_groups_by_problem_and_mode():
    records = [
        ExperimentRecord(problem="dec3", n=n, mode=mode, runs=1, successes=1,
                         mean_evals=float(n ** power), master_seed=0)
        for mode, power in (("pl", 2), ("fixed-bisected", 1))
        for n in (30, 60, 90)
    ]
    fits = ExperimentService().fit_exponent(records)
    assert list(fits) == [("dec3", "fixed-bisected"), ("dec3", "pl")]
    assert fits[("dec3", "pl")][0] == pytest.approx(2.0, abs=1e-6)
    assert fits[("dec3", "fixed-bisected")] == (pytest.approx(1.0, abs=1e-6), 3)


def test_ground_state_follows_the_configured_oracle_limit(monkeypatch, ferromagnet4):
    monkeypatch.setenv("HBOA_ORACLE_MAX_SPINS", "9")
    with pytest.raises(InvalidArgumentError):
        ExperimentService().ground_state(ferromagnet4)
