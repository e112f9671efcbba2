"""
Core types - bitstring genomes, populations, random source, problem interface
Shared by every service; nothing here depends on a concrete optimizer
"""

import hashlib
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Tuple

import numpy as np

from app.core.exceptions import ContractViolationError, InvalidArgumentError

logger = logging.getLogger(__name__)

# Absolute tolerance when comparing a fitness against a known optimum
OPTIMUM_TOLERANCE = 1e-9

U64_MASK = (1 << 64) - 1


# =====================================================
# Evaluation accounting
# =====================================================
@dataclass
class EvalCounter:
    """Completed fitness evaluations and local-search trial flips"""

    evaluations: int = 0
    flips: int = 0

    def add_evaluations(self, count: int = 1) -> None:
        self.evaluations += count

    def add_flips(self, count: int) -> None:
        self.flips += count


# =====================================================
# Random source
# =====================================================
class RandomSource:
    """
    Seeded random stream (PCG64)

    Same seed -> identical stream of draws. One instance per run; never shared
    between concurrently executing runs.
    """

    def __init__(self, seed: int):
        if seed < 0 or seed > U64_MASK:
            raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {seed}")
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    @staticmethod
    def derive_seed(master: int, *parts) -> int:
        """
        Counter-based seed split: hash(master, parts...) -> u64

        Lets any single run be replayed from (master seed, problem id, size, index)
        without storing random streams.
        """
        payload = "|".join([str(int(master))] + [str(part) for part in parts])
        digest = hashlib.blake2b(payload.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")

    def bits(self, *shape: int) -> np.ndarray:
        """Uniform independent bits as uint8"""
        return self._generator.integers(0, 2, size=shape, dtype=np.uint8)

    def integers(self, m: int, size=None):
        """Uniform integer(s) in [0, m)"""
        return self._generator.integers(0, m, size=size)

    def random(self, size=None):
        """Uniform real(s) in [0, 1)"""
        return self._generator.random(size)

    def choice_distinct(self, m: int, w: int) -> np.ndarray:
        """w distinct indices drawn uniformly from [0, m)"""
        return self._generator.choice(m, size=w, replace=False)


# =====================================================
# Genomes and populations
# =====================================================
@dataclass
class Genome:
    """Fixed-length bitstring with cached fitness"""

    bits: np.ndarray
    fitness: Optional[float] = None

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 1:
            raise InvalidArgumentError("genome bits must be one-dimensional")

    @property
    def n(self) -> int:
        return int(self.bits.shape[0])

    @property
    def evaluated(self) -> bool:
        return self.fitness is not None

    def as_string(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_string(cls, text: str) -> "Genome":
        text = text.strip()
        if not text or set(text) - {"0", "1"}:
            raise InvalidArgumentError(f"genome string must be a non-empty run of 0s and 1s, got '{text}'")
        return cls(np.array([c == "1" for c in text], dtype=np.uint8))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Genome):
            return NotImplemented
        return np.array_equal(self.bits, other.bits) and self.fitness == other.fitness


@dataclass
class Population:
    """
    Ordered multiset of genomes stored row-wise

    bits: (N, n) uint8 matrix; fitness: (N,) float64, NaN until evaluated.
    """

    bits: np.ndarray
    fitness: np.ndarray = field(default=None)

    def __post_init__(self):
        self.bits = np.ascontiguousarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 2:
            raise InvalidArgumentError("population bits must be an (N, n) matrix")
        if self.bits.shape[0] < 1:
            raise InvalidArgumentError("population must contain at least one genome")
        if self.fitness is None:
            self.fitness = np.full(self.bits.shape[0], np.nan)
        else:
            self.fitness = np.asarray(self.fitness, dtype=np.float64).copy()
        if self.fitness.shape != (self.bits.shape[0],):
            raise InvalidArgumentError("fitness vector does not match population size")

    @classmethod
    def from_genomes(cls, genomes: Sequence[Genome]) -> "Population":
        if not genomes:
            raise InvalidArgumentError("population must contain at least one genome")
        lengths = {g.n for g in genomes}
        if len(lengths) != 1:
            raise InvalidArgumentError(f"genomes have mixed lengths: {sorted(lengths)}")
        bits = np.stack([g.bits for g in genomes])
        fitness = np.array([np.nan if g.fitness is None else g.fitness for g in genomes])
        return cls(bits, fitness)

    @property
    def size(self) -> int:
        return int(self.bits.shape[0])

    @property
    def n(self) -> int:
        return int(self.bits.shape[1])

    def __len__(self) -> int:
        return self.size

    def genome(self, index: int) -> Genome:
        value = self.fitness[index]
        return Genome(self.bits[index].copy(), None if np.isnan(value) else float(value))

    def genomes(self) -> Iterator[Genome]:
        for index in range(self.size):
            yield self.genome(index)

    def copy(self) -> "Population":
        return Population(self.bits.copy(), self.fitness.copy())

    @property
    def evaluated(self) -> bool:
        return not np.isnan(self.fitness).any()

    def require_evaluated(self) -> None:
        if not self.evaluated:
            raise ContractViolationError("population contains unevaluated members")

    def best_index(self) -> int:
        self.require_evaluated()
        return int(np.argmax(self.fitness))

    def best_fitness(self) -> float:
        return float(self.fitness[self.best_index()])

    def average_fitness(self) -> float:
        self.require_evaluated()
        return float(self.fitness.mean())

    def is_converged(self) -> bool:
        """True when every member is the same bitstring"""
        return bool((self.bits == self.bits[0]).all())


# =====================================================
# Problem interface
# =====================================================
RepairFn = Callable[[np.ndarray, EvalCounter], Tuple[np.ndarray, float]]


class Problem(ABC):
    """
    Black-box maximisation problem over {0,1}^n

    repair, when set, maps bits -> (improved bits, fitness) and runs before an
    evaluation is counted (houses the local-search hybrid).
    """

    problem_id: str = "problem"

    def __init__(self, n: int, known_optimum: Optional[float] = None):
        if n < 1:
            raise InvalidArgumentError(f"problem size must be positive, got {n}")
        self.n = int(n)
        self.known_optimum = known_optimum
        self.repair: Optional[RepairFn] = None

    @abstractmethod
    def evaluate(self, bits: np.ndarray) -> float:
        """Deterministic fitness of one bitstring"""

    def evaluate_batch(self, matrix: np.ndarray) -> np.ndarray:
        """Fitness of every row; subclasses vectorise where they can"""
        return np.array([self.evaluate(row) for row in matrix], dtype=np.float64)

    def is_optimal(self, fitness: float) -> bool:
        if self.known_optimum is None:
            return False
        return fitness >= self.known_optimum - OPTIMUM_TOLERANCE

    def check_length(self, bits: np.ndarray) -> None:
        if bits.shape[-1] != self.n:
            raise InvalidArgumentError(
                f"{self.problem_id}: expected {self.n} bits, got {bits.shape[-1]}"
            )

    def describe(self) -> str:
        return f"{self.problem_id}(n={self.n})"


class OneMaxProblem(Problem):
    """Count of ones"""

    problem_id = "onemax"

    def __init__(self, n: int):
        super().__init__(n, known_optimum=float(n))

    def evaluate(self, bits: np.ndarray) -> float:
        self.check_length(bits)
        return float(np.count_nonzero(bits))

    def evaluate_batch(self, matrix: np.ndarray) -> np.ndarray:
        self.check_length(matrix)
        return matrix.sum(axis=1, dtype=np.int64).astype(np.float64)


# =====================================================
# Operations
# =====================================================
def evaluate(genome: Genome, problem: Problem, counter: EvalCounter) -> Genome:
    """
    Evaluate one genome, applying the problem's repair first when present

    Lamarckian: repaired bits are written back into the returned genome.
    Exactly one evaluation is counted regardless of local-search trial flips.
    """
    if genome.n != problem.n:
        raise InvalidArgumentError(
            f"genome length {genome.n} does not match problem size {problem.n}"
        )
    if problem.repair is not None:
        bits, fitness = problem.repair(genome.bits.copy(), counter)
    else:
        bits, fitness = genome.bits, problem.evaluate(genome.bits)
    counter.add_evaluations(1)
    return Genome(bits, float(fitness))


def evaluate_population(population: Population, problem: Problem, counter: EvalCounter) -> Population:
    """Evaluate every member in place (order preserved) and return the population"""
    if population.n != problem.n:
        raise InvalidArgumentError(
            f"genome length {population.n} does not match problem size {problem.n}"
        )
    if problem.repair is None:
        population.fitness = problem.evaluate_batch(population.bits)
        counter.add_evaluations(population.size)
        return population

    for index in range(population.size):
        bits, fitness = problem.repair(population.bits[index].copy(), counter)
        population.bits[index] = bits
        population.fitness[index] = fitness
        counter.add_evaluations(1)
    return population


def random_population(n: int, size: int, rng: RandomSource) -> Population:
    """N genomes with independent uniform bits; fitness unset"""
    if n < 1:
        raise InvalidArgumentError(f"genome length must be positive, got {n}")
    if size < 1:
        raise InvalidArgumentError(f"population size must be positive, got {size}")
    return Population(rng.bits(size, n))


def hamming_distances(matrix: np.ndarray, bits: np.ndarray) -> np.ndarray:
    return np.count_nonzero(matrix != bits, axis=1)
