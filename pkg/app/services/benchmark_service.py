"""
Benchmark Service - deceptive and hierarchical test functions
Plus the problem factory used by the CLI and the experiment engine
"""

import logging
import math
from typing import Optional

import numpy as np

from app.core.exceptions import InvalidArgumentError
from app.core.genome import EvalCounter, OneMaxProblem, Problem, RandomSource
from app.models.schemas import ProblemKind
from app.services.local_search_service import LocalSearchService
from app.services.spinglass_service import (
    SpinGlassInstance,
    SpinGlassProblem,
    generate_instance,
)

logger = logging.getLogger(__name__)

# dec3 value indexed by the number of ones in a triple
DEC3_TABLE = np.array([0.9, 0.8, 0.0, 1.0])

NULL_SYMBOL = -1


# =====================================================
# Deceptive function of order 3
# =====================================================
def dec3(bits: np.ndarray) -> float:
    """Sum over consecutive triples of 1 / 0 / 0.8 / 0.9 for u = 3 / 2 / 1 / 0"""
    bits = np.asarray(bits)
    if bits.ndim != 1 or bits.shape[0] == 0 or bits.shape[0] % 3:
        raise InvalidArgumentError(f"dec3 needs a length that is a multiple of 3, got {bits.shape}")
    return float(dec3_batch(bits[None, :])[0])


def dec3_batch(matrix: np.ndarray) -> np.ndarray:
    u = matrix.reshape(matrix.shape[0], -1, 3).sum(axis=2)
    return DEC3_TABLE[u].sum(axis=1)


class Dec3Problem(Problem):
    problem_id = "dec3"

    def __init__(self, n: int):
        if n < 3 or n % 3:
            raise InvalidArgumentError(f"dec3 size must be a positive multiple of 3, got {n}")
        super().__init__(n, known_optimum=n / 3)

    def evaluate(self, bits: np.ndarray) -> float:
        self.check_length(bits)
        return dec3(bits)

    def evaluate_batch(self, matrix: np.ndarray) -> np.ndarray:
        self.check_length(matrix)
        return dec3_batch(matrix)


# =====================================================
# Hierarchical trap of order 3
# =====================================================
def htrap_levels(n: int) -> int:
    """L such that n = 3^L; raises when n is not a power of 3"""
    levels, size = 0, 1
    while size < n:
        size *= 3
        levels += 1
    if n < 3 or size != n:
        raise InvalidArgumentError(f"hierarchical trap size must be a power of 3, got {n}")
    return levels


def trap_basis(u: np.ndarray, f_lo: float, f_hi: float) -> np.ndarray:
    """f_hi for u = 3, otherwise f_lo * (1 - u / 2)"""
    return np.where(u == 3, f_hi, f_lo * (1.0 - u / 2.0))


def htrap_batch(matrix: np.ndarray, levels: int) -> np.ndarray:
    symbols = matrix.astype(np.int8)
    total = np.zeros(matrix.shape[0])
    for level in range(1, levels + 1):
        triples = symbols.reshape(symbols.shape[0], -1, 3)
        intact = (triples != NULL_SYMBOL).all(axis=2)
        u = np.where(intact, triples.sum(axis=2), 0)

        f_lo = 0.9 if level == levels else 1.0
        contributions = np.where(intact, trap_basis(u, f_lo, 1.0), 0.0)
        total += contributions.sum(axis=1) * 3 ** (level - 1)

        if level < levels:
            symbols = np.full(u.shape, NULL_SYMBOL, dtype=np.int8)
            symbols[intact & (u == 0)] = 0
            symbols[intact & (u == 3)] = 1
    return total


def htrap(bits: np.ndarray, levels: Optional[int] = None) -> float:
    """
    Hierarchical trap: per-level trap contributions weighted by 3^(level-1)

    Triples map upward as 000 -> 0, 111 -> 1, anything else -> null; triples
    holding a null contribute nothing. The top triple uses f_lo = 0.9.
    """
    bits = np.asarray(bits)
    actual = htrap_levels(bits.shape[0])
    if levels is not None and levels != actual:
        raise InvalidArgumentError(f"expected 3^{levels} bits, got {bits.shape[0]}")
    return float(htrap_batch(bits[None, :], actual)[0])


class HTrapProblem(Problem):
    problem_id = "htrap"

    def __init__(self, n: int):
        self.levels = htrap_levels(n)
        # every level contributes 3^(L-1) at the all-ones string
        super().__init__(n, known_optimum=float(self.levels * 3 ** (self.levels - 1)))

    def evaluate(self, bits: np.ndarray) -> float:
        self.check_length(bits)
        return float(htrap_batch(bits[None, :], self.levels)[0])

    def evaluate_batch(self, matrix: np.ndarray) -> np.ndarray:
        self.check_length(matrix)
        return htrap_batch(matrix, self.levels)


# =====================================================
# Factory
# =====================================================
def spinglass_side(n: int) -> int:
    side = math.isqrt(n)
    if side * side != n or side < 3:
        raise InvalidArgumentError(f"spin glass size must be a square of a side >= 3, got {n}")
    return side


def attach_local_search(problem: Problem, service: Optional[LocalSearchService] = None) -> Problem:
    service = service or LocalSearchService()

    def repair(bits: np.ndarray, counter: EvalCounter):
        return service.improve(bits, problem, counter)

    problem.repair = repair
    return problem


def build_problem(
    kind,
    n: int,
    local_search: Optional[bool] = None,
    instance: Optional[SpinGlassInstance] = None,
    seed: int = 0,
    ground_energy: Optional[int] = None,
) -> Problem:
    """
    Construct a benchmark problem

    Local search is attached by default only to spin glasses. A spin glass without
    an explicit instance is generated from seed with side sqrt(n).
    """
    kind = ProblemKind(kind)
    if kind == ProblemKind.onemax:
        problem: Problem = OneMaxProblem(n)
    elif kind == ProblemKind.dec3:
        problem = Dec3Problem(n)
    elif kind == ProblemKind.htrap:
        problem = HTrapProblem(n)
    else:
        if instance is None:
            instance = generate_instance(spinglass_side(n), RandomSource(seed))
        elif instance.n != n:
            raise InvalidArgumentError(f"instance has {instance.n} spins but n={n} was requested")
        problem = SpinGlassProblem(instance, ground_energy=ground_energy)

    if local_search is None:
        local_search = kind == ProblemKind.spinglass
    if local_search:
        attach_local_search(problem)

    logger.debug(f"🧩 Problem ready: {problem.describe()} local_search={local_search}")
    return problem


class BenchmarkService:
    """Problem construction for the CLI and the experiment engine"""

    def build(
        self,
        kind,
        n: int,
        local_search: Optional[bool] = None,
        instance: Optional[SpinGlassInstance] = None,
        ground_energy: Optional[int] = None,
    ) -> Problem:
        return build_problem(kind, n, local_search=local_search, instance=instance,
                             ground_energy=ground_energy)

    @staticmethod
    def side_for(n: int) -> int:
        return spinglass_side(n)
