"""
Spin Glass Service - 2D +-J Ising spin glasses on a torus
Instance generation, energy, file I/O and the maximisation problem wrapper
"""

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from app.core.exceptions import InstanceFormatError, InvalidArgumentError
from app.core.genome import Problem, RandomSource

logger = logging.getLogger(__name__)

HEADER = "spinglass 2d pm-j"


@dataclass(frozen=True, eq=False)
class SpinGlassInstance:
    """
    L x L toroidal grid of +-1 couplings

    right[r, c]: coupling between (r, c) and (r, (c + 1) mod L)
    down[r, c]:  coupling between (r, c) and ((r + 1) mod L, c)
    cell index = r * L + c
    """

    side: int
    right: np.ndarray
    down: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if self.side < 3:
            raise InvalidArgumentError(f"spin glass side must be at least 3, got {self.side}")
        for name in ("right", "down"):
            couplings = np.asarray(getattr(self, name), dtype=np.int8)
            if couplings.shape != (self.side, self.side):
                raise InvalidArgumentError(f"{name} couplings must be {self.side}x{self.side}")
            if not np.isin(couplings, (-1, 1)).all():
                raise InvalidArgumentError("couplings must be +1 or -1")
            couplings.setflags(write=False)
            object.__setattr__(self, name, couplings)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SpinGlassInstance):
            return NotImplemented
        return (
            self.side == other.side
            and self.seed == other.seed
            and np.array_equal(self.right, other.right)
            and np.array_equal(self.down, other.down)
        )

    def __hash__(self) -> int:
        return hash(self.fingerprint())

    @property
    def n(self) -> int:
        return self.side * self.side

    @property
    def edge_count(self) -> int:
        return 2 * self.n

    def edges(self):
        """(cell, neighbor, J) sorted by cell, right before down"""
        L = self.side
        for r in range(L):
            for c in range(L):
                cell = r * L + c
                yield cell, r * L + (c + 1) % L, int(self.right[r, c])
                yield cell, ((r + 1) % L) * L + c, int(self.down[r, c])

    def neighbors(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Neighbour tables for incremental evaluation

        Returns (index, coupling), both (n, 4): right, left, down, up.
        """
        L = self.side
        rows, cols = np.divmod(np.arange(self.n), L)
        index = np.stack(
            [
                rows * L + (cols + 1) % L,
                rows * L + (cols - 1) % L,
                ((rows + 1) % L) * L + cols,
                ((rows - 1) % L) * L + cols,
            ],
            axis=1,
        )
        coupling = np.stack(
            [
                self.right[rows, cols],
                self.right[rows, (cols - 1) % L],
                self.down[rows, cols],
                self.down[(rows - 1) % L, cols],
            ],
            axis=1,
        ).astype(np.int64)
        return index, coupling

    def fingerprint(self) -> str:
        """Stable identifier derived from the couplings only"""
        digest = hashlib.blake2b(digest_size=12)
        digest.update(str(self.side).encode())
        digest.update(self.right.tobytes())
        digest.update(self.down.tobytes())
        return digest.hexdigest()


# =====================================================
# Energy
# =====================================================
def spins_from_bits(bits: np.ndarray) -> np.ndarray:
    """bit 1 -> spin +1, bit 0 -> spin -1"""
    return np.asarray(bits, dtype=np.int64) * 2 - 1


def spin_energy(instance: SpinGlassInstance, bits: np.ndarray) -> int:
    """E = sum over the 2n toroidal edges of s_i J_ij s_j"""
    bits = np.asarray(bits)
    if bits.shape != (instance.n,):
        raise InvalidArgumentError(
            f"expected {instance.n} spins for a {instance.side}x{instance.side} glass, got {bits.shape}"
        )
    s = spins_from_bits(bits).reshape(instance.side, instance.side)
    e_right = (s * instance.right * np.roll(s, -1, axis=1)).sum()
    e_down = (s * instance.down * np.roll(s, -1, axis=0)).sum()
    return int(e_right + e_down)


def spin_energy_batch(instance: SpinGlassInstance, matrix: np.ndarray) -> np.ndarray:
    """Energies of every row of an (m, n) bit matrix"""
    L = instance.side
    s = spins_from_bits(matrix).reshape(-1, L, L)
    e_right = (s * instance.right * np.roll(s, -1, axis=2)).sum(axis=(1, 2))
    e_down = (s * instance.down * np.roll(s, -1, axis=1)).sum(axis=(1, 2))
    return (e_right + e_down).astype(np.int64)


# =====================================================
# Generation and I/O
# =====================================================
def generate_instance(side: int, rng: RandomSource) -> SpinGlassInstance:
    """Every one of the 2L^2 couplings is +1 or -1 with probability 1/2"""
    if side < 3:
        raise InvalidArgumentError(f"spin glass side must be at least 3, got {side}")
    right = rng.bits(side, side).astype(np.int8) * 2 - 1
    down = rng.bits(side, side).astype(np.int8) * 2 - 1
    return SpinGlassInstance(side=side, right=right, down=down, seed=rng.seed)


def format_instance(instance: SpinGlassInstance) -> str:
    lines = [HEADER, f"L {instance.side}", f"seed {instance.seed}"]
    for cell, neighbor, coupling in instance.edges():
        lines.append(f"{cell} {neighbor} {coupling:+d}")
    return "\n".join(lines) + "\n"


def write_instance(instance: SpinGlassInstance, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_instance(instance))
    logger.info(f"💾 Spin glass {instance.side}x{instance.side} written: {path}")
    return path


def parse_instance(text: str) -> SpinGlassInstance:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if len(lines) < 3 or lines[0] != HEADER:
        raise InstanceFormatError(f"missing '{HEADER}' header")
    try:
        side = int(lines[1].split()[1]) if lines[1].startswith("L ") else None
        seed = int(lines[2].split()[1]) if lines[2].startswith("seed ") else None
    except (IndexError, ValueError) as e:
        raise InstanceFormatError(f"bad size or seed line: {e}")
    if side is None or seed is None:
        raise InstanceFormatError("expected 'L <side>' and 'seed <u64>' lines")
    if side < 3:
        raise InstanceFormatError(f"spin glass side must be at least 3, got {side}")

    body = lines[3:]
    if len(body) != 2 * side * side:
        raise InstanceFormatError(f"expected {2 * side * side} edges, found {len(body)}")

    right = np.zeros((side, side), dtype=np.int8)
    down = np.zeros((side, side), dtype=np.int8)
    seen = np.zeros((2, side, side), dtype=bool)
    for line in body:
        try:
            cell_text, neighbor_text, coupling_text = line.split()
            cell, neighbor, coupling = int(cell_text), int(neighbor_text), int(coupling_text)
        except ValueError:
            raise InstanceFormatError(f"bad edge line: '{line}'")
        if coupling not in (-1, 1):
            raise InstanceFormatError(f"coupling must be +1 or -1: '{line}'")
        if not 0 <= cell < side * side:
            raise InstanceFormatError(f"cell out of range: '{line}'")
        r, c = divmod(cell, side)
        if neighbor == r * side + (c + 1) % side:
            kind, target = 0, right
        elif neighbor == ((r + 1) % side) * side + c:
            kind, target = 1, down
        else:
            raise InstanceFormatError(f"neighbor is not a right or down neighbor: '{line}'")
        if seen[kind, r, c]:
            raise InstanceFormatError(f"duplicate edge: '{line}'")
        seen[kind, r, c] = True
        target[r, c] = coupling

    return SpinGlassInstance(side=side, right=right, down=down, seed=seed)


def read_instance(path: Union[str, Path]) -> SpinGlassInstance:
    path = Path(path)
    if not path.exists():
        raise InstanceFormatError(f"instance file not found: {path}")
    return parse_instance(path.read_text())


# =====================================================
# Problem wrapper
# =====================================================
class SpinGlassProblem(Problem):
    """Fitness = -energy; the ground state is the maximum"""

    problem_id = "spinglass"

    def __init__(self, instance: SpinGlassInstance, ground_energy: Optional[int] = None):
        super().__init__(
            instance.n,
            known_optimum=None if ground_energy is None else float(-ground_energy),
        )
        self.instance = instance
        self.neighbor_index, self.neighbor_coupling = instance.neighbors()

    @property
    def target_energy(self) -> Optional[int]:
        if self.known_optimum is None:
            return None
        return int(round(-self.known_optimum))

    def set_target_energy(self, energy: Optional[int]) -> None:
        self.known_optimum = None if energy is None else float(-energy)

    def evaluate(self, bits: np.ndarray) -> float:
        return float(-spin_energy(self.instance, bits))

    def evaluate_batch(self, matrix: np.ndarray) -> np.ndarray:
        self.check_length(matrix)
        return -spin_energy_batch(self.instance, matrix).astype(np.float64)

    def local_fields(self, spins: np.ndarray) -> np.ndarray:
        """h_i = sum over neighbours j of J_ij s_j"""
        return (self.neighbor_coupling * spins[self.neighbor_index]).sum(axis=1)

    def describe(self) -> str:
        return f"spinglass({self.instance.side}x{self.instance.side}, {self.instance.fingerprint()[:8]})"


class SpinGlassService:
    """Instance sets, instance files and energies for the CLI and the experiment engine"""

    @staticmethod
    def instance_seed(master_seed: int, n: int, index: int) -> int:
        return RandomSource.derive_seed(master_seed, "spinglass", n, "instance", index)

    def generate(self, side: int, seed: int) -> SpinGlassInstance:
        return generate_instance(side, RandomSource(seed))

    def instance_set(self, side: int, count: int, master_seed: int) -> List[SpinGlassInstance]:
        """`count` instances of one grid size; instance r uses instance_seed(master, L^2, r)"""
        if count < 1:
            raise InvalidArgumentError(f"instance count must be positive, got {count}")
        n = side * side
        return [self.generate(side, self.instance_seed(master_seed, n, r)) for r in range(count)]

    def save(self, instance: SpinGlassInstance, path: Union[str, Path]) -> Path:
        return write_instance(instance, path)

    def load(self, path: Union[str, Path]) -> SpinGlassInstance:
        instance = read_instance(path)
        logger.info(f"📂 Spin glass {instance.side}x{instance.side} loaded: {path}")
        return instance
