"""
Bayesian Network Service - learn and sample networks with decision-tree local structures
Variation operator of hBOA: build the model from selected solutions, sample offspring
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

import numpy as np

from app.core.exceptions import InvalidArgumentError
from app.core.genome import Population, RandomSource

logger = logging.getLogger(__name__)


# =====================================================
# Model types
# =====================================================
@dataclass
class TreeNode:
    """Internal node (split_var set) or leaf (counts set)"""

    split_var: Optional[int] = None
    child0: Optional["TreeNode"] = None
    child1: Optional["TreeNode"] = None
    count0: int = 0
    count1: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.split_var is None

    def probability_one(self) -> float:
        total = self.count0 + self.count1
        if total == 0:
            return 0.5
        return self.count1 / total


@dataclass
class DecisionTreeCPD:
    """Conditional distribution of one target variable given its split variables"""

    target: int
    root: TreeNode = field(default_factory=TreeNode)

    def parents(self) -> Set[int]:
        found: Set[int] = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                found.add(node.split_var)
                stack.extend((node.child0, node.child1))
        return found

    def leaves(self) -> List[TreeNode]:
        out: List[TreeNode] = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend((node.child1, node.child0))
        return out

    def leaf_for(self, bits: np.ndarray) -> TreeNode:
        node = self.root
        while not node.is_leaf:
            node = node.child1 if bits[node.split_var] else node.child0
        return node


@dataclass
class BayesNetLS:
    """One decision-tree CPD per variable; the induced parent graph is a DAG"""

    n: int
    trees: List[DecisionTreeCPD]
    # (target, split variable, score gain) in acceptance order
    split_log: List[Tuple[int, int, float]] = field(default_factory=list)

    def parents(self, i: int) -> Set[int]:
        return self.trees[i].parents()

    def edges(self) -> List[Tuple[int, int]]:
        return sorted((j, i) for i in range(self.n) for j in self.parents(i))

    def topological_order(self) -> List[int]:
        """Kahn's algorithm, smallest ready index first; raises on a cycle"""
        parents = [self.parents(i) for i in range(self.n)]
        children: Dict[int, List[int]] = {i: [] for i in range(self.n)}
        indegree = [len(p) for p in parents]
        for i, ps in enumerate(parents):
            for j in ps:
                children[j].append(i)

        ready = [i for i in range(self.n) if indegree[i] == 0]
        heapq.heapify(ready)
        order: List[int] = []
        while ready:
            v = heapq.heappop(ready)
            order.append(v)
            for c in children[v]:
                indegree[c] -= 1
                if indegree[c] == 0:
                    heapq.heappush(ready, c)

        if len(order) != self.n:
            raise InvalidArgumentError("model graph contains a cycle")
        return order

    def conditional_probability(self, i: int, bits: np.ndarray) -> float:
        """P(x_i = 1 | parents as given in bits)"""
        return self.trees[i].leaf_for(bits).probability_one()

    def probability(self, bits: np.ndarray) -> float:
        """Factorised joint probability of a complete assignment"""
        p = 1.0
        for i in range(self.n):
            p1 = self.conditional_probability(i, bits)
            p *= p1 if bits[i] else 1.0 - p1
        return p

    def dump(self) -> str:
        """Plain-text debug listing (not a stable format)"""
        lines: List[str] = []
        for tree in self.trees:
            parents = ",".join(str(p) for p in sorted(tree.parents()))
            lines.append(f"var {tree.target}: parents={{{parents}}}")
            self._dump_node(tree.root, 1, lines)
        return "\n".join(lines)

    def _dump_node(self, node: TreeNode, depth: int, lines: List[str]) -> None:
        pad = "  " * depth
        if node.is_leaf:
            lines.append(f"{pad}leaf ({node.count0},{node.count1})")
            return
        lines.append(f"{pad}x{node.split_var}=0:")
        self._dump_node(node.child0, depth + 1, lines)
        lines.append(f"{pad}x{node.split_var}=1:")
        self._dump_node(node.child1, depth + 1, lines)


@dataclass
class _GrowingLeaf:
    """Leaf under construction: its rows in the training data and its path"""

    target: int
    node: TreeNode
    rows: np.ndarray
    on_path: np.ndarray


# =====================================================
# Scoring helpers
# =====================================================
def _xlogx(c: np.ndarray) -> np.ndarray:
    """c * ln(c) with 0 * ln 0 = 0"""
    c = np.asarray(c, dtype=np.float64)
    return c * np.log(np.where(c > 0, c, 1.0))


def _leaf_loglik(c0, c1):
    """sum over v of c_v * ln(c_v / total)"""
    return _xlogx(c0) + _xlogx(c1) - _xlogx(np.asarray(c0) + np.asarray(c1))


class BayesNetService:
    """Build and sample Bayesian networks with decision-tree local structures"""

    # =====================================================
    # PUBLIC API
    # =====================================================
    def learn_model(self, selected: Population, penalty_weight: float = 1.0) -> BayesNetLS:
        """
        Greedy structure learning

        Every tree starts as a single leaf. The highest-scoring admissible split over
        all leaves of all trees is applied until no split has positive gain.
        Gain = loglik(children) - loglik(parent) - penalty_weight * ln(N).
        penalty_weight=0.5 gives plain BIC.
        Ties: earliest-created leaf, then lowest split variable.
        """
        if selected is None or selected.size == 0:
            raise InvalidArgumentError("cannot learn a model from an empty population")

        data = selected.bits
        size, n = data.shape
        if penalty_weight <= 0:
            raise InvalidArgumentError(f"penalty_weight must be positive, got {penalty_weight}")
        penalty = penalty_weight * math.log(size)
        data_f = data.astype(np.float64)

        trees = [DecisionTreeCPD(target=i) for i in range(n)]
        model = BayesNetLS(n=n, trees=trees)

        # reach[a, b]: a directed path a -> ... -> b exists
        reach = np.zeros((n, n), dtype=bool)
        parent_sets: List[Set[int]] = [set() for _ in range(n)]

        leaves: List[Optional[_GrowingLeaf]] = []
        gain_rows: List[np.ndarray] = []
        all_rows = np.arange(size)

        ones = data.sum(axis=0).astype(np.float64)
        both = data_f.T @ data_f  # both[i, j] = #(x_i = 1 and x_j = 1)
        for i in range(n):
            on_path = np.zeros(n, dtype=bool)
            on_path[i] = True
            trees[i].root.count1 = int(ones[i])
            trees[i].root.count0 = size - int(ones[i])
            leaves.append(_GrowingLeaf(i, trees[i].root, all_rows, on_path))
            gain_rows.append(
                self._split_gains(size, ones[i], ones, both[i], penalty)
            )

        while True:
            targets = np.array([leaf.target if leaf else 0 for leaf in leaves])
            gains = np.vstack(gain_rows)
            on_path = np.vstack(
                [leaf.on_path if leaf else np.ones(n, dtype=bool) for leaf in leaves]
            )
            admissible = ~on_path & ~reach[targets]
            masked = np.where(admissible, gains, -np.inf)

            flat = int(np.argmax(masked))
            best = float(masked.flat[flat])
            if not best > 0.0:
                break

            leaf_index, split_var = divmod(flat, n)
            leaf = leaves[leaf_index]
            target = leaf.target

            if split_var not in parent_sets[target]:
                self._add_edge(reach, split_var, target)
                parent_sets[target].add(split_var)

            model.split_log.append((target, split_var, best))
            children = self._apply_split(leaf, split_var, data)
            leaves[leaf_index] = None
            gain_rows[leaf_index] = np.full(n, -np.inf)

            for child in children:
                leaves.append(child)
                gain_rows.append(self._leaf_gains(child, data, data_f, size, penalty))

        logger.debug(
            f"📐 Model learned: {len(model.split_log)} splits, {len(model.edges())} edges"
        )
        return model

    def sample_model(self, model: BayesNetLS, count: int, rng: RandomSource) -> Population:
        """
        Ancestral sampling in topological order

        Each variable is set to 1 with the probability stored at the leaf reached by
        descending its tree with the values sampled so far.
        """
        if count < 1:
            raise InvalidArgumentError(f"sample count must be positive, got {count}")

        samples = np.zeros((count, model.n), dtype=np.uint8)
        everyone = np.arange(count)
        for i in model.topological_order():
            probs = np.empty(count)
            self._fill_probabilities(model.trees[i].root, samples, everyone, probs)
            samples[:, i] = rng.random(count) < probs
        return Population(samples)

    # =====================================================
    # Learning internals
    # =====================================================
    def _split_gains(self, m, m1, ones_j, both_j, penalty) -> np.ndarray:
        """
        Score gain of splitting a leaf on every candidate variable

        m: rows at the leaf; m1: rows with target = 1;
        ones_j: rows with x_j = 1; both_j: rows with x_j = 1 and target = 1.
        """
        c11 = both_j
        c10 = ones_j - both_j
        c01 = m1 - both_j
        c00 = (m - ones_j) - c01
        children = _leaf_loglik(c10, c11) + _leaf_loglik(c00, c01)
        parent = _leaf_loglik(m - m1, m1)
        return children - parent - penalty

    def _leaf_gains(self, leaf: _GrowingLeaf, data, data_f, size, penalty) -> np.ndarray:
        rows = leaf.rows
        if rows.size == 0:
            return np.full(data.shape[1], -np.inf)
        sub = data_f[rows]
        target_col = sub[:, leaf.target]
        ones_j = sub.sum(axis=0)
        both_j = target_col @ sub
        return self._split_gains(float(rows.size), float(target_col.sum()), ones_j, both_j, penalty)

    def _apply_split(self, leaf: _GrowingLeaf, split_var: int, data: np.ndarray):
        node = leaf.node
        column = data[leaf.rows, split_var]
        target_values = data[leaf.rows, leaf.target]
        on_path = leaf.on_path.copy()
        on_path[split_var] = True

        children = []
        for value in (0, 1):
            mask = column == value
            rows = leaf.rows[mask]
            ones = int(target_values[mask].sum())
            child = TreeNode(count0=int(rows.size) - ones, count1=ones)
            children.append(_GrowingLeaf(leaf.target, child, rows, on_path))

        node.split_var = split_var
        node.child0 = children[0].node
        node.child1 = children[1].node
        node.count0 = node.count1 = 0
        return children

    @staticmethod
    def _add_edge(reach: np.ndarray, parent: int, child: int) -> None:
        """Transitive closure update for the new edge parent -> child"""
        sources = reach[:, parent].copy()
        sources[parent] = True
        sinks = reach[child].copy()
        sinks[child] = True
        reach[np.ix_(sources, sinks)] = True

    # =====================================================
    # Sampling internals
    # =====================================================
    def _fill_probabilities(self, node: TreeNode, samples, rows, probs) -> None:
        if rows.size == 0:
            return
        if node.is_leaf:
            probs[rows] = node.probability_one()
            return
        values = samples[rows, node.split_var]
        self._fill_probabilities(node.child0, samples, rows[values == 0], probs)
        self._fill_probabilities(node.child1, samples, rows[values == 1], probs)
