"""
Matroid oracles and matroid intersection.

Every matroid lives on the ground set {0, ..., ground_size - 1}. Oracles
answer independence queries; ``rank`` scans a subset in ascending index
order and keeps every element that preserves independence, so the fixed
order doubles as the lexicographic tie-break used by the selection
algorithms.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections import deque

import networkx as nx
import numpy as np

from controllability_tools.errors import NoCommonBasis
from controllability_tools.structmat import (
    DenseFieldMatrix,
    fixed_array,
    free_array,
    draw_free_values,
    nullspace_mod,
    rank_mod,
    row_reduce,
)

logger = logging.getLogger(__name__)

_EPS = 1e-12


class Matroid(ABC):
    kind = "abstract"

    def __init__(self, ground_size):
        if ground_size < 0:
            raise ValueError("Matroid ground set size must be non-negative")
        self.ground_size = ground_size
        self.queries = 0
        self._full_rank = None

    def _check(self, subset):
        subset = frozenset(int(e) for e in subset)
        for e in subset:
            if not 0 <= e < self.ground_size:
                raise ValueError(f"Element {e} outside ground set of size {self.ground_size}")
        return subset

    @abstractmethod
    def _independent(self, subset):
        """Independence test on a validated frozenset."""

    def is_independent(self, subset):
        subset = self._check(subset)
        self.queries += 1
        return self._independent(subset)

    def rank(self, subset=None):
        """
        Size of a maximal independent subset.

        Args:
            subset (iterable, optional): Elements to scan; defaults to the
                                         whole ground set.

        Returns:
            int: The rank of ``subset``.
        """
        subset = self.ground() if subset is None else self._check(subset)
        kept = set()
        for e in sorted(subset):
            if self.is_independent(kept | {e}):
                kept.add(e)
        return len(kept)

    def full_rank(self):
        if self._full_rank is None:
            self._full_rank = self.rank(self.ground())
        return self._full_rank

    def ground(self):
        return frozenset(range(self.ground_size))

    def greedy_basis(self, subset=None):
        """Lexicographically first basis of ``subset`` (ascending scan)."""
        subset = self.ground() if subset is None else self._check(subset)
        kept = set()
        for e in sorted(subset):
            if self.is_independent(kept | {e}):
                kept.add(e)
        return frozenset(kept)

    def is_basis(self, subset):
        subset = self._check(subset)
        return len(subset) == self.full_rank() and self.is_independent(subset)

    def exchanges(self, independent):
        """
        Single-element extensions and swaps of an independent set R.

        Args:
            independent (iterable): An independent set R.

        Returns:
            tuple: The set of y outside R with R + y independent, and a dict
                   mapping every other y outside R to the x in R with
                   R - x + y independent.
        """
        current = self._check(independent)
        free, swaps = set(), {}
        for y in range(self.ground_size):
            if y in current:
                continue
            if self.is_independent(current | {y}):
                free.add(y)
            else:
                swaps[y] = {x for x in current if self.is_independent((current - {x}) | {y})}
        return free, swaps

    def reset_queries(self):
        self.queries = 0

    def __repr__(self):
        return f"{type(self).__name__}(ground_size={self.ground_size})"


class UniformMatroid(Matroid):
    kind = "uniform"

    def __init__(self, ground_size, k):
        super().__init__(ground_size)
        if k < 0:
            raise ValueError("Uniform matroid rank must be non-negative")
        self.k = min(k, ground_size)

    def _independent(self, subset):
        return len(subset) <= self.k

    def rank(self, subset=None):
        subset = self.ground() if subset is None else self._check(subset)
        self.queries += 1
        return min(len(subset), self.k)

    def __repr__(self):
        return f"UniformMatroid(ground_size={self.ground_size}, k={self.k})"


class FreeMatroid(UniformMatroid):
    """Every subset is independent."""

    def __init__(self, ground_size):
        super().__init__(ground_size, ground_size)


class LinearMatroid(Matroid):
    """
    Column matroid of a matrix over GF(prime).

    The matrix is a single realization of a structured matrix, so every
    query made against one instance is answered at the same generic point.
    Use ``redraw`` to move to a fresh point.
    """

    kind = "linear"

    def __init__(self, columns, prime, source=None, cfg=None, stream=0):
        columns = np.asarray(columns, dtype=np.int64) % prime
        if columns.ndim != 2:
            raise ValueError("LinearMatroid needs a two dimensional matrix")
        super().__init__(columns.shape[1])
        self.columns = columns
        self.prime = prime
        self._source = source
        self._cfg = cfg
        self._stream = stream

    @classmethod
    def from_structured(cls, matrix, cfg, stream=0):
        """Realizes ``matrix`` once and uses its columns as the ground set."""
        values = draw_free_values(matrix, cfg, stream)
        data = (fixed_array(matrix, cfg.prime) + free_array(matrix, values, cfg.prime)) % cfg.prime
        return cls(data, cfg.prime, source=matrix, cfg=cfg, stream=stream)

    @classmethod
    def from_dense(cls, matrix: DenseFieldMatrix):
        return cls(matrix.data, matrix.prime)

    def redraw(self, stream):
        if self._source is None:
            raise ValueError("Only matroids built from a structured matrix can be redrawn")
        return LinearMatroid.from_structured(self._source, self._cfg, stream)

    def _independent(self, subset):
        if not subset:
            return True
        if len(subset) > self.columns.shape[0]:
            return False
        return rank_mod(self.columns[:, sorted(subset)], self.prime) == len(subset)

    def rank(self, subset=None):
        subset = self.ground() if subset is None else self._check(subset)
        self.queries += 1
        if not subset or self.columns.shape[0] == 0:
            return 0
        return rank_mod(self.columns[:, sorted(subset)], self.prime)

    def exchanges(self, independent):
        current = sorted(self._check(independent))
        outside = [y for y in range(self.ground_size) if y not in set(current)]
        self.queries += len(outside) * (len(current) + 1)
        if not outside:
            return set(), {}
        r = len(current)
        block = self.columns[:, current + outside]
        if block.shape[0] == 0:
            return set(), {y: set() for y in outside}
        reduced, pivots = row_reduce(block, self.prime)
        if pivots[:r] != list(range(r)):
            # R is dependent here; answer with plain queries
            return super().exchanges(current)
        free, swaps = set(), {}
        for offset, y in enumerate(outside):
            col = reduced[:, r + offset]
            if np.any(col[r:] != 0):
                free.add(y)
            else:
                swaps[y] = {current[i] for i in range(r) if col[i] != 0}
        return free, swaps

    def dual(self):
        """Linear representation of the dual matroid (null-space columns)."""
        return LinearMatroid(nullspace_mod(self.columns, self.prime), self.prime)

    def __repr__(self):
        return f"LinearMatroid(shape={self.columns.shape}, prime={self.prime})"


class UnionMatroid(Matroid):
    """
    Matroid union M1 v M2 on a common ground set.

    Independence is decided by matroid partition with shortest augmenting
    paths. When one side is uniform the rank is min(|X|, r(X) + m).
    """

    kind = "union"

    def __init__(self, left, right):
        if left.ground_size != right.ground_size:
            raise ValueError(
                f"Cannot unite matroids on ground sets of size {left.ground_size} and {right.ground_size}"
            )
        super().__init__(left.ground_size)
        self.left = left
        self.right = right

    def _uniform_split(self):
        if isinstance(self.right, UniformMatroid):
            return self.left, self.right.k
        if isinstance(self.left, UniformMatroid):
            return self.right, self.left.k
        return None

    def _independent(self, subset):
        split = self._uniform_split()
        if split is not None:
            other, m = split
            return len(subset) <= other.rank(subset) + m
        return self._partition(sorted(subset)) is not None

    def rank(self, subset=None):
        subset = self.ground() if subset is None else self._check(subset)
        self.queries += 1
        split = self._uniform_split()
        if split is not None:
            other, m = split
            return min(len(subset), other.rank(subset) + m)
        parts = [set(), set()]
        for e in sorted(subset):
            self._insert(e, parts)
        return len(parts[0]) + len(parts[1])

    def partition(self, subset):
        """Splits an independent set into (X1, X2) with Xi independent in Mi, or None."""
        return self._partition(sorted(self._check(subset)))

    def _partition(self, elements):
        parts = [set(), set()]
        for e in elements:
            if not self._insert(e, parts):
                return None
        return frozenset(parts[0]), frozenset(parts[1])

    def _insert(self, x, parts):
        matroids = (self.left, self.right)
        parent = {x: None}
        queue = deque([x])
        while queue:
            e = queue.popleft()
            for i, (m, part) in enumerate(zip(matroids, parts)):
                if e in part:
                    continue
                if m.is_independent(part | {e}):
                    self._augment(e, i, parent, parts)
                    return True
                for f in sorted(part):
                    if f not in parent and m.is_independent((part - {f}) | {e}):
                        parent[f] = (e, i)
                        queue.append(f)
        return False

    @staticmethod
    def _augment(e, target, parent, parts):
        current = e
        while current is not None:
            for part in parts:
                part.discard(current)
            parts[target].add(current)
            link = parent[current]
            if link is None:
                break
            current, target = link


class DualMatroid(Matroid):
    """Dual through the rank formula r*(X) = r(V - X) + |X| - r(V)."""

    kind = "dual"

    def __init__(self, inner):
        super().__init__(inner.ground_size)
        self.inner = inner

    def _independent(self, subset):
        return self.inner.rank(self.ground() - subset) == self.inner.full_rank()

    def rank(self, subset=None):
        subset = self.ground() if subset is None else self._check(subset)
        self.queries += 1
        return self.inner.rank(self.ground() - subset) + len(subset) - self.inner.full_rank()


class PartitionMatroid(Matroid):
    """
    At most ``capacity`` elements per class; elements with class None are loops.
    """

    kind = "partition"

    def __init__(self, class_of, capacity=1):
        super().__init__(len(class_of))
        self.class_of = tuple(class_of)
        self.capacity = capacity

    def _independent(self, subset):
        counts = {}
        for e in subset:
            c = self.class_of[e]
            if c is None:
                return False
            counts[c] = counts.get(c, 0) + 1
            if counts[c] > self.capacity:
                return False
        return True

    def rank(self, subset=None):
        subset = self.ground() if subset is None else self._check(subset)
        self.queries += 1
        counts = {}
        for e in subset:
            c = self.class_of[e]
            if c is not None:
                counts[c] = counts.get(c, 0) + 1
        return sum(min(v, self.capacity) for v in counts.values())

    def classes(self):
        return sorted({c for c in self.class_of if c is not None})


class TransversalMatroid(Matroid):
    """
    Sets of elements that can be matched to distinct slots.

    ``slots`` is a sequence of element collections; element e may fill slot
    s when e is in slots[s].
    """

    kind = "transversal"

    def __init__(self, ground_size, slots):
        super().__init__(ground_size)
        self.slots = tuple(frozenset(s) for s in slots)

    def matching(self, subset):
        """Maximum matching of ``subset`` into slots as a dict element -> slot."""
        subset = self._check(subset)
        graph = nx.Graph()
        left = [("e", e) for e in sorted(subset)]
        graph.add_nodes_from(left, bipartite=0)
        graph.add_nodes_from((("s", s) for s in range(len(self.slots))), bipartite=1)
        for s, members in enumerate(self.slots):
            for e in members & subset:
                graph.add_edge(("e", e), ("s", s))
        matched = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=left)
        return {node[1]: matched[node][1] for node in left if node in matched}

    def _independent(self, subset):
        if len(subset) > len(self.slots):
            return False
        return len(self.matching(subset)) == len(subset)

    def rank(self, subset=None):
        subset = self.ground() if subset is None else self._check(subset)
        self.queries += 1
        return len(self.matching(subset))


class RankMatroid(Matroid):
    """Matroid given by a rank function; X is independent iff rank(X) = |X|."""

    kind = "rank_defined"

    def __init__(self, ground_size, rank_function, name="rank"):
        super().__init__(ground_size)
        self.rank_function = rank_function
        self.name = name

    def _independent(self, subset):
        return self.rank_function(subset) == len(subset)

    def rank(self, subset=None):
        subset = self.ground() if subset is None else self._check(subset)
        self.queries += 1
        return self.rank_function(subset)


def dual(matroid):
    """
    Dual matroid.

    Linear and uniform matroids get explicit dual representations; the dual
    of a dual returns the original oracle.
    """
    if isinstance(matroid, DualMatroid):
        return matroid.inner
    if isinstance(matroid, LinearMatroid):
        return matroid.dual()
    if isinstance(matroid, UniformMatroid):
        return UniformMatroid(matroid.ground_size, matroid.ground_size - matroid.k)
    return DualMatroid(matroid)


def union(left, right):
    return UnionMatroid(left, right)


def _exchange_graph(m1, m2, current):
    """Arcs x -> y (R - x + y in I1) and y -> x (R - x + y in I2)."""
    free1, swaps1 = m1.exchanges(current)
    free2, swaps2 = m2.exchanges(current)
    arcs = {}
    for y, xs in swaps1.items():
        for x in xs:
            arcs.setdefault(x, set()).add(y)
    for y in free1:
        for x in current:
            arcs.setdefault(x, set()).add(y)
    for y, xs in swaps2.items():
        for x in xs:
            arcs.setdefault(y, set()).add(x)
    for y in free2:
        arcs.setdefault(y, set()).update(current)
    return free1, free2, arcs


def _shortest_path(sources, sinks, arcs):
    """Lexicographically smallest among the shortest source-to-sink paths."""
    if not sources or not sinks:
        return None
    reverse = {}
    for a, heads in arcs.items():
        for b in heads:
            reverse.setdefault(b, set()).add(a)
    dist = {v: 0 for v in sinks}
    queue = deque(sorted(sinks))
    while queue:
        v = queue.popleft()
        for u in reverse.get(v, ()):
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    reachable = [s for s in sources if s in dist]
    if not reachable:
        return None
    best = min(dist[s] for s in reachable)
    node = min(s for s in reachable if dist[s] == best)
    path = [node]
    while dist[node] > 0:
        node = min(v for v in arcs.get(node, ()) if dist.get(v) == dist[node] - 1)
        path.append(node)
    return path


def max_cardinality_intersection(m1, m2, trace=None):
    """
    Maximum-cardinality common independent set of two matroids.

    Args:
        m1 (Matroid): First matroid.
        m2 (Matroid): Second matroid on the same ground set.
        trace (list, optional): Receives one entry per augmentation.

    Returns:
        frozenset: A common independent set of maximum size.
    """
    if m1.ground_size != m2.ground_size:
        raise ValueError("Matroid intersection needs a common ground set")
    current = set()
    while True:
        free1, free2, arcs = _exchange_graph(m1, m2, current)
        path = _shortest_path(free1, free2, arcs)
        if path is None:
            break
        current ^= set(path)
        logger.debug("Augmented along %s; |R| = %d", path, len(current))
        if trace is not None:
            trace.append({"path": list(path), "size": len(current)})
    return frozenset(current)


def max_weight_common_basis(m1, m2, weights, trace=None):
    """
    Maximum-weight common basis of two matroids of equal rank.

    Shortest augmenting paths in the exchange graph with vertex lengths
    -w(y) for y outside R and +w(x) for x in R; ties go to fewer arcs.

    Args:
        m1 (Matroid): First matroid.
        m2 (Matroid): Second matroid on the same ground set.
        weights (sequence of float): One weight per ground element.
        trace (list, optional): Receives one entry per augmentation.

    Returns:
        frozenset: A common basis of maximum total weight.
    """
    if m1.ground_size != m2.ground_size:
        raise ValueError("Matroid intersection needs a common ground set")
    if len(weights) != m1.ground_size:
        raise ValueError("Need exactly one weight per ground element")
    target = m1.full_rank()
    if m2.full_rank() != target:
        raise ValueError(f"Ranks differ: {target} and {m2.full_rank()}")
    weights = [float(w) for w in weights]
    current = set()
    while len(current) < target:
        free1, free2, arcs = _exchange_graph(m1, m2, current)
        path = _cheapest_path(free1, free2, arcs, current, weights)
        if path is None:
            break
        current ^= set(path)
        if trace is not None:
            trace.append({"path": list(path), "size": len(current)})
    if len(current) < target:
        raise NoCommonBasis(
            f"Largest common independent set has {len(current)} elements, rank is {target}"
        )
    return frozenset(current)


def _cheapest_path(sources, sinks, arcs, current, weights):
    def length(v):
        return weights[v] if v in current else -weights[v]

    def better(a, b):
        if b is None:
            return True
        if a[0] < b[0] - _EPS:
            return True
        return abs(a[0] - b[0]) <= _EPS and a[1] < b[1]

    label = {s: (length(s), 0) for s in sorted(sources)}
    parent = {s: None for s in label}
    vertices = sorted(set(arcs) | {v for heads in arcs.values() for v in heads} | set(label))
    for _ in range(len(vertices)):
        changed = False
        for u in vertices:
            if u not in label:
                continue
            for v in sorted(arcs.get(u, ())):
                candidate = (label[u][0] + length(v), label[u][1] + 1)
                if better(candidate, label.get(v)):
                    label[v] = candidate
                    parent[v] = u
                    changed = True
        if not changed:
            break
    ends = [v for v in sorted(sinks) if v in label]
    if not ends:
        return None
    end = ends[0]
    for v in ends[1:]:
        if better(label[v], label[end]):
            end = v
    path = [end]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
        if len(path) > len(vertices):
            raise RuntimeError("Negative cycle in the exchange graph; weights are not finite reals?")
    return path[::-1]
