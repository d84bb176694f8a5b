"""
Descriptor systems F x' = A x, their input-augmented form, the consensus,
double-integrator and free-parameter constructors, and random geometric
networks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from controllability_tools.errors import GenerationError
from controllability_tools.structmat import (
    StructuredMatrix,
    det_mod,
    draw_free_values,
    fixed_array,
    free_array,
)

logger = logging.getLogger(__name__)

KINDS = ("consensus", "double_integrator", "free", "custom")


@dataclass(frozen=True)
class Graph:
    """
    Directed graph on nodes 0..n-1.

    Undirected graphs store both arc directions.
    """

    n: int
    edges: frozenset = frozenset()
    undirected: bool = False
    self_loops: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("Graph node count must be non-negative")
        arcs = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"Arc ({i}, {j}) outside a graph with {self.n} nodes")
            if i == j and not self.self_loops:
                raise ValueError(f"Self-loop at node {i} in a graph without self_loops")
            arcs.add((i, j))
            if self.undirected:
                arcs.add((j, i))
        object.__setattr__(self, "edges", frozenset(arcs))

    def undirected_edges(self):
        """Sorted (i, j) pairs with i < j for an undirected graph."""
        return sorted({(min(i, j), max(i, j)) for i, j in self.edges if i != j})

    def in_neighbors(self, j):
        return sorted(i for i, k in self.edges if k == j)

    def degree(self, i):
        """Total degree (in plus out)."""
        return sum(1 for a, b in self.edges if a == i) + sum(1 for a, b in self.edges if b == i)

    def mean_out_degree(self):
        return len(self.edges) / self.n if self.n else 0.0

    def to_networkx(self):
        graph = nx.DiGraph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(sorted(self.edges))
        return graph

    def to_json(self):
        if self.undirected:
            edges = self.undirected_edges()
        else:
            edges = sorted(self.edges)
        return {"n": self.n, "edges": [list(e) for e in edges], "undirected": self.undirected}

    @classmethod
    def from_json(cls, data):
        edges = frozenset((int(i), int(j)) for i, j in data.get("edges", []))
        return cls(
            int(data["n"]),
            edges,
            bool(data.get("undirected", False)),
            any(i == j for i, j in edges),
        )


@dataclass(frozen=True)
class DescriptorSystem:
    """
    Structured descriptor system F x' = A x.

    ``inputs`` lists the states that may carry an input, in node order;
    position p of a matroid ground set refers to state ``inputs[p]``.
    ``matching_hint`` gives, for every row i, the matched Omega row as
    ("w", i) or ("x", j).
    """

    n: int
    F: StructuredMatrix
    A: StructuredMatrix
    kind: str = "custom"
    inputs: tuple = None
    graph: Graph = None
    matching_hint: tuple = None
    solvable: bool = True

    def __post_init__(self):
        if self.F.shape != (self.n, self.n) or self.A.shape != (self.n, self.n):
            raise ValueError(
                f"F {self.F.shape} and A {self.A.shape} must both be {self.n}x{self.n}"
            )
        if self.kind not in KINDS:
            raise ValueError(f"Unknown system kind {self.kind!r}")
        inputs = tuple(range(self.n)) if self.inputs is None else tuple(int(i) for i in self.inputs)
        if any(not 0 <= i < self.n for i in inputs) or len(set(inputs)) != len(inputs):
            raise ValueError("Candidate inputs must be distinct state indices")
        object.__setattr__(self, "inputs", inputs)

    @property
    def free_support(self):
        """Positions of T_A together with T_F."""
        return self.A.free | self.F.free

    def position_of(self, state):
        try:
            return self.inputs.index(state)
        except ValueError:
            raise ValueError(f"State {state} is not a candidate input") from None

    def states_of(self, positions):
        return frozenset(self.inputs[p] for p in positions)

    def positions_of(self, states):
        return frozenset(self.position_of(s) for s in states)

    def network_graph(self):
        """N(A) together with N(F): arc (i, j) whenever X[j, i] is nonzero."""
        support = self.A.support() | self.F.support()
        return Graph(
            self.n,
            frozenset((c, r) for r, c in support if r != c),
        )

    def realize(self, cfg, draw):
        """
        One substitution of every free parameter.

        Args:
            cfg (FieldConfig): Field parameters.
            draw (int | numpy.random.Generator): Stream position or generator.

        Returns:
            tuple: (F, A, T_A) as int64 arrays mod cfg.prime.
        """
        rng = cfg.rng(draw) if isinstance(draw, (int, np.integer)) else draw
        p = cfg.prime
        t_f = free_array(self.F, draw_free_values(self.F, cfg, rng), p)
        t_a = free_array(self.A, draw_free_values(self.A, cfg, rng), p)
        f = (fixed_array(self.F, p) + t_f) % p
        a = (fixed_array(self.A, p) + t_a) % p
        return f, a, t_a

    def check_solvable(self, cfg):
        """True when det(A - z F) is not identically zero (tested at random z)."""
        p = cfg.prime
        for t in range(cfg.trials):
            rng = cfg.rng(t)
            f, a, _ = self.realize(cfg, rng)
            z = int(rng.integers(1, p))
            if det_mod((a - z * f) % p, p) != 0:
                return True
        return False

    def to_json(self):
        data = {
            "n": self.n,
            "kind": self.kind,
            "F": self.F.to_json(),
            "A": self.A.to_json(),
            "inputs": list(self.inputs),
        }
        if self.graph is not None:
            data["graph"] = self.graph.to_json()
        if self.matching_hint is not None:
            data["matching_hint"] = [list(h) for h in self.matching_hint]
        return data

    @classmethod
    def from_json(cls, data):
        hint = data.get("matching_hint")
        return cls(
            n=int(data["n"]),
            F=StructuredMatrix.from_json(data["F"]),
            A=StructuredMatrix.from_json(data["A"]),
            kind=data.get("kind", "custom"),
            inputs=tuple(data["inputs"]) if "inputs" in data else None,
            graph=Graph.from_json(data["graph"]) if "graph" in data else None,
            matching_hint=tuple((h[0], int(h[1])) for h in hint) if hint else None,
        )


@dataclass(frozen=True)
class AugmentedSystem:
    """The system with inputs on S: F x' = A x + T_B(S) u, T_B free diagonal on S."""

    base: DescriptorSystem
    S: frozenset = field(default_factory=frozenset)
    B: StructuredMatrix = None

    @property
    def n(self):
        return self.base.n

    def realize(self, cfg, draw):
        """Returns (F, A, B) arrays from one substitution."""
        rng = cfg.rng(draw) if isinstance(draw, (int, np.integer)) else draw
        f, a, _ = self.base.realize(cfg, rng)
        b = free_array(self.B, draw_free_values(self.B, cfg, rng), cfg.prime)
        return f, a, b


def augment_with_inputs(system, S):
    """
    Attaches one free input to every state in ``S``.

    Args:
        system (DescriptorSystem): The network.
        S (iterable of int): Input states.

    Returns:
        AugmentedSystem: The system with B = T_B(S).
    """
    S = frozenset(int(i) for i in S)
    for i in S:
        if not 0 <= i < system.n:
            raise ValueError(f"Input state {i} out of range for a system with {system.n} states")
    return AugmentedSystem(system, S, StructuredMatrix.free_diagonal(system.n, S))


def consensus_system(graph):
    """
    Consensus dynamics in descriptor form with node and edge states.

    Edges are oriented from the lower to the higher endpoint and indexed in
    lexicographic order. Node states come first, then one state per edge.

    Args:
        graph (Graph): Undirected network.

    Returns:
        DescriptorSystem: Q_F = diag(I, 0), Q_A = [[0, K], [K_I, 0]],
                          T_A free on the edge diagonal.
    """
    if not graph.undirected:
        raise ValueError("Consensus systems need an undirected graph")
    edges = graph.undirected_edges()
    if not edges:
        raise ValueError("Cannot build a consensus system on a graph without edges")
    N, M = graph.n, len(edges)
    n = N + M
    F = StructuredMatrix(n, n, {(i, i): 1 for i in range(N)})
    fixed = {}
    for e, (lo, hi) in enumerate(edges):
        # K_I block (edge rows, node columns) and K = K_I^T (node rows, edge columns)
        fixed[(N + e, lo)] = 1
        fixed[(N + e, hi)] = -1
        fixed[(lo, N + e)] = 1
        fixed[(hi, N + e)] = -1
    A = StructuredMatrix(n, n, fixed, frozenset((N + e, N + e) for e in range(M)))
    hint = tuple(("w", i) for i in range(N)) + tuple(("x", N + e) for e in range(M))
    return DescriptorSystem(
        n, F, A, kind="consensus", inputs=tuple(range(N)), graph=graph, matching_hint=hint
    )


def double_integrator_system(graph):
    """
    Second-order network: positions xi_0..xi_{N-1}, then velocities zeta.

    An arc i -> j makes the acceleration of j depend on the position and the
    velocity of i. Only velocity states carry inputs.
    """
    N = graph.n
    n = 2 * N
    F = StructuredMatrix.identity(n)
    fixed = {(i, N + i): 1 for i in range(N)}
    free = set()
    for i, j in graph.edges:
        if i == j:
            continue
        free.add((N + j, i))
        free.add((N + j, N + i))
    A = StructuredMatrix(n, n, fixed, frozenset(free))
    hint = tuple(("w", i) for i in range(n))
    return DescriptorSystem(
        n,
        F,
        A,
        kind="double_integrator",
        inputs=tuple(range(N, n)),
        graph=graph,
        matching_hint=hint,
    )


def free_parameter_system(graph):
    """x' = A x with A free on the network pattern: A[j, i] free for each arc i -> j."""
    n = graph.n
    A = StructuredMatrix(n, n, free=frozenset((j, i) for i, j in graph.edges))
    return DescriptorSystem(
        n,
        StructuredMatrix.identity(n),
        A,
        kind="free",
        graph=graph,
        matching_hint=tuple(("w", i) for i in range(n)),
    )


def _geometric_arcs(points, ranges, side):
    diff = points[:, None, :] - points[None, :, :]
    dist = side * np.sqrt((diff**2).sum(axis=-1))
    reach = dist <= ranges[None, :]
    np.fill_diagonal(reach, False)
    return reach


def random_geometric_network(n, target_degree, range_max=600.0, seed=0, max_iter=50, tolerance=0.1):
    """
    Random geometric digraph with a prescribed mean out-degree.

    Nodes sit uniformly in a square of side L; node j hears node i when
    their distance is at most the range of j. The side L is bisected until
    the mean out-degree is within ``tolerance`` (relative) of the target.

    Args:
        n (int): Number of nodes, at least 2.
        target_degree (float): Desired mean out-degree.
        range_max (float): Ranges are uniform on [0, range_max].
        seed (int): Seed of the generator.
        max_iter (int): Bisection iterations before giving up.
        tolerance (float): Accepted relative deviation of the mean degree.

    Returns:
        Graph: Directed graph with arc (i, j) when j hears i.
    """
    if n < 2:
        raise ValueError("A geometric network needs at least two nodes")
    if target_degree <= 0:
        raise ValueError("Target degree must be positive")
    rng = np.random.default_rng(seed)
    points = rng.uniform(0.0, 1.0, size=(n, 2))
    ranges = rng.uniform(0.0, range_max, size=n)

    def mean_degree(side):
        return _geometric_arcs(points, ranges, side).sum() / n

    def build(side):
        reach = _geometric_arcs(points, ranges, side)
        return Graph(n, frozenset(zip(*(idx.tolist() for idx in np.nonzero(reach)))))

    if mean_degree(0.0) <= target_degree * (1 + tolerance):
        return build(0.0)

    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    lo, hi = 0.0, 2.0 * range_max / max(dist.min(), 1e-12)
    side = hi
    achieved = mean_degree(hi)
    for iteration in range(max_iter):
        side = 0.5 * (lo + hi)
        achieved = mean_degree(side)
        if abs(achieved - target_degree) <= tolerance * target_degree:
            logger.debug("Side %.3f after %d bisection steps, degree %.3f", side, iteration + 1, achieved)
            return build(side)
        if achieved > target_degree:
            lo = side
        else:
            hi = side
    raise GenerationError(f"Bisection did not reach mean degree {target_degree}", achieved)


def symmetrize(graph, mode="mutual"):
    """
    Undirected version of a digraph.

    Args:
        graph (Graph): Directed network.
        mode (str): 'mutual' keeps pairs linked both ways, 'union' keeps
                    pairs linked either way.

    Returns:
        Graph: Undirected graph.
    """
    if mode not in ("mutual", "union"):
        raise ValueError("mode must be 'mutual' or 'union'")
    if mode == "mutual":
        pairs = {(i, j) for i, j in graph.edges if (j, i) in graph.edges and i != j}
    else:
        pairs = {(i, j) for i, j in graph.edges if i != j}
    return Graph(graph.n, frozenset(pairs), undirected=True)


def is_strongly_connected(graph):
    """Strong connectivity of a Graph or of a system's network graph."""
    if isinstance(graph, DescriptorSystem):
        graph = graph.network_graph()
    if graph.n <= 1:
        return True
    return nx.is_strongly_connected(graph.to_networkx())
