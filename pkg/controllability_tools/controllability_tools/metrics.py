"""
Performance metrics of pinned consensus networks.

Inputs are pinned at x_star, the remaining nodes (followers) evolve under
the grounded Laplacian, i.e. the follower block of the weighted Laplacian.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import networkx as nx
import numpy as np
from scipy.linalg import expm

from controllability_tools.errors import UnboundedVariance
from controllability_tools.selection import SubmodularObjective

logger = logging.getLogger(__name__)

METRICS = ("convergence", "coherence")


@dataclass(frozen=True)
class WeightedGraph:
    """A Graph with one positive weight per arc (i, j); node j listens to node i."""

    base: object
    weights: dict

    def __post_init__(self):
        for arc, w in self.weights.items():
            if arc not in self.base.edges:
                raise ValueError(f"Weight given for missing arc {arc}")
            if not w > 0:
                raise ValueError(f"Edge weights must be positive, got {w} on {arc}")
        missing = [arc for arc in self.base.edges if arc not in self.weights]
        if missing:
            raise ValueError(f"Missing weights for arcs {sorted(missing)[:5]}")
        if self.base.undirected and any(self.weights[(i, j)] != self.weights[(j, i)] for i, j in self.base.edges):
            raise ValueError("Undirected graphs need symmetric weights")

    @property
    def n(self):
        return self.base.n

    @classmethod
    def uniform(cls, graph, weight=1.0):
        return cls(graph, {arc: float(weight) for arc in graph.edges})

    @classmethod
    def random(cls, graph, seed=0):
        """Weights drawn uniformly from (0, 1], one per undirected edge."""
        rng = np.random.default_rng(seed)
        weights = {}
        for i, j in sorted(graph.edges):
            if (i, j) in weights:
                continue
            w = float(1.0 - rng.random())
            weights[(i, j)] = w
            if graph.undirected:
                weights[(j, i)] = w
        return cls(graph, weights)

    def laplacian(self):
        L = np.zeros((self.n, self.n))
        for (i, j), w in self.weights.items():
            if i == j:
                continue
            L[j, j] += w
            L[j, i] -= w
        return L

    def components(self):
        """Weakly connected components as sorted tuples, ordered by smallest node."""
        graph = self.base.to_networkx()
        return sorted(tuple(sorted(c)) for c in nx.weakly_connected_components(graph))


@dataclass(frozen=True)
class MetricConfig:
    t: float = 1.0
    p: float = 2.0
    x_star: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("Evaluation time t must be positive")
        if not self.p >= 1:
            raise ValueError("Norm order p must be at least 1")

    def initial_state(self, n):
        return np.random.default_rng(self.seed).random(n)


def _split(n, S):
    S = sorted({int(s) for s in S})
    if any(not 0 <= s < n for s in S):
        raise ValueError(f"Input set {S} out of range for {n} nodes")
    inputs = set(S)
    return S, [i for i in range(n) if i not in inputs]


def simulate_consensus(graph, S, x0, t, x_star=0.0):
    """
    State at time t with the nodes in S pinned at x_star.

    Args:
        graph (WeightedGraph): The network.
        S (iterable of int): Input nodes; must be nonempty.
        x0 (array): Initial state.
        t (float): Time.
        x_star (float): Pinned value.

    Returns:
        numpy.ndarray: x(t).
    """
    inputs, followers = _split(graph.n, S)
    if not inputs:
        raise ValueError("Cannot simulate pinned consensus with an empty input set")
    x0 = np.asarray(x0, dtype=float)
    x = np.full(graph.n, float(x_star))
    if followers:
        L = graph.laplacian()
        block = L[np.ix_(followers, followers)]
        x[followers] = x_star + expm(-t * block) @ (x0[followers] - x_star)
    return x


def convergence_error(graph, S, cfg=None, x0=None):
    """
    ||x(t) - x_star 1||_p after pinning S.

    The empty set gives the error of the free (unpinned) network measured
    against x_star.
    """
    cfg = cfg or MetricConfig()
    x0 = cfg.initial_state(graph.n) if x0 is None else np.asarray(x0, dtype=float)
    inputs, _ = _split(graph.n, S)
    if inputs:
        x = simulate_consensus(graph, inputs, x0, cfg.t, cfg.x_star)
    else:
        x = expm(-cfg.t * graph.laplacian()) @ x0
    return float(np.linalg.norm(x - cfg.x_star, ord=cfg.p))


def _reached_from(graph, inputs):
    digraph = graph.base.to_networkx()
    reached = set(inputs)
    for s in inputs:
        reached |= nx.descendants(digraph, s)
    return reached


def coherence(graph, S, nodes=None):
    """
    Steady-state mean-square deviation: trace(L_ff^-1) / (2 n).

    Args:
        graph (WeightedGraph): The network.
        S (iterable of int): Input nodes.
        nodes (iterable of int, optional): Restrict the followers to these
                                           nodes (one component).

    Raises:
        UnboundedVariance: A follower is not reached by any input.
    """
    inputs, followers = _split(graph.n, S)
    if nodes is not None:
        nodes = set(nodes)
        followers = [i for i in followers if i in nodes]
    if not followers:
        return 0.0
    unreached = set(followers) - _reached_from(graph, inputs)
    if unreached:
        raise UnboundedVariance(f"Followers {sorted(unreached)[:5]} are not reached by any input")
    L = graph.laplacian()
    block = L[np.ix_(followers, followers)]
    return float(np.trace(np.linalg.inv(block)) / (2 * graph.n))


def _coherence_component(graph, nodes):
    """
    Reward of one connected component: f(S) = C - coherence(S), f(empty) = 0.

    The grounded Laplacian inverse is entrywise nonnegative and shrinks
    entrywise when a follower becomes an input, so coherence(S) is
    nonincreasing and coherence(S) <= coherence({v}) <= M for every v in a
    nonempty S, with M the largest single-input coherence. With C = 2M:
    f({v}) >= M >= 0, so f is nonnegative and monotone, and the first gain
    f({v}) >= M bounds every later gain coherence(S) - coherence(S + v) <= M,
    which keeps the step from the empty set submodular.
    """
    nodes = tuple(nodes)
    ceiling = 2 * max(coherence(graph, {v}, nodes) for v in nodes)

    def value(S):
        if not S:
            return 0.0
        return ceiling - coherence(graph, S, nodes)

    return nodes, value


def as_objective(metric, graph, cfg=None, x0=None):
    """
    Monotone reward f(S) = C - metric(S) with f(empty set) = 0.

    For convergence error C is the error of the unpinned network. Coherence
    is split over connected components; each component contributes twice its
    largest single-input coherence minus its coherence, and nothing while it
    has no input.

    Args:
        metric (str): "convergence" or "coherence".
        graph (WeightedGraph): The network; positions are node indices.
        cfg (MetricConfig, optional): Evaluation time, norm and x_star.
        x0 (array, optional): Initial state; drawn from ``cfg`` otherwise.

    Returns:
        SubmodularObjective: The reward.
    """
    if metric not in METRICS:
        raise ValueError(f"Unknown metric {metric!r}; expected one of {METRICS}")
    cfg = cfg or MetricConfig()
    if metric == "convergence":
        x0 = cfg.initial_state(graph.n) if x0 is None else np.asarray(x0, dtype=float)
        ceiling = convergence_error(graph, (), cfg, x0)

        def reward(S):
            return ceiling - convergence_error(graph, S, cfg, x0)

        return SubmodularObjective(reward, graph.n, name="convergence")
    components = [_coherence_component(graph, nodes) for nodes in graph.components()]
    logger.debug("Coherence objective over %d components", len(components))
    return SubmodularObjective(None, graph.n, components=components, name="coherence")
