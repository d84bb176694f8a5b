import itertools

import numpy as np

from controllability_tools.constraints import certify
from controllability_tools.sysmodel import (
    Graph,
    consensus_system,
    double_integrator_system,
    free_parameter_system,
)


def digraph(n, arcs, self_loops=False):
    return Graph(n, frozenset(arcs), self_loops=self_loops)


def random_free_system(n, seed, density=0.3, strongly_connected=False):
    rng = np.random.default_rng(seed)
    arcs = {(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < density}
    if strongly_connected:
        arcs |= {(i, (i + 1) % n) for i in range(n)}
    return free_parameter_system(digraph(n, arcs))


def random_consensus_system(n, seed, density=0.3):
    """Consensus system on a random connected undirected graph."""
    rng = np.random.default_rng(seed)
    edges = {(int(rng.integers(0, i)), i) for i in range(1, n)}
    edges |= {(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < density}
    return consensus_system(Graph(n, frozenset(edges), undirected=True))


def random_double_integrator_system(n, seed, density=0.4):
    rng = np.random.default_rng(seed)
    arcs = {(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < density}
    return double_integrator_system(digraph(n, arcs))


def subsets(ground):
    ground = sorted(ground)
    for size in range(len(ground) + 1):
        yield from (frozenset(c) for c in itertools.combinations(ground, size))


def brute_force_min_inputs(system, cfg):
    """Smallest number of candidate inputs whose certificate passes."""
    for size in range(len(system.inputs) + 1):
        for S in itertools.combinations(system.inputs, size):
            if certify(system, S, cfg).passed:
                return size
    return None


def coverage(sets, weights=None):
    """Weighted coverage function over the union of the chosen sets."""
    universe = sorted(set().union(*sets))
    weights = weights or {u: 1.0 for u in universe}
    return lambda S: sum(weights[u] for u in set().union(*(sets[e] for e in S))) if S else 0.0
