import itertools
import math

import numpy as np
import pytest

from controllability_tools.errors import UnboundedVariance
from controllability_tools.metrics import (
    MetricConfig,
    WeightedGraph,
    as_objective,
    coherence,
    convergence_error,
    simulate_consensus,
)
from controllability_tools.sysmodel import Graph
from helpers import digraph


def undirected(n, edges):
    return Graph(n, frozenset(edges), undirected=True)


@pytest.fixture
def pair():
    return WeightedGraph.uniform(undirected(2, [(0, 1)]), 2.0)


@pytest.fixture
def path5():
    return WeightedGraph.uniform(undirected(5, [(i, i + 1) for i in range(4)]))


def test_weights_are_validated():
    g = undirected(2, [(0, 1)])
    with pytest.raises(ValueError):
        WeightedGraph(g, {(0, 1): 1.0})
    with pytest.raises(ValueError):
        WeightedGraph(g, {(0, 1): 1.0, (1, 0): -1.0})
    with pytest.raises(ValueError):
        WeightedGraph(g, {(0, 1): 1.0, (1, 0): 2.0})
    with pytest.raises(ValueError):
        WeightedGraph(g, {(0, 1): 1.0, (1, 0): 1.0, (0, 0): 1.0})


def test_random_weights_are_symmetric_and_positive():
    g = WeightedGraph.random(undirected(4, [(0, 1), (1, 2), (2, 3)]), seed=3)
    for (i, j), w in g.weights.items():
        assert 0 < w <= 1
        assert g.weights[(j, i)] == w


def test_laplacian_rows_sum_to_zero(pair):
    assert pair.laplacian().tolist() == [[2.0, -2.0], [-2.0, 2.0]]
    directed = WeightedGraph.uniform(digraph(3, [(0, 1), (1, 2)]))
    L = directed.laplacian()
    assert L[1].tolist() == [-1.0, 1.0, 0.0]
    assert L[0].tolist() == [0.0, 0.0, 0.0]


def test_components():
    g = WeightedGraph.uniform(undirected(5, [(0, 1), (3, 4)]))
    assert g.components() == [(0, 1), (2,), (3, 4)]


def test_metric_config_validation():
    with pytest.raises(ValueError):
        MetricConfig(t=0)
    with pytest.raises(ValueError):
        MetricConfig(p=0.5)
    assert MetricConfig(seed=2).initial_state(3).tolist() == MetricConfig(seed=2).initial_state(3).tolist()


def test_follower_decays_exponentially(pair):
    x = simulate_consensus(pair, {0}, [0.0, 3.0], t=0.5)
    assert x[0] == 0.0
    assert x[1] == pytest.approx(3.0 * math.exp(-1.0))


def test_simulation_needs_an_input(pair):
    with pytest.raises(ValueError):
        simulate_consensus(pair, set(), [0.0, 1.0], t=1.0)


def test_pinned_value_is_held(path5):
    x = simulate_consensus(path5, {2}, np.zeros(5), t=1.0, x_star=1.5)
    assert x[2] == 1.5
    assert np.all(x <= 1.5 + 1e-12)


def test_convergence_error_of_the_free_network(pair):
    cfg = MetricConfig(t=1.0, p=2)
    x0 = np.array([1.0, 1.0])
    # consensus already reached; nothing moves
    assert convergence_error(pair, set(), cfg, x0) == pytest.approx(math.sqrt(2))


def test_convergence_error_decreases_with_more_inputs(path5):
    cfg = MetricConfig(t=0.5, seed=7)
    errors = {S: convergence_error(path5, S, cfg) for size in range(6) for S in itertools.combinations(range(5), size)}
    for S, value in errors.items():
        for v in range(5):
            if v not in S:
                bigger = tuple(sorted(S + (v,)))
                assert errors[bigger] <= value + 1e-12


def test_coherence_of_two_nodes(pair):
    assert coherence(pair, {0}) == pytest.approx(1 / (4 * 2.0))
    assert coherence(pair, {0, 1}) == 0.0


def test_coherence_needs_every_follower_reached():
    with pytest.raises(UnboundedVariance):
        coherence(WeightedGraph.uniform(digraph(2, [(0, 1)])), {1})
    split = WeightedGraph.uniform(undirected(4, [(0, 1), (2, 3)]))
    with pytest.raises(UnboundedVariance):
        coherence(split, {0})
    assert coherence(split, {0}, nodes=(0, 1)) > 0


def test_objectives_vanish_on_the_empty_set(path5):
    for metric in ("convergence", "coherence"):
        f = as_objective(metric, path5)
        assert f(set()) == 0.0
        assert f({2}) > 0


def test_coherence_objective_adds_over_components():
    split = WeightedGraph.uniform(undirected(4, [(0, 1), (2, 3)]))
    f = as_objective("coherence", split)
    assert f({0, 2}) == pytest.approx(f({0}) + f({2}))
    assert f({0, 2}) > f({0})


def test_convergence_objective_is_monotone(path5):
    f = as_objective("convergence", path5, MetricConfig(t=0.5))
    assert [v for v in f.spot_check(samples=100) if v["property"] == "monotone"] == []


def test_unknown_metric():
    with pytest.raises(ValueError):
        as_objective("latency", WeightedGraph.uniform(undirected(2, [(0, 1)])))


@pytest.mark.parametrize("seed", range(3))
def test_coherence_reward_is_nonnegative_monotone_and_submodular(seed):
    graph = WeightedGraph.random(undirected(5, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 4)]), seed=seed)
    f = as_objective("coherence", graph)
    values = {frozenset(S): f(S) for size in range(6) for S in itertools.combinations(range(5), size)}
    for S, value in values.items():
        assert value >= 0
        for v in range(5):
            if v in S:
                continue
            gain = values[S | {v}] - value
            assert gain >= -1e-9
            for T in values:
                if S <= T and v not in T:
                    assert values[T | {v}] - values[T] <= gain + 1e-9
