import pytest

from controllability_tools.errors import GenerationError
from controllability_tools.structmat import StructuredMatrix
from controllability_tools.sysmodel import (
    DescriptorSystem,
    Graph,
    augment_with_inputs,
    consensus_system,
    double_integrator_system,
    free_parameter_system,
    is_strongly_connected,
    random_geometric_network,
    symmetrize,
)
from helpers import digraph


def path(n):
    return Graph(n, frozenset((i, i + 1) for i in range(n - 1)), undirected=True)


def test_graph_validation():
    with pytest.raises(ValueError):
        Graph(2, frozenset({(0, 2)}))
    with pytest.raises(ValueError):
        Graph(2, frozenset({(1, 1)}))
    assert Graph(2, frozenset({(1, 1)}), self_loops=True).edges == {(1, 1)}


def test_undirected_graph_stores_both_directions():
    g = path(3)
    assert g.edges == {(0, 1), (1, 0), (1, 2), (2, 1)}
    assert g.undirected_edges() == [(0, 1), (1, 2)]
    assert g.degree(1) == 4
    assert Graph.from_json(g.to_json()) == g


def test_consensus_system_layout():
    system = consensus_system(path(3))
    assert system.n == 5
    assert system.inputs == (0, 1, 2)
    assert system.F.fixed == {(0, 0): 1, (1, 1): 1, (2, 2): 1}
    assert system.A.free == {(3, 3), (4, 4)}
    # edge (0, 1) is state 3
    assert system.A.fixed[(3, 0)] == 1 and system.A.fixed[(3, 1)] == -1
    assert system.A.fixed[(0, 3)] == 1 and system.A.fixed[(1, 3)] == -1


def test_consensus_system_needs_undirected_edges():
    with pytest.raises(ValueError):
        consensus_system(digraph(3, [(0, 1)]))
    with pytest.raises(ValueError):
        consensus_system(Graph(3, undirected=True))


def test_double_integrator_layout(chain):
    system = double_integrator_system(chain.graph)
    assert system.n == 6
    assert system.inputs == (3, 4, 5)
    assert system.A.fixed == {(0, 3): 1, (1, 4): 1, (2, 5): 1}
    assert system.A.free == {(4, 0), (4, 3), (5, 1), (5, 4)}
    assert system.position_of(4) == 1
    assert system.states_of({0, 2}) == {3, 5}
    assert system.positions_of({5}) == {2}
    with pytest.raises(ValueError):
        system.position_of(0)


def test_free_system_pattern_follows_the_arcs(chain):
    assert chain.A.free == {(1, 0), (2, 1)}
    assert chain.F == StructuredMatrix.identity(3)
    assert chain.network_graph().edges == chain.graph.edges


def test_descriptor_system_validation():
    with pytest.raises(ValueError):
        DescriptorSystem(2, StructuredMatrix.identity(3), StructuredMatrix.zeros(2, 2))
    with pytest.raises(ValueError):
        DescriptorSystem(2, StructuredMatrix.identity(2), StructuredMatrix.zeros(2, 2), inputs=(0, 0))
    with pytest.raises(ValueError):
        DescriptorSystem(2, StructuredMatrix.identity(2), StructuredMatrix.zeros(2, 2), kind="other")


def test_descriptor_system_json_keeps_the_structure():
    system = consensus_system(path(3))
    restored = DescriptorSystem.from_json(system.to_json())
    assert restored.F == system.F and restored.A == system.A
    assert restored.inputs == system.inputs
    assert restored.matching_hint == system.matching_hint


def test_solvability(cfg, chain):
    assert chain.check_solvable(cfg)
    zero = StructuredMatrix.zeros(2, 2)
    assert not DescriptorSystem(2, zero, zero).check_solvable(cfg)


def test_augment_with_inputs(chain):
    aug = augment_with_inputs(chain, [0, 2])
    assert aug.S == {0, 2}
    assert aug.B.free == {(0, 0), (2, 2)}
    with pytest.raises(ValueError):
        augment_with_inputs(chain, [3])


def test_realizations_are_reproducible(cfg, chain):
    aug = augment_with_inputs(chain, [0])
    first = aug.realize(cfg, 5)
    second = aug.realize(cfg, 5)
    assert all((a == b).all() for a, b in zip(first, second))
    assert first[2][0, 0] != 0


def test_symmetrize_modes():
    g = digraph(3, [(0, 1), (1, 0), (1, 2)])
    assert symmetrize(g, "mutual").undirected_edges() == [(0, 1)]
    assert symmetrize(g, "union").undirected_edges() == [(0, 1), (1, 2)]
    with pytest.raises(ValueError):
        symmetrize(g, "both")


def test_strong_connectivity(chain, cycle4):
    assert not is_strongly_connected(chain)
    assert is_strongly_connected(cycle4)
    assert is_strongly_connected(Graph(1))


def test_geometric_network_hits_the_target_degree():
    g = random_geometric_network(30, 4.0, seed=0)
    assert g.n == 30
    assert abs(g.mean_out_degree() - 4.0) <= 0.4
    assert random_geometric_network(30, 4.0, seed=0) == g


def test_geometric_network_rejects_bad_parameters():
    with pytest.raises(ValueError):
        random_geometric_network(1, 2.0)
    with pytest.raises(ValueError):
        random_geometric_network(5, 0.0)


def test_geometric_network_gives_up_without_iterations():
    with pytest.raises(GenerationError) as info:
        random_geometric_network(30, 4.0, seed=0, max_iter=0)
    assert info.value.achieved_degree >= 0
