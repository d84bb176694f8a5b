import pytest

from controllability_tools.auxgraph import Vertex, add_input_edges
from controllability_tools.constraints import (
    ControllabilityModel,
    build_matroids,
    certify,
    gci_c1,
    gci_c2,
    rho1,
    rho2,
)
from controllability_tools.errors import KTooSmall, NotStronglyConnected
from controllability_tools.matroid import PartitionMatroid, UnionMatroid
from controllability_tools.selection import min_input_set
from controllability_tools.structmat import FieldConfig
from controllability_tools.sysmodel import (
    DescriptorSystem,
    Graph,
    consensus_system,
    free_parameter_system,
)
from helpers import (
    digraph,
    random_consensus_system,
    random_double_integrator_system,
    random_free_system,
    subsets,
)


def consensus(n, edges):
    return consensus_system(Graph(n, frozenset(edges), undirected=True))


def test_rho1_of_a_chain(cfg, chain):
    model = ControllabilityModel(chain, cfg)
    # A has rank 2, so one input on the head fills the rank
    assert model.rho1(set()) == 0
    assert model.rho1({0}) == 1
    assert model.rho1({2}) == 0
    assert model.coloops == {0}


def test_rho1_union_matches_the_cokernel_rank(cfg):
    system = random_free_system(5, seed=2, density=0.25)
    model = ControllabilityModel(system, cfg)
    exact = ControllabilityModel(system, cfg, exact_union=True)
    assert model.zeta == exact.zeta
    for S in subsets(range(5)):
        assert model.rho1(S) == model.rho1_union(S) == exact.rho1(S)


def test_rho1_is_monotone_and_bounded(cfg, star):
    model = ControllabilityModel(star, cfg)
    values = {S: model.rho1(S) for S in subsets(range(4))}
    for S, value in values.items():
        assert 0 <= value <= len(S)
        for T, other in values.items():
            if S <= T:
                assert value <= other


def test_model_needs_candidate_inputs(chain):
    empty = DescriptorSystem(chain.n, chain.F, chain.A, kind="free", inputs=())
    with pytest.raises(ValueError):
        ControllabilityModel(empty)


def test_classes_of_two_consensus_components(cfg):
    model = ControllabilityModel(consensus(6, [(0, 1), (1, 2), (3, 4), (4, 5)]), cfg)
    assert model.class_count >= 2
    assert model.rho2(set()) == 0
    assert model.rho2({0, 3}) == 2
    assert rho2(model, {0, 3}) == model.rho2({0, 3})


def test_c2_counts_the_reached_component(cfg):
    model = ControllabilityModel(consensus(6, [(0, 1), (1, 2), (3, 4), (4, 5)]), cfg)
    assert gci_c2(model, {0}) == 3
    assert gci_c2(model, {0, 3}) == 6
    assert gci_c2(model, set()) == 0


def test_c1_and_strong_index(cfg, cycle4):
    model = ControllabilityModel(cycle4, cfg)
    assert gci_c1(model, set()) == model.m1.full_rank()
    assert gci_c1(model, {0, 1, 2, 3}) == 4
    assert model.gci_strong(set()) == model.zeta
    assert model.controllable_count({0}) == model.zeta - 4 + rho1(model, {0})


def test_strong_index_needs_strong_connectivity(cfg, chain):
    with pytest.raises(NotStronglyConnected):
        ControllabilityModel(chain, cfg).gci_strong({0})


def test_build_matroids_with_budget(cfg, star):
    model = ControllabilityModel(star, cfg)
    matroids = build_matroids(model)
    assert matroids.r1 == 3
    assert matroids.m1_hat is None
    with pytest.raises(KTooSmall):
        build_matroids(model, k=2)
    with pytest.raises(ValueError):
        build_matroids(model, k=5)
    extended = build_matroids(model, k=4)
    assert isinstance(extended.m1_hat, UnionMatroid)
    assert extended.m1_hat.full_rank() == 4
    assert build_matroids(model, k=3).m1_hat is model.m1


def test_strong_matroids_use_a_single_class(cfg, cycle4):
    matroids = build_matroids(ControllabilityModel(cycle4, cfg), k=2, strong=True)
    assert matroids.r2 == 1
    assert matroids.m2_hat.full_rank() == 2


def test_full_input_set_always_certifies(cfg, chain, star, cycle4):
    for system in (chain, star, cycle4):
        assert certify(system, range(system.n), cfg).passed


def test_certificate_failures(cfg, chain):
    result = certify(chain, {2}, cfg)
    assert not result.passed
    assert not result.rank_AB_ok
    assert result.gcd_degree == -1
    assert result.trials_run == cfg.trials
    system = consensus(3, [(0, 1), (1, 2)])
    assert not certify(system, set(), cfg).passed


def test_consensus_path_needs_one_input(cfg):
    system = consensus(3, [(0, 1), (1, 2)])
    result = certify(system, {0}, cfg)
    assert result.passed
    assert result.gcd_degree == 0
    assert result.S == (0,)


def test_certificate_records_its_evidence(cfg, chain):
    result = certify(chain, {0}, FieldConfig(seed=1, trials=2), z_count=5)
    data = result.to_json()
    assert data["passed"] is True
    assert len(data["z_samples"]) == 6
    assert data["z_samples"][0] == 0
    assert 0 < data["failure_bound"] < 1e-8


def test_self_loop_system_needs_its_only_state(cfg):
    system = free_parameter_system(digraph(1, [(0, 0)], self_loops=True))
    assert certify(system, {0}, cfg).passed
    assert not certify(system, set(), cfg).passed


def small_system(kind, seed):
    if kind == "free":
        return random_free_system(5 + seed % 2, seed, density=0.3)
    if kind == "consensus":
        return random_consensus_system(4 + seed % 2, seed)
    return random_double_integrator_system(3, seed)


KINDS = ["free", "consensus", "double_integrator"]


def exhaustive(function, ground):
    return {S: function(S) for S in subsets(ground)}


def assert_submodular(values):
    for A, a in values.items():
        for B, b in values.items():
            assert a + b >= values[A | B] + values[A & B]


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("seed", range(4))
def test_rank_functions_satisfy_the_matroid_axioms(cfg, kind, seed):
    system = small_system(kind, seed)
    model = ControllabilityModel(system, cfg)
    for rank in (model.rho1, model.rho2):
        values = exhaustive(rank, system.inputs)
        for S, value in values.items():
            assert 0 <= value <= len(S)
            for e in system.inputs:
                if e not in S:
                    assert values[S | {e}] - value in (0, 1)
        assert_submodular(values)


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("seed", range(3))
def test_matroid_conditions_agree_with_the_certificate(cfg, kind, seed):
    system = small_system(kind, seed)
    model = ControllabilityModel(system, cfg)
    matroids = build_matroids(model)
    full = 2 * system.n - model.zeta
    ground = model.m1.ground()
    for S in subsets(system.inputs):
        certificate = certify(system, S, cfg)
        R = ground - model.positions(S)
        assert certificate.rank_AB_ok == (model.rho1(S) == full)
        assert certificate.rank_AB_ok == matroids.m1_star.is_independent(R)
        if matroids.m1_star.is_independent(R) and matroids.m2_star.is_independent(R):
            assert certificate.passed


@pytest.mark.parametrize("kind", ["free", "consensus"])
@pytest.mark.parametrize("seed", range(3))
def test_controllability_indices_are_monotone_and_submodular(cfg, kind, seed):
    system = small_system(kind, seed)
    model = ControllabilityModel(system, cfg)
    for index in (model.gci_c1, model.gci_c2):
        values = exhaustive(index, system.inputs)
        for S, value in values.items():
            for e in system.inputs:
                if e not in S:
                    assert values[S | {e}] >= value
        assert_submodular(values)


def w_only_count(model, S):
    """States whose w^T vertex reaches an input vertex of G^."""
    S = sorted(S)
    g_hat = add_input_edges(model.base_graph, S)
    reach = g_hat.reaching(Vertex("u", i, side) for i in S for side in ("T", "Q"))
    return sum(Vertex("w", i, "T") in reach for i in model.system.inputs)


@pytest.mark.parametrize("kind", KINDS)
def test_c2_never_counts_fewer_than_the_w_vertices(cfg, kind):
    model = ControllabilityModel(small_system(kind, 1), cfg)
    for S in subsets(model.system.inputs):
        if kind == "free":
            assert model.gci_c2(S) == w_only_count(model, S)
        else:
            assert model.gci_c2(S) >= w_only_count(model, S)


def test_consensus_node_vertices_w_are_sinks(cfg):
    model = ControllabilityModel(consensus(6, [(0, 1), (1, 2), (3, 4), (4, 5)]), cfg)
    for i in range(6):
        assert model.base_graph.graph.out_degree(Vertex("w", i, "T")) == 0
    assert w_only_count(model, {0}) == 1
    assert model.gci_c2({0}) == 3


def test_single_input_covers_a_consensus_cycle(cfg):
    model = ControllabilityModel(consensus(4, [(0, 1), (1, 2), (2, 3), (0, 3)]), cfg)
    assert model.class_count == 1
    assert all(model.rho2({i}) == 1 for i in range(4))
    assert len(min_input_set(model.system, cfg, model).S) == 1


def test_forced_class_is_dropped(cfg):
    # root 0 feeds the cycle 1 <-> 2 and is a coloop of M1
    system = free_parameter_system(digraph(3, [(0, 1), (1, 2), (2, 1)]))
    pruned = ControllabilityModel(system, cfg)
    kept = ControllabilityModel(system, cfg, prune_forced=False)
    assert pruned.coloops == {0}
    assert pruned.class_count == 0
    assert kept.class_count == 1
    assert kept.rho2({0}) == 1
    assert min_input_set(system, cfg, pruned).S == min_input_set(system, cfg, kept).S == (0,)


@pytest.mark.parametrize("seed", range(10))
def test_pruning_never_enlarges_the_minimum(cfg, seed):
    system = random_free_system(5, 40 + seed, density=0.3)
    pruned = ControllabilityModel(system, cfg)
    kept = ControllabilityModel(system, cfg, prune_forced=False)
    small = min_input_set(system, cfg, pruned)
    large = min_input_set(system, cfg, kept)
    assert small.certificate.passed and large.certificate.passed
    assert pruned.class_count <= kept.class_count
    if isinstance(kept.m2, PartitionMatroid):
        assert len(small.S) == len(large.S)
    else:
        assert len(small.S) <= len(large.S)
