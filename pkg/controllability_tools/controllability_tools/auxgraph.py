"""
Auxiliary graph of a descriptor system.

Omega stacks the fixed part of the system (rows w), the identity on states
(rows x) and the identity on inputs (rows u). A perfect matching of the
bipartite graph H whose matched rows J are independent in Omega, together
with the completion J1 (the u rows), gives Omega_tilde = Omega
Omega_{J+J1}^{-1}; its support and the free pattern define the arcs of the
auxiliary graph G'. Input vertices are added per input set to obtain G^.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import networkx as nx
import numpy as np

from controllability_tools.errors import (
    CompletionFailure,
    CycleBudgetExceeded,
    NoIndependentMatching,
)
from controllability_tools.matroid import (
    LinearMatroid,
    TransversalMatroid,
    max_cardinality_intersection,
)
from controllability_tools.structmat import (
    FieldConfig,
    StructuredMatrix,
    fixed_array,
    inverse_mod,
    rational_inverse,
    rational_reconstruct,
)
from controllability_tools.sysmodel import AugmentedSystem, DescriptorSystem

logger = logging.getLogger(__name__)

CYCLE_BUDGET = 10**6


class Vertex(NamedTuple):
    role: str  # "w", "x" or "u"
    index: int
    side: str  # "T" or "Q"

    def __str__(self):
        return f"{self.role}{self.index}^{self.side}"


def _row_order(label):
    return ("wxu".index(label[0]), label[1])


@dataclass(frozen=True)
class OmegaMatrix:
    """
    Omega with labeled rows and columns.

    ``entries`` is 3n x 2n: rows w_0..w_{n-1}, x_0..x_{n-1}, u_0..u_{n-1};
    columns are the n states followed by the n input slots. The fixed part
    holds Q_A - Q_F and the identity blocks; the free part marks the
    T_A + T_F support on the w rows.
    """

    n: int
    entries: StructuredMatrix
    row_labels: tuple
    col_labels: tuple

    def row_index(self, label):
        role, i = label
        return "wxu".index(role) * self.n + i


@dataclass(frozen=True)
class IndependentMatching:
    """Perfect matching of H: ``partner[i]`` is the Q-vertex matched to w_i^T."""

    partner: tuple
    J: tuple

    def matched(self, i):
        return self.partner[i]


@dataclass
class AuxGraph:
    """
    The graph G' (no inputs) or G^ (with inputs S).

    ``graph`` is a networkx DiGraph on Vertex nodes; treat instances as
    immutable and derive new ones with ``add_input_edges``.
    """

    n: int
    graph: nx.DiGraph
    matching: IndependentMatching
    J: tuple
    J1: tuple
    omega_tilde: StructuredMatrix
    S_minus: frozenset
    inputs: frozenset = field(default_factory=frozenset)

    @property
    def arcs(self):
        return frozenset(self.graph.edges)

    @property
    def vertices(self):
        return frozenset(self.graph.nodes)

    def cycle_vertices(self):
        """Vertices inside strongly connected components of size >= 2 or on self-loops."""
        cyclic = set()
        for component in nx.strongly_connected_components(self.graph):
            if len(component) > 1:
                cyclic |= component
        cyclic |= {v for v in self.graph.nodes if self.graph.has_edge(v, v)}
        return frozenset(cyclic)

    def reaching(self, targets):
        """Vertices with a directed path to some target (targets included)."""
        targets = [t for t in targets if t in self.graph]
        reach = set(targets)
        for t in targets:
            reach |= nx.ancestors(self.graph, t)
        return frozenset(reach)


def build_omega(system):
    """
    Omega for a system with inputs available on every state.

    Args:
        system (DescriptorSystem | AugmentedSystem): The system.

    Returns:
        OmegaMatrix: Labeled 3n x 2n matrix.
    """
    base = system.base if isinstance(system, AugmentedSystem) else system
    n = base.n
    fixed = {}
    for (r, c), v in base.A.fixed.items():
        fixed[(r, c)] = fixed.get((r, c), 0) + v
    for (r, c), v in base.F.fixed.items():
        fixed[(r, c)] = fixed.get((r, c), 0) - v
    for i in range(n):
        fixed[(n + i, i)] = 1
        fixed[(2 * n + i, n + i)] = 1
    entries = StructuredMatrix(3 * n, 2 * n, fixed, base.free_support)
    rows = tuple(("w", i) for i in range(n)) + tuple(("x", i) for i in range(n)) + tuple(
        ("u", i) for i in range(n)
    )
    cols = tuple(("state", i) for i in range(n)) + tuple(("input", i) for i in range(n))
    return OmegaMatrix(n, entries, rows, cols)


def _hint_matching(omega, system, row_matroid, slots):
    hint = system.matching_hint
    n = omega.n
    if hint is None or len(hint) != n:
        return None
    elements = []
    for i, (role, j) in enumerate(hint):
        element = j if role == "w" else n + j
        if role not in ("w", "x") or element not in slots[i]:
            return None
        elements.append(element)
    if len(set(elements)) != n or not row_matroid.is_independent(elements):
        return None
    return elements


def find_independent_matching(omega, system, cfg=None):
    """
    Perfect matching of H whose matched rows are independent in Omega.

    H joins w_i^T to w_i^Q and to x_j^Q for every free position (i, j).
    A matching supplied by the constructor is validated and used; otherwise
    the matching comes from a maximum common independent set of the
    transversal matroid of H and the row matroid of Omega's fixed part.

    Args:
        omega (OmegaMatrix): Omega of the system.
        system (DescriptorSystem | AugmentedSystem): The system.
        cfg (FieldConfig, optional): Field used for the row matroid.

    Returns:
        IndependentMatching: Partners and the sorted row set J.
    """
    base = system.base if isinstance(system, AugmentedSystem) else system
    cfg = cfg or FieldConfig()
    n = omega.n
    wx_rows = fixed_array(omega.entries, cfg.prime)[: 2 * n, :n]
    row_matroid = LinearMatroid(wx_rows.T, cfg.prime)
    slots = [{i} | {n + j for (r, j) in base.free_support if r == i} for i in range(n)]

    elements = _hint_matching(omega, base, row_matroid, slots)
    if elements is None:
        if base.matching_hint is not None:
            logger.warning("Constructor matching rejected; searching for an independent matching")
        transversal = TransversalMatroid(2 * n, slots)
        common = max_cardinality_intersection(transversal, row_matroid)
        if len(common) < n:
            raise NoIndependentMatching(
                f"Only {len(common)} of {n} rows can be matched independently"
            )
        assignment = transversal.matching(common)
        elements = [None] * n
        for element, slot in assignment.items():
            elements[slot] = element

    partner = tuple(
        Vertex("w", e, "Q") if e < n else Vertex("x", e - n, "Q") for e in elements
    )
    J = tuple(sorted(((v.role, v.index) for v in partner), key=_row_order))
    return IndependentMatching(partner, J)


def complete_and_invert(omega, J, cfg=None, exact=False):
    """
    Completes J with the u rows and computes Omega_tilde.

    Args:
        omega (OmegaMatrix): Omega of the system.
        J (tuple): Matched rows.
        cfg (FieldConfig, optional): Field for the modular computation.
        exact (bool): Compute with exact rationals instead of modulo p.

    Returns:
        tuple: J1 and Omega_tilde as a StructuredMatrix whose columns follow
               the order of J then J1.
    """
    n = omega.n
    J1 = tuple(("u", i) for i in range(n))
    basis_rows = [omega.row_index(label) for label in tuple(J) + J1]
    if len(basis_rows) != 2 * n:
        raise CompletionFailure(f"J has {len(J)} rows, expected {n}")

    if exact:
        dense = omega.entries.fixed_dense()
        try:
            inverse = rational_inverse([dense[r] for r in basis_rows])
        except ValueError as exc:
            raise CompletionFailure("Rows J + J1 are singular") from exc
        product = {}
        for r, row in enumerate(dense):
            nonzero = [(k, v) for k, v in enumerate(row) if v != 0]
            for c in range(2 * n):
                total = sum((v * inverse[k][c] for k, v in nonzero), Fraction(0))
                if total != 0:
                    product[(r, c)] = total
        return J1, StructuredMatrix(3 * n, 2 * n, product)

    cfg = cfg or FieldConfig()
    p = cfg.prime
    matrix = fixed_array(omega.entries, p)
    try:
        inverse = inverse_mod(matrix[basis_rows], p)
    except ValueError as exc:
        raise CompletionFailure("Rows J + J1 are singular over the field") from exc
    tilde = _matmul_mod(matrix, inverse, p)
    product = {}
    unreconstructed = 0
    for r, c in zip(*np.nonzero(tilde)):
        value = rational_reconstruct(int(tilde[r, c]), p)
        if value is None:
            unreconstructed += 1
            value = Fraction(int(tilde[r, c]))
        product[(int(r), int(c))] = value
    if unreconstructed:
        logger.debug("%d entries of Omega_tilde kept as residues", unreconstructed)
    return J1, StructuredMatrix(3 * n, 2 * n, product)


def _matmul_mod(a, b, p):
    # chunked so that partial sums stay inside int64
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for k in range(a.shape[1]):
        column = a[:, k]
        if np.any(column):
            out = (out + column[:, None] * b[k][None, :] % p) % p
    return out


def closed_form_omega_tilde(system):
    """
    Omega_tilde of the consensus, double-integrator and free-parameter
    constructors, with columns ordered as J then J1. Returns None for
    custom systems.
    """
    n = system.n
    fixed = {}
    if system.kind == "consensus":
        N = len(system.inputs)
        # rows: w nodes, w edges, x nodes, x edges, u; columns: J (w nodes, x edges), J1
        for i in range(N):
            fixed[(i, i)] = 1
        for (r, c), v in system.A.fixed.items():
            if r >= N and c < N:  # K_I
                e = r - N
                fixed[(N + e, c)] = -v
            if r < N and c >= N:  # K
                fixed[(n + r, c)] = v
        for i in range(N):
            fixed[(n + i, i)] = -1
        M = n - N
        incidence = {}
        for (r, c), v in system.A.fixed.items():
            if r >= N and c < N:
                incidence.setdefault(r - N, {})[c] = v
        for e in range(M):
            for f in range(M):
                value = sum(
                    v * incidence[f].get(node, 0) for node, v in incidence[e].items()
                )
                if value != 0:
                    fixed[(N + e, N + f)] = value
            fixed[(n + N + e, N + e)] = 1
    elif system.kind == "double_integrator":
        N = n // 2
        for i in range(n):
            fixed[(i, i)] = 1
        for i in range(N):
            fixed[(n + i, i)] = -1
            fixed[(n + i, N + i)] = -1
            fixed[(n + N + i, N + i)] = -1
    elif system.kind == "free":
        for i in range(n):
            fixed[(i, i)] = 1
            fixed[(n + i, i)] = -1
    else:
        return None
    for i in range(n):
        fixed[(2 * n + i, n + i)] = 1
    return StructuredMatrix(3 * n, 2 * n, fixed)


def build_base_graph(system, cfg=None, exact=False):
    """
    The auxiliary graph G' of a system with no inputs attached.

    Arcs:
      * free position (i, j): w_i^T -> x_j^T, reversed when w_i^T is matched to x_j^Q;
      * x_j^T -> x_j^Q, reversed when x_j is in J;
      * w_i^T -> w_i^Q, reversed when w_i^T is matched to w_i^Q;
      * x^Q -> y^Q for rows x outside J and y in J with Omega_tilde[x, y] != 0
        and Omega_tilde zero on the J1 columns of row x.

    Args:
        system (DescriptorSystem | AugmentedSystem): The system.
        cfg (FieldConfig, optional): Field used for the generic computations.
        exact (bool): Compute Omega_tilde with exact rationals.

    Returns:
        AuxGraph: G' with its matching, J, J1, Omega_tilde and S_minus.
    """
    base = system.base if isinstance(system, AugmentedSystem) else system
    cfg = cfg or FieldConfig()
    n = base.n
    omega = build_omega(base)
    matching = find_independent_matching(omega, base, cfg)
    J1, tilde = complete_and_invert(omega, matching.J, cfg, exact=exact)

    closed = closed_form_omega_tilde(base)
    hinted = base.matching_hint is not None and tuple(
        sorted(((v.role, v.index) for v in matching.partner), key=_row_order)
    ) == tuple(sorted(base.matching_hint, key=_row_order))
    if closed is not None and hinted:
        if closed.support() != tilde.support():
            logger.warning("Omega_tilde support differs from the %s closed form", base.kind)
        else:
            tilde = closed

    graph = nx.DiGraph()
    for i in range(n):
        for role in ("w", "x"):
            graph.add_node(Vertex(role, i, "T"))
            graph.add_node(Vertex(role, i, "Q"))

    J_set = set(matching.J)
    for i, j in sorted(base.free_support):
        if matching.partner[i] == Vertex("x", j, "Q"):
            graph.add_edge(Vertex("x", j, "T"), Vertex("w", i, "T"))
        else:
            graph.add_edge(Vertex("w", i, "T"), Vertex("x", j, "T"))
    for j in range(n):
        if ("x", j) in J_set:
            graph.add_edge(Vertex("x", j, "Q"), Vertex("x", j, "T"))
        else:
            graph.add_edge(Vertex("x", j, "T"), Vertex("x", j, "Q"))
    for i in range(n):
        if matching.partner[i] == Vertex("w", i, "Q"):
            graph.add_edge(Vertex("w", i, "Q"), Vertex("w", i, "T"))
        else:
            graph.add_edge(Vertex("w", i, "T"), Vertex("w", i, "Q"))

    columns = tuple(matching.J) + J1
    rows_on_j1 = {r for (r, c) in tilde.support() if c >= n}
    for (r, c) in sorted(tilde.support()):
        if c >= n or r >= 2 * n or r in rows_on_j1:
            continue
        row_label = omega.row_labels[r]
        if row_label in J_set:
            continue
        target = columns[c]
        graph.add_edge(Vertex(row_label[0], row_label[1], "Q"), Vertex(target[0], target[1], "Q"))

    S_minus = frozenset(
        Vertex(omega.row_labels[r][0], omega.row_labels[r][1], "Q") for r in rows_on_j1
    )
    logger.debug("G' has %d vertices and %d arcs", graph.number_of_nodes(), graph.number_of_edges())
    return AuxGraph(n, graph, matching, matching.J, J1, tilde, S_minus)


def add_input_edges(base_graph, S):
    """
    G^ = G' plus u_i^T, u_i^Q and the arcs w_i^T -> u_i^T -> u_i^Q for i in S.

    Args:
        base_graph (AuxGraph): G'.
        S (iterable of int): Input states.

    Returns:
        AuxGraph: A new graph; ``base_graph`` is left unchanged.
    """
    S = frozenset(int(i) for i in S)
    for i in S:
        if not 0 <= i < base_graph.n:
            raise ValueError(f"Input state {i} out of range")
    graph = base_graph.graph.copy()
    for i in sorted(S):
        graph.add_edge(Vertex("w", i, "T"), Vertex("u", i, "T"))
        graph.add_edge(Vertex("u", i, "T"), Vertex("u", i, "Q"))
    return AuxGraph(
        base_graph.n,
        graph,
        base_graph.matching,
        base_graph.J,
        base_graph.J1,
        base_graph.omega_tilde,
        base_graph.S_minus,
        base_graph.inputs | S,
    )


@dataclass(frozen=True)
class Condensation:
    class_of: dict
    members: dict
    dag_arcs: frozenset
    source_classes: frozenset

    def dag(self):
        dag = nx.DiGraph()
        dag.add_nodes_from(self.members)
        dag.add_edges_from(self.dag_arcs)
        return dag


def condense(graph):
    """
    Strongly connected classes, the class DAG and its in-degree-0 classes.

    Args:
        graph (AuxGraph | networkx.DiGraph): Graph to condense.

    Returns:
        Condensation: Class map, members, DAG arcs and source classes.
    """
    digraph = graph.graph if isinstance(graph, AuxGraph) else graph
    dag = nx.condensation(digraph)
    mapping = dag.graph["mapping"]
    members = {c: frozenset(dag.nodes[c]["members"]) for c in dag.nodes}
    sources = frozenset(c for c in dag.nodes if dag.in_degree(c) == 0)
    return Condensation(dict(mapping), members, frozenset(dag.edges), sources)


def required_classes(base_graph):
    """
    Cyclic classes of G' that no other cyclic class reaches in signal flow.

    Signal flows against the arcs of G' (inputs attach at the w^T sinks),
    so these are the cyclic classes from which no other cyclic class can be
    reached along arcs of G'. Every such class needs an input whose w^T
    vertex it reaches.

    Returns:
        list: (class members, catchment) pairs where the catchment is the
              set of states i whose w_i^T is reachable from the class.
    """
    condensation = condense(base_graph)
    dag = condensation.dag()
    cyclic_vertices = base_graph.cycle_vertices()
    cyclic = {c for c, m in condensation.members.items() if m & cyclic_vertices}
    result = []
    for c in sorted(cyclic, key=lambda c: min(map(_vertex_order, condensation.members[c]))):
        downstream = nx.descendants(dag, c)
        if downstream & cyclic:
            continue
        reached = set(condensation.members[c])
        for d in downstream:
            reached |= condensation.members[d]
        catchment = frozenset(v.index for v in reached if v.role == "w" and v.side == "T")
        result.append((condensation.members[c], catchment))
    return result


def _vertex_order(v):
    return ("wxu".index(v.role), v.index, v.side)


def reachability_satisfied(aux_graph, S):
    """
    True when every vertex lying on a cycle reaches some w_i^T with i in S.

    Args:
        aux_graph (AuxGraph): G' or G^.
        S (iterable of int): Input states.

    Returns:
        bool: The reachability condition.
    """
    cyclic = aux_graph.cycle_vertices()
    if not cyclic:
        return True
    reach = aux_graph.reaching(Vertex("w", int(i), "T") for i in S)
    return cyclic <= reach


@dataclass(frozen=True)
class GammaAssignment:
    """Formal sum per arc over the symbols r_i, c_i and 'unit'."""

    coefficients: dict

    def __getitem__(self, arc):
        return self.coefficients.get(arc, Counter())

    def cycle_sum(self, cycle):
        total = Counter()
        for a, b in zip(cycle, cycle[1:] + cycle[:1]):
            total.update(self[(a, b)])
        return {k: v for k, v in total.items() if v != 0}


def gamma_coefficients(aux_graph, matching=None, J=None):
    """
    Coefficient of every arc.

    Arcs between w_i^T and w_i^Q carry r_i (-r_i when w_i^T is matched to
    w_i^Q); arcs between x_i^T and x_i^Q carry c_i (-c_i when x_i is in
    J); arcs between w_i^T and x_j^T carry 1 (-1 when matched); all other
    arcs carry 0.
    """
    matching = matching or aux_graph.matching
    J = set(J if J is not None else aux_graph.J)
    coefficients = {}
    for a, b in aux_graph.graph.edges:
        lo, hi = sorted((a, b), key=_vertex_order)
        value = Counter()
        if lo.role == hi.role == "w" and lo.index == hi.index and lo.side != hi.side:
            i = lo.index
            value[f"r{i}"] = -1 if matching.partner[i] == Vertex("w", i, "Q") else 1
        elif lo.role == hi.role == "x" and lo.index == hi.index and lo.side != hi.side:
            i = lo.index
            value[f"c{i}"] = -1 if ("x", i) in J else 1
        elif lo.role == "w" and hi.role == "x" and lo.side == hi.side == "T":
            matched = matching.partner[lo.index] == Vertex("x", hi.index, "Q")
            value["unit"] = -1 if matched else 1
        if value:
            coefficients[(a, b)] = value
    return GammaAssignment(coefficients)


def cycle_sum_check(aux_graph, gamma, S_minus_reach=None, budget=CYCLE_BUDGET):
    """
    True when every directed cycle avoiding the vertices that reach V-
    has a zero formal coefficient sum.

    Args:
        aux_graph (AuxGraph): G^.
        gamma (GammaAssignment): Arc coefficients.
        S_minus_reach (set, optional): Vertices that reach V-; computed from
                                       ``aux_graph.S_minus`` when omitted.
        budget (int): Maximum number of simple cycles to enumerate.

    Returns:
        bool: Whether all cycle sums vanish.
    """
    if S_minus_reach is None:
        S_minus_reach = aux_graph.reaching(aux_graph.S_minus)
    kept = [v for v in aux_graph.graph.nodes if v not in S_minus_reach]
    subgraph = aux_graph.graph.subgraph(kept)
    for count, cycle in enumerate(nx.simple_cycles(subgraph), start=1):
        if count > budget:
            raise CycleBudgetExceeded(budget)
        total = gamma.cycle_sum(list(cycle))
        if total:
            logger.info("Cycle %s has nonzero coefficient sum %s", [str(v) for v in cycle], total)
            return False
    return True


_COLORS = {"w": "lightblue", "x": "palegreen", "u": "orange"}


def to_dot(aux_graph, condensation=None):
    """
    Graphviz DOT text for G^, one color per vertex role, solid borders on
    T vertices, dashed on Q vertices, and the class id in each label.
    """
    condensation = condensation or condense(aux_graph)
    lines = ["digraph aux {", "  rankdir=LR;"]
    for v in sorted(aux_graph.graph.nodes, key=_vertex_order):
        style = "solid" if v.side == "T" else "dashed"
        cls = condensation.class_of[v]
        lines.append(
            f'  "{v}" [label="{v}\\n[{cls}]", style="filled,{style}", fillcolor={_COLORS[v.role]}];'
        )
    for a, b in sorted(aux_graph.graph.edges, key=lambda e: (_vertex_order(e[0]), _vertex_order(e[1]))):
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
