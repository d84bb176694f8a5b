"""
Controllability as matroid constraints.

M1 captures the rank condition rank[A | B(S)] = n, M2 the reachability of
every cyclic part of the auxiliary graph from an input. Both live on the
candidate input states of the system: position p of the ground set is the
state ``system.inputs[p]``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from controllability_tools.auxgraph import (
    Vertex,
    add_input_edges,
    build_base_graph,
    required_classes,
)
from controllability_tools.errors import KTooSmall, NotStronglyConnected
from controllability_tools.matroid import (
    LinearMatroid,
    PartitionMatroid,
    RankMatroid,
    TransversalMatroid,
    UniformMatroid,
    UnionMatroid,
    dual,
)
from controllability_tools.polygf import gf_degree, gf_gcd, gf_interpolate
from controllability_tools.structmat import (
    FieldConfig,
    det_mod,
    fixed_array,
    nullspace_mod,
    rank_mod,
)
from controllability_tools.sysmodel import AugmentedSystem, augment_with_inputs, is_strongly_connected

logger = logging.getLogger(__name__)

DEFAULT_Z_COUNT = 20
# stream offset keeping certificate draws apart from the model's generic point
_CERTIFICATE_STREAM = 1_000_003


class ControllabilityModel:
    def __init__(self, system, cfg=None, exact_union=False, prune_forced=True):
        """
        Initializes the model with one coherent generic point of ``system``.

        Args:
            system (DescriptorSystem): The network.
            cfg (FieldConfig, optional): Field parameters.
            exact_union (bool): Evaluate rho1 through the matroid-union rank
                                instead of the cokernel representation.
            prune_forced (bool): Leave out the input classes whose catchment holds
                                 a coloop of M1.
        """
        if not system.inputs:
            raise ValueError("Cannot build controllability constraints without candidate inputs")
        self.system = system
        self.cfg = cfg or FieldConfig()
        self.exact_union = exact_union
        self.prune_forced = prune_forced
        self.n = system.n
        self.m = len(system.inputs)
        p = self.cfg.prime
        _, self._A, self._T_A = system.realize(self.cfg, 0)
        self._Q_A = fixed_array(system.A, p)
        # rows span the left null space of A
        self._cokernel = nullspace_mod(self._A.T, p)
        self._T_B = self.cfg.rng(1).integers(1, p, size=self.n, dtype=np.int64)

    # ----- rank condition -------------------------------------------------

    def positions(self, states):
        """Candidate positions of the candidate states in ``states``; others are dropped."""
        index = {s: p for p, s in enumerate(self.system.inputs)}
        return frozenset(index[s] for s in states if s in index)

    def _states(self, positions):
        return [self.system.inputs[p] for p in sorted(positions)]

    @cached_property
    def m1(self):
        if self.exact_union:
            return RankMatroid(self.m, self._rho1_union_positions, name="rho1")
        columns = self._cokernel[:, list(self.system.inputs)]
        return LinearMatroid(columns, self.cfg.prime)

    @cached_property
    def _union_parts(self):
        n, p = self.n, self.cfg.prime
        eye = np.eye(n, dtype=np.int64)
        zeros = np.zeros((n, n), dtype=np.int64)
        left = LinearMatroid(np.hstack([eye, self._Q_A, zeros]), p)
        right = LinearMatroid(np.hstack([eye, self._T_A, np.diag(self._T_B)]), p)
        return UnionMatroid(left, right)

    @cached_property
    def zeta(self):
        """rank(M([I|Q_A]) v M([I|T_A])); equals n + rank A."""
        if self.exact_union:
            return self._union_parts.rank(range(2 * self.n))
        return self.n + rank_mod(self._A, self.cfg.prime)

    def _rho1_union_positions(self, positions):
        columns = list(range(2 * self.n)) + [2 * self.n + s for s in self._states(positions)]
        return self._union_parts.rank(columns) - self.zeta

    def rho1_union(self, S):
        """rho1 through the matroid union rank on the 3n columns."""
        columns = list(range(2 * self.n)) + [2 * self.n + s for s in sorted(set(S))]
        return self._union_parts.rank(columns) - self.zeta

    def rho1(self, S):
        """
        Rank gained by attaching inputs to the candidate states in S.

        Args:
            S (iterable of int): Input states.

        Returns:
            int: rank[A | B(S)] - rank A at the model's generic point.
        """
        return self.m1.rank(self.positions(S))

    @cached_property
    def coloops(self):
        """Positions contained in every spanning set of M1."""
        full = self.m1.full_rank()
        ground = self.m1.ground()
        return frozenset(e for e in ground if self.m1.rank(ground - {e}) < full)

    # ----- reachability condition -----------------------------------------

    @cached_property
    def base_graph(self):
        return build_base_graph(self.system, self.cfg)

    @cached_property
    def input_classes(self):
        """
        Classes that need an input, each with its catchment positions.

        Classes whose catchment holds a coloop of M1 are satisfied by every
        M1-spanning input set and are left out unless ``prune_forced`` is off.
        """
        classes = []
        for members, catchment in required_classes(self.base_graph):
            positions = self.positions(catchment)
            if not positions:
                logger.warning("A cyclic class reaches no candidate input; the system cannot be controlled")
            if self.prune_forced and positions & self.coloops:
                logger.debug("Class catchment %s holds a coloop of M1; dropped", sorted(positions))
                continue
            classes.append((members, positions))
        return classes

    @cached_property
    def m2(self):
        catchments = [positions for _, positions in self.input_classes]
        overlapping = sum(len(c) for c in catchments) != len(frozenset().union(*catchments))
        if overlapping:
            logger.warning("Overlapping catchments; using a transversal matroid for M2")
            return TransversalMatroid(self.m, catchments)
        class_of = [None] * self.m
        for c, positions in enumerate(catchments):
            for p in positions:
                class_of[p] = c
        return PartitionMatroid(class_of)

    @property
    def class_count(self):
        return len(self.input_classes)

    def rho2(self, S):
        """Number of input classes whose catchment meets S."""
        return self.m2.rank(self.positions(S))

    # ----- graph controllability indices ----------------------------------

    def gci_c1(self, S):
        """rho1(V - S) + |S| over the candidate states."""
        chosen = self.positions(S)
        return self.m1.rank(self.m1.ground() - chosen) + len(chosen)

    def gci_c2(self, S):
        """
        Candidate states i with x_i^T or w_i^T reaching an input vertex of G^.

        Node states of consensus systems have w_i^T as a sink of G', so only
        x_i^T can reach inputs other than u_i. Wherever w_i^T reaches an input
        the state counts as well.
        """
        chosen = sorted(self._states(self.positions(S)))
        if not chosen:
            return 0
        g_hat = add_input_edges(self.base_graph, chosen)
        targets = [Vertex("u", i, side) for i in chosen for side in ("T", "Q")]
        reach = g_hat.reaching(targets)
        return sum(
            1
            for i in self.system.inputs
            if Vertex("x", i, "T") in reach or Vertex("w", i, "T") in reach
        )

    def gci_strong(self, S):
        """rank(M([I|Q_A|0]) v M([I|T_A|T_B(S)])) = zeta + rho1(S)."""
        self.require_strong()
        return self.zeta + self.rho1(S)

    def controllable_count(self, S):
        """gci_strong(S) - n, i.e. rank[A | B(S)]."""
        return self.gci_strong(S) - self.n

    def require_strong(self):
        if not is_strongly_connected(self.system):
            raise NotStronglyConnected("The network graph of the system is not strongly connected")


@dataclass
class ControllabilityMatroids:
    m1: object
    m2: object
    r1: int
    r2: int
    m1_star: object
    m2_star: object
    k: int = None
    m1_hat: object = None
    m2_hat: object = None


def build_matroids(model, k=None, strong=False):
    """
    M1, M2, their duals and the rank-k extensions.

    Args:
        model (ControllabilityModel): The system model.
        k (int, optional): Input budget; extensions are built when given.
        strong (bool): Use only M1 (strongly connected systems need just
                       one nonempty input set for reachability).

    Returns:
        ControllabilityMatroids: All oracles.
    """
    m1 = model.m1
    m2 = UniformMatroid(model.m, 1) if strong else model.m2
    r1, r2 = m1.full_rank(), m2.full_rank()
    result = ControllabilityMatroids(m1, m2, r1, r2, dual(m1), dual(m2))
    if k is None:
        return result
    if k > model.m:
        raise ValueError(f"k={k} exceeds the {model.m} candidate inputs")
    minimum = max(r1, r2, 1)
    if k < minimum:
        raise KTooSmall(k, minimum)
    result.k = k
    result.m1_hat = m1 if k == r1 else UnionMatroid(m1, UniformMatroid(model.m, k - r1))
    result.m2_hat = m2 if k == r2 else UnionMatroid(m2, UniformMatroid(model.m, k - r2))
    return result


def rho1(model, S):
    return model.rho1(S)


def rho2(model, S):
    return model.rho2(S)


def gci_c1(model, S):
    return model.gci_c1(S)


def gci_c2(model, S):
    return model.gci_c2(S)


def gci_strong(model, S):
    return model.gci_strong(S)


@dataclass
class Certificate:
    rank_AB_ok: bool
    pencil_ok: bool
    pencil_gcd_ok: bool
    gcd_degree: int
    z_samples: tuple
    failure_bound: float
    trials_run: int
    prime: int
    S: tuple = field(default_factory=tuple)

    @property
    def passed(self):
        return self.rank_AB_ok and self.pencil_ok

    def to_json(self):
        data = asdict(self)
        data["z_samples"] = [int(z) for z in self.z_samples]
        data["S"] = [int(s) for s in self.S]
        data["passed"] = self.passed
        return data


def _pencil_gcd_degree(F, A, B, rng, p):
    """Degree of gcd(det(P(z)R1), det(P(z)R2)) for P(z) = [(A - zF) | B]."""
    n = A.shape[0]
    if n == 0:
        return 0
    width = A.shape[1] + B.shape[1]
    points = []
    while len(points) < n + 1:
        z = int(rng.integers(0, p))
        if z not in points:
            points.append(z)
    polys = []
    for _ in range(2):
        R = rng.integers(0, p, size=(width, n), dtype=np.int64)
        values = []
        for z in points:
            pencil = np.hstack([(A - z * F % p) % p, B])
            values.append(det_mod(_dot_mod(pencil, R, p), p))
        polys.append(gf_interpolate(points, values, p))
    return gf_degree(gf_gcd(polys[0], polys[1], p))


def _dot_mod(a, b, p):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    for k in range(a.shape[1]):
        if np.any(a[:, k]):
            out = (out + a[:, k][:, None] * b[k][None, :] % p) % p
    return out


def controllability_certificate(aug, cfg=None, z_count=DEFAULT_Z_COUNT):
    """
    Randomized check of rank[A | B] = n and rank[(A - zF) | B] = n for all z.

    Each trial substitutes fresh parameters, tests the rank at z = 0 and at
    ``z_count`` random points, and compares the determinants of two random
    column compressions of the pencil: a constant gcd rules out a common
    root. A passing trial proves generic controllability; all trials failing
    on a controllable system has probability at most ``failure_bound``.

    Args:
        aug (AugmentedSystem): System with inputs attached.
        cfg (FieldConfig, optional): Field parameters.
        z_count (int): Random evaluation points per trial.

    Returns:
        Certificate: Outcome and the recorded evidence.
    """
    if not isinstance(aug, AugmentedSystem):
        raise ValueError("controllability_certificate needs an AugmentedSystem")
    cfg = cfg or FieldConfig()
    p, n = cfg.prime, aug.n
    per_trial = min(1.0, n * (z_count + 3) / p)
    best = None
    for trial in range(cfg.trials):
        rng = cfg.rng(_CERTIFICATE_STREAM + trial)
        F, A, B = aug.realize(cfg, rng)
        rank_ok = rank_mod(np.hstack([A, B]), p) == n
        zs = (0,) + tuple(int(z) for z in rng.integers(1, p, size=z_count))
        pencil_points_ok = rank_ok and all(
            rank_mod(np.hstack([(A - z * F % p) % p, B]), p) == n for z in zs[1:]
        )
        degree = _pencil_gcd_degree(F, A, B, rng, p) if pencil_points_ok else -1
        gcd_ok = degree == 0
        best = Certificate(
            rank_AB_ok=rank_ok,
            pencil_ok=pencil_points_ok and gcd_ok,
            pencil_gcd_ok=gcd_ok,
            gcd_degree=degree,
            z_samples=zs,
            failure_bound=per_trial ** cfg.trials,
            trials_run=trial + 1,
            prime=p,
            S=tuple(sorted(aug.S)),
        )
        if best.passed:
            break
    logger.debug("Certificate for S=%s: %s", sorted(aug.S), "pass" if best.passed else "fail")
    return best


def certify(system, S, cfg=None, z_count=DEFAULT_Z_COUNT):
    """Certificate for input states S of ``system``."""
    return controllability_certificate(augment_with_inputs(system, S), cfg, z_count)
