"""
Input selection under controllability constraints.

Objectives are set functions on candidate positions. For the constructor
systems a position is the node index, so metric objectives built on the
network graph plug in directly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from controllability_tools.constraints import (
    ControllabilityModel,
    build_matroids,
    certify,
)
from controllability_tools.errors import UnsolvableSystem
from controllability_tools.matroid import (
    dual,
    max_cardinality_intersection,
    max_weight_common_basis,
)

logger = logging.getLogger(__name__)

EXACT_GRADIENT_LIMIT = 12


class SubmodularObjective:
    def __init__(self, function, ground_size, monotone=True, components=None, name="f"):
        """
        A memoized set function on {0, ..., ground_size - 1}.

        Args:
            function (callable): Maps a frozenset to a real number. Ignored
                                 when ``components`` is given.
            ground_size (int): Size of the ground set.
            monotone (bool): Declared monotonicity.
            components (list, optional): (elements, function) pairs; the
                                         objective is the sum of each function
                                         on S restricted to its elements.
            name (str): Label used in results.
        """
        if ground_size <= 0:
            raise ValueError("Cannot initialize SubmodularObjective with an empty ground set")
        self.ground_size = ground_size
        self.monotone = monotone
        self.name = name
        self.components = None
        if components is not None:
            self.components = [(frozenset(elements), fn) for elements, fn in components]
            function = self._sum_components
        self._function = function
        self._memo = {}
        self.evaluations = 0

    def _sum_components(self, S):
        return sum(fn(S & elements) for elements, fn in self.components)

    def evaluate(self, S):
        key = frozenset(int(e) for e in S)
        if key not in self._memo:
            self.evaluations += 1
            self._memo[key] = float(self._function(key))
        return self._memo[key]

    __call__ = evaluate

    def marginal(self, S, e):
        S = frozenset(S)
        return self.evaluate(S | {e}) - self.evaluate(S)

    @classmethod
    def modular(cls, weights, name="modular"):
        weights = [float(w) for w in weights]
        return cls(lambda S: sum(weights[e] for e in S), len(weights), name=name)

    def spot_check(self, samples=100, seed=0, tolerance=1e-9):
        """
        Sampled (A, B, v) triples with A a subset of B violating the declared properties.

        Returns:
            list: Violations as dicts; empty when every sample passed.
        """
        rng = np.random.default_rng(seed)
        violations = []
        for _ in range(samples):
            B = frozenset(np.flatnonzero(rng.random(self.ground_size) < 0.5).tolist())
            A = frozenset(e for e in B if rng.random() < 0.5)
            outside = [v for v in range(self.ground_size) if v not in B]
            if not outside:
                continue
            v = int(rng.choice(outside))
            gain_a, gain_b = self.marginal(A, v), self.marginal(B, v)
            if gain_a < gain_b - tolerance:
                violations.append({"A": sorted(A), "B": sorted(B), "v": v, "property": "submodular"})
            if self.monotone and gain_b < -tolerance:
                violations.append({"A": sorted(A), "B": sorted(B), "v": v, "property": "monotone"})
        return violations

    def __repr__(self):
        return f"SubmodularObjective({self.name!r}, ground_size={self.ground_size})"


@dataclass
class FractionalPoint:
    y: np.ndarray
    basis_trace: list = field(default_factory=list)

    @property
    def total(self):
        return float(self.y.sum())


@dataclass
class SelectionResult:
    S: tuple
    positions: tuple
    objective: float = None
    certificate: object = None
    algorithm: str = ""
    trace: list = field(default_factory=list)
    seed: int = 0
    details: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "algorithm": self.algorithm,
            "S": [int(s) for s in self.S],
            "size": len(self.S),
            "positions": [int(p) for p in self.positions],
            "objective": self.objective,
            "certificate": self.certificate.to_json() if self.certificate is not None else None,
            "seed": self.seed,
            "details": self.details,
            "trace": self.trace,
        }


def _model(system, cfg, model):
    if model is not None:
        return model
    return ControllabilityModel(system, cfg)


def _result(model, positions, algorithm, cfg, **kwargs):
    positions = tuple(sorted(int(p) for p in positions))
    states = tuple(model.system.inputs[p] for p in positions)
    certificate = certify(model.system, states, model.cfg if cfg is None else cfg)
    return SelectionResult(states, positions, certificate=certificate, algorithm=algorithm, **kwargs)


def min_input_set(system, cfg=None, model=None):
    """
    Smallest input set that makes the system structurally controllable.

    Args:
        system (DescriptorSystem): A solvable system.
        cfg (FieldConfig, optional): Field parameters.
        model (ControllabilityModel, optional): A prebuilt model of ``system``.

    Returns:
        SelectionResult: S = V - R for a largest R independent in both duals.
    """
    model = _model(system, cfg, model)
    if not system.check_solvable(model.cfg):
        raise UnsolvableSystem("det(A - zF) vanishes identically")
    matroids = build_matroids(model)
    trace = []
    R = max_cardinality_intersection(matroids.m1_star, matroids.m2_star, trace)
    positions = model.m1.ground() - R
    logger.info("Minimum input set has %d of %d candidates", len(positions), model.m)
    return _result(
        model,
        positions,
        "min_input_set",
        cfg,
        objective=float(len(positions)),
        trace=trace,
        details={"r1": matroids.r1, "r2": matroids.r2},
    )


def min_input_set_strong(system, cfg=None, model=None):
    """Single ascending pass over M1* for strongly connected systems."""
    model = _model(system, cfg, model)
    model.require_strong()
    m1_star = dual(model.m1)
    m1_star.reset_queries()
    R, trace = set(), []
    for e in range(model.m):
        added = m1_star.is_independent(R | {e})
        if added and len(R) + 1 == model.m:
            # at least one input must remain
            added = False
        trace.append({"element": e, "added": added})
        if added:
            R.add(e)
    positions = model.m1.ground() - R
    return _result(
        model,
        positions,
        "min_input_set_strong",
        cfg,
        objective=float(len(positions)),
        trace=trace,
        details={"queries": m1_star.queries},
    )


def _subset_masks(n):
    masks = np.arange(1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    return masks, bits


def _all_values(f, n):
    masks, bits = _subset_masks(n)
    values = np.array([f(frozenset(np.flatnonzero(row).tolist())) for row in bits])
    return masks, bits, values


def _probabilities(bits, y):
    return np.prod(np.where(bits, y[None, :], 1.0 - y[None, :]), axis=1)


def multilinear_exact(f, y):
    """F(y) as the full 2^n-term sum."""
    y = np.asarray(y, dtype=float)
    _, bits, values = _all_values(f, len(y))
    return float(_probabilities(bits, y) @ values)


def multilinear_estimate(f, y, samples=1000, seed=0):
    """
    Monte Carlo estimate of the multilinear extension.

    Args:
        f (SubmodularObjective): The set function.
        y (sequence of float): Inclusion probabilities in [0, 1].
        samples (int): Independent random sets.
        seed (int): Random seed.

    Returns:
        tuple: (mean, standard error).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y > 1):
        raise ValueError("Inclusion probabilities must lie in [0, 1]")
    if samples < 1:
        raise ValueError("Need at least one sample")
    rng = np.random.default_rng(seed)
    draws = rng.random((samples, len(y))) < y[None, :]
    values = np.array([f(frozenset(np.flatnonzero(row).tolist())) for row in draws])
    stderr = float(values.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return float(values.mean()), stderr


def _exact_gradient(masks, bits, values, y):
    """dF/dy_j = E[f(R + j) - f(R - j)] over R drawn from y, by full enumeration."""
    probabilities = _probabilities(bits, y)
    weights = np.empty(len(y))
    for j in range(len(y)):
        gain = values[masks | (1 << j)] - values[masks & ~(1 << j)]
        weights[j] = probabilities @ gain
    return weights


def _sampled_gradient(f, y, samples, rng):
    n = len(y)
    weights = np.zeros(n)
    for _ in range(samples):
        R = frozenset(np.flatnonzero(rng.random(n) < y).tolist())
        for j in range(n):
            weights[j] += f(R | {j}) - f(R - {j})
    return weights / samples


def max_weight_basis(matroid, weights):
    """Greedy maximum-weight basis; ties go to the smaller index."""
    order = sorted(range(matroid.ground_size), key=lambda e: (-weights[e], e))
    basis = set()
    for e in order:
        if matroid.is_independent(basis | {e}):
            basis.add(e)
    return frozenset(basis)


def default_samples(k, n):
    return math.ceil(10 * k * k * math.log(n + 1))


def continuous_greedy(f, m1_hat, m2_hat=None, k=None, samples=None, seed=0, delta=None, exact=None):
    """
    Continuous greedy over the common base polytope of m1_hat and m2_hat.

    Each step moves y by delta along the maximum-weight common basis for the
    gradient of the multilinear extension at y, dF/dy_j = E[f(R + j) - f(R - j)].
    For a modular f the gradient is the weight vector itself, so the point
    never leaves the best common basis. The last step is truncated so that
    the steps add up to one.

    Args:
        f (SubmodularObjective): Monotone submodular objective.
        m1_hat (Matroid): First extension, rank k.
        m2_hat (Matroid, optional): Second extension; ``None`` follows m1_hat alone.
        k (int, optional): Basis size; defaults to the rank of m1_hat.
        samples (int, optional): Random sets per gradient estimate.
        seed (int): Random seed.
        delta (float, optional): Step size, 1/(9k^2) by default.
        exact (bool, optional): Enumerate all subsets for the gradient;
                                defaults to ground sets of at most 12 elements.

    Returns:
        FractionalPoint: y(1) and the bases it was built from.
    """
    n = m1_hat.ground_size
    if f.ground_size != n:
        raise ValueError(f"Objective has {f.ground_size} elements, matroids have {n}")
    k = m1_hat.full_rank() if k is None else k
    if k <= 0:
        raise ValueError("Cannot run continuous greedy with an empty basis")
    delta = 1.0 / (9 * k * k) if delta is None else delta
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    exact = n <= EXACT_GRADIENT_LIMIT if exact is None else exact
    samples = default_samples(k, n) if samples is None else samples
    rng = np.random.default_rng(seed)
    if exact:
        masks, bits, values = _all_values(f, n)
    y = np.zeros(n)
    trace = []
    steps = math.ceil(round(1.0 / delta, 9))
    for step in range(steps):
        size = min(delta, 1.0 - step * delta)
        if exact:
            weights = _exact_gradient(masks, bits, values, y)
        else:
            weights = _sampled_gradient(f, y, samples, rng)
        if m2_hat is None:
            basis = max_weight_basis(m1_hat, weights)
        else:
            basis = max_weight_common_basis(m1_hat, m2_hat, weights)
        y[sorted(basis)] += size
        if trace and trace[-1][0] == basis:
            trace[-1] = (basis, trace[-1][1] + size)
        else:
            trace.append((basis, size))
        logger.debug("Continuous greedy step %d/%d: basis %s", step + 1, steps, sorted(basis))
    return FractionalPoint(np.clip(y, 0.0, 1.0), trace)


def _is_common_basis(B, m1, m2):
    return m1.is_independent(B) and (m2 is None or m2.is_independent(B))


def _double_swap(B1, B2, m1, m2):
    for i in sorted(B1 - B2):
        for j in sorted(B2 - B1):
            if _is_common_basis((B1 - {i}) | {j}, m1, m2) and _is_common_basis(
                (B2 - {j}) | {i}, m1, m2
            ):
                return i, j
    return None


def _merge(B1, beta1, B2, beta2, m1, m2, rng, stats):
    while B1 != B2:
        pair = _double_swap(B1, B2, m1, m2)
        keep_first = rng.random() < beta1 / (beta1 + beta2)
        if pair is None:
            stats["fallbacks"] += 1
            logger.warning("No simultaneous exchange between two bases; keeping one of them whole")
            return B1 if keep_first else B2
        i, j = pair
        if keep_first:
            B2 = (B2 - {j}) | {i}
        else:
            B1 = (B1 - {i}) | {j}
        stats["swaps"] += 1
    return B1


def swap_round(point, m1_hat, m2_hat=None, seed=0):
    """
    Rounds a fractional point to one of the common bases it is built from.

    Bases are merged in order of decreasing weight. Two bases are merged by
    exchanging elements pairwise, keeping both sides common bases, in the
    direction chosen with probability proportional to the weights. When no
    such exchange exists one of the two bases is kept whole.

    Returns:
        tuple: (basis, stats) with the swap and fallback counts.
    """
    if not point.basis_trace:
        raise ValueError("Cannot round a fractional point with an empty basis trace")
    rng = np.random.default_rng(seed)
    weighted = {}
    for basis, weight in point.basis_trace:
        weighted[basis] = weighted.get(basis, 0.0) + weight
    ordered = sorted(weighted.items(), key=lambda item: (-item[1], sorted(item[0])))
    stats = {"swaps": 0, "fallbacks": 0, "bases": len(ordered)}
    current, beta = ordered[0]
    for basis, weight in ordered[1:]:
        current = _merge(current, beta, basis, weight, m1_hat, m2_hat, rng, stats)
        beta += weight
    return current, stats


def select_joint(system, f, k, cfg=None, model=None, strong=False, samples=None, seed=0, delta=None, exact=None):
    """
    Maximizes f over input sets of size k that keep the system controllable.

    Args:
        system (DescriptorSystem): The network.
        f (SubmodularObjective): Objective on candidate positions.
        k (int): Number of inputs.
        cfg (FieldConfig, optional): Field parameters.
        model (ControllabilityModel, optional): Prebuilt model of ``system``.
        strong (bool): Strongly connected system; only the rank condition is imposed.
        samples, seed, delta, exact: Passed to ``continuous_greedy``.

    Returns:
        SelectionResult: The rounded common basis with its certificate.
    """
    model = _model(system, cfg, model)
    if strong:
        model.require_strong()
    matroids = build_matroids(model, k, strong=strong)
    m2_hat = None if strong else matroids.m2_hat
    point = continuous_greedy(f, matroids.m1_hat, m2_hat, k, samples, seed, delta, exact)
    positions, stats = swap_round(point, matroids.m1_hat, m2_hat, seed)
    trace = [{"basis": sorted(b), "weight": w} for b, w in point.basis_trace]
    logger.info("Joint selection with k=%d: %s", k, sorted(positions))
    return _result(
        model,
        positions,
        "select_joint_strong" if strong else "select_joint",
        cfg,
        objective=f(positions),
        trace=trace,
        seed=seed,
        details={"rounding": stats, "y": [float(v) for v in point.y], "r1": matroids.r1, "r2": matroids.r2},
    )


def select_joint_modular(system, weights, k, cfg=None, model=None, strong=False):
    """Exact maximum-weight common basis of the two extensions."""
    model = _model(system, cfg, model)
    if len(weights) != model.m:
        raise ValueError(f"Need one weight per candidate input ({model.m}), got {len(weights)}")
    if strong:
        model.require_strong()
    matroids = build_matroids(model, k, strong=strong)
    trace = []
    if strong:
        positions = max_weight_basis(matroids.m1_hat, weights)
    else:
        positions = max_weight_common_basis(matroids.m1_hat, matroids.m2_hat, weights, trace)
    return _result(
        model,
        positions,
        "select_joint_modular",
        cfg,
        objective=float(sum(weights[p] for p in positions)),
        trace=trace,
    )


def select_tradeoff(system, f, eta, k, cfg=None, model=None, strong=False):
    """
    Greedy for f(S) + eta * (c1(S) + c2(S)), or f(S) + eta * c(S) when ``strong``.

    Args:
        system (DescriptorSystem): The network.
        f (SubmodularObjective): Performance objective on candidate positions.
        eta (float): Weight of the controllability index, at least zero.
        k (int): Number of greedy additions.

    Returns:
        SelectionResult: The greedy set; its certificate may fail when k is
                         too small for controllability.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    model = _model(system, cfg, model)
    if strong:
        model.require_strong()
    k = min(k, model.m)

    def parts(positions):
        states = [model.system.inputs[p] for p in positions]
        if strong:
            return {"f": f(positions), "c": model.gci_strong(states)}
        return {"f": f(positions), "c1": model.gci_c1(states), "c2": model.gci_c2(states)}

    def combined(values):
        return values["f"] + eta * sum(v for name, v in values.items() if name != "f")

    selected, trace = frozenset(), []
    for _ in range(k):
        best, best_value, best_parts = None, -math.inf, None
        for e in range(model.m):
            if e in selected:
                continue
            values = parts(selected | {e})
            value = combined(values)
            if value > best_value:
                best, best_value, best_parts = e, value, values
        selected = selected | {best}
        trace.append({"added": best, "objective": best_value, **best_parts})
    final = parts(selected)
    return _result(
        model,
        selected,
        "select_tradeoff_strong" if strong else "select_tradeoff",
        cfg,
        objective=combined(final),
        trace=trace,
        details={"eta": eta, **final},
    )

