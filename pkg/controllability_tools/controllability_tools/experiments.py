"""
Experiment harness: minimum input sets against degree and random baselines,
convergence error of joint selection against the same baselines, and query
counts of the intersection algorithm.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from controllability_tools import __version__
from controllability_tools.constraints import ControllabilityModel, build_matroids, certify
from controllability_tools.errors import ControllabilityError, KTooSmall
from controllability_tools.matroid import max_cardinality_intersection
from controllability_tools.metrics import MetricConfig, WeightedGraph, as_objective, convergence_error
from controllability_tools.selection import SelectionResult, min_input_set, select_joint, select_tradeoff
from controllability_tools.structmat import FieldConfig
from controllability_tools.sysmodel import (
    consensus_system,
    free_parameter_system,
    random_geometric_network,
    symmetrize,
)

logger = logging.getLogger(__name__)

EXPERIMENTS = ("fig1", "fig2", "scaling")
METHODS = ("submodular", "degree", "random")


def deterministic_seed(*parts):
    key = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]
    return int(digest, 16) & 0x7FFFFFFF


@dataclass
class ExperimentSpec:
    experiment: str
    n_values: tuple = (10, 20, 30, 40)
    degree: float = 3.0
    k_values: tuple = ()
    trials: int = 20
    seed: int = 0
    t: float = 1.0
    p: float = 2.0
    symmetrize: str = "mutual"
    delta: float = None
    samples: int = None
    prime: int = FieldConfig().prime
    field_trials: int = 3
    workers: int = 1
    out_dir: str = "results"

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"Unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.trials < 1:
            raise ValueError("An experiment needs at least one trial")
        if not self.n_values:
            raise ValueError("Cannot run an experiment with an empty list of network sizes")
        self.n_values = tuple(int(n) for n in self.n_values)
        self.k_values = tuple(int(k) for k in self.k_values)

    @classmethod
    def fig1(cls, **overrides):
        return cls(**{"experiment": "fig1", **overrides})

    @classmethod
    def fig2(cls, **overrides):
        defaults = {
            "experiment": "fig2",
            "n_values": (20,),
            "degree": 2.0,
            "k_values": (2, 4, 6, 8, 10),
            "symmetrize": "union",
            "delta": 0.1,
            "samples": 4,
        }
        return cls(**{**defaults, **overrides})

    @classmethod
    def scaling(cls, **overrides):
        defaults = {"experiment": "scaling", "n_values": (8, 16, 32), "degree": 2.0, "trials": 3}
        return cls(**{**defaults, **overrides})

    def field_config(self, seed):
        return FieldConfig(prime=self.prime, trials=self.field_trials, seed=seed)

    def metadata(self):
        data = asdict(self)
        data.pop("out_dir")
        data.pop("workers")
        return data

    def config_hash(self):
        text = json.dumps(self.metadata(), sort_keys=True, default=str)
        return hashlib.sha1(text.encode("utf-8")).hexdigest()[:12]


def degree_order(graph):
    """Nodes by descending total degree, ties by index."""
    return sorted(range(graph.n), key=lambda i: (-graph.degree(i), i))


def random_order(n, seed):
    return [int(i) for i in np.random.default_rng(seed).permutation(n)]


def smallest_certified_prefix(system, order, cfg):
    """
    Shortest prefix of ``order`` (candidate positions) whose states pass the certificate.

    The certificate is monotone in the input set, so the prefix length is
    found by bisection.

    Returns:
        SelectionResult: The prefix, or ``None`` when even the full order fails.
    """
    def check(length):
        states = [system.inputs[p] for p in order[:length]]
        return certify(system, states, cfg)

    full = check(len(order))
    if not full.passed:
        return None
    lo, hi, best = 0, len(order), full
    while lo < hi:
        mid = (lo + hi) // 2
        certificate = check(mid)
        if certificate.passed:
            hi, best = mid, certificate
        else:
            lo = mid + 1
    positions = tuple(sorted(order[:lo]))
    return SelectionResult(
        tuple(system.inputs[p] for p in positions),
        positions,
        objective=float(lo),
        certificate=best,
        algorithm="prefix",
    )


def _network(spec, n, seed):
    directed = random_geometric_network(n, spec.degree, seed=seed)
    return directed, symmetrize(directed, spec.symmetrize)


def _row(spec, **values):
    return {**values, "config_hash": spec.config_hash(), "version": __version__}


def fig1_trial(spec, n, trial):
    """Input set sizes of the three methods on one consensus network."""
    seed = deterministic_seed(spec.seed, "fig1", n, trial)
    cfg = spec.field_config(seed)
    rows = []
    try:
        _, graph = _network(spec, n, seed)
        system = consensus_system(graph)
        results = {
            "submodular": min_input_set(system, cfg),
            "degree": smallest_certified_prefix(system, degree_order(graph), cfg),
            "random": smallest_certified_prefix(system, random_order(n, seed), cfg),
        }
    except (ControllabilityError, ValueError) as exc:
        logger.warning("fig1 trial n=%d #%d failed: %s", n, trial, exc)
        return [_row(spec, n=n, method=m, trial=trial, size=None, seed=seed, status="failed") for m in METHODS]
    for method, result in results.items():
        ok = result is not None and result.certificate.passed
        rows.append(
            _row(
                spec,
                n=n,
                method=method,
                trial=trial,
                size=len(result.S) if result is not None else None,
                seed=seed,
                status="ok" if ok else "uncertified",
            )
        )
    return rows


def fig2_trial(spec, n, trial):
    """Convergence error of the three methods for every k on one network."""
    seed = deterministic_seed(spec.seed, "fig2", n, trial)
    cfg = spec.field_config(seed)
    metric_cfg = MetricConfig(t=spec.t, p=spec.p, seed=seed)
    try:
        _, graph = _network(spec, n, seed)
        system = consensus_system(graph)
        model = ControllabilityModel(system, cfg)
    except (ControllabilityError, ValueError) as exc:
        logger.warning("fig2 trial #%d failed: %s", trial, exc)
        return [
            _row(spec, k=k, method=m, trial=trial, error=None, seed=seed, status="failed")
            for k in spec.k_values
            for m in METHODS
        ]
    weighted = WeightedGraph.random(graph, seed)
    x0 = metric_cfg.initial_state(n)
    objective = as_objective("convergence", weighted, metric_cfg, x0)
    by_degree, by_chance = degree_order(graph), random_order(n, seed)
    rows = []
    for k in spec.k_values:
        status = "ok"
        try:
            chosen = select_joint(
                system, objective, k, cfg, model, samples=spec.samples, seed=seed, delta=spec.delta, exact=False
            ).positions
        except KTooSmall:
            # too few inputs for controllability: performance alone
            chosen = select_tradeoff(system, objective, 0.0, k, cfg, model).positions
            status = "relaxed"
        for method, positions in (("submodular", chosen), ("degree", by_degree[:k]), ("random", by_chance[:k])):
            error = convergence_error(weighted, positions, metric_cfg, x0)
            rows.append(
                _row(
                    spec,
                    k=k,
                    method=method,
                    trial=trial,
                    error=error,
                    seed=seed,
                    status=status if method == "submodular" else "ok",
                )
            )
    return rows


def scaling_trial(spec, n, trial):
    """Independence queries of the minimum input set on a free-parameter network."""
    seed = deterministic_seed(spec.seed, "scaling", n, trial)
    cfg = spec.field_config(seed)
    try:
        graph, _ = _network(spec, n, seed)
        model = ControllabilityModel(free_parameter_system(graph), cfg)
        matroids = build_matroids(model)
        R = max_cardinality_intersection(matroids.m1_star, matroids.m2_star)
    except (ControllabilityError, ValueError) as exc:
        logger.warning("scaling trial n=%d #%d failed: %s", n, trial, exc)
        return [_row(spec, n=n, trial=trial, size=None, queries=None, seed=seed, status="failed")]
    queries = matroids.m1_star.queries + matroids.m2_star.queries
    return [
        _row(spec, n=n, trial=trial, size=model.m - len(R), queries=queries, seed=seed, status="ok")
    ]


_TRIALS = {"fig1": fig1_trial, "fig2": fig2_trial, "scaling": scaling_trial}
_SORT = {"fig1": ["n", "method", "trial"], "fig2": ["k", "method", "trial"], "scaling": ["n", "trial"]}


def _run_task(task):
    spec, n, trial = task
    return _TRIALS[spec.experiment](spec, n, trial)


def run_experiment(spec):
    """
    Runs every (n, trial) pair of ``spec``.

    Returns:
        pandas.DataFrame: One row per method and trial, sorted.
    """
    tasks = [(spec, n, trial) for n in spec.n_values for trial in range(spec.trials)]
    logger.info("Running %s: %d tasks on %d workers", spec.experiment, len(tasks), spec.workers)
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            batches = list(pool.map(_run_task, tasks))
    else:
        batches = [_run_task(task) for task in tasks]
    rows = [row for batch in batches for row in batch]
    return pd.DataFrame(rows).sort_values(_SORT[spec.experiment]).reset_index(drop=True)


class ResultsAnalyzer:
    def __init__(self, df_results):
        """
        Initializes the ResultsAnalyzer with an experiment table.

        Args:
            df_results (pd.DataFrame): Rows written by ``run_experiment``.
        """
        if df_results.empty:
            raise ValueError("Cannot initialize ResultsAnalyzer with an empty DataFrame")
        self.df_results = df_results.copy()

    def means(self, x, value):
        """
        Mean of ``value`` per x and method over usable rows.

        Returns:
            pd.DataFrame: Index x, one column per method.
        """
        usable = self.df_results[self.df_results[value].notna()]
        usable = usable[usable["status"] != "failed"]
        table = usable.pivot_table(index=x, columns="method", values=value, aggfunc="mean")
        return table[[m for m in METHODS if m in table.columns]]

    def gaps(self, x, value, method="submodular"):
        """Smallest baseline mean minus ``method``'s mean, per x."""
        table = self.means(x, value)
        baselines = table.drop(columns=[method])
        return baselines.min(axis=1) - table[method]

    def failure_count(self):
        return int((self.df_results["status"] == "failed").sum())


_COLORS = {"submodular": "#1f77b4", "degree": "#ff7f0e", "random": "#2ca02c", "queries": "#9467bd"}


def svg_line_plot(table, x_label, y_label, title, width=640, height=420):
    """
    Line plot of every column of ``table`` against its index.

    Args:
        table (pd.DataFrame): Numeric index and one column per series.

    Returns:
        str: The SVG document.
    """
    left, right, top, bottom = 70, 150, 40, 60
    plot_w, plot_h = width - left - right, height - top - bottom
    xs = [float(x) for x in table.index]
    values = table.to_numpy(dtype=float)
    finite = values[np.isfinite(values)]
    y_max = float(finite.max()) if finite.size else 1.0
    y_max = y_max * 1.1 if y_max > 0 else 1.0
    x_min, x_max = min(xs), max(xs)
    span = (x_max - x_min) or 1.0

    def px(x):
        return left + (x - x_min) / span * plot_w

    def py(y):
        return top + plot_h - y / y_max * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{left}" y1="{top + plot_h}" x2="{left + plot_w}" y2="{top + plot_h}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + plot_h}" stroke="black"/>',
    ]
    for x in xs:
        parts.append(f'<text x="{px(x):.1f}" y="{top + plot_h + 18}" text-anchor="middle">{x:g}</text>')
    for tick in np.linspace(0.0, y_max, 5):
        parts.append(f'<text x="{left - 8}" y="{py(tick) + 4:.1f}" text-anchor="end">{tick:.3g}</text>')
        parts.append(
            f'<line x1="{left}" y1="{py(tick):.1f}" x2="{left + plot_w}" y2="{py(tick):.1f}" stroke="#ddd"/>'
        )
    parts.append(f'<text x="{left + plot_w / 2:.1f}" y="{height - 15}" text-anchor="middle">{x_label}</text>')
    parts.append(
        f'<text x="18" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + plot_h / 2:.1f})">{y_label}</text>'
    )
    for row, column in enumerate(table.columns):
        color = _COLORS.get(column, "black")
        points = [(px(x), py(v)) for x, v in zip(xs, values[:, row]) if np.isfinite(v)]
        path = " ".join(f"{a:.1f},{b:.1f}" for a, b in points)
        parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in points:
            parts.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="3" fill="{color}"/>')
        legend_y = top + 20 * row
        parts.append(
            f'<line x1="{left + plot_w + 15}" y1="{legend_y}" x2="{left + plot_w + 35}" y2="{legend_y}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{left + plot_w + 40}" y="{legend_y + 4}">{column}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


_PLOTS = {
    "fig1": ("n", "size", "network size n", "mean |S|", "Inputs needed for controllability"),
    "fig2": ("k", "error", "number of inputs k", "mean convergence error", "Convergence error at time t"),
}


def write_outputs(spec, df_results):
    """
    Writes <experiment>.csv, <experiment>.json and, for the figure modes, <experiment>.svg.

    Returns:
        dict: Paths written, by kind.
    """
    out_dir = Path(spec.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"csv": out_dir / f"{spec.experiment}.csv", "json": out_dir / f"{spec.experiment}.json"}
    df_results.to_csv(paths["csv"], index=False, float_format="%.10g")
    meta = {
        "spec": spec.metadata(),
        "seed": spec.seed,
        "config_hash": spec.config_hash(),
        "version": __version__,
        "rows": len(df_results),
    }
    if spec.experiment in _PLOTS:
        x, value, x_label, y_label, title = _PLOTS[spec.experiment]
        analyzer = ResultsAnalyzer(df_results)
        table = analyzer.means(x, value)
        meta["means"] = {str(c): {str(i): v for i, v in table[c].items()} for c in table.columns}
        meta["failed_rows"] = analyzer.failure_count()
        paths["svg"] = out_dir / f"{spec.experiment}.svg"
        paths["svg"].write_text(svg_line_plot(table, x_label, y_label, title), encoding="utf-8")
    with open(paths["json"], "w", encoding="utf-8") as handle:
        json.dump(meta, handle, indent=2, sort_keys=True, default=str)
    return paths
