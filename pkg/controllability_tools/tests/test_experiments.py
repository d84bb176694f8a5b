import json

import pandas as pd
import pytest

from controllability_tools.experiments import (
    ExperimentSpec,
    ResultsAnalyzer,
    degree_order,
    deterministic_seed,
    random_order,
    run_experiment,
    scaling_trial,
    smallest_certified_prefix,
    svg_line_plot,
    write_outputs,
)
from controllability_tools.structmat import StructuredMatrix
from controllability_tools.sysmodel import DescriptorSystem


@pytest.fixture
def df_fig1():
    rows = []
    for n, sizes in ((10, (2, 3, 4)), (20, (3, 5, 6))):
        for method, size in zip(("submodular", "degree", "random"), sizes):
            rows.append({"n": n, "method": method, "trial": 0, "size": size, "status": "ok"})
    rows.append({"n": 20, "method": "random", "trial": 1, "size": None, "status": "failed"})
    return pd.DataFrame(rows)


def test_deterministic_seed():
    seed = deterministic_seed(0, "fig1", 10, 3)
    assert seed == deterministic_seed(0, "fig1", 10, 3)
    assert seed != deterministic_seed(0, "fig1", 10, 4)
    assert 0 <= seed < 2**31


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("fig3")
    with pytest.raises(ValueError):
        ExperimentSpec.fig1(trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec.fig1(n_values=())


def test_spec_presets():
    spec = ExperimentSpec.fig2()
    assert spec.symmetrize == "union"
    assert spec.k_values == (2, 4, 6, 8, 10)
    assert ExperimentSpec.fig2(k_values=[3]).k_values == (3,)
    assert ExperimentSpec.scaling().n_values == (8, 16, 32)


def test_config_hash_ignores_where_results_go():
    spec = ExperimentSpec.fig1()
    assert spec.config_hash() == ExperimentSpec.fig1(workers=4, out_dir="elsewhere").config_hash()
    assert spec.config_hash() != ExperimentSpec.fig1(seed=1).config_hash()


def test_orders(star):
    assert degree_order(star.graph) == [0, 1, 2, 3]
    order = random_order(5, seed=3)
    assert sorted(order) == [0, 1, 2, 3, 4]
    assert order == random_order(5, seed=3)


def test_smallest_certified_prefix(cfg, chain):
    assert smallest_certified_prefix(chain, [0, 1, 2], cfg).S == (0,)
    result = smallest_certified_prefix(chain, [2, 1, 0], cfg)
    assert result.S == (0, 1, 2)
    assert result.certificate.passed


def test_prefix_of_an_uncontrollable_system(cfg):
    zero = StructuredMatrix.zeros(2, 2)
    assert smallest_certified_prefix(DescriptorSystem(2, zero, zero), [0, 1], cfg) is None


def test_analyzer(df_fig1):
    analyzer = ResultsAnalyzer(df_fig1)
    means = analyzer.means("n", "size")
    assert list(means.columns) == ["submodular", "degree", "random"]
    assert means.loc[20, "random"] == 6
    assert analyzer.gaps("n", "size").tolist() == [1.0, 2.0]
    assert analyzer.failure_count() == 1
    with pytest.raises(ValueError):
        ResultsAnalyzer(pd.DataFrame())


def test_svg_plot_has_one_line_per_method(df_fig1):
    svg = svg_line_plot(ResultsAnalyzer(df_fig1).means("n", "size"), "n", "|S|", "sizes")
    assert svg.startswith("<svg")
    assert svg.count("<polyline") == 3


def test_write_outputs(df_fig1, tmp_path):
    spec = ExperimentSpec.fig1(out_dir=str(tmp_path))
    paths = write_outputs(spec, df_fig1)
    assert set(paths) == {"csv", "json", "svg"}
    meta = json.loads(paths["json"].read_text(encoding="utf-8"))
    assert meta["config_hash"] == spec.config_hash()
    assert meta["failed_rows"] == 1
    assert meta["means"]["degree"]["10"] == 3
    assert len(pd.read_csv(paths["csv"])) == len(df_fig1)


def test_scaling_trial_counts_queries():
    spec = ExperimentSpec.scaling(n_values=(6,), trials=1)
    (row,) = scaling_trial(spec, 6, 0)
    assert row["status"] == "ok"
    assert row["queries"] > 0
    assert 1 <= row["size"] <= 6


def test_scaling_experiment_writes_no_plot(tmp_path):
    spec = ExperimentSpec.scaling(n_values=(6,), trials=2, out_dir=str(tmp_path))
    df_results = run_experiment(spec)
    assert df_results["trial"].tolist() == [0, 1]
    assert set(write_outputs(spec, df_results)) == {"csv", "json"}


@pytest.mark.slow
def test_fig1_submodular_is_never_larger(tmp_path):
    spec = ExperimentSpec.fig1(n_values=(10,), trials=2, out_dir=str(tmp_path))
    df_results = run_experiment(spec)
    assert len(df_results) == 6
    for _, trial in df_results[df_results["status"] == "ok"].groupby("trial"):
        sizes = dict(zip(trial["method"], trial["size"]))
        if "submodular" in sizes:
            assert sizes["submodular"] <= min(sizes.values())


@pytest.mark.slow
def test_fig2_rows(tmp_path):
    spec = ExperimentSpec.fig2(n_values=(12,), k_values=(2, 4), trials=1, delta=0.25, samples=2, out_dir=str(tmp_path))
    df_results = run_experiment(spec)
    assert len(df_results) == 6
    usable = df_results[df_results["status"] != "failed"]
    assert (usable["error"] >= 0).all()
