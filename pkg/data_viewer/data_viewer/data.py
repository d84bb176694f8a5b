import json
import os
from pathlib import Path

import pandas as pd
import streamlit as st
from dotenv import load_dotenv

from controllability_tools.cli import CONSTRUCTORS
from controllability_tools.selection import min_input_set
from controllability_tools.structmat import FieldConfig
from controllability_tools.sysmodel import random_geometric_network, symmetrize

load_dotenv()


def results_dir():
    return Path(os.environ.get("MATCTL_RESULTS_DIR", "results"))


def available_experiments(directory):
    """Experiments with a CSV table in ``directory``."""
    directory = Path(directory)
    if not directory.is_dir():
        return []
    return sorted(p.stem for p in directory.glob("*.csv"))


# cached on the directory and experiment name; rerun `matctl experiment` and clear the cache to refresh
@st.cache_data(show_spinner=True)
def load_results(directory, experiment):
    return pd.read_csv(Path(directory) / f"{experiment}.csv")


@st.cache_data(show_spinner=False)
def load_metadata(directory, experiment):
    path = Path(directory) / f"{experiment}.json"
    if not path.exists():
        return {}
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


@st.cache_data(show_spinner=True)
def solve_network(n, degree, kind, seed):
    """Generates one network and its minimum input set; returns (graph json, result json)."""
    directed = random_geometric_network(n, degree, seed=seed)
    graph = symmetrize(directed, "mutual") if kind == "consensus" else directed
    system = CONSTRUCTORS[kind](graph)
    result = min_input_set(system, FieldConfig(seed=seed))
    return graph.to_json(), result.to_json()
