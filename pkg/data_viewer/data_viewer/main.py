"""This is the main module of the data_viewer streamlit app."""

import os
import sys

import streamlit as st

# Handle imports for both local development and Streamlit Cloud deployment
current_dir = os.path.dirname(os.path.abspath(__file__))
repo_root = os.path.abspath(os.path.join(current_dir, "..", ".."))
sys.path.insert(0, current_dir)
sys.path.insert(0, os.path.join(repo_root, "controllability_tools"))

from data import available_experiments, load_metadata, load_results, results_dir, solve_network  # noqa: E402
from presets import EXPERIMENT_PRESETS, NETWORK_PRESETS  # noqa: E402
from ui import display_experiment_results, display_run_info, display_selection  # noqa: E402


def main():
    st.set_page_config(layout="wide")
    st.title("Controllability Results Viewer")
    st.write("Experiment tables written by `matctl experiment`, and single networks solved on demand.")

    directory = st.text_input("Results directory", value=str(results_dir()))
    experiments = [e for e in available_experiments(directory) if e in EXPERIMENT_PRESETS]
    if not experiments:
        st.warning(f"No experiment tables found in {directory}. Run `matctl experiment fig1` first.")
    else:
        experiment = st.selectbox("Experiment", experiments, index=0)
        display_run_info(load_metadata(directory, experiment))
        x, value, title = EXPERIMENT_PRESETS[experiment]
        df_results = load_results(directory, experiment)
        if df_results.empty:
            st.warning("The experiment table is empty.")
        else:
            display_experiment_results(df_results, x, value, title)

    st.divider()
    st.subheader("Single Network")
    names = [p["name"] for p in NETWORK_PRESETS]
    col_preset, col_seed = st.columns([3, 1])
    with col_preset:
        preset = NETWORK_PRESETS[names.index(st.selectbox("Network preset", names, index=0))]
    with col_seed:
        seed = st.number_input("Seed", min_value=0, value=0, step=1)
    if st.button("Solve"):
        try:
            graph, result = solve_network(preset["n"], preset["degree"], preset["kind"], int(seed))
        except Exception as exc:
            st.error(f"Could not solve the network: {exc}")
        else:
            display_selection(graph, result)


if __name__ == "__main__":
    main()
