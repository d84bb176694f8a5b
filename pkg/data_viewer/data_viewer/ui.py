import pandas as pd
import streamlit as st

from controllability_tools.experiments import ResultsAnalyzer


def display_run_info(metadata):
    spec = metadata.get("spec", {})
    st.subheader("Run Summary")
    col1, col2, col3, col4 = st.columns(4)
    col1.metric("Experiment", spec.get("experiment", "-"))
    col2.metric("Trials", spec.get("trials", "-"))
    col3.metric("Seed", metadata.get("seed", "-"))
    col4.metric("Config Hash", metadata.get("config_hash", "-"))


def display_experiment_results(df_results, x, value, title):
    """Mean curves per method, the gap to the best baseline and the failed rows."""
    st.subheader(title)
    analyzer = ResultsAnalyzer(df_results)

    failed = analyzer.failure_count()
    col1, col2, col3 = st.columns(3)
    with col1:
        with st.container(border=True):
            st.markdown("**Rows**")
            st.markdown(f"## {len(df_results)}")
    with col2:
        with st.container(border=True):
            st.markdown("**Failed Trials**")
            color = "red" if failed else "green"
            st.markdown(f"## :{color}[{failed}]")

    if "method" not in df_results.columns:
        usable = df_results[df_results["status"] == "ok"]
        st.line_chart(usable.groupby(x)[value].mean(), height=300)
    else:
        table = analyzer.means(x, value)
        st.line_chart(table, height=350)
        if "submodular" in table.columns and len(table.columns) > 1:
            gaps = analyzer.gaps(x, value)
            with col3:
                with st.container(border=True):
                    st.markdown("**Mean Gap to Best Baseline**")
                    color = "green" if gaps.mean() >= 0 else "red"
                    st.markdown(f"## :{color}[{gaps.mean():.3g}]")
        st.dataframe(table, width="stretch")

    with st.expander("View Raw Rows"):
        st.dataframe(df_results, width="stretch")


def display_selection(graph, result):
    st.subheader("Minimum Input Set")
    certificate = result["certificate"] or {}
    col1, col2, col3, col4 = st.columns(4)
    col1.metric("Nodes", graph["n"])
    col2.metric("Edges", len(graph["edges"]))
    col3.metric("Inputs", result["size"])
    with col4:
        with st.container(border=True):
            st.markdown("**Certificate**")
            if certificate.get("passed"):
                st.markdown("## :green[passed]")
            else:
                st.markdown("## :red[failed]")
    st.markdown(f"Input states: `{result['S']}`")
    details = pd.DataFrame([{"check": k, "value": certificate.get(k)} for k in ("rank_AB_ok", "pencil_ok", "gcd_degree", "trials_run")])
    st.dataframe(details, hide_index=True)
