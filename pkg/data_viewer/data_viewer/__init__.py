"""Streamlit pages for browsing matctl experiment runs."""
