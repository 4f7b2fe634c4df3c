"""
Streamlit and plotly views of experiment reports.
"""
