# flake8: noqa: E501
"""
Streamlit application for browsing experiment output directories.

Run with: streamlit run src/web/report_viewer.py -- results/
"""

import json
import sys
from pathlib import Path

import streamlit as st

# Add src to path for imports
sys.path.append(str(Path(__file__).parent.parent))

from data.histogram_store import load_report_frames
from web.visualizations import ConvergenceVisualizations


def display_kpi_cards(kpi_metrics):
    """Display KPI cards in a grid layout."""
    col1, col2, col3, col4 = st.columns(4)

    with col1:
        st.metric(
            "Smallest epsilon",
            f"{kpi_metrics['smallest_epsilon']:g}",
            help="Smallest diameter in the sweep",
        )

    with col2:
        st.metric(
            "TV at smallest epsilon",
            f"{kpi_metrics['tv']:.4f}",
            delta=f"± {kpi_metrics['tv_mc_error']:.4f}",
            delta_color="off",
            help="Total variation between particle and jump-process velocity histograms",
        )

    with col3:
        st.metric(
            "Good-tree fraction",
            f"{kpi_metrics['good_fraction']:.3f}",
            help="Share of runs whose collision tree is good",
        )

    with col4:
        st.metric(
            "Loss-only gate",
            "passed" if kpi_metrics['gating_passed'] else "FAILED",
            help="Absorption-only cross-check at every epsilon <= 0.1",
        )


def display_dashboard(frames):
    viz = ConvergenceVisualizations(frames["report"], frames.get("gating"), frames.get("diagnostics"))
    display_kpi_cards(viz.create_kpi_cards())
    st.markdown("---")

    col1, col2 = st.columns(2)
    with col1:
        st.plotly_chart(viz.create_tv_chart(), use_container_width=True)
    with col2:
        st.plotly_chart(viz.create_good_fraction_chart(), use_container_width=True)

    col1, col2 = st.columns(2)
    with col1:
        st.plotly_chart(viz.create_zeta_chart(), use_container_width=True)
    with col2:
        st.plotly_chart(viz.create_collision_chart(), use_container_width=True)

    st.plotly_chart(viz.create_flag_heatmap(), use_container_width=True)


def main():
    """Main Streamlit application."""
    st.set_page_config(page_title="Rayleigh gas convergence report", layout="wide")
    st.title("Rayleigh gas convergence report")

    default_dir = sys.argv[1] if len(sys.argv) > 1 else "results"
    out_dir = Path(st.sidebar.text_input("Output directory", value=default_dir))
    frames = load_report_frames(out_dir)
    if "report" not in frames:
        st.warning(f"No report.csv found in {out_dir}")
        return

    summary_path = out_dir / "report.json"
    if summary_path.exists():
        summary = json.loads(summary_path.read_text())
        validity = summary.get("validity", {})
        if validity.get("valid", True):
            st.success("Experiment valid")
        else:
            st.error("Experiment flagged invalid: " + "; ".join(validity.get("issues", [])))

    tab1, tab2 = st.tabs(["Dashboard", "Tables"])
    with tab1:
        display_dashboard(frames)
    with tab2:
        for name, df in frames.items():
            st.subheader(f"{name}.csv")
            st.dataframe(df, use_container_width=True, hide_index=True)
            st.download_button(
                label=f"Download {name}.csv",
                data=df.to_csv(index=False),
                file_name=f"{name}.csv",
                mime="text/csv",
                key=f"download_{name}",
            )
        if summary_path.exists():
            st.subheader("report.json")
            st.json(summary)


if __name__ == "__main__":
    main()
