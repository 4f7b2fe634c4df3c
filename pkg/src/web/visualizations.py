# flake8: noqa: E501
"""
Plotly figures for the convergence report dashboard.
"""

from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import plotly.graph_objects as go


class ConvergenceVisualizations:
    """Figures built from report.csv, gating.csv and diagnostics.csv frames."""

    # One colour per evaluation time, reused across figures
    TIME_COLORS = ['#4682B4', '#FF8C00', '#2E8B57', '#9370DB', '#DC143C', '#20B2AA']

    FLAG_COLORS = {
        'recollision_free': '#4682B4',
        'non_grazing': '#32CD32',
        'overlap_free': '#FF8C00',
        'n_ok': '#9370DB',
        'speed_ok': '#FF69B4',
        'geometric_good_fraction': '#20B2AA',
        'good_tree_fraction': '#DC143C',
    }

    def __init__(self, report: pd.DataFrame, gating: Optional[pd.DataFrame] = None, diagnostics: Optional[pd.DataFrame] = None):
        """
        Args:
            report: Rows of report.csv
            gating: Rows of gating.csv, if the loss-only check ran
            diagnostics: Rows of diagnostics.csv
        """
        self.report = report.sort_values(['t', 'epsilon'], ascending=[True, False]).reset_index(drop=True)
        self.gating = gating if gating is not None else pd.DataFrame()
        self.diagnostics = diagnostics if diagnostics is not None else pd.DataFrame()

    @property
    def times(self) -> List[float]:
        return sorted(self.report['t'].unique().tolist())

    def _color(self, i: int) -> str:
        return self.TIME_COLORS[i % len(self.TIME_COLORS)]

    def create_tv_chart(self) -> go.Figure:
        """TV against epsilon with bootstrap error bars, one trace per time."""
        fig = go.Figure()
        for i, t in enumerate(self.times):
            rows = self.report[self.report['t'] == t]
            fig.add_trace(go.Scatter(
                x=rows['epsilon'],
                y=rows['tv_empirical_vs_ideal'],
                error_y=dict(type='data', array=rows['tv_mc_error'], visible=True),
                mode='lines+markers',
                name=f"t = {t:g}",
                line=dict(color=self._color(i), width=2),
            ))
        fig.update_layout(
            title="TV distance between particle and jump-process velocity laws",
            xaxis_title="epsilon",
            yaxis_title="TV",
            xaxis_type='log',
            xaxis_autorange='reversed',
            height=450,
        )
        return fig

    def create_good_fraction_chart(self) -> go.Figure:
        """Good-tree fraction (full and geometric part) against epsilon."""
        fig = go.Figure()
        for i, t in enumerate(self.times):
            rows = self.report[self.report['t'] == t]
            fig.add_trace(go.Scatter(
                x=rows['epsilon'], y=rows['good_tree_fraction'], mode='lines+markers',
                name=f"good, t = {t:g}", line=dict(color=self._color(i), width=2),
            ))
            if not self.diagnostics.empty:
                diag = self.diagnostics[self.diagnostics['t'] == t]
                fig.add_trace(go.Scatter(
                    x=diag['epsilon'], y=diag['geometric_good_fraction'], mode='lines+markers',
                    name=f"geometric, t = {t:g}", line=dict(color=self._color(i), width=2, dash='dash'),
                ))
        fig.update_layout(
            title="Good-tree fraction",
            xaxis_title="epsilon",
            yaxis_title="fraction",
            xaxis_type='log',
            xaxis_autorange='reversed',
            yaxis_range=[0, 1.02],
            height=450,
        )
        return fig

    def create_zeta_chart(self) -> go.Figure:
        """Empirical against theoretical overlap-free probability."""
        rows = self.report.drop_duplicates('epsilon')
        fig = go.Figure()
        fig.add_trace(go.Scatter(x=rows['epsilon'], y=rows['zeta_theoretical'], mode='lines', name='theoretical', line=dict(color='#808080', dash='dot')))
        fig.add_trace(go.Scatter(x=rows['epsilon'], y=rows['zeta_empirical'], mode='markers', name='empirical', marker=dict(size=10, color='#4682B4')))
        fig.update_layout(title="Overlap-free acceptance", xaxis_title="epsilon", yaxis_title="zeta", xaxis_type='log', height=400)
        return fig

    def create_flag_heatmap(self) -> go.Figure:
        """Fraction of trees passing each good-tree condition, per epsilon and time."""
        if self.diagnostics.empty:
            return go.Figure()
        flags = [c for c in self.FLAG_COLORS if c in self.diagnostics.columns]
        labels = [f"eps={e:g}, t={t:g}" for e, t in zip(self.diagnostics['epsilon'], self.diagnostics['t'])]
        values = self.diagnostics[flags].to_numpy(dtype=float)
        fig = go.Figure(data=go.Heatmap(
            z=values, x=flags, y=labels,
            colorscale=[[0.0, 'white'], [1.0, 'blue']],
            zmin=0.0, zmax=1.0,
            text=np.round(values, 3), texttemplate="%{text}",
            colorbar=dict(title="fraction"),
        ))
        fig.update_layout(title="Good-tree conditions", height=120 + 40 * len(labels), margin=dict(t=50, b=50, l=160, r=50))
        return fig

    def create_collision_chart(self) -> go.Figure:
        fig = go.Figure()
        for i, t in enumerate(self.times):
            rows = self.report[self.report['t'] == t]
            fig.add_trace(go.Bar(x=[f"{e:g}" for e in rows['epsilon']], y=rows['mean_collisions'], name=f"t = {t:g}", marker_color=self._color(i)))
        fig.update_layout(title="Mean collisions per run", xaxis_title="epsilon", yaxis_title="collisions", barmode='group', height=400)
        return fig

    def create_kpi_cards(self) -> Dict[str, float]:
        """Headline numbers at the smallest epsilon and latest time."""
        if self.report.empty:
            return {'smallest_epsilon': float('nan'), 'tv': float('nan'), 'tv_mc_error': float('nan'), 'good_fraction': float('nan'), 'aborted_runs': 0, 'gating_passed': True}
        last = self.report[self.report['t'] == self.times[-1]].sort_values('epsilon').iloc[0]
        gating_passed = True
        if not self.gating.empty and 'checked' in self.gating.columns:
            checked = self.gating[self.gating['checked'].astype(bool)]
            gating_passed = bool(checked['passed'].astype(bool).all()) if len(checked) else True
        return {
            'smallest_epsilon': float(last['epsilon']),
            'tv': float(last['tv_empirical_vs_ideal']),
            'tv_mc_error': float(last['tv_mc_error']),
            'good_fraction': float(last['good_tree_fraction']),
            'aborted_runs': int(self.report.drop_duplicates('epsilon')['aborted_runs'].sum()),
            'gating_passed': gating_passed,
        }


def create_dashboard_layout(report: pd.DataFrame, gating: Optional[pd.DataFrame] = None, diagnostics: Optional[pd.DataFrame] = None) -> Tuple[Dict[str, float], Dict[str, go.Figure]]:
    """
    Build every dashboard component.

    Returns:
        (kpi_metrics, figures by name)
    """
    viz = ConvergenceVisualizations(report, gating, diagnostics)
    figures = {
        'tv': viz.create_tv_chart(),
        'good_fraction': viz.create_good_fraction_chart(),
        'zeta': viz.create_zeta_chart(),
        'flags': viz.create_flag_heatmap(),
        'collisions': viz.create_collision_chart(),
    }
    return viz.create_kpi_cards(), figures
