# flake8: noqa: E501
"""
Histogram, density and report files.

Histogram and density files are plain text: a first line "# {json header}"
followed by CSV rows ix,iy,iz,mass for every velocity cell. Reports are CSV
files with fixed column order plus a JSON summary, all written with a fixed
float format so equal inputs give equal bytes.
"""

import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import pandas as pd

from core.convergence_harness import (
    DIAGNOSTIC_COLUMNS,
    GATING_COLUMNS,
    REPORT_COLUMNS,
    ExperimentReport,
    VelocityHistogram,
)
from core.kinetic_density import KineticDensity, VelocityGrid
from utils.errors import GridMismatchError
from utils.svg_plots import line_chart

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
CELL_COLUMNS = ["ix", "iy", "iz", "mass"]


def _cell_frame(grid: VelocityGrid, masses: np.ndarray) -> pd.DataFrame:
    ix, iy, iz = np.unravel_index(np.arange(grid.n_cells), grid.shape)
    return pd.DataFrame({"ix": ix, "iy": iy, "iz": iz, "mass": np.asarray(masses, dtype=float).ravel()}, columns=CELL_COLUMNS)


def _write_grid_file(path: Union[str, Path], header: Dict[str, Any], grid: VelocityGrid, masses: np.ndarray) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("# " + json.dumps(header, sort_keys=True) + "\n")
        _cell_frame(grid, masses).to_csv(fh, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_histogram(path: Union[str, Path], hist: VelocityHistogram, extra: Optional[Dict[str, Any]] = None) -> Path:
    header = hist.header()
    header.update(extra or {})
    out = _write_grid_file(path, header, hist.grid, hist.masses)
    logger.info("Wrote histogram (%d samples) to %s", hist.n_samples, out)
    return out


def write_density(path: Union[str, Path], density: KineticDensity, level_masses: Optional[List[float]] = None, extra: Optional[Dict[str, Any]] = None) -> Path:
    """Velocity marginal of a density, stored as cell masses."""
    masses = density.cell_masses()
    header: Dict[str, Any] = {
        "kind": "density",
        "mode": density.mode.value,
        "v_max": density.grid.v_max,
        "bins_per_axis": density.grid.bins_per_axis,
        "mass": float(masses.sum()),
        "outside": max(0.0, 1.0 - float(masses.sum())),
        "absorbed": 0.0,
        "n_samples": 0,
    }
    if level_masses is not None:
        header["level_masses"] = [float(m) for m in level_masses]
    header.update(extra or {})
    out = _write_grid_file(path, header, density.grid, masses)
    logger.info("Wrote density (mass %.6f) to %s", header["mass"], out)
    return out


def read_histogram(path: Union[str, Path]) -> VelocityHistogram:
    """
    Read a histogram or density file back as a VelocityHistogram.

    Raises:
        GridMismatchError: when the cell rows do not cover the declared grid
        ValueError: for a missing or malformed header
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    first, _, body = text.partition("\n")
    if not first.startswith("#"):
        raise ValueError(f"{path}: missing '# {{json}}' header line")
    try:
        header = json.loads(first[1:].strip())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: header is not valid JSON: {e}") from e
    grid = VelocityGrid(float(header["v_max"]), int(header["bins_per_axis"]))
    df = pd.read_csv(io.StringIO(body))
    if list(df.columns) != CELL_COLUMNS:
        raise ValueError(f"{path}: expected columns {CELL_COLUMNS}, got {list(df.columns)}")
    if len(df) != grid.n_cells:
        raise GridMismatchError(f"{path}: {len(df)} cell rows for a grid of {grid.n_cells} cells")
    masses = np.zeros(grid.n_cells)
    flat = np.ravel_multi_index((df["ix"].to_numpy(), df["iy"].to_numpy(), df["iz"].to_numpy()), grid.shape)
    masses[flat] = df["mass"].to_numpy(dtype=float)
    return VelocityHistogram(grid, masses, float(header.get("outside", 0.0)), float(header.get("absorbed", 0.0)), int(header.get("n_samples", 0)))


def report_frame(report: ExperimentReport) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in report.rows], columns=REPORT_COLUMNS)


def gating_frame(report: ExperimentReport) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in report.gating], columns=GATING_COLUMNS)


def diagnostics_frame(report: ExperimentReport) -> pd.DataFrame:
    return pd.DataFrame([r.to_dict() for r in report.diagnostics], columns=DIAGNOSTIC_COLUMNS)


def _write_csv(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_report(report: ExperimentReport, out_dir: Union[str, Path], thresholds: Optional[Dict[str, Any]] = None, plots: bool = True) -> Dict[str, Path]:
    """
    Write report.csv, gating.csv, diagnostics.csv, report.json and the SVG plots.

    Args:
        report: Finished experiment report
        out_dir: Output directory, created if needed
        thresholds: Threshold values and their provenance, echoed in report.json
        plots: Also write the SVG charts

    Returns:
        Mapping of output name to path
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "report": out / "report.csv",
        "gating": out / "gating.csv",
        "diagnostics": out / "diagnostics.csv",
        "summary": out / "report.json",
    }
    frame = report_frame(report)
    _write_csv(frame, paths["report"])
    _write_csv(gating_frame(report), paths["gating"])
    _write_csv(diagnostics_frame(report), paths["diagnostics"])

    summary = {
        "config": report.config.to_dict() if hasattr(report.config, "to_dict") else report.config,
        "validity": report.summary(),
        "thresholds": thresholds or {},
    }
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    if plots and not frame.empty:
        t_last = float(frame["t"].max())
        rows = frame[frame["t"] == t_last]
        paths["tv_plot"] = out / "tv_vs_epsilon.svg"
        paths["tv_plot"].write_text(line_chart(
            rows["epsilon"].tolist(), rows["tv_empirical_vs_ideal"].tolist(), errors=rows["tv_mc_error"].tolist(),
            title=f"TV(particle, jump process) at t={t_last:g}", x_label="epsilon", y_label="TV", log_x=True,
        ), encoding="utf-8")
        paths["good_plot"] = out / "good_fraction_vs_epsilon.svg"
        diag = diagnostics_frame(report)
        diag = diag[diag["t"] == t_last]
        paths["good_plot"].write_text(line_chart(
            rows["epsilon"].tolist(), rows["good_tree_fraction"].tolist(),
            extra_series={"geometric": diag["geometric_good_fraction"].tolist()},
            title=f"Good-tree fraction at t={t_last:g}", x_label="epsilon", y_label="fraction", log_x=True, y_range=(0.0, 1.0),
        ), encoding="utf-8")
    logger.info("Wrote report files to %s", out)
    return paths


def load_report_frames(out_dir: Union[str, Path]) -> Dict[str, pd.DataFrame]:
    """Read back whichever report CSVs exist in an output directory."""
    out = Path(out_dir)
    frames = {}
    for name in ("report", "gating", "diagnostics"):
        path = out / f"{name}.csv"
        if path.exists():
            frames[name] = pd.read_csv(path)
    return frames
