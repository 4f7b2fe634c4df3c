# flake8: noqa: E501
"""
Tests for configuration loading, tree files, histogram files and report output.
"""

import json

import numpy as np
import pandas as pd
import pytest

from core.collision_trees import CollisionMarker, CollisionTree
from core.convergence_harness import (
    REPORT_COLUMNS,
    DiagnosticsRow,
    ExperimentReport,
    GatingRow,
    ReportRow,
    VelocityHistogram,
)
from core.kinetic_density import KineticDensity, VelocityGrid
from core.laws import Maxwellian, VelocityPointMass
from data.experiment_config import apply_environment, config_from_dict, load_config
from data.histogram_store import load_report_frames, read_histogram, write_density, write_histogram, write_report
from data.tree_store import TreeRecord, read_trees, write_trees
from utils.errors import ConfigError, GridMismatchError, TreeFormatError
from web.visualizations import create_dashboard_layout

BASE = {"epsilons": [0.1, 0.2], "realizations_per_eps": 100, "t_eval": [1.0, 0.5], "T": 1.0}


def test_config_defaults_and_ordering():
    config = config_from_dict(dict(BASE))
    assert config.epsilons == (0.2, 0.1)
    assert config.t_eval == (0.5, 1.0)
    assert config.bins_per_axis == 20
    assert config.j_max == 24
    assert isinstance(config.g0, Maxwellian)
    assert isinstance(config.f0.velocity, VelocityPointMass)
    assert config.reference_samples == 1000
    assert config.to_dict()["epsilons"] == [0.2, 0.1]


@pytest.mark.parametrize("override, message", [
    ({"epsilons": [0.3]}, "epsilon must lie"),
    ({"epsilons": []}, "non-empty"),
    ({"epsilons": [0.1, 0.1]}, "distinct"),
    ({"realizations_per_eps": 10}, "at least 100"),
    ({"t_eval": [2.0]}, "must not exceed"),
    ({"T": -1}, "finite and positive"),
    ({"reference_factor": 2}, "reference_factor"),
    ({"seed": -3}, "non-negative"),
    ({"workers": 0}, "positive integer"),
    ({"v_max": 3.0}, "4 sigma"),
    ({"good_params": {"V_eps": 2.0, "K": 1}}, "good_params"),
    ({"colour": "blue"}, "Unknown configuration keys"),
])
def test_config_rejects_invalid_values(override, message):
    data = dict(BASE)
    data.update(override)
    with pytest.raises(ConfigError, match=message):
        config_from_dict(data)


def test_config_requires_keys():
    with pytest.raises(ConfigError, match="Missing"):
        config_from_dict({"epsilons": [0.1]})


def test_good_params_override():
    config = config_from_dict(dict(BASE, good_params={"V_eps": 5.0}))
    params = config.good_params_for(0.1)
    assert params.V_eps == 5.0
    assert params.M_eps == pytest.approx(0.1 ** -0.5)


def test_environment_overrides():
    config = config_from_dict(dict(BASE, seed=4))
    assert apply_environment(config, {}).seed == 4
    changed = apply_environment(config, {"RK_SEED": "11", "RK_WORKERS": "3"})
    assert (changed.seed, changed.workers) == (11, 3)
    with pytest.raises(ConfigError):
        apply_environment(config, {"RK_SEED": "eleven"})
    with pytest.raises(ConfigError):
        apply_environment(config, {"RK_WORKERS": "0"})


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(broken)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(BASE))
    assert load_config(good, environ={"RK_SEED": "9"}).seed == 9


def _tree() -> CollisionTree:
    marker = CollisionMarker(0.4, np.array([-1.0, 0.0, 0.0]), np.array([0.1, 0.2, -0.3]))
    return CollisionTree(np.array([0.5, 0.5, 0.5]), np.array([1.0, 0.0, 0.0]), (marker,), 1.0)


def test_tree_file_round_trip(tmp_path):
    path = tmp_path / "trees.jsonl"
    records = [TreeRecord(_tree(), "Completed", (17,), 0.1), TreeRecord(CollisionTree(np.zeros(3), np.ones(3)), "AbortedSimultaneous")]
    assert write_trees(path, records) == 2
    back = read_trees(path)
    assert [r.status for r in back] == ["Completed", "AbortedSimultaneous"]
    assert back[0].partners == (17,)
    assert back[0].epsilon == 0.1
    assert back[0].tree.to_dict() == records[0].tree.to_dict()
    assert back[1].partners is None
    line = path.read_text().splitlines()[0]
    assert json.loads(line)["T"] == 1.0


def test_tree_file_reports_bad_lines(tmp_path):
    path = tmp_path / "trees.jsonl"
    path.write_text(TreeRecord(_tree()).to_json() + "\n\n[1, 2]\n")
    with pytest.raises(TreeFormatError, match=":3:"):
        read_trees(path)
    path.write_text('{"v0": [0, 0, 0]}\n')
    with pytest.raises(TreeFormatError):
        read_trees(path)


def test_histogram_file(tmp_path, rng):
    grid = VelocityGrid(3.0, 5)
    hist = VelocityHistogram.from_samples(rng.normal(size=(5000, 3)), grid)
    path = write_histogram(tmp_path / "a.hist", hist, {"source": "test"})
    header = json.loads(path.read_text().splitlines()[0][1:])
    assert header["source"] == "test"
    assert header["n_samples"] == 5000
    back = read_histogram(path)
    assert back.grid == grid
    np.testing.assert_allclose(back.masses, hist.masses, rtol=1e-9)
    assert back.outside == pytest.approx(hist.outside)


def test_density_file(tmp_path):
    grid = VelocityGrid(3.0, 5)
    density = KineticDensity.from_velocity_law(Maxwellian(1.0), grid)
    path = write_density(tmp_path / "d.hist", density, [0.9, 0.05])
    header = json.loads(path.read_text().splitlines()[0][1:])
    assert header["kind"] == "density"
    assert header["level_masses"] == [0.9, 0.05]
    back = read_histogram(path)
    assert back.total == pytest.approx(1.0)


def test_histogram_file_errors(tmp_path, rng):
    path = tmp_path / "bad.hist"
    path.write_text("ix,iy,iz,mass\n0,0,0,1\n")
    with pytest.raises(ValueError, match="header"):
        read_histogram(path)
    hist = VelocityHistogram.from_samples(rng.normal(size=(100, 3)), VelocityGrid(3.0, 3))
    good = write_histogram(tmp_path / "good.hist", hist)
    lines = good.read_text().splitlines()
    path.write_text("\n".join(lines[:-2]) + "\n")
    with pytest.raises(GridMismatchError):
        read_histogram(path)


def _report() -> ExperimentReport:
    report = ExperimentReport(config={"seed": 1})
    for eps, tv, good in ((0.2, 0.12, 0.6), (0.1, 0.07, 0.8)):
        report.rows.append(ReportRow(eps, int(round(eps ** -2)), 1.0, tv, 0.01, good, 2.5, 0.9, 0.91, 0))
        report.gating.append(GatingRow(eps, int(round(eps ** -2)), 1.0, 0.02, 0.01, 0.02, eps <= 0.1, True))
        report.diagnostics.append(DiagnosticsRow(eps, 1.0, 0.9, 1.0, 1.0, 0.8, 0.7, good + 0.1, good))
    return report


def test_write_report(tmp_path):
    paths = write_report(_report(), tmp_path, {"_provenance": "test"})
    frame = pd.read_csv(paths["report"])
    assert list(frame.columns) == REPORT_COLUMNS
    assert len(frame) == 2
    summary = json.loads(paths["summary"].read_text())
    assert summary["thresholds"]["_provenance"] == "test"
    assert summary["validity"]["valid"] is True
    assert paths["tv_plot"].read_text().startswith("<svg")
    assert set(load_report_frames(tmp_path)) == {"report", "gating", "diagnostics"}


def test_write_report_is_byte_stable(tmp_path):
    a = write_report(_report(), tmp_path / "a")
    b = write_report(_report(), tmp_path / "b")
    for name in ("report", "gating", "diagnostics", "summary", "tv_plot", "good_plot"):
        assert a[name].read_bytes() == b[name].read_bytes()


def test_dashboard_figures(tmp_path):
    write_report(_report(), tmp_path, plots=False)
    frames = load_report_frames(tmp_path)
    kpis, figures = create_dashboard_layout(frames["report"], frames["gating"], frames["diagnostics"])
    assert kpis["smallest_epsilon"] == 0.1
    assert kpis["tv"] == pytest.approx(0.07)
    assert kpis["gating_passed"]
    assert set(figures) == {"tv", "good_fraction", "zeta", "flags", "collisions"}
    assert len(figures["tv"].data) == 1
