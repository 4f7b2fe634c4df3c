# flake8: noqa: E501
"""
Tests for the rayleigh_gas command-line entry point.
"""

import json

import pandas as pd
import pytest

from core.convergence_harness import VelocityHistogram
from core.kinetic_density import VelocityGrid
from data.histogram_store import read_histogram, write_histogram
from rayleigh_gas import EXIT_CONFIG, EXIT_OK, EXIT_USAGE, main


def _simulate(out, *extra):
    return main(["--out", str(out), "--seed", "3", "--quiet", "simulate", "--epsilon", "0.2", "--n-runs", "5", "--T", "0.5", "--bins", "6", *extra])


def test_unknown_flag_is_a_usage_error():
    assert main(["simulate", "--epsilon", "0.2", "--colour", "red"]) == EXIT_USAGE


def test_missing_subcommand_is_a_usage_error():
    assert main([]) == EXIT_USAGE


def test_bad_config_path(tmp_path):
    assert main(["--config", str(tmp_path / "missing.json"), "experiment"]) == EXIT_CONFIG


def test_invalid_config_values(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"epsilons": [0.5], "realizations_per_eps": 100, "t_eval": [1.0], "T": 1.0}))
    assert main(["--config", str(path), "experiment"]) == EXIT_CONFIG
    assert "Configuration error" in capsys.readouterr().err


def test_experiment_needs_config(tmp_path):
    assert main(["--out", str(tmp_path), "experiment"]) == EXIT_CONFIG


def test_bad_law_json(tmp_path):
    assert main(["--out", str(tmp_path), "jump", "--n", "10", "--g0", "{not json"]) == EXIT_CONFIG


def test_compare_identical_files(tmp_path, capsys, rng):
    hist = VelocityHistogram.from_samples(rng.normal(size=(500, 3)), VelocityGrid(3.0, 4))
    path = write_histogram(tmp_path / "a.hist", hist)
    capsys.readouterr()
    assert main(["compare", str(path), str(path)]) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0.0"


def test_simulate_is_reproducible(tmp_path):
    assert _simulate(tmp_path / "a") == EXIT_OK
    assert _simulate(tmp_path / "b") == EXIT_OK
    a = (tmp_path / "a" / "trees.jsonl").read_bytes()
    assert a == (tmp_path / "b" / "trees.jsonl").read_bytes()
    assert len(a.splitlines()) == 5
    hist = read_histogram(tmp_path / "a" / "trees.hist")
    assert hist.total == pytest.approx(1.0)


def test_simulate_then_classify(tmp_path):
    assert _simulate(tmp_path) == EXIT_OK
    assert main(["--out", str(tmp_path), "--quiet", "trees", "classify", str(tmp_path / "trees.jsonl"), "--t", "0.25"]) == EXIT_OK
    frame = pd.read_csv(tmp_path / "classified.csv")
    assert len(frame) == 5
    assert (frame["epsilon"] == 0.2).all()
    assert set(frame["good"].unique()) <= {True, False}


def test_jump_writes_one_histogram_per_time(tmp_path):
    code = main(["--out", str(tmp_path), "--seed", "1", "--quiet", "jump", "--n", "2000", "--times", "0.2", "0.4", "--bins", "6", "--trajectories", "3"])
    assert code == EXIT_OK
    for t in ("0.2", "0.4"):
        assert read_histogram(tmp_path / f"jump_t{t}.hist").n_samples == 2000
    lines = (tmp_path / "jump_trajectories.jsonl").read_text().splitlines()
    assert len(lines) == 3


def test_solve_writes_density(tmp_path):
    f0 = json.dumps({"velocity": {"kind": "maxwellian", "sigma": 0.6}})
    code = main(["--out", str(tmp_path), "solve", "--t", "0.3", "--j-max", "3", "--steps", "8", "--bins", "6", "--v-max", "4", "--f0", f0])
    assert code == EXIT_OK
    path = tmp_path / "duhamel_t0.3.hist"
    header = json.loads(path.read_text().splitlines()[0][1:])
    assert header["j_max"] == 3
    assert len(header["level_masses"]) == 4
    assert read_histogram(path).total == pytest.approx(1.0)
