# flake8: noqa: E501
"""
Command-line entry point for the Rayleigh gas experiments.

Subcommands: simulate, jump, solve, trees classify, compare, experiment.
"""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

# Add src to path for imports
sys.path.append(str(Path(__file__).parent.parent / "src"))

from core.collision_trees import GoodTreeParams, classify, default_good_params
from core.convergence_harness import (
    ABORT_RATE_LIMIT,
    GATING_EPSILON,
    GATING_SIGMAS,
    ExperimentOrchestrator,
    RealizationSpec,
    VelocityHistogram,
    estimate_tv,
    run_experiment,
)
from core.duhamel_solver import duhamel_solve
from core.initial_sampling import boltzmann_grad_n
from core.jump_process import JumpProcessSampler
from core.kinetic_density import KineticDensity, VelocityGrid
from core.laws import InitialLaw, Maxwellian
from data.experiment_config import ExperimentConfig, load_config
from data.histogram_store import read_histogram, write_density, write_histogram, write_report
from data.tree_store import TreeRecord, read_trees, write_trees
from utils import rng as streams
from utils.errors import ConfigError
from utils.law_parser import parse_background_law, parse_initial_law

logger = logging.getLogger("rayleigh_gas")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_USAGE = 2


def _banner(title: str) -> None:
    print("=" * 60)
    print(title)
    print("=" * 60)


def _json_arg(text: Optional[str], name: str):
    if text is None:
        return None
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"--{name} is not valid JSON: {e}") from e


class CommandContext:
    """Global flags resolved against the optional config file and the environment."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: Optional[ExperimentConfig] = load_config(args.config) if args.config else None
        self.out = Path(args.out)

    @property
    def seed(self) -> int:
        if self.args.seed is not None:
            return self.args.seed
        if self.config is not None:
            return self.config.seed
        env = os.environ.get("RK_SEED")
        return int(env) if env else 0

    @property
    def workers(self) -> int:
        if self.args.workers is not None:
            return self.args.workers
        if self.config is not None:
            return self.config.workers
        env = os.environ.get("RK_WORKERS")
        return int(env) if env else 1

    def f0(self) -> InitialLaw:
        spec = _json_arg(getattr(self.args, "f0", None), "f0")
        if spec is not None:
            return parse_initial_law(spec)
        return self.config.f0 if self.config is not None else InitialLaw()

    def g0(self):
        spec = _json_arg(getattr(self.args, "g0", None), "g0")
        if spec is not None:
            return parse_background_law(spec)
        return self.config.g0 if self.config is not None else Maxwellian(1.0)

    def grid(self) -> VelocityGrid:
        bins = self.args.bins or (self.config.bins_per_axis if self.config else 20)
        v_max = self.args.v_max or (self.config.v_max if self.config else 6.0)
        return VelocityGrid(v_max, bins)

    def horizon(self) -> float:
        if self.args.T is not None:
            return self.args.T
        return self.config.T if self.config is not None else 1.0


def cmd_simulate(ctx: CommandContext) -> int:
    args = ctx.args
    T = ctx.horizon()
    f0, g0 = ctx.f0(), ctx.g0()
    spec_base = dict(epsilon=args.epsilon, T=T, seed=ctx.seed, eps_index=0, f0=f0, g0=g0, t_eval=(T,), gain_enabled=not args.no_gain)
    specs = [RealizationSpec(index=i, **spec_base) for i in range(args.n_runs)]

    cfg = ExperimentConfig(epsilons=(args.epsilon,), realizations_per_eps=max(args.n_runs, 1), t_eval=(T,), T=T, f0=f0, g0=g0, seed=ctx.seed, workers=ctx.workers)
    results = ExperimentOrchestrator(cfg, progress=not args.quiet).map_realizations(specs, desc=f"Simulating eps={args.epsilon:g}")

    records = [
        TreeRecord(r.tree, r.status, r.partners, args.epsilon)
        for r in results if r.tree is not None
    ]
    out_file = Path(args.output) if args.output else ctx.out / "trees.jsonl"
    write_trees(out_file, records)

    done = [r for r in results if r.completed]
    if done:
        hist = VelocityHistogram.from_samples(np.stack([r.velocities[0] for r in done]), ctx.grid(), np.array([r.alive[0] for r in done]))
        write_histogram(out_file.with_suffix(".hist"), hist, {"source": "particle", "epsilon": args.epsilon, "t": T})

    _banner("PARTICLE SIMULATION SUMMARY")
    print(f"epsilon: {args.epsilon:g}  N: {boltzmann_grad_n(args.epsilon)}  T: {T:g}")
    print(f"Completed runs: {len(done)} / {len(results)}")
    print(f"Aborted runs: {sum(r.aborted for r in results)}")
    if done:
        print(f"Mean collisions: {np.mean([r.tree.n for r in done]):.3f}")
    print(f"Trees written to: {out_file}")
    return EXIT_OK


def cmd_jump(ctx: CommandContext) -> int:
    args = ctx.args
    T = ctx.horizon()
    times = sorted(set(args.times or [T]))
    sampler = JumpProcessSampler(ctx.g0(), gain_enabled=not args.no_gain)
    ensemble = sampler.ensemble(ctx.f0(), times, args.n, streams.stream(ctx.seed, streams.ADHOC, 0))
    grid = ctx.grid()
    ctx.out.mkdir(parents=True, exist_ok=True)
    written = []
    for k, t in enumerate(ensemble.times):
        hist = VelocityHistogram.from_samples(ensemble.velocities[k], grid, ensemble.alive[k])
        written.append(write_histogram(ctx.out / f"jump_t{t:g}.hist", hist, {"source": "jump", "t": t}))

    if args.trajectories:
        path = ctx.out / "jump_trajectories.jsonl"
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for i in tqdm(range(args.trajectories), desc="Trajectories", disable=args.quiet):
                traj = sampler.trajectory(ctx.f0(), T, streams.stream(ctx.seed, streams.ADHOC, 1, i))
                fh.write(json.dumps(traj.to_dict(), sort_keys=True, separators=(",", ":")) + "\n")
        written.append(path)

    _banner("JUMP PROCESS SUMMARY")
    print(f"Samples: {args.n}  times: {', '.join(f'{t:g}' for t in ensemble.times)}")
    print(f"Acceptance: {ensemble.accepted} / {ensemble.proposals}")
    for k, t in enumerate(ensemble.times):
        print(f"  t={t:g}: mean jumps {ensemble.jumps[k].mean():.3f}, surviving {ensemble.alive[k].mean():.4f}")
    for path in written:
        print(f"Wrote {path}")
    return EXIT_OK


def cmd_solve(ctx: CommandContext) -> int:
    args = ctx.args
    t = args.t if args.t is not None else ctx.horizon()
    f0 = ctx.f0()
    grid = ctx.grid()
    j_max = args.j_max if args.j_max is not None else (ctx.config.j_max if ctx.config else 24)
    steps = args.steps if args.steps is not None else (ctx.config.n_time_steps if ctx.config else 64)
    start = time.time()
    initial = KineticDensity.from_velocity_law(f0.velocity, grid)
    density, masses = duhamel_solve(initial, ctx.g0(), t, j_max=j_max, n_time_steps=steps)
    out_file = Path(args.output) if args.output else ctx.out / f"duhamel_t{t:g}.hist"
    write_density(out_file, density, masses, {"source": "duhamel", "t": t, "j_max": j_max, "n_time_steps": steps})

    _banner("DUHAMEL SOLVE SUMMARY")
    print(f"t: {t:g}  j_max: {j_max}  time steps: {steps}  grid: {grid.bins_per_axis}^3 on +-{grid.v_max:g}")
    print(f"Partial-sum mass: {sum(masses):.6f}  deficit: {1.0 - sum(masses):.3e}")
    for j, m in enumerate(masses[:8]):
        print(f"  level {j}: {m:.6f}")
    print(f"Solve time: {time.time() - start:.2f} seconds")
    print(f"Density written to: {out_file}")
    return EXIT_OK


def cmd_trees_classify(ctx: CommandContext) -> int:
    args = ctx.args
    records = read_trees(args.input)
    rows = []
    for record in tqdm(records, desc="Classifying trees", disable=args.quiet):
        eps = args.epsilon if args.epsilon is not None else record.epsilon
        if eps is None:
            raise ConfigError("Tree records carry no epsilon; pass --epsilon")
        base = default_good_params(eps)
        params = GoodTreeParams(eps, args.V if args.V is not None else base.V_eps, args.M if args.M is not None else base.M_eps)
        tree = record.tree.truncated(args.t) if args.t is not None else record.tree
        rows.append(classify(tree, params).to_row(eps))
    df = pd.DataFrame(rows)
    out_file = Path(args.output) if args.output else ctx.out / "classified.csv"
    out_file.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(out_file, index=False, float_format="%.10g", lineterminator="\n")

    _banner("GOOD-TREE CLASSIFICATION")
    print(f"Trees: {len(df)}")
    if len(df):
        for flag in ("recollision_free", "non_grazing", "overlap_free", "n_ok", "speed_ok", "good"):
            print(f"  {flag}: {df[flag].mean():.4f}")
    print(f"Rows written to: {out_file}")
    return EXIT_OK


def cmd_compare(ctx: CommandContext) -> int:
    a = read_histogram(ctx.args.a)
    b = read_histogram(ctx.args.b)
    print(estimate_tv(a, b))
    return EXIT_OK


def cmd_experiment(ctx: CommandContext) -> int:
    if ctx.config is None:
        raise ConfigError("experiment needs --config FILE")
    config = ctx.config.with_overrides(seed=ctx.args.seed, workers=ctx.args.workers)
    _banner("RAYLEIGH GAS CONVERGENCE EXPERIMENT")
    print(f"epsilons: {list(config.epsilons)}  M: {config.realizations_per_eps}  M': {config.reference_samples}")
    print(f"t_eval: {list(config.t_eval)}  seed: {config.seed}  workers: {config.workers}")

    start = time.time()
    report = run_experiment(config, progress=not ctx.args.quiet)
    thresholds = {
        "abort_rate_limit": ABORT_RATE_LIMIT,
        "gating_epsilon": GATING_EPSILON,
        "gating_sigmas": GATING_SIGMAS,
        "_provenance": "harness constants; acceptance thresholds live in tests/golden/desk_scale_thresholds.json",
    }
    paths = write_report(report, ctx.out, thresholds, plots=config.plots)

    print("\n" + "=" * 60)
    print("EXPERIMENT SUMMARY")
    print("=" * 60)
    for row in report.rows:
        print(f"eps={row.epsilon:<6g} t={row.t:<4g} tv={row.tv_empirical_vs_ideal:.4f} +- {row.tv_mc_error:.4f}  good={row.good_tree_fraction:.3f}  zeta {row.zeta_empirical:.4f}/{row.zeta_theoretical:.4f}")
    print(f"Valid: {report.valid}  (gating passed: {report.gating_passed}, aborts ok: {report.abort_ok})")
    for issue in report.issues:
        print(f"  ! {issue}")
    print(f"Processing time: {time.time() - start:.2f} seconds")
    for name, path in paths.items():
        print(f"  {name}: {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rayleigh_gas", description="Rayleigh gas particle model and linear Boltzmann reference.")
    parser.add_argument("--config", help="JSON experiment configuration")
    parser.add_argument("--seed", type=int, help="Seed (overrides RK_SEED and the config)")
    parser.add_argument("--workers", type=int, help="Worker processes (overrides RK_WORKERS and the config)")
    parser.add_argument("--out", default="results", help="Output directory")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--quiet", action="store_true", help="Hide progress bars")
    sub = parser.add_subparsers(dest="command", required=True)

    def law_flags(p):
        p.add_argument("--f0", help="Initial law as JSON, e.g. '{\"velocity\": {\"kind\": \"maxwellian\"}}'")
        p.add_argument("--g0", help="Background law as JSON, e.g. '{\"kind\": \"maxwellian\", \"sigma\": 1}'")
        p.add_argument("--T", type=float, help="Time horizon")
        p.add_argument("--bins", type=int, help="Velocity bins per axis")
        p.add_argument("--v-max", type=float, help="Velocity grid half-width")

    p = sub.add_parser("simulate", help="Particle runs -> trees JSONL")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--n-runs", type=int, default=1)
    p.add_argument("--no-gain", action="store_true", help="Absorb the tagged particle at its first collision")
    p.add_argument("--output", help="Trees file (default OUT/trees.jsonl)")
    law_flags(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("jump", help="Jump-process samples -> histograms")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--times", type=float, nargs="+")
    p.add_argument("--no-gain", action="store_true")
    p.add_argument("--trajectories", type=int, default=0, help="Also write this many full trajectories")
    law_flags(p)
    p.set_defaults(handler=cmd_jump)

    p = sub.add_parser("solve", help="Duhamel series on a velocity grid")
    p.add_argument("--t", type=float)
    p.add_argument("--j-max", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--output")
    law_flags(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("trees", help="Collision-tree tools")
    trees_sub = p.add_subparsers(dest="trees_command", required=True)
    c = trees_sub.add_parser("classify", help="Good-tree CSV from a trees JSONL file")
    c.add_argument("input")
    c.add_argument("--epsilon", type=float)
    c.add_argument("--V", type=float, help="Speed cut-off V(eps)")
    c.add_argument("--M", type=float, help="Collision-count cut-off M(eps)")
    c.add_argument("--t", type=float, help="Classify the trees truncated at t")
    c.add_argument("--output")
    c.set_defaults(handler=cmd_trees_classify)

    p = sub.add_parser("compare", help="TV distance between two histogram files")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("experiment", help="Full epsilon sweep")
    p.set_defaults(handler=cmd_experiment)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Run the CLI; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        ctx = CommandContext(args)
        return args.handler(ctx)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
