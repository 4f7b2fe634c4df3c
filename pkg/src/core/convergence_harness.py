# flake8: noqa: E501
"""
Experiment engine: particle realizations against the jump-process reference.

For every epsilon of the sweep, M tagged-particle runs are simulated, their
velocities at the evaluation times are binned, and the histograms are compared
in total variation with a jump-process reference of M' >= 10 M samples. Good-tree
statistics come from classifying each run's tree truncated at the evaluation time.
An optional loss-only pass (absorption at the first collision in both systems)
gates the full-dynamics rows.
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from core.collision_trees import CollisionTree, GoodTreeParams, GoodTreeReport, classify
from core.initial_sampling import boltzmann_grad_n, require_admissible, zeta
from core.jump_process import JumpEnsemble, jump_ensemble
from core.kinetic_density import KineticDensity, VelocityGrid
from core.laws import BackgroundLaw, InitialLaw
from core.particle_dynamics import RayleighGasSimulator, SimConfig, SimStatus, tagged_trajectory
from utils import rng as streams
from utils.errors import GridMismatchError

logger = logging.getLogger(__name__)

ABORT_RATE_LIMIT = 0.05
GATING_EPSILON = 0.1
GATING_SIGMAS = 3.0
ZETA_SIGMAS = 3.0

REPORT_COLUMNS = [
    "epsilon", "N", "t", "tv_empirical_vs_ideal", "tv_mc_error", "good_tree_fraction",
    "mean_collisions", "zeta_theoretical", "zeta_empirical", "aborted_runs",
]
GATING_COLUMNS = ["epsilon", "N", "t", "tv", "tv_mc_error", "tv_noise_floor", "checked", "passed"]
DIAGNOSTIC_COLUMNS = [
    "epsilon", "t", "recollision_free", "non_grazing", "overlap_free", "n_ok", "speed_ok",
    "geometric_good_fraction", "good_tree_fraction",
]


@dataclass(frozen=True, eq=False)
class VelocityHistogram:
    """
    Normalized velocity histogram on a cube grid.

    Two extra cells carry the mass that left the cube and, for loss-only runs,
    the mass of absorbed particles, so probabilities always sum to one.
    """

    grid: VelocityGrid
    masses: np.ndarray
    outside: float = 0.0
    absorbed: float = 0.0
    n_samples: int = 0

    def __post_init__(self):
        masses = np.asarray(self.masses, dtype=float).ravel()
        if masses.size != self.grid.n_cells:
            raise GridMismatchError(f"Histogram has {masses.size} cells, grid has {self.grid.n_cells}")
        object.__setattr__(self, "masses", masses)

    def probabilities(self) -> np.ndarray:
        return np.concatenate([self.masses, [self.outside, self.absorbed]])

    @property
    def total(self) -> float:
        return float(self.probabilities().sum())

    @classmethod
    def from_samples(cls, velocities, grid: VelocityGrid, alive: Optional[np.ndarray] = None) -> "VelocityHistogram":
        v = np.asarray(velocities, dtype=float).reshape(-1, 3)
        n = v.shape[0]
        if n == 0:
            raise ValueError("Cannot build a histogram from zero samples")
        live = np.ones(n, dtype=bool) if alive is None else np.asarray(alive, dtype=bool)
        counts, outside = grid.counts(v[live])
        return cls(grid, counts / n, outside / n, float((~live).sum()) / n, n)

    @classmethod
    def from_density(cls, density: KineticDensity) -> "VelocityHistogram":
        """Cell masses of a gridded density; any mass deficit goes to the outside cell."""
        masses = density.cell_masses()
        return cls(density.grid, masses, max(0.0, 1.0 - float(masses.sum())), 0.0, 0)

    def header(self) -> Dict[str, Any]:
        return {
            "kind": "velocity_histogram",
            "v_max": self.grid.v_max,
            "bins_per_axis": self.grid.bins_per_axis,
            "mass": self.total,
            "outside": self.outside,
            "absorbed": self.absorbed,
            "n_samples": self.n_samples,
        }


@dataclass(frozen=True)
class TVEstimate:
    tv: float
    mc_error: float
    noise_floor: float


def _probabilities(h) -> Tuple[np.ndarray, Optional[VelocityGrid]]:
    if isinstance(h, VelocityHistogram):
        return h.probabilities(), h.grid
    return np.asarray(h, dtype=float).ravel(), None


def estimate_tv(hist_a, hist_b) -> float:
    """
    Half the L1 distance between two normalized histograms.

    Args:
        hist_a: VelocityHistogram or probability array
        hist_b: VelocityHistogram or probability array with the same binning

    Returns:
        TV distance in [0, 1]

    Raises:
        GridMismatchError: if the binnings differ
    """
    a, grid_a = _probabilities(hist_a)
    b, grid_b = _probabilities(hist_b)
    if grid_a is not None and grid_b is not None and grid_a != grid_b:
        raise GridMismatchError(f"Histograms use different grids: {grid_a} vs {grid_b}")
    if a.shape != b.shape:
        raise GridMismatchError(f"Histograms have {a.size} and {b.size} cells")
    return float(min(1.0, 0.5 * np.abs(a - b).sum()))


def _resample(h: VelocityHistogram, rng: np.random.Generator, resamples: int) -> np.ndarray:
    p = h.probabilities()
    p = p / p.sum()
    return rng.multinomial(h.n_samples, p, size=resamples) / h.n_samples


def bootstrap_tv_error(hist_a: VelocityHistogram, hist_b: VelocityHistogram, rng: np.random.Generator, resamples: int = 200) -> TVEstimate:
    """
    Bootstrap the TV between two sample histograms.

    Each histogram is resampled with replacement (a multinomial draw over its own
    cells). The spread of the resampled TVs is the Monte Carlo error; the mean
    distance of each resample to its own histogram estimates the positive bias
    that sampling noise alone adds to the TV.

    Returns:
        TVEstimate(tv, mc_error, noise_floor)
    """
    tv = estimate_tv(hist_a, hist_b)
    if hist_a.n_samples < 1 or hist_b.n_samples < 1:
        raise ValueError("Bootstrap needs sample-based histograms on both sides")
    if resamples < 2:
        raise ValueError(f"Need at least two bootstrap resamples, got {resamples}")
    a_star = _resample(hist_a, rng, resamples)
    b_star = _resample(hist_b, rng, resamples)
    tvs = 0.5 * np.abs(a_star - b_star).sum(axis=1)
    floor = 0.5 * (np.abs(a_star - hist_a.probabilities()).sum(axis=1) + np.abs(b_star - hist_b.probabilities()).sum(axis=1))
    return TVEstimate(tv, float(np.std(tvs, ddof=1)), float(floor.mean()))


@dataclass(frozen=True)
class RealizationSpec:
    """Everything one particle realization needs, picklable for worker processes."""

    epsilon: float
    T: float
    seed: int
    eps_index: int
    index: int
    f0: InitialLaw
    g0: BackgroundLaw
    t_eval: Tuple[float, ...]
    gain_enabled: bool = True
    max_retries: int = 3
    good_params: Optional[GoodTreeParams] = None


@dataclass(frozen=True, eq=False)
class RealizationResult:
    spec: RealizationSpec
    tree: Optional[CollisionTree]
    partners: Tuple[int, ...]
    status: str
    velocities: np.ndarray
    alive: np.ndarray
    attempts: int
    configurations: int
    aborted: int
    reports: Tuple[GoodTreeReport, ...] = ()
    error: Optional[str] = None

    @property
    def completed(self) -> bool:
        return self.status == SimStatus.COMPLETED.value and self.error is None

    @classmethod
    def failed(cls, spec: RealizationSpec, message: str, attempts: int = 0, configurations: int = 0, aborted: int = 0) -> "RealizationResult":
        k = len(spec.t_eval)
        return cls(spec, None, (), "Error", np.full((k, 3), np.nan), np.zeros(k, dtype=bool), attempts, configurations, aborted, (), message)


def simulate_realization(spec: RealizationSpec) -> RealizationResult:
    """
    One particle realization with retries on aborted runs.

    Retry r uses the stream (seed, purpose, eps_index, index, r), so the result
    does not depend on which worker runs it.
    """
    purpose = streams.PARTICLE if spec.gain_enabled else streams.LOSS_PARTICLE
    simulator = RayleighGasSimulator(SimConfig(spec.epsilon, spec.T, seed=spec.seed, gain_enabled=spec.gain_enabled))
    attempts = configurations = aborted = 0
    outcome = None
    for retry in range(spec.max_retries + 1):
        rng = streams.stream(spec.seed, purpose, spec.eps_index, spec.index, retry)
        try:
            outcome = simulator.run(rng, spec.f0, spec.g0)
        except ValueError as e:
            logger.warning("Realization %d at eps=%.4g failed: %s", spec.index, spec.epsilon, e)
            return RealizationResult.failed(spec, str(e), attempts, configurations, aborted)
        attempts += outcome.attempts
        configurations += 1
        if outcome.completed:
            break
        aborted += 1
        logger.debug("Realization %d at eps=%.4g aborted (%s), retry %d", spec.index, spec.epsilon, outcome.status.value, retry)

    k = len(spec.t_eval)
    velocities = np.empty((k, 3))
    alive = np.ones(k, dtype=bool)
    if not outcome.completed:
        return RealizationResult(spec, outcome.tree, outcome.partners, outcome.status.value, np.full((k, 3), np.nan), ~alive, attempts, configurations, aborted)

    for i, t in enumerate(spec.t_eval):
        if outcome.absorbed_at is not None and outcome.absorbed_at <= t:
            alive[i] = False
            velocities[i] = outcome.tree.v0
        else:
            velocities[i] = tagged_trajectory(outcome.tree, t).v

    reports: Tuple[GoodTreeReport, ...] = ()
    if spec.good_params is not None:
        reports = tuple(classify(outcome.tree.truncated(t), spec.good_params) for t in spec.t_eval)
    return RealizationResult(spec, outcome.tree, outcome.partners, outcome.status.value, velocities, alive, attempts, configurations, aborted, reports)


@dataclass(frozen=True)
class ReportRow:
    epsilon: float
    N: int
    t: float
    tv_empirical_vs_ideal: float
    tv_mc_error: float
    good_tree_fraction: float
    mean_collisions: float
    zeta_theoretical: float
    zeta_empirical: float
    aborted_runs: int

    def to_dict(self) -> Dict[str, Any]:
        return {c: getattr(self, c) for c in REPORT_COLUMNS}


@dataclass(frozen=True)
class GatingRow:
    epsilon: float
    N: int
    t: float
    tv: float
    tv_mc_error: float
    tv_noise_floor: float
    checked: bool
    passed: bool

    def to_dict(self) -> Dict[str, Any]:
        return {c: getattr(self, c) for c in GATING_COLUMNS}


@dataclass(frozen=True)
class DiagnosticsRow:
    epsilon: float
    t: float
    recollision_free: float
    non_grazing: float
    overlap_free: float
    n_ok: float
    speed_ok: float
    geometric_good_fraction: float
    good_tree_fraction: float

    def to_dict(self) -> Dict[str, Any]:
        return {c: getattr(self, c) for c in DIAGNOSTIC_COLUMNS}


@dataclass
class ExperimentReport:
    """Rows of the sweep plus validity flags."""

    config: Any
    rows: List[ReportRow] = field(default_factory=list)
    gating: List[GatingRow] = field(default_factory=list)
    diagnostics: List[DiagnosticsRow] = field(default_factory=list)
    issues: List[str] = field(default_factory=list)
    abort_ok: bool = True
    zeta_consistent: bool = True

    @property
    def gating_passed(self) -> bool:
        return all(r.passed for r in self.gating if r.checked)

    @property
    def valid(self) -> bool:
        return self.abort_ok and self.gating_passed

    def rows_at(self, t: float) -> List[ReportRow]:
        return [r for r in self.rows if r.t == t]

    def tv_nonincreasing(self, t: float) -> bool:
        """TV does not grow as epsilon decreases, up to the summed bootstrap errors."""
        rows = self.rows_at(t)
        return all(b.tv_empirical_vs_ideal <= a.tv_empirical_vs_ideal + a.tv_mc_error + b.tv_mc_error for a, b in zip(rows, rows[1:]))

    def good_fraction_nondecreasing(self, t: float, geometric: bool = False) -> bool:
        if geometric:
            values = [d.geometric_good_fraction for d in self.diagnostics if d.t == t]
        else:
            values = [r.good_tree_fraction for r in self.rows_at(t)]
        return all(b >= a for a, b in zip(values, values[1:]))

    def summary(self) -> Dict[str, Any]:
        times = sorted({r.t for r in self.rows})
        return {
            "valid": self.valid,
            "gating_passed": self.gating_passed,
            "abort_ok": self.abort_ok,
            "zeta_consistent": self.zeta_consistent,
            "tv_nonincreasing": {str(t): self.tv_nonincreasing(t) for t in times},
            "good_fraction_nondecreasing": {str(t): self.good_fraction_nondecreasing(t) for t in times},
            "geometric_fraction_nondecreasing": {str(t): self.good_fraction_nondecreasing(t, geometric=True) for t in times},
            "issues": list(self.issues),
        }


def _mean(values: Sequence[bool]) -> float:
    return float(np.mean(values)) if len(values) else float("nan")


class ExperimentOrchestrator:
    """Runs the epsilon sweep; realizations go to a process pool when workers > 1."""

    def __init__(self, config, progress: bool = True):
        """
        Args:
            config: ExperimentConfig
            progress: Show tqdm progress bars
        """
        self.config = config
        self.progress = progress
        self.grid = VelocityGrid(config.v_max, config.bins_per_axis)

    def specs(self, eps_index: int, gain_enabled: bool) -> List[RealizationSpec]:
        cfg = self.config
        eps = cfg.epsilons[eps_index]
        params = cfg.good_params_for(eps) if gain_enabled else None
        return [
            RealizationSpec(eps, cfg.T, cfg.seed, eps_index, i, cfg.f0, cfg.g0, cfg.t_eval, gain_enabled, cfg.max_retries, params)
            for i in range(cfg.realizations_per_eps)
        ]

    def map_realizations(self, specs: List[RealizationSpec], desc: str) -> List[RealizationResult]:
        """Run specs and return results in spec order."""
        results: List[Optional[RealizationResult]] = [None] * len(specs)
        if self.config.workers == 1:
            for i, spec in enumerate(tqdm(specs, desc=desc, disable=not self.progress)):
                results[i] = simulate_realization(spec)
            return results

        with ProcessPoolExecutor(max_workers=self.config.workers) as executor:
            futures = {executor.submit(simulate_realization, spec): i for i, spec in enumerate(specs)}
            for future in tqdm(as_completed(futures), total=len(futures), desc=desc, disable=not self.progress):
                i = futures[future]
                try:
                    results[i] = future.result()
                except Exception as e:
                    logger.error("Worker failed on realization %d: %s", i, e)
                    results[i] = RealizationResult.failed(specs[i], str(e))
        return results

    def reference(self, gain_enabled: bool) -> JumpEnsemble:
        cfg = self.config
        purpose = streams.JUMP if gain_enabled else streams.LOSS_JUMP
        logger.info("Sampling %d jump-process reference particles (gain %s)", cfg.reference_samples, "on" if gain_enabled else "off")
        return jump_ensemble(cfg.f0, cfg.g0, cfg.t_eval, cfg.reference_samples, streams.stream(cfg.seed, purpose, 0), gain_enabled=gain_enabled)

    def _histogram(self, results: List[RealizationResult], k: int) -> VelocityHistogram:
        done = [r for r in results if r.completed]
        if not done:
            raise ValueError("No completed realizations to histogram")
        v = np.stack([r.velocities[k] for r in done])
        alive = np.array([r.alive[k] for r in done])
        return VelocityHistogram.from_samples(v, self.grid, alive)

    def _compare(self, results, ensemble: JumpEnsemble, k: int, eps_index: int, gain_flag: int) -> TVEstimate:
        cfg = self.config
        particle = self._histogram(results, k)
        ideal = VelocityHistogram.from_samples(ensemble.velocities[k], self.grid, ensemble.alive[k])
        rng = streams.stream(cfg.seed, streams.BOOTSTRAP, eps_index, k, gain_flag)
        return bootstrap_tv_error(particle, ideal, rng, cfg.bootstrap_resamples)

    def run_gating(self, report: ExperimentReport) -> None:
        cfg = self.config
        ensemble = self.reference(gain_enabled=False)
        for e, eps in enumerate(cfg.epsilons):
            results = self.map_realizations(self.specs(e, gain_enabled=False), desc=f"Loss-only eps={eps:g}")
            N = boltzmann_grad_n(eps)
            for k, t in enumerate(cfg.t_eval):
                est = self._compare(results, ensemble, k, e, 0)
                checked = eps <= GATING_EPSILON
                passed = est.tv <= est.noise_floor + GATING_SIGMAS * est.mc_error
                report.gating.append(GatingRow(eps, N, t, est.tv, est.mc_error, est.noise_floor, checked, passed))
                if checked and not passed:
                    report.issues.append(f"loss-only check failed at eps={eps:g}, t={t:g}: tv={est.tv:.4f}")
                logger.info("Loss-only eps=%g t=%g: tv=%.4f +- %.4f (floor %.4f) %s", eps, t, est.tv, est.mc_error, est.noise_floor, "ok" if passed else "FAILED")

    def run(self) -> ExperimentReport:
        cfg = self.config
        report = ExperimentReport(config=cfg)
        if cfg.loss_only_check:
            self.run_gating(report)
            if not report.gating_passed:
                logger.warning("Loss-only gating failed; full-dynamics rows are not trusted")

        ensemble = self.reference(gain_enabled=True)
        for e, eps in enumerate(cfg.epsilons):
            N = boltzmann_grad_n(eps)
            results = self.map_realizations(self.specs(e, gain_enabled=True), desc=f"Particle runs eps={eps:g}")
            done = [r for r in results if r.completed]
            aborted = sum(r.aborted for r in results)
            tries = sum(r.configurations for r in results)
            failed = sum(1 for r in results if r.error is not None)
            rate = aborted / max(tries, 1)
            if rate > ABORT_RATE_LIMIT or failed:
                report.abort_ok = False
                report.issues.append(f"eps={eps:g}: abort rate {rate:.3f}, {failed} failed realizations")
                logger.warning("eps=%g: abort rate %.3f exceeds %.2f or realizations failed (%d)", eps, rate, ABORT_RATE_LIMIT, failed)

            draws = sum(r.attempts for r in results)
            z_theory = zeta(eps, N)
            z_emp = tries / draws if draws else float("nan")
            sigma = np.sqrt(z_theory * (1.0 - z_theory) / max(draws, 1))
            if not abs(z_emp - z_theory) <= ZETA_SIGMAS * sigma + 1e-12:
                report.zeta_consistent = False
                report.issues.append(f"eps={eps:g}: zeta_empirical {z_emp:.4f} vs theoretical {z_theory:.4f}")

            for k, t in enumerate(cfg.t_eval):
                est = self._compare(results, ensemble, k, e, 1)
                reps = [r.reports[k] for r in done]
                report.rows.append(ReportRow(
                    epsilon=eps, N=N, t=t,
                    tv_empirical_vs_ideal=est.tv,
                    tv_mc_error=est.mc_error,
                    good_tree_fraction=_mean([x.good for x in reps]),
                    mean_collisions=_mean([x.n for x in reps]),
                    zeta_theoretical=z_theory,
                    zeta_empirical=z_emp,
                    aborted_runs=aborted,
                ))
                report.diagnostics.append(DiagnosticsRow(
                    epsilon=eps, t=t,
                    recollision_free=_mean([x.recollision_free for x in reps]),
                    non_grazing=_mean([x.non_grazing for x in reps]),
                    overlap_free=_mean([x.overlap_free for x in reps]),
                    n_ok=_mean([x.n_ok for x in reps]),
                    speed_ok=_mean([x.speed_ok for x in reps]),
                    geometric_good_fraction=_mean([x.geometric_good for x in reps]),
                    good_tree_fraction=_mean([x.good for x in reps]),
                ))
                logger.info("eps=%g t=%g: tv=%.4f +- %.4f, good=%.3f, collisions=%.2f", eps, t, est.tv, est.mc_error, report.rows[-1].good_tree_fraction, report.rows[-1].mean_collisions)
        return report


def run_experiment(config, progress: bool = True) -> ExperimentReport:
    """
    Full sweep: admissibility check, loss-only gating, then the convergence rows.

    Args:
        config: ExperimentConfig
        progress: Show progress bars

    Returns:
        ExperimentReport
    """
    admissibility = require_admissible(config.f0, config.g0)
    logger.info(admissibility.summary())
    return ExperimentOrchestrator(config, progress=progress).run()
