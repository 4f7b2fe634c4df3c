# flake8: noqa: E501
"""
Experiment configuration: JSON file -> validated, frozen ExperimentConfig.
"""

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from core.collision_trees import GoodTreeParams, default_good_params
from core.laws import BackgroundLaw, InitialLaw, Maxwellian
from utils.errors import ConfigError
from utils.law_parser import parse_background_law, parse_initial_law

logger = logging.getLogger(__name__)

MIN_REALIZATIONS = 100
MIN_REFERENCE_FACTOR = 10

KNOWN_KEYS = {
    "epsilons", "realizations_per_eps", "t_eval", "T", "f0", "g0", "bins_per_axis", "v_max",
    "seed", "workers", "reference_factor", "bootstrap_resamples", "good_params",
    "loss_only_check", "plots", "j_max", "n_time_steps", "max_retries",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated parameters of an epsilon sweep."""

    epsilons: Tuple[float, ...]
    realizations_per_eps: int
    t_eval: Tuple[float, ...]
    T: float
    f0: InitialLaw = field(default_factory=InitialLaw)
    g0: BackgroundLaw = field(default_factory=Maxwellian)
    bins_per_axis: int = 20
    v_max: float = 6.0
    seed: int = 0
    workers: int = 1
    reference_factor: int = MIN_REFERENCE_FACTOR
    bootstrap_resamples: int = 200
    good_params: Optional[Dict[str, Any]] = None
    loss_only_check: bool = True
    plots: bool = True
    j_max: int = 24
    n_time_steps: int = 64
    max_retries: int = 3
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def good_params_for(self, epsilon: float) -> GoodTreeParams:
        """Default V(eps), M(eps) unless the config overrides them."""
        if not self.good_params:
            return default_good_params(epsilon)
        base = default_good_params(epsilon)
        return GoodTreeParams(
            epsilon,
            float(self.good_params.get("V_eps", base.V_eps)),
            float(self.good_params.get("M_eps", base.M_eps)),
        )

    @property
    def reference_samples(self) -> int:
        return self.reference_factor * self.realizations_per_eps

    def with_overrides(self, seed: Optional[int] = None, workers: Optional[int] = None) -> "ExperimentConfig":
        changes: Dict[str, Any] = {}
        if seed is not None:
            changes["seed"] = _non_negative_int(seed, "seed")
        if workers is not None:
            changes["workers"] = _positive_int(workers, "workers")
        return replace(self, **changes) if changes else self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilons": list(self.epsilons),
            "realizations_per_eps": self.realizations_per_eps,
            "t_eval": list(self.t_eval),
            "T": self.T,
            "f0": self.f0.to_dict(),
            "g0": self.g0.to_dict(),
            "bins_per_axis": self.bins_per_axis,
            "v_max": self.v_max,
            "seed": self.seed,
            "workers": self.workers,
            "reference_factor": self.reference_factor,
            "bootstrap_resamples": self.bootstrap_resamples,
            "good_params": self.good_params,
            "loss_only_check": self.loss_only_check,
            "plots": self.plots,
            "j_max": self.j_max,
            "n_time_steps": self.n_time_steps,
            "max_retries": self.max_retries,
        }


def _positive_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _non_negative_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value or value < 0:
        raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")
    return int(value)


def _positive_float(value: Any, name: str) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be a number, got {value!r}") from e
    if not out > 0 or out != out or out == float("inf"):
        raise ConfigError(f"{name} must be finite and positive, got {value!r}")
    return out


def _validate_epsilons(values: Any) -> Tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("epsilons must be a non-empty list")
    eps = [_positive_float(e, "epsilon") for e in values]
    for e in eps:
        if not e < 0.25:
            raise ConfigError(f"epsilon must lie in (0, 0.25), got {e}")
    if len(set(eps)) != len(eps):
        raise ConfigError(f"epsilons must be distinct, got {eps}")
    ordered = sorted(eps, reverse=True)
    if ordered != eps:
        logger.warning("epsilons %s are not decreasing; sorting them to %s", eps, ordered)
    return tuple(ordered)


def _validate_times(values: Any, T: float) -> Tuple[float, ...]:
    if not isinstance(values, (list, tuple)) or not values:
        raise ConfigError("t_eval must be a non-empty list")
    times = sorted({_positive_float(t, "t_eval entry") for t in values})
    if times[-1] > T:
        raise ConfigError(f"t_eval entries must not exceed T={T}, got {times[-1]}")
    return tuple(times)


def _validate_good_params(value: Any) -> Optional[Dict[str, Any]]:
    if value is None:
        return None
    if not isinstance(value, dict) or set(value) - {"V_eps", "M_eps"}:
        raise ConfigError(f"good_params may only set V_eps and M_eps, got {value!r}")
    return {k: _positive_float(v, k) for k, v in value.items()}


def config_from_dict(data: Dict[str, Any]) -> ExperimentConfig:
    """
    Validate a parsed configuration object.

    Args:
        data: Parsed JSON object

    Returns:
        ExperimentConfig

    Raises:
        ConfigError: on missing keys or invalid values
    """
    if not isinstance(data, dict):
        raise ConfigError("Configuration must be a JSON object")
    unknown = set(data) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {sorted(unknown)}")
    missing = [k for k in ("epsilons", "realizations_per_eps", "t_eval", "T") if k not in data]
    if missing:
        raise ConfigError(f"Missing required configuration keys: {missing}")

    T = _positive_float(data["T"], "T")
    realizations = _positive_int(data["realizations_per_eps"], "realizations_per_eps")
    if realizations < MIN_REALIZATIONS:
        raise ConfigError(f"realizations_per_eps must be at least {MIN_REALIZATIONS}, got {realizations}")
    reference_factor = _positive_int(data.get("reference_factor", MIN_REFERENCE_FACTOR), "reference_factor")
    if reference_factor < MIN_REFERENCE_FACTOR:
        raise ConfigError(f"reference_factor must be at least {MIN_REFERENCE_FACTOR}, got {reference_factor}")

    config = ExperimentConfig(
        epsilons=_validate_epsilons(data["epsilons"]),
        realizations_per_eps=realizations,
        t_eval=_validate_times(data["t_eval"], T),
        T=T,
        f0=parse_initial_law(data.get("f0")),
        g0=parse_background_law(data.get("g0", {"kind": "maxwellian", "sigma": 1.0})),
        bins_per_axis=_positive_int(data.get("bins_per_axis", 20), "bins_per_axis"),
        v_max=_positive_float(data.get("v_max", 6.0), "v_max"),
        seed=_non_negative_int(data.get("seed", 0), "seed"),
        workers=_positive_int(data.get("workers", 1), "workers"),
        reference_factor=reference_factor,
        bootstrap_resamples=_positive_int(data.get("bootstrap_resamples", 200), "bootstrap_resamples"),
        good_params=_validate_good_params(data.get("good_params")),
        loss_only_check=bool(data.get("loss_only_check", True)),
        plots=bool(data.get("plots", True)),
        j_max=_non_negative_int(data.get("j_max", 24), "j_max"),
        n_time_steps=_positive_int(data.get("n_time_steps", 64), "n_time_steps"),
        max_retries=_non_negative_int(data.get("max_retries", 3), "max_retries"),
        raw=dict(data),
    )
    sigma = getattr(config.g0, "sigma", None)
    if sigma is not None and config.v_max < 4.0 * sigma:
        raise ConfigError(f"v_max={config.v_max} must cover at least 4 sigma of g0 (sigma={sigma})")
    return config


def apply_environment(config: ExperimentConfig, environ: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """RK_SEED and RK_WORKERS override the file values."""
    env = os.environ if environ is None else environ
    seed = env.get("RK_SEED")
    workers = env.get("RK_WORKERS")
    try:
        return config.with_overrides(
            seed=int(seed) if seed not in (None, "") else None,
            workers=int(workers) if workers not in (None, "") else None,
        )
    except ValueError as e:
        raise ConfigError(f"Invalid RK_SEED/RK_WORKERS environment value: {e}") from e


def load_config(path: Union[str, Path], environ: Optional[Dict[str, str]] = None) -> ExperimentConfig:
    """
    Load, validate and apply environment overrides.

    Args:
        path: JSON configuration file
        environ: Environment mapping, os.environ by default

    Returns:
        ExperimentConfig
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Configuration file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"Configuration file {path} is not valid JSON: {e}") from e
    config = apply_environment(config_from_dict(data), environ)
    logger.info("Loaded configuration %s: epsilons=%s, M=%d, seed=%d", path, list(config.epsilons), config.realizations_per_eps, config.seed)
    return config
