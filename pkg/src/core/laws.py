# flake8: noqa: E501
"""
Velocity and initial laws.

Background laws g0 are radially symmetric densities on R^3. Each law can be
evaluated pointwise, sampled, and integrated radially; the radial helpers are
what the admissibility check, the collision rates and the Carleman kernel use.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy import integrate, special

from utils.errors import AdmissibilityError, QuadratureError

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * np.pi


def uniform_directions(rng: np.random.Generator, n: int) -> np.ndarray:
    """n unit vectors uniform on the sphere."""
    g = rng.standard_normal((n, 3))
    norms = np.linalg.norm(g, axis=1)
    return g / norms[:, None]


class BackgroundLaw(ABC):
    """Radially symmetric probability density on velocity space."""

    kind: str = "abstract"

    @abstractmethod
    def radial_pdf(self, s) -> np.ndarray:
        """Density value g(v) at speed |v| = s."""

    @abstractmethod
    def sample_speed(self, rng: np.random.Generator, n: int, size_biased: bool = False) -> np.ndarray:
        """Speeds of n draws; with size_biased, speeds have density proportional to s * 4 pi s^2 g(s)."""

    @abstractmethod
    def cutoff(self) -> float:
        """Speed beyond which the table or the analytic tail takes over."""

    @abstractmethod
    def tail_moment(self, p: float) -> float:
        """Integral of g(v)|v|^p over |v| > cutoff (inf when divergent)."""

    @abstractmethod
    def plane_integral(self, d) -> np.ndarray:
        """Integral of g over a plane at distance d from the origin."""

    @abstractmethod
    def to_dict(self) -> Dict[str, Any]:
        """Config representation."""

    def tail_sup_weighted(self) -> float:
        """Supremum of g(v)(1+|v|^4) beyond the cutoff."""
        return 0.0

    def pdf(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return self.radial_pdf(np.linalg.norm(v, axis=-1))

    def sample(self, rng: np.random.Generator, n: int, size_biased: bool = False) -> np.ndarray:
        """n velocity draws, shape (n, 3)."""
        speeds = self.sample_speed(rng, n, size_biased=size_biased)
        return speeds[:, None] * uniform_directions(rng, n)

    def breakpoints(self) -> Tuple[float, ...]:
        return ()

    def moment(self, p: float) -> float:
        """
        Radial quadrature of the integral of g(v)|v|^p dv.

        Raises:
            QuadratureError: if quad's error estimate is above 1e-8 relative
        """
        cut = self.cutoff()
        value, err = integrate.quad(
            lambda s: FOUR_PI * s ** (2.0 + p) * float(self.radial_pdf(s)),
            0.0, cut, points=self.breakpoints() or None, limit=400,
        )
        if err > 1e-8 * max(abs(value), 1.0):
            raise QuadratureError(f"Moment {p} of {self.kind} did not converge (err={err:.2e})")
        return value + self.tail_moment(p)

    def mean_speed(self) -> float:
        return self.moment(1.0)

    def beta(self) -> float:
        """Integral of g(v)(1+|v|) dv."""
        return self.moment(0.0) + self.moment(1.0)

    def sup_weighted(self, n_grid: int = 4001) -> float:
        """Supremum of g(v)(1+|v|^4), scanned on a fine radial grid plus the analytic tail."""
        s = np.linspace(0.0, self.cutoff(), n_grid)
        inside = float(np.max(self.radial_pdf(s) * (1.0 + s ** 4)))
        return max(inside, self.tail_sup_weighted())


@dataclass(frozen=True)
class Maxwellian(BackgroundLaw):
    """Centred isotropic Gaussian with per-component standard deviation sigma."""

    sigma: float = 1.0
    kind: str = field(default="maxwellian", init=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"Maxwellian sigma must be positive, got {self.sigma}")

    def radial_pdf(self, s):
        s = np.asarray(s, dtype=float)
        return (2.0 * np.pi * self.sigma ** 2) ** -1.5 * np.exp(-0.5 * (s / self.sigma) ** 2)

    def sample(self, rng, n, size_biased=False):
        if size_biased:
            return super().sample(rng, n, size_biased=True)
        return self.sigma * rng.standard_normal((n, 3))

    def sample_speed(self, rng, n, size_biased=False):
        shape = 2.0 if size_biased else 1.5
        return self.sigma * np.sqrt(2.0 * rng.gamma(shape, 1.0, size=n))

    def cutoff(self):
        return 12.0 * self.sigma

    def tail_moment(self, p):
        # beyond 12 sigma the Gaussian tail is below 1e-28 for any polynomial weight used here
        return 0.0

    def plane_integral(self, d):
        d = np.asarray(d, dtype=float)
        return (2.0 * np.pi * self.sigma ** 2) ** -0.5 * np.exp(-0.5 * (d / self.sigma) ** 2)

    def closed_form_mean_abs(self, r) -> np.ndarray:
        """Mean of |v - w| over w ~ this law, at |v| = r."""
        r = np.asarray(r, dtype=float)
        sig = self.sigma
        safe = np.where(r > 0, r, 1.0)
        val = sig * np.sqrt(2.0 / np.pi) * np.exp(-0.5 * (r / sig) ** 2) + (r + sig ** 2 / safe) * special.erf(r / (np.sqrt(2.0) * sig))
        return np.where(r > 0, val, sig * np.sqrt(8.0 / np.pi))

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma}


@dataclass(frozen=True)
class UniformBall(BackgroundLaw):
    """Uniform density on the ball of the given radius."""

    radius: float = 1.0
    kind: str = field(default="uniform_ball", init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"UniformBall radius must be positive, got {self.radius}")

    @property
    def height(self) -> float:
        return 3.0 / (FOUR_PI * self.radius ** 3)

    def radial_pdf(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s <= self.radius, self.height, 0.0)

    def sample_speed(self, rng, n, size_biased=False):
        power = 0.25 if size_biased else 1.0 / 3.0
        return self.radius * rng.random(n) ** power

    def cutoff(self):
        return self.radius

    def tail_moment(self, p):
        return 0.0

    def plane_integral(self, d):
        d = np.asarray(d, dtype=float)
        return self.height * np.pi * np.clip(self.radius ** 2 - d ** 2, 0.0, None)

    def to_dict(self):
        return {"kind": self.kind, "radius": self.radius}


TAIL_KINDS = ("gaussian", "compact", "power")


@dataclass(frozen=True, eq=False)
class TabulatedRadial(BackgroundLaw):
    """
    Radial density given on a speed table, linearly interpolated.

    The table is normalized on construction. ``tail`` describes the decay beyond
    the last speed: {"kind": "compact"}, {"kind": "gaussian"} (negligible mass),
    or {"kind": "power", "exponent": a} meaning g(s) = g(s_max)(s/s_max)^-a.
    Without tail metadata the law can still be sampled and evaluated, but its
    moments cannot be certified.
    """

    speeds: Tuple[float, ...]
    values: Tuple[float, ...]
    tail: Optional[Dict[str, Any]] = None
    kind: str = field(default="tabulated_radial", init=False)

    def __post_init__(self):
        s = np.asarray(self.speeds, dtype=float)
        g = np.asarray(self.values, dtype=float)
        if s.ndim != 1 or s.shape != g.shape or s.size < 2:
            raise ValueError("Tabulated law needs matching 1-D speed/value tables with at least two nodes")
        if s[0] != 0.0 or np.any(np.diff(s) <= 0):
            raise ValueError("Tabulated speeds must start at 0 and increase strictly")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("Tabulated density values must be finite and non-negative")
        if self.tail is not None:
            kind = self.tail.get("kind")
            if kind not in TAIL_KINDS:
                raise ValueError(f"Unknown tail kind {kind!r}; expected one of {TAIL_KINDS}")
            if kind == "power" and not float(self.tail.get("exponent", 0.0)) > 3.0:
                raise ValueError("A power tail needs exponent > 3 to be normalizable")
        object.__setattr__(self, "_s", s)
        object.__setattr__(self, "_g", g)
        mass = self._raw_mass()
        if not mass > 0:
            raise ValueError("Tabulated density has zero mass")
        object.__setattr__(self, "_g", g / mass)

    @classmethod
    def from_function(cls, fn, s_max: float, n_nodes: int = 2001, tail: Optional[Dict[str, Any]] = None) -> "TabulatedRadial":
        s = np.linspace(0.0, s_max, n_nodes)
        return cls(tuple(s), tuple(np.asarray(fn(s), dtype=float)), tail)

    def _raw_mass(self) -> float:
        # exact for the piecewise-linear interpolant, so quadrature moments see mass 1
        a, b = self._s[:-1], self._s[1:]
        ga, slope = self._g[:-1], np.diff(self._g) / np.diff(self._s)
        cubes = (b ** 3 - a ** 3) / 3.0
        inner = float(FOUR_PI * np.sum(ga * cubes + slope * ((b ** 4 - a ** 4) / 4.0 - a * cubes)))
        return inner + self._power_tail(0.0, self._g[-1])

    def _power_tail(self, p: float, g_edge: float) -> float:
        if not self.tail or self.tail.get("kind") != "power":
            return 0.0
        a = float(self.tail["exponent"])
        if a <= 3.0 + p:
            return np.inf
        R = self._s[-1]
        return FOUR_PI * g_edge * R ** (3.0 + p) / (a - 3.0 - p)

    def radial_pdf(self, s):
        s = np.asarray(s, dtype=float)
        inside = np.interp(s, self._s, self._g, right=0.0)
        if self.tail and self.tail.get("kind") == "power":
            R = self._s[-1]
            a = float(self.tail["exponent"])
            with np.errstate(divide="ignore"):
                outer = self._g[-1] * (np.maximum(s, R) / R) ** -a
            return np.where(s > R, outer, inside)
        return inside

    def breakpoints(self):
        # quad accepts a limited number of breakpoints
        return tuple(self._s[1:-1:max(1, self._s.size // 50)])

    def cutoff(self):
        return float(self._s[-1])

    def tail_moment(self, p):
        if self.tail is None:
            raise AdmissibilityError("cannot certify moments: tabulated law has no tail decay metadata")
        return self._power_tail(p, self._g[-1])

    def tail_sup_weighted(self):
        if self.tail is None:
            raise AdmissibilityError("cannot certify moments: tabulated law has no tail decay metadata")
        if self.tail.get("kind") != "power":
            return 0.0
        a = float(self.tail["exponent"])
        if a < 4.0:
            return np.inf
        R = self._s[-1]
        # (s/R)^-a <= 1 and (s/R)^-a s^4 <= R^4 on s >= R when a >= 4
        return float(self._g[-1] * (1.0 + R ** 4))

    def _speed_table(self, size_biased: bool) -> Tuple[np.ndarray, np.ndarray, float]:
        weight = FOUR_PI * self._s ** (3.0 if size_biased else 2.0) * self._g
        cdf = integrate.cumulative_trapezoid(weight, self._s, initial=0.0)
        tail = self._power_tail(1.0 if size_biased else 0.0, self._g[-1])
        return cdf, weight, (tail if np.isfinite(tail) else 0.0)

    def sample_speed(self, rng, n, size_biased=False):
        cdf, _, tail = self._speed_table(size_biased)
        total = cdf[-1] + tail
        u = rng.random(n) * total
        out = np.interp(u, cdf, self._s)
        in_tail = u > cdf[-1]
        if np.any(in_tail):
            a = float(self.tail["exponent"]) - (4.0 if size_biased else 3.0)
            out[in_tail] = self._s[-1] * rng.random(int(in_tail.sum())) ** (-1.0 / a)
        return out

    def plane_integral(self, d):
        d = np.asarray(d, dtype=float)
        s, g = self._s, self._g
        # G(d) = 2 pi * integral_d^inf g(s) s ds
        upper = integrate.cumulative_trapezoid((2.0 * np.pi * s * g)[::-1], -s[::-1], initial=0.0)[::-1]
        tail = 0.0
        a = None
        if self.tail and self.tail.get("kind") == "power":
            a = float(self.tail["exponent"])
            tail = 2.0 * np.pi * g[-1] * s[-1] ** 2 / (a - 2.0)
        inside = np.interp(d, s, upper + tail)
        if a is not None:
            R = s[-1]
            outer = 2.0 * np.pi * g[-1] * R ** a * np.maximum(d, R) ** (2.0 - a) / (a - 2.0)
            return np.where(d > R, outer, inside)
        return np.where(d > s[-1], 0.0, inside)

    def to_dict(self):
        return {"kind": self.kind, "speeds": list(map(float, self.speeds)), "values": list(map(float, self.values)), "tail": self.tail}


@dataclass(frozen=True)
class VelocityPointMass:
    """Deterministic initial velocity."""

    v0: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    kind: str = field(default="point_mass", init=False)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.tile(np.asarray(self.v0, dtype=float), (n, 1))

    def pdf(self, v) -> np.ndarray:
        # weight 1 at the atom, used by the tree density
        v = np.asarray(v, dtype=float)
        return np.where(np.all(np.abs(v - np.asarray(self.v0)) <= 1e-12, axis=-1), 1.0, 0.0)

    def moment(self, p: float) -> float:
        return float(np.linalg.norm(self.v0)) ** p

    def to_dict(self):
        return {"kind": self.kind, "v0": list(self.v0)}


@dataclass(frozen=True)
class UniformSpatial:
    kind: str = field(default="uniform", init=False)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.random((n, 3))

    def pdf(self, x) -> np.ndarray:
        return np.ones(np.asarray(x, dtype=float).shape[:-1])

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class SpatialPointMass:
    x0: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    kind: str = field(default="point_mass", init=False)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.tile(np.asarray(self.x0, dtype=float), (n, 1))

    def pdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(np.all(np.abs(x - np.asarray(self.x0)) <= 1e-12, axis=-1), 1.0, 0.0)

    def to_dict(self):
        return {"kind": self.kind, "x0": list(self.x0)}


@dataclass(frozen=True)
class InitialLaw:
    """Product law f0(x, v) = spatial(x) * velocity(v) for the tagged particle."""

    spatial: Any = field(default_factory=UniformSpatial)
    velocity: Any = field(default_factory=VelocityPointMass)

    def sample(self, rng: np.random.Generator, n: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        x = self.spatial.sample(rng, n)
        v = self.velocity.sample(rng, n)
        return x, v

    def density(self, x, v) -> np.ndarray:
        return self.spatial.pdf(x) * self.velocity.pdf(v)

    def to_dict(self):
        return {"spatial": self.spatial.to_dict(), "velocity": self.velocity.to_dict()}
