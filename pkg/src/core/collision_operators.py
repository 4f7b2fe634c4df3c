# flake8: noqa: E501
"""
Collision operators of the linear Boltzmann equation against a fixed background law g0.

Loss:  Q-[f](v) = lambda(v) f(v), lambda(v) = pi * integral of g0(w)|v - w| dw.
Gain:  Q+[f](v) = integral over nu of G(|v.nu|) * integral_0^inf b f(v - b nu) db,
       where G(d) is the integral of g0 over a plane at distance d from the origin.
Carleman form: Q+[f](v) = integral of k(v, v*) f(v*) dv*, k = G(d) / |v - v*|,
       d = |v.(v - v*)| / |v - v*|.
"""

import logging
from functools import lru_cache
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline
from tqdm import tqdm

from core.kinetic_density import KineticDensity, VelocityGrid
from core.laws import FOUR_PI, BackgroundLaw, VelocityPointMass
from utils.errors import QuadratureError

logger = logging.getLogger(__name__)

QUAD_RTOL = 1e-7
EXTRAPOLATION_FLAG = 1e-3

DensityLike = Union[KineticDensity, Callable[[np.ndarray], np.ndarray]]


def hemisphere_integral(w, n_theta: int = 64, n_phi: int = 128) -> float:
    """Quadrature of the integral of [w.nu]_+ over the unit sphere (equals pi |w|)."""
    nodes, weights = sphere_rule(n_theta, n_phi)
    return float(np.sum(weights * np.clip(nodes @ np.asarray(w, dtype=float), 0.0, None)))


def mean_relative_speed_kernel(r: float, s):
    """Mean of |v - s omega| over uniform directions omega, for |v| = r."""
    s = np.asarray(s, dtype=float)
    if r == 0.0:
        return s
    safe = np.where(s > 0, s, 1.0)
    return np.where(s < r, r + s * s / (3.0 * r), s + r * r / (3.0 * safe))


def mean_relative_speed(v, g0: BackgroundLaw) -> float:
    """Integral of g0(w)|v - w| dw by adaptive radial quadrature."""
    r = float(np.linalg.norm(v))
    cut = g0.cutoff()
    points = [p for p in g0.breakpoints() if 0.0 < p < cut]
    if 0.0 < r < cut:
        points.append(r)
    value, err = integrate.quad(
        lambda s: FOUR_PI * s * s * float(g0.radial_pdf(s)) * float(mean_relative_speed_kernel(r, s)),
        0.0, cut, points=sorted(points) or None, limit=400,
    )
    if err > QUAD_RTOL * max(abs(value), 1e-300):
        raise QuadratureError(f"Relative-speed quadrature at |v|={r:.6g} did not converge (err={err:.2e}, value={value:.6g})")
    # beyond the cutoff s >= r unless r itself is larger, in which case the s < r branch applies
    if r <= cut:
        tail = g0.tail_moment(1.0) + r * r / 3.0 * g0.tail_moment(-1.0)
    else:
        tail = r * g0.tail_moment(0.0) + g0.tail_moment(2.0) / (3.0 * r)
    return value + tail


def loss_rate(v, g0: BackgroundLaw) -> float:
    """
    Collision rate lambda(v) = pi * integral of g0(w)|v - w| dw.

    Uses the hemisphere identity: the integral of [w.nu]_+ over the sphere is pi|w|.

    Raises:
        QuadratureError: when the radial quadrature misses its tolerance
    """
    return float(np.pi * mean_relative_speed(v, g0))


class RateCache:
    """
    Tabulated lambda(|v|) for a radial background law.

    Built once with quad on a radial grid and interpolated by a cubic spline;
    speeds above the table are evaluated exactly.
    """

    def __init__(self, g0: BackgroundLaw, r_max: Optional[float] = None, n_nodes: int = 513):
        self.g0 = g0
        self.r_max = float(r_max) if r_max is not None else max(2.0 * g0.cutoff(), 16.0)
        self.radii = np.linspace(0.0, self.r_max, n_nodes)
        self.table = np.array([loss_rate(np.array([r, 0.0, 0.0]), g0) for r in self.radii])
        self._spline = CubicSpline(self.radii, self.table)
        self.beta = float(g0.beta())
        self.upper_bound_coeff = np.pi
        violations = self.table > self.upper_bound(self.radii) * (1.0 + 1e-9)
        if np.any(violations):
            logger.warning("Rate table exceeds pi(|v|+beta) at %d nodes", int(violations.sum()))
        logger.debug("Rate cache for %s: lambda(0)=%.6g beta=%.6g", g0.kind, self.table[0], self.beta)

    def upper_bound(self, speed) -> np.ndarray:
        """pi(|v| + beta)."""
        return self.upper_bound_coeff * (np.asarray(speed, dtype=float) + self.beta)

    def rates(self, speed) -> np.ndarray:
        speed = np.asarray(speed, dtype=float)
        out = np.asarray(self._spline(np.clip(speed, 0.0, self.r_max)), dtype=float)
        far = speed > self.r_max
        if np.any(far):
            flat = out.reshape(-1)
            for i in np.flatnonzero(far.reshape(-1)):
                flat[i] = loss_rate(np.array([speed.reshape(-1)[i], 0.0, 0.0]), self.g0)
        return np.maximum(out, 0.0)

    def __call__(self, v) -> np.ndarray:
        return self.rates(np.linalg.norm(np.asarray(v, dtype=float), axis=-1))

    def mean_rate(self, law) -> float:
        """Expectation of lambda(|v|) under a radial law or a velocity point mass."""
        if isinstance(law, VelocityPointMass):
            return float(self.rates(np.linalg.norm(law.v0)))
        value, _ = integrate.quad(
            lambda s: FOUR_PI * s * s * float(law.radial_pdf(s)) * float(self.rates(s)),
            0.0, law.cutoff(), limit=400,
        )
        return float(value)


@lru_cache(maxsize=8)
def rate_cache_for(g0: BackgroundLaw) -> RateCache:
    return RateCache(g0)


def sphere_rule(n_theta: int, n_phi: int, axis=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre in cos(theta) times the trapezoid rule in phi.

    Returns nodes (n_theta * n_phi, 3) and weights summing to 4 pi. With an axis the
    polar direction is aligned with it.
    """
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = (np.arange(n_phi) + 0.5) * 2.0 * np.pi / n_phi
    ct = np.repeat(x, n_phi)
    st = np.sqrt(1.0 - ct * ct)
    ph = np.tile(phi, n_theta)
    local = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=1)
    weights = np.repeat(wx, n_phi) * (2.0 * np.pi / n_phi)
    if axis is None:
        return local, weights
    e3, e1, e2 = orthonormal_frame(np.asarray(axis, dtype=float))
    return local[:, :1] * e1 + local[:, 1:2] * e2 + local[:, 2:3] * e3, weights


def orthonormal_frame(axis: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    norm = float(np.linalg.norm(axis))
    e3 = axis / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
    helper = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(e3, helper)
    e1 /= np.linalg.norm(e1)
    return e3, e1, np.cross(e3, e1)


def _perpendicular_pairs(normals: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    helper = np.where(np.abs(normals[:, :1]) < 0.9, np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 1.0, 0.0]]))
    e1 = np.cross(normals, helper)
    e1 /= np.linalg.norm(e1, axis=1)[:, None]
    return e1, np.cross(normals, e1)


def carleman_k(v, v_star, g0: BackgroundLaw) -> np.ndarray:
    """
    Carleman kernel k(v, v*) = G(d) / |v - v*| with G the plane integral of g0.

    Broadcasts over leading dimensions.

    Raises:
        ValueError: when v equals v_star
    """
    v = np.asarray(v, dtype=float)
    w = v - np.asarray(v_star, dtype=float)
    dist = np.linalg.norm(w, axis=-1)
    if np.any(dist == 0.0):
        raise ValueError("Carleman kernel is singular at v = v_star")
    d = np.abs(np.sum(v * w, axis=-1)) / dist
    return g0.plane_integral(d) / dist


def _density_and_extent(f: DensityLike, extent: Optional[float]) -> Tuple[Callable, float]:
    if isinstance(f, KineticDensity):
        return f.evaluate, f.grid.v_max
    return f, (12.0 if extent is None else float(extent))


def _ray_interval(origin: np.ndarray, directions: np.ndarray, half: float) -> Tuple[np.ndarray, np.ndarray]:
    """Parameter range [lo, hi] (clipped at 0) where origin + s*direction stays in [-half, half]^3."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - origin[None, :]) / directions
        t2 = (half - origin[None, :]) / directions
    lo_ax = np.where(directions == 0.0, np.where(np.abs(origin) <= half, -np.inf, np.inf)[None, :], np.minimum(t1, t2))
    hi_ax = np.where(directions == 0.0, np.where(np.abs(origin) <= half, np.inf, -np.inf)[None, :], np.maximum(t1, t2))
    lo = np.maximum(np.max(lo_ax, axis=1), 0.0)
    hi = np.min(hi_ax, axis=1)
    return lo, np.maximum(hi, lo)


def _composite_gauss(lo: np.ndarray, hi: np.ndarray, panels: int, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on each [lo_i, hi_i]; shapes (n, panels*order)."""
    x, w = np.polynomial.legendre.leggauss(order)
    width = (hi - lo) / panels
    starts = lo[:, None] + width[:, None] * np.arange(panels)[None, :]
    nodes = starts[:, :, None] + 0.5 * width[:, None, None] * (x[None, None, :] + 1.0)
    weights = np.broadcast_to(0.5 * width[:, None, None] * w[None, None, :], nodes.shape)
    n = lo.shape[0]
    return nodes.reshape(n, -1), weights.reshape(n, -1)


def plane_integral_numeric(g0: BackgroundLaw, v: np.ndarray, normals: np.ndarray, n_radial: int = 48, n_angle: int = 24) -> np.ndarray:
    """
    Integral of g0 over each plane through v with the given normals, by polar
    Gauss-Legendre quadrature centred at the foot point (v.nu) nu.
    """
    e1, e2 = _perpendicular_pairs(normals)
    foot = (normals @ v)[:, None] * normals
    reach = g0.cutoff()
    rho, w_rho = np.polynomial.legendre.leggauss(n_radial)
    rho = 0.5 * reach * (rho + 1.0)
    w_rho = 0.5 * reach * w_rho
    phi = (np.arange(n_angle) + 0.5) * 2.0 * np.pi / n_angle
    dirs = np.cos(phi)[:, None, None] * e1[None, :, :] + np.sin(phi)[:, None, None] * e2[None, :, :]
    pts = foot[None, None, :, :] + rho[:, None, None, None] * dirs[None, :, :, :]
    vals = g0.pdf(pts)
    weights = (w_rho * rho)[:, None] * (2.0 * np.pi / n_angle)
    return np.einsum("ra,ran->n", weights, vals)


def gain_sphere(
    f: DensityLike,
    v,
    g0: BackgroundLaw,
    n_theta: int = 24,
    n_phi: int = 48,
    ray_panels: int = 24,
    ray_order: int = 16,
    extent: Optional[float] = None,
) -> float:
    """
    Gain term Q+[f](v) in sphere form.

    For every collision parameter nu the background integral over the plane
    {v + w : w . nu = 0} is computed numerically from g0's pointwise density, and
    the pre-collisional velocities v' = v - b nu are integrated along the ray.

    Args:
        f: Gridded density (interpolated trilinearly, zero off the grid) or a callable density
        v: Velocity at which to evaluate
        g0: Background law
        n_theta, n_phi: Sphere rule size
        ray_panels, ray_order: Composite Gauss-Legendre rule along each ray
        extent: Half-width of the support cube for callable densities

    Returns:
        Q+[f](v)
    """
    v = np.asarray(v, dtype=float)
    density, half = _density_and_extent(f, extent)
    normals, w_nu = sphere_rule(n_theta, n_phi)
    lo, hi = _ray_interval(v, -normals, half)
    b, w_b = _composite_gauss(lo, hi, ray_panels, ray_order)
    pts = v[None, None, :] - b[:, :, None] * normals[:, None, :]
    f_vals = density(pts.reshape(-1, 3)).reshape(b.shape)
    ray = np.sum(w_b * b * f_vals, axis=1)
    plane = plane_integral_numeric(g0, v, normals)
    result = float(np.sum(w_nu * plane * ray))

    # mass that would sit beyond the cube, estimated from the last node before exit
    open_rays = hi > lo
    if result > 0.0 and np.any(open_rays):
        edge = f_vals[:, -1] * hi * (hi - lo) / max(ray_panels * ray_order, 1)
        lost = float(np.sum(w_nu * plane * np.where(open_rays, edge, 0.0)))
        if lost > EXTRAPOLATION_FLAG * result:
            logger.warning("Gain at v=%s: %.2e of the integral may lie beyond the grid", np.round(v, 4), lost / result)
    return result


def gain_carleman(
    f: DensityLike,
    v,
    g0: BackgroundLaw,
    n_theta: int = 32,
    n_phi: int = 64,
    ray_panels: int = 24,
    ray_order: int = 16,
    extent: Optional[float] = None,
) -> float:
    """
    Gain term as the integral of k(v, v*) f(v*) dv*, in spherical coordinates
    v* = v + rho omega whose polar axis is aligned with v.
    """
    v = np.asarray(v, dtype=float)
    density, half = _density_and_extent(f, extent)
    omegas, w_om = sphere_rule(n_theta, n_phi, axis=v if np.linalg.norm(v) > 0 else None)
    lo, hi = _ray_interval(v, omegas, half)
    lo = np.maximum(lo, 1e-12)
    hi = np.maximum(hi, lo)
    rho, w_rho = _composite_gauss(lo, hi, ray_panels, ray_order)
    v_star = v[None, None, :] + rho[:, :, None] * omegas[:, None, :]
    k = carleman_k(np.broadcast_to(v, v_star.shape), v_star, g0)
    f_vals = density(v_star.reshape(-1, 3)).reshape(rho.shape)
    return float(np.sum(w_om[:, None] * w_rho * rho * rho * k * f_vals))


class GainOperator:
    """
    Dense Carleman matrix W on a velocity grid: (Q+ f)(v_i) = sum_j W[i, j] f_j.

    Off-diagonal entries are k(v_i, v_j) h^3, with nearest neighbours averaged over
    sub-points of the source cell. The diagonal is chosen so that each column
    carries exactly lambda(v_j) of collision mass, making the discrete gain
    balance the discrete loss.
    """

    def __init__(self, grid: VelocityGrid, g0: BackgroundLaw, rates: Optional[RateCache] = None, dtype=np.float32, block: int = 256, near_subsamples: int = 3):
        self.grid = grid
        self.g0 = g0
        self.rates = rates or rate_cache_for(g0)
        self.dtype = dtype
        points = grid.points()
        n = grid.n_cells
        h3 = grid.cell_volume
        logger.info("Building %dx%d gain matrix (%s)", n, n, np.dtype(dtype).name)
        W = np.empty((n, n), dtype=dtype)
        for start in tqdm(range(0, n, block), desc="Gain matrix", disable=n < 4 * block):
            rows = slice(start, min(start + block, n))
            vi = points[rows][:, None, :]
            with np.errstate(divide="ignore", invalid="ignore"):
                w = vi - points[None, :, :]
                dist = np.linalg.norm(w, axis=-1)
                d = np.abs(np.sum(vi * w, axis=-1)) / dist
                k = g0.plane_integral(d) / dist
            k[~np.isfinite(k)] = 0.0
            W[rows] = (k * h3).astype(dtype)
        self._refine_neighbours(W, points, near_subsamples)
        lam = self.rates(points)
        np.fill_diagonal(W, 0.0)
        off = W.sum(axis=0, dtype=np.float64) * h3
        diag = lam / h3 - off / h3
        short = diag < 0.0
        if np.any(short):
            scale = np.where(short, lam / np.where(off > 0, off, 1.0), 1.0)
            W *= scale[None, :].astype(dtype)
            diag = np.where(short, 0.0, diag)
            logger.debug("Rescaled %d gain columns whose off-diagonal mass exceeded lambda", int(short.sum()))
        W[np.arange(n), np.arange(n)] = diag.astype(dtype)
        self.W = W
        self.loss = lam

    def _refine_neighbours(self, W: np.ndarray, points: np.ndarray, s: int) -> None:
        b = self.grid.bins_per_axis
        h = self.grid.h
        offs = (np.arange(s) + 0.5) / s - 0.5
        sub = np.stack(np.meshgrid(offs, offs, offs, indexing="ij"), axis=-1).reshape(-1, 3) * h
        idx = np.stack(np.unravel_index(np.arange(b ** 3), (b, b, b)), axis=1)
        for o in np.stack(np.meshgrid([-1, 0, 1], [-1, 0, 1], [-1, 0, 1], indexing="ij"), axis=-1).reshape(-1, 3):
            if not np.any(o):
                continue
            tgt = idx + o
            ok = np.all((tgt >= 0) & (tgt < b), axis=1)
            i = np.flatnonzero(ok)
            j = np.ravel_multi_index(tuple(tgt[ok].T), (b, b, b))
            vi = points[i][:, None, :]
            vs = points[j][:, None, :] + sub[None, :, :]
            k = carleman_k(np.broadcast_to(vi, vs.shape), vs, self.g0)
            W[i, j] = (k.mean(axis=1) * self.grid.cell_volume).astype(W.dtype)

    @property
    def n_cells(self) -> int:
        return self.grid.n_cells

    def apply(self, values) -> np.ndarray:
        """Q+ applied to flat cell values; accepts (n,) or (n, m)."""
        arr = np.asarray(values)
        return (self.W @ arr.astype(self.dtype, copy=False)).astype(np.float64)

    def collision_mass(self, values) -> float:
        """Integral of Q+ f, equal to the integral of lambda f by construction."""
        return float(np.sum(self.apply(values)) * self.grid.cell_volume)
