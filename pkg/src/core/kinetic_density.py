# flake8: noqa: E501
"""
Gridded densities over velocity space, optionally times a periodic spatial grid.

Values are densities at cell centres (not cell masses). A velocity-only density
is spatially homogeneous on U, whose volume is one, so its velocity marginal
is the array itself.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import special
from scipy.interpolate import RegularGridInterpolator

from core.laws import BackgroundLaw, Maxwellian, VelocityPointMass
from utils.errors import GridMismatchError

logger = logging.getLogger(__name__)

MASS_SLACK = 1e-9


class DensityMode(str, Enum):
    VELOCITY_ONLY = "VelocityOnly"
    PHASE_SPACE = "PhaseSpace"


@dataclass(frozen=True)
class VelocityGrid:
    """Cube [-v_max, v_max]^3 split into bins_per_axis^3 cells."""

    v_max: float = 6.0
    bins_per_axis: int = 40

    def __post_init__(self):
        if not self.v_max > 0 or self.bins_per_axis < 1:
            raise ValueError(f"Invalid velocity grid: v_max={self.v_max}, bins={self.bins_per_axis}")

    @property
    def h(self) -> float:
        return 2.0 * self.v_max / self.bins_per_axis

    @property
    def cell_volume(self) -> float:
        return self.h ** 3

    @property
    def n_cells(self) -> int:
        return self.bins_per_axis ** 3

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.bins_per_axis,) * 3

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(-self.v_max, self.v_max, self.bins_per_axis + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    def points(self) -> np.ndarray:
        """Cell centres, shape (n_cells, 3), C order."""
        c = self.centers
        gx, gy, gz = np.meshgrid(c, c, c, indexing="ij")
        return np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def bin_index(self, v) -> np.ndarray:
        """Flat cell index of each velocity, -1 outside the cube."""
        v = np.asarray(v, dtype=float).reshape(-1, 3)
        idx = np.floor((v + self.v_max) / self.h).astype(np.int64)
        # the upper face belongs to the last cell
        idx[v == self.v_max] = self.bins_per_axis - 1
        inside = np.all((idx >= 0) & (idx < self.bins_per_axis), axis=1)
        flat = np.ravel_multi_index(tuple(np.clip(idx, 0, self.bins_per_axis - 1).T), self.shape)
        return np.where(inside, flat, -1)

    def counts(self, v) -> Tuple[np.ndarray, int]:
        """Per-cell counts and the number of samples outside the cube."""
        idx = self.bin_index(v)
        inside = idx >= 0
        return np.bincount(idx[inside], minlength=self.n_cells), int((~inside).sum())

    def to_dict(self):
        return {"v_max": self.v_max, "bins_per_axis": self.bins_per_axis}


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic grid on U with cell centres at (i + 1/2) / bins."""

    bins_per_axis: int = 8

    @property
    def hx(self) -> float:
        return 1.0 / self.bins_per_axis


@dataclass(frozen=True, eq=False)
class KineticDensity:
    grid: VelocityGrid
    values: np.ndarray
    spatial: Optional[SpatialGrid] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = self.grid.shape if self.spatial is None else (self.spatial.bins_per_axis,) * 3 + self.grid.shape
        if values.shape != expected:
            raise GridMismatchError(f"Values of shape {values.shape} do not match grid shape {expected}")
        if np.any(values < 0.0):
            raise ValueError("Densities must be non-negative")
        object.__setattr__(self, "values", values)
        if self.mass() > 1.0 + MASS_SLACK:
            raise ValueError(f"Density mass {self.mass():.12g} exceeds 1")

    @property
    def mode(self) -> DensityMode:
        return DensityMode.VELOCITY_ONLY if self.spatial is None else DensityMode.PHASE_SPACE

    def velocity_marginal(self) -> np.ndarray:
        if self.spatial is None:
            return self.values
        return self.values.mean(axis=(0, 1, 2))

    def cell_masses(self) -> np.ndarray:
        """Velocity-marginal mass per cell, flat C order."""
        return (self.velocity_marginal() * self.grid.cell_volume).ravel()

    def mass(self) -> float:
        return float(self.cell_masses().sum())

    def with_values(self, values: np.ndarray) -> "KineticDensity":
        return KineticDensity(self.grid, values, self.spatial)

    def evaluate(self, v) -> np.ndarray:
        """Trilinear interpolation of the velocity marginal, zero outside the centre grid."""
        interp = RegularGridInterpolator(
            (self.grid.centers,) * 3, self.velocity_marginal(), method="linear", bounds_error=False, fill_value=0.0,
        )
        v = np.asarray(v, dtype=float)
        return interp(v.reshape(-1, 3)).reshape(v.shape[:-1])

    def __call__(self, v) -> np.ndarray:
        return self.evaluate(v)

    def to_phase_space(self, spatial: SpatialGrid) -> "KineticDensity":
        """Spatially uniform phase-space density with this velocity marginal."""
        if self.spatial is not None:
            raise ValueError("Density is already in phase-space mode")
        tiled = np.broadcast_to(self.values, (spatial.bins_per_axis,) * 3 + self.grid.shape).copy()
        return KineticDensity(self.grid, tiled, spatial)

    @classmethod
    def from_velocity_law(cls, law, grid: VelocityGrid, subsamples: int = 4) -> "KineticDensity":
        """
        Cell-averaged projection of a velocity law.

        Maxwellians are projected exactly through erf differences; other laws are
        averaged over subsamples^3 points per cell; point masses go to their cell.
        """
        if isinstance(law, VelocityPointMass):
            return cls.from_point_mass(law.v0, grid)
        if isinstance(law, Maxwellian):
            cdf = 0.5 * (1.0 + special.erf(grid.edges / (np.sqrt(2.0) * law.sigma)))
            p = np.diff(cdf)
            masses = p[:, None, None] * p[None, :, None] * p[None, None, :]
            return cls(grid, masses / grid.cell_volume)
        if isinstance(law, BackgroundLaw):
            offs = (np.arange(subsamples) + 0.5) / subsamples - 0.5
            c = grid.centers
            sub = (c[:, None] + grid.h * offs[None, :]).ravel()
            gx, gy, gz = np.meshgrid(sub, sub, sub, indexing="ij")
            vals = law.pdf(np.stack([gx, gy, gz], axis=-1))
            b, s = grid.bins_per_axis, subsamples
            avg = vals.reshape(b, s, b, s, b, s).mean(axis=(1, 3, 5))
            mass = float(avg.sum() * grid.cell_volume)
            if mass > 1.0:
                avg = avg / mass
            return cls(grid, avg)
        raise TypeError(f"Cannot project {type(law).__name__} onto a velocity grid")

    @classmethod
    def from_point_mass(cls, v0, grid: VelocityGrid) -> "KineticDensity":
        idx = int(grid.bin_index(np.asarray(v0, dtype=float))[0])
        if idx < 0:
            raise ValueError(f"Point mass at {v0} lies outside the velocity grid")
        values = np.zeros(grid.n_cells)
        values[idx] = 1.0 / grid.cell_volume
        return cls(grid, values.reshape(grid.shape))
