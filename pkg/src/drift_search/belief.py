"""Probability density of the undetected target.

The belief is a per-cell probability density (units 1/m^2) over the sea
cells of a grid. Three operations evolve it:

  * transport under a flow field with isotropic diffusion,
  * multiplicative thinning where camera footprints have looked,
  * (re)initialization from a uniform deployment disc.

Transport uses a conservative finite-volume form: fluxes live on faces
between two sea cells, every other face is closed (no-flux), so total
mass changes only through sensing. The explicit update is written as

    m_c <- m_c * (1 - dt * drain_c) + dt * gain_c

with drain and gain assembled from non-negative face coefficients. With
dt below the admissible step (half the inverse of the largest per-cell
drain rate) the bracket stays >= 1/2, so non-negativity holds exactly in
floating point, not just in exact arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from .errors import ConfigurationError, StabilityError
from .geometry import Grid, ScalarField, VectorField

__all__ = [
    "ProbabilityField",
    "SensingRecord",
    "init_uniform_disc",
    "stable_step",
    "step_advect_diffuse",
    "advance",
    "apply_sensing",
    "cover_counts",
]

# largest tolerated mass mismatch between the cached total and a fresh sum
_MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SensingRecord:
    """One applied batch of camera footprints and the mass it removed."""

    footprints: tuple
    recall: float
    mass_removed: float
    cells_covered: int


@dataclass(frozen=True, eq=False)
class ProbabilityField:
    """Immutable belief snapshot: density, cached mass, sensing history."""

    density: ScalarField
    sensing_log: tuple = ()
    total_mass: float = field(init=False)

    def __post_init__(self):
        m = self.density.values
        grid = self.density.grid
        if m.min() < 0.0:
            raise ConfigurationError(
                f"probability density must be non-negative, min is {m.min():.3e}"
            )
        land = ~grid.sea
        if land.any() and np.abs(m[land]).max() > 0.0:
            raise ConfigurationError("probability density must be zero on land cells")
        mass = float(m.sum() * grid.cell_area)
        if mass > 1.0 + _MASS_TOL:
            raise ConfigurationError(f"total probability mass {mass:.12f} exceeds 1")
        object.__setattr__(self, "total_mass", mass)

    @property
    def grid(self) -> Grid:
        return self.density.grid


def init_uniform_disc(center, radius: float, grid: Grid) -> ProbabilityField:
    """Uniform density over the sea cells whose centers fall in a disc.

    The nominal density is 1/(pi r^2); after restricting to cell centers
    the field is rescaled so the total mass is exactly one.
    """
    if radius <= 0.0:
        raise ConfigurationError(f"deployment radius must be positive, got {radius}")
    cx, cy = float(center[0]), float(center[1])
    X, Y = grid.cell_centers()
    inside = ((X - cx) ** 2 + (Y - cy) ** 2 <= radius * radius) & grid.sea
    n = int(inside.sum())
    if n == 0:
        raise ConfigurationError("deployment disc covers no sea cell centers")
    m = np.where(inside, 1.0 / (math.pi * radius * radius), 0.0)
    m /= m.sum() * grid.cell_area
    return ProbabilityField(ScalarField(grid, m))


def _face_coefficients(w: VectorField, diffusivity: float):
    """Non-negative outflow coefficients (1/s) on internal sea-sea faces.

    Returns (cxw, cxe, cys, cyn): for the vertical faces, cxw is the rate
    at which the west cell loses mass through the face and cxe the rate
    at which the east cell does; likewise south/north for horizontal
    faces. Advection contributes |u_n| on the donor side only, diffusion
    D/h on both sides. Faces touching land or the domain edge carry zero.
    """
    grid = w.grid
    h = grid.h
    sea = grid.sea
    open_x = sea[:, :-1] & sea[:, 1:]
    open_y = sea[:-1, :] & sea[1:, :]
    un = np.where(open_x, 0.5 * (w.u[:, :-1] + w.u[:, 1:]), 0.0)
    vn = np.where(open_y, 0.5 * (w.v[:-1, :] + w.v[1:, :]), 0.0)
    dx = np.where(open_x, diffusivity / h, 0.0)
    dy = np.where(open_y, diffusivity / h, 0.0)
    cxw = (np.maximum(un, 0.0) + dx) / h
    cxe = (np.maximum(-un, 0.0) + dx) / h
    cys = (np.maximum(vn, 0.0) + dy) / h
    cyn = (np.maximum(-vn, 0.0) + dy) / h
    return cxw, cxe, cys, cyn


def _drain_rate(w: VectorField, diffusivity: float) -> np.ndarray:
    cxw, cxe, cys, cyn = _face_coefficients(w, diffusivity)
    drain = np.zeros((w.grid.ny, w.grid.nx))
    drain[:, :-1] += cxw
    drain[:, 1:] += cxe
    drain[:-1, :] += cys
    drain[1:, :] += cyn
    return drain


def stable_step(w: VectorField, diffusivity: float) -> float:
    """Largest admissible explicit step for the given flow and diffusivity.

    Half the inverse of the worst per-cell drain rate, so no cell can
    lose more than half its mass in one step. Infinite when both the
    flow and the diffusivity vanish.
    """
    if diffusivity < 0.0:
        raise ConfigurationError(f"diffusivity must be non-negative, got {diffusivity}")
    worst = float(_drain_rate(w, diffusivity).max())
    if worst == 0.0:
        return math.inf
    return 0.5 / worst


def step_advect_diffuse(
    field: ProbabilityField, w: VectorField, diffusivity: float, dt: float
) -> ProbabilityField:
    """One explicit upwind advection + 5-point diffusion step.

    Conservative: mass moves only across faces between two sea cells,
    nothing crosses land or the domain boundary.
    """
    if diffusivity < 0.0:
        raise ConfigurationError(f"diffusivity must be non-negative, got {diffusivity}")
    if dt <= 0.0:
        raise ConfigurationError(f"time step must be positive, got {dt}")
    grid = field.grid
    if w.grid is not grid and not w.grid.compatible_with(grid):
        raise ConfigurationError("flow field grid does not match the belief grid")

    cxw, cxe, cys, cyn = _face_coefficients(w, diffusivity)
    drain = np.zeros((grid.ny, grid.nx))
    drain[:, :-1] += cxw
    drain[:, 1:] += cxe
    drain[:-1, :] += cys
    drain[1:, :] += cyn

    worst = float(drain.max())
    if worst > 0.0 and dt > 0.5 / worst * (1.0 + 1e-12):
        raise StabilityError(dt, 0.5 / worst)

    m = field.density.values
    gain = np.zeros_like(m)
    gain[:, 1:] += cxw * m[:, :-1]
    gain[:, :-1] += cxe * m[:, 1:]
    gain[1:, :] += cys * m[:-1, :]
    gain[:-1, :] += cyn * m[1:, :]

    m_new = m * (1.0 - dt * drain) + dt * gain
    return ProbabilityField(ScalarField(grid, m_new), field.sensing_log)


def advance(
    field: ProbabilityField,
    w: VectorField,
    diffusivity: float,
    duration: float,
    max_dt: float | None = None,
) -> ProbabilityField:
    """Advance the belief by ``duration`` seconds in equal admissible steps."""
    if duration < 0.0:
        raise ConfigurationError(f"duration must be non-negative, got {duration}")
    if duration == 0.0:
        return field
    limit = stable_step(w, diffusivity)
    if max_dt is not None:
        limit = min(limit, max_dt)
    if not math.isfinite(limit):
        limit = duration
    n = max(1, int(math.ceil(duration / limit - 1e-12)))
    dt = duration / n
    for _ in range(n):
        field = step_advect_diffuse(field, w, diffusivity, dt)
    return field


def cover_counts(grid: Grid, footprints) -> np.ndarray:
    """How many footprints contain each sea cell's center.

    Footprints are convex quadrilaterals given as (n, 2) corner arrays or
    shapely polygons. Land cells always count zero.
    """
    counts = np.zeros((grid.ny, grid.nx), dtype=np.int64)
    xc = grid.x_centers()
    yc = grid.y_centers()
    for fp in footprints:
        poly = fp if isinstance(fp, shapely.Polygon) else shapely.Polygon(np.asarray(fp, float))
        xmin, ymin, xmax, ymax = poly.bounds
        isel = np.nonzero((xc >= xmin) & (xc <= xmax))[0]
        jsel = np.nonzero((yc >= ymin) & (yc <= ymax))[0]
        if isel.size == 0 or jsel.size == 0:
            continue
        X, Y = np.meshgrid(xc[isel], yc[jsel])
        inside = shapely.contains_xy(poly, X.ravel(), Y.ravel()).reshape(X.shape)
        counts[np.ix_(jsel, isel)] += inside
    counts[~grid.sea] = 0
    return counts


def apply_sensing(field: ProbabilityField, footprints, recall: float) -> ProbabilityField:
    """Thin the density where footprints looked: each covered cell keeps
    a (1 - recall) factor per covering footprint. The removed mass is
    appended to the sensing log as search effort."""
    if not 0.0 <= recall <= 1.0:
        raise ConfigurationError(f"recall must lie in [0, 1], got {recall}")
    grid = field.grid
    counts = cover_counts(grid, footprints)
    m = field.density.values
    m_new = m * (1.0 - recall) ** counts
    removed = float((m.sum() - m_new.sum()) * grid.cell_area)
    record = SensingRecord(
        footprints=tuple(np.array(fp, dtype=float) for fp in footprints),
        recall=recall,
        mass_removed=removed,
        cells_covered=int((counts > 0).sum()),
    )
    return ProbabilityField(ScalarField(grid, m_new), field.sensing_log + (record,))
