"""Uniform cell-centered grids over a masked sea/land domain.

The grid is the shared substrate for every field in the package: flow
velocities, target-presence density, and the guidance potential all live on
the same Cartesian layout. Arrays are stored with shape ``(ny, nx)`` and
indexed ``[j, i]`` where ``i`` walks east and ``j`` walks north; the center
of cell ``(i, j)`` sits at ``origin + ((i + 0.5) h, (j + 0.5) h)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely

from .errors import ConfigurationError, OutOfDomainError

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "GeoProjection",
    "make_grid",
    "divergence",
    "sample_bilinear",
]


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform Cartesian grid with a boolean sea mask.

    ``sea`` is True where the cell is water. Identity-hashed on purpose:
    two grids compare equal only if they are the same object, which lets
    solver caches key on the grid directly.
    """

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int
    sea: np.ndarray

    def __post_init__(self):
        if self.h <= 0.0:
            raise ConfigurationError(f"cell size must be positive, got {self.h}")
        if self.nx < 4 or self.ny < 4:
            raise ConfigurationError(
                f"grid must be at least 4x4 cells, got {self.nx}x{self.ny}"
            )
        if self.sea.shape != (self.ny, self.nx):
            raise ConfigurationError(
                f"sea mask shape {self.sea.shape} does not match "
                f"(ny, nx)=({self.ny}, {self.nx})"
            )
        if self.sea.dtype != np.bool_:
            raise ConfigurationError("sea mask must be a boolean array")
        self.sea.setflags(write=False)

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @property
    def extent(self) -> tuple[float, float]:
        return (self.nx * self.h, self.ny * self.h)

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the covered rectangle."""
        x0, y0 = self.origin
        return (x0, y0, x0 + self.nx * self.h, y0 + self.ny * self.h)

    @property
    def n_sea(self) -> int:
        return int(self.sea.sum())

    def x_centers(self) -> np.ndarray:
        return self.origin[0] + (np.arange(self.nx) + 0.5) * self.h

    def y_centers(self) -> np.ndarray:
        return self.origin[1] + (np.arange(self.ny) + 0.5) * self.h

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid arrays (X, Y) of cell-center coordinates, shape (ny, nx)."""
        return np.meshgrid(self.x_centers(), self.y_centers())

    def contains(self, points: np.ndarray) -> np.ndarray:
        """True for points inside the bounding box (boundary inclusive)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        xmin, ymin, xmax, ymax = self.bbox
        ok = (
            (p[:, 0] >= xmin)
            & (p[:, 0] <= xmax)
            & (p[:, 1] >= ymin)
            & (p[:, 1] <= ymax)
        )
        return ok if np.asarray(points).ndim == 2 else bool(ok[0])

    def cell_of(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Cell indices (ix, iy) containing each point, clipped to the grid."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        ix = np.clip(((p[:, 0] - self.origin[0]) / self.h).astype(int), 0, self.nx - 1)
        iy = np.clip(((p[:, 1] - self.origin[1]) / self.h).astype(int), 0, self.ny - 1)
        if np.asarray(points).ndim == 1:
            return int(ix[0]), int(iy[0])
        return ix, iy

    def is_sea_at(self, points: np.ndarray) -> np.ndarray:
        """True where the containing cell is sea; False outside the box."""
        single = np.asarray(points).ndim == 1
        p = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.contains(p)
        ix, iy = self.cell_of(p)
        out = np.zeros(len(p), dtype=bool)
        out[inside] = self.sea[iy[inside], ix[inside]]
        return bool(out[0]) if single else out

    def compatible_with(self, other: "Grid") -> bool:
        return (
            self.origin == other.origin
            and self.h == other.h
            and self.nx == other.nx
            and self.ny == other.ny
            and np.array_equal(self.sea, other.sea)
        )


def _check_values(grid: Grid, values: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.shape != (grid.ny, grid.nx):
        raise ConfigurationError(
            f"{what} shape {arr.shape} does not match grid ({grid.ny}, {grid.nx})"
        )
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError(f"{what} contains non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """One float64 value per grid cell."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values, "scalar field"))
        self.values.setflags(write=False)


@dataclass(frozen=True, eq=False)
class VectorField:
    """One 2-vector per grid cell, stored as component arrays u (east), v (north).

    Land cells hold zero vectors by construction.
    """

    grid: Grid
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = _check_values(self.grid, self.u, "vector field u")
        v = _check_values(self.grid, self.v, "vector field v")
        land = ~self.grid.sea
        if land.any():
            # enforce the zero-on-land contract rather than trusting callers
            u = np.where(land, 0.0, u)
            v = np.where(land, 0.0, v)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)
        self.u.setflags(write=False)
        self.v.setflags(write=False)

    def speed(self) -> np.ndarray:
        return np.hypot(self.u, self.v)

    def max_speed(self) -> float:
        return float(self.speed().max())


def make_grid(
    extent: tuple[float, float],
    h: float,
    land_polygons: list[np.ndarray] | None = None,
    origin: tuple[float, float] = (0.0, 0.0),
) -> Grid:
    """Build a grid covering ``extent`` meters with spacing ``h``.

    ``land_polygons`` are closed rings of local-meter (x, y) vertices; a cell
    is land when its center falls inside any ring. All-land grids are
    rejected since no field could live on them.
    """
    if h <= 0.0:
        raise ConfigurationError(f"cell size must be positive, got {h}")
    nx = int(math.ceil(extent[0] / h - 1e-9))
    ny = int(math.ceil(extent[1] / h - 1e-9))
    if nx < 4 or ny < 4:
        raise ConfigurationError(
            f"extent {extent} with h={h} gives a {nx}x{ny} grid; need at least 4x4"
        )
    sea = np.ones((ny, nx), dtype=bool)
    if land_polygons:
        xs = origin[0] + (np.arange(nx) + 0.5) * h
        ys = origin[1] + (np.arange(ny) + 0.5) * h
        X, Y = np.meshgrid(xs, ys)
        for ring in land_polygons:
            ring = np.asarray(ring, dtype=float)
            if ring.ndim != 2 or ring.shape[1] != 2 or len(ring) < 3:
                raise ConfigurationError(
                    "land polygon must be an (n, 2) ring with n >= 3"
                )
            poly = shapely.Polygon(ring)
            if not poly.is_valid:
                raise ConfigurationError("land polygon ring is self-intersecting")
            inside = shapely.contains_xy(poly, X.ravel(), Y.ravel())
            sea &= ~inside.reshape(ny, nx)
    if not sea.any():
        raise ConfigurationError("grid is entirely land; no sea cells remain")
    return Grid(origin=tuple(map(float, origin)), h=float(h), nx=nx, ny=ny, sea=sea)


def divergence(w: VectorField) -> ScalarField:
    """Central-difference divergence on interior sea cells.

    A cell is interior when it and its four neighbors are all sea; the
    divergence is reported as zero everywhere else (masked and border
    cells have no full stencil).
    """
    g = w.grid
    h2 = 2.0 * g.h
    out = np.zeros((g.ny, g.nx))
    sea = g.sea
    interior = np.zeros_like(sea)
    interior[1:-1, 1:-1] = (
        sea[1:-1, 1:-1]
        & sea[1:-1, :-2]
        & sea[1:-1, 2:]
        & sea[:-2, 1:-1]
        & sea[2:, 1:-1]
    )
    dudx = np.zeros_like(out)
    dvdy = np.zeros_like(out)
    dudx[:, 1:-1] = (w.u[:, 2:] - w.u[:, :-2]) / h2
    dvdy[1:-1, :] = (w.v[2:, :] - w.v[:-2, :]) / h2
    out[interior] = dudx[interior] + dvdy[interior]
    return ScalarField(grid=g, values=out)


def _bilinear_weights(grid: Grid, points: np.ndarray):
    """Cell-pair indices and weights for clamped bilinear interpolation."""
    p = np.atleast_2d(np.asarray(points, dtype=float))
    xmin, ymin, xmax, ymax = grid.bbox
    eps = 1e-9 * grid.h
    bad = (
        (p[:, 0] < xmin - eps)
        | (p[:, 0] > xmax + eps)
        | (p[:, 1] < ymin - eps)
        | (p[:, 1] > ymax + eps)
    )
    if bad.any():
        k = int(np.argmax(bad))
        raise OutOfDomainError(
            f"point ({p[k, 0]:g}, {p[k, 1]:g}) is outside the grid bounding box "
            f"({xmin:g}, {ymin:g})..({xmax:g}, {ymax:g})"
        )
    gx = (p[:, 0] - grid.origin[0]) / grid.h - 0.5
    gy = (p[:, 1] - grid.origin[1]) / grid.h - 0.5
    i0 = np.clip(np.floor(gx).astype(int), 0, grid.nx - 2)
    j0 = np.clip(np.floor(gy).astype(int), 0, grid.ny - 2)
    # clamping the fraction gives constant extrapolation inside the half-cell
    # margin between the outermost cell centers and the box edge
    tx = np.clip(gx - i0, 0.0, 1.0)
    ty = np.clip(gy - j0, 0.0, 1.0)
    return i0, j0, tx, ty


def _bilinear_apply(arr: np.ndarray, i0, j0, tx, ty) -> np.ndarray:
    w00 = (1.0 - tx) * (1.0 - ty)
    w10 = tx * (1.0 - ty)
    w01 = (1.0 - tx) * ty
    w11 = tx * ty
    return (
        w00 * arr[j0, i0]
        + w10 * arr[j0, i0 + 1]
        + w01 * arr[j0 + 1, i0]
        + w11 * arr[j0 + 1, i0 + 1]
    )


def sample_bilinear(field: ScalarField | VectorField, points: np.ndarray):
    """Bilinear sample of a field at one point ``(2,)`` or a batch ``(n, 2)``.

    Exact for affine data within the convex hull of cell centers; clamped to
    constant in the half-cell margin along the box edge. Points outside the
    bounding box raise :class:`OutOfDomainError`. Land cells contribute their
    stored values, which for vector fields are zeros.
    """
    single = np.asarray(points).ndim == 1
    i0, j0, tx, ty = _bilinear_weights(field.grid, points)
    if isinstance(field, VectorField):
        u = _bilinear_apply(field.u, i0, j0, tx, ty)
        v = _bilinear_apply(field.v, i0, j0, tx, ty)
        out = np.stack([u, v], axis=-1)
        return out[0] if single else out
    vals = _bilinear_apply(field.values, i0, j0, tx, ty)
    return float(vals[0]) if single else vals


@dataclass(frozen=True)
class GeoProjection:
    """Local tangent-plane conversion between lon/lat and grid meters.

    A linear map scaled by the meridian and parallel arc lengths at the
    reference latitude. The forward and inverse maps are exact inverses of
    each other, and the scale factors are accurate to well under 0.5 m over
    a 10 km box at mid latitudes.
    """

    ref_lat: float
    ref_lon: float
    m_per_deg_lat: float = field(init=False)
    m_per_deg_lon: float = field(init=False)

    def __post_init__(self):
        if not (-90.0 < self.ref_lat < 90.0):
            raise ConfigurationError(f"reference latitude {self.ref_lat} out of range")
        phi = math.radians(self.ref_lat)
        # meridian/parallel arc length series for the WGS84 ellipsoid
        m_lat = (
            111132.92
            - 559.82 * math.cos(2 * phi)
            + 1.175 * math.cos(4 * phi)
            - 0.0023 * math.cos(6 * phi)
        )
        m_lon = (
            111412.84 * math.cos(phi)
            - 93.5 * math.cos(3 * phi)
            + 0.118 * math.cos(5 * phi)
        )
        object.__setattr__(self, "m_per_deg_lat", m_lat)
        object.__setattr__(self, "m_per_deg_lon", m_lon)

    def to_local(self, lon, lat):
        """(lon, lat) degrees -> (x, y) meters east/north of the reference."""
        lon = np.asarray(lon, dtype=float)
        lat = np.asarray(lat, dtype=float)
        x = (lon - self.ref_lon) * self.m_per_deg_lon
        y = (lat - self.ref_lat) * self.m_per_deg_lat
        return x, y

    def to_geo(self, x, y):
        """(x, y) meters -> (lon, lat) degrees."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        lon = self.ref_lon + x / self.m_per_deg_lon
        lat = self.ref_lat + y / self.m_per_deg_lat
        return lon, lat
