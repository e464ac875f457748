"""Surrogate sea-surface flow built from stream-function boundary control.

Two incompressible components are modeled and summed:

* a bounded component: Laplace's equation for the stream function on the
  masked grid, with Dirichlet values along a closed wall/open boundary
  polyline (walls carry constants, open segments carry cubic-spline
  profiles through control points), and
* an open component: the harmonic extension of a periodic spline profile
  given on a large circle enclosing the whole grid, evaluated at cell
  centers.

Velocities are the discrete curl of a single-valued stream array in both
cases, ``w = (d psi / d y, -d psi / d x)`` by central differences, which
makes the interior discrete divergence vanish to rounding and keeps the
fused sum divergence-free as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy import sparse
from scipy.interpolate import CubicSpline

from ._linalg import CachedFactorSolver
from .errors import ConfigurationError
from .geometry import Grid, VectorField

__all__ = [
    "BoundarySegment",
    "BoundarySpec",
    "VectorLayout",
    "OptimizationVector",
    "BoundaryProfile",
    "SurrogateFlow",
    "SurrogateModel",
    "boundary_profile",
    "solve_bounded_flow",
    "solve_open_flow",
    "fuse",
]

DEFAULT_CONTROL_LIMIT = 50.0  # m^2/s, stream-value box for fitting


@dataclass(frozen=True)
class BoundarySegment:
    """One run of the closed boundary polyline.

    ``points`` are the polyline vertices in ring order, sharing the junction
    vertex with the neighboring segments. Open segments carry ``n_control``
    spline control points spaced evenly in arc length, the two junction
    endpoints included; the endpoint values are pinned to the neighboring
    wall constants, so ``n_control - 2`` free values remain.
    """

    kind: str
    points: np.ndarray
    n_control: int = 4

    def __post_init__(self):
        if self.kind not in ("wall", "open"):
            raise ConfigurationError(f"segment kind must be wall or open, got {self.kind!r}")
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ConfigurationError("segment points must be an (n, 2) polyline, n >= 2")
        object.__setattr__(self, "points", pts)
        if self.kind == "open" and self.n_control < 2:
            raise ConfigurationError(
                f"open segment needs at least 2 control points, got {self.n_control}"
            )


@dataclass(frozen=True, eq=False)
class BoundarySpec:
    """Closed wall/open boundary of the bounded model plus the open circle.

    Segments must strictly alternate wall and open around the ring: the
    spline profile on an open segment is pinned to the wall constants on
    both sides, and two adjacent walls with different constants would mean
    a stream jump (a point flux) at the joint.
    """

    segments: tuple
    circle_center: tuple[float, float]
    circle_radius: float
    n_circle: int = 8

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if len(segs) < 2:
            raise ConfigurationError("boundary needs at least one wall and one open segment")
        kinds = [s.kind for s in segs]
        if "wall" not in kinds or "open" not in kinds:
            raise ConfigurationError("boundary needs at least one wall and one open segment")
        for a, b in zip(segs, segs[1:] + segs[:1]):
            if a.kind == b.kind:
                raise ConfigurationError(
                    "boundary segments must alternate wall and open around the ring"
                )
            if not np.allclose(a.points[-1], b.points[0], atol=1e-6):
                raise ConfigurationError(
                    "consecutive boundary segments must share their junction vertex"
                )
        if self.circle_radius <= 0.0:
            raise ConfigurationError("open-model circle radius must be positive")
        if self.n_circle < 4:
            raise ConfigurationError("open-model circle needs at least 4 control points")

        # ring vertex array (closure vertex dropped) and per-segment arc ranges
        ring_pts = [segs[0].points]
        for seg in segs[1:]:
            ring_pts.append(seg.points[1:])
        ring = np.vstack(ring_pts)[:-1]
        edge_len = np.hypot(*(np.diff(np.vstack([ring, ring[:1]]), axis=0).T))
        cum = np.concatenate([[0.0], np.cumsum(edge_len)])
        object.__setattr__(self, "_ring", ring)
        object.__setattr__(self, "_total_length", float(cum[-1]))
        s_ranges = []
        pos = 0
        for seg in segs:
            n_edges = len(seg.points) - 1
            s_ranges.append((float(cum[pos]), float(cum[pos + n_edges])))
            pos += n_edges
        object.__setattr__(self, "_segment_s", tuple(s_ranges))

    @property
    def ring(self) -> np.ndarray:
        """Ring vertices in order, closure vertex not repeated."""
        return self._ring

    @property
    def total_length(self) -> float:
        return self._total_length

    def segment_arc_range(self, k: int) -> tuple[float, float]:
        return self._segment_s[k]

    def wall_segments(self) -> list[int]:
        return [k for k, s in enumerate(self.segments) if s.kind == "wall"]

    def open_segments(self) -> list[int]:
        return [k for k, s in enumerate(self.segments) if s.kind == "open"]

    def control_arcs(self, k: int) -> np.ndarray:
        """Arc positions of segment k's control points, endpoints included."""
        s0, s1 = self._segment_s[k]
        return np.linspace(s0, s1, self.segments[k].n_control)

    def circle_angles(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.n_circle) / self.n_circle

    @property
    def layout(self) -> "VectorLayout":
        return VectorLayout(
            open_free=tuple(self.segments[k].n_control - 2 for k in self.open_segments()),
            n_walls=len(self.wall_segments()),
            n_circle=self.n_circle,
        )


@dataclass(frozen=True)
class VectorLayout:
    """Index bookkeeping for the flat control vector.

    Order: interior open-segment values (ring order), then the free wall
    constants (every wall after the first, whose constant is the zero
    gauge), then the circle values.
    """

    open_free: tuple
    n_walls: int
    n_circle: int

    @property
    def n_bounded(self) -> int:
        return sum(self.open_free) + self.n_walls - 1

    @property
    def size(self) -> int:
        return self.n_bounded + self.n_circle

    def split(self, b: np.ndarray):
        """-> (list of per-open-segment interior values, wall constants, circle values)."""
        b = np.asarray(b, dtype=float)
        if b.shape != (self.size,):
            raise ConfigurationError(
                f"control vector has length {b.shape}, layout expects ({self.size},)"
            )
        opens = []
        pos = 0
        for n in self.open_free:
            opens.append(b[pos : pos + n])
            pos += n
        walls = np.concatenate([[0.0], b[pos : pos + self.n_walls - 1]])
        pos += self.n_walls - 1
        return opens, walls, b[pos:]

    def split_bounded(self, b_part: np.ndarray):
        """Split just the bounded-model slice of the vector."""
        b_part = np.asarray(b_part, dtype=float)
        if b_part.shape != (self.n_bounded,):
            raise ConfigurationError(
                f"bounded part has length {b_part.shape}, layout expects ({self.n_bounded},)"
            )
        opens = []
        pos = 0
        for n in self.open_free:
            opens.append(b_part[pos : pos + n])
            pos += n
        walls = np.concatenate([[0.0], b_part[pos:]])
        return opens, walls

    def default_bounds(self, limit: float = DEFAULT_CONTROL_LIMIT):
        b = float(limit)
        return -b * np.ones(self.size), b * np.ones(self.size)


@dataclass(frozen=True, eq=False)
class OptimizationVector:
    """A control vector together with its box bounds."""

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    layout: VectorLayout

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        n = self.layout.size
        for name, arr in (("values", v), ("lower", lo), ("upper", hi)):
            if arr.shape != (n,):
                raise ConfigurationError(f"{name} must have shape ({n},), got {arr.shape}")
        if np.any(lo >= hi):
            raise ConfigurationError("lower bounds must be strictly below upper bounds")
        if np.any(v < lo) or np.any(v > hi):
            raise ConfigurationError("control vector leaves its bounds")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def zeros(cls, layout: VectorLayout, limit: float = DEFAULT_CONTROL_LIMIT):
        lo, hi = layout.default_bounds(limit)
        return cls(np.zeros(layout.size), lo, hi, layout)


class BoundaryProfile:
    """Stream values along the bounded ring and the open circle.

    ``polyline(s)`` evaluates at arc length ``s`` along the ring (walls are
    constant, open segments are natural cubic splines through their control
    values, pinned to the flanking wall constants). ``circle(theta)``
    evaluates the periodic spline on the open-model circle.
    """

    def __init__(self, spec: BoundarySpec, opens, walls, circle_values):
        self._spec = spec
        wall_ids = spec.wall_segments()
        open_ids = spec.open_segments()
        const_of = {k: walls[j] for j, k in enumerate(wall_ids)}
        self._wall_const = const_of
        self._open_splines = {}
        for vals, k in zip(opens, open_ids):
            prev_k = (k - 1) % len(spec.segments)
            next_k = (k + 1) % len(spec.segments)
            knots = spec.control_arcs(k)
            y = np.concatenate([[const_of[prev_k]], vals, [const_of[next_k]]])
            self._open_splines[k] = CubicSpline(knots, y, bc_type="natural")
        cv = np.asarray(circle_values, dtype=float)
        if cv.shape != (spec.n_circle,):
            raise ConfigurationError(
                f"circle values must have shape ({spec.n_circle},), got {cv.shape}"
            )
        ang = np.concatenate([spec.circle_angles(), [2.0 * np.pi]])
        self._circle_spline = CubicSpline(
            ang, np.concatenate([cv, cv[:1]]), bc_type="periodic"
        )

    def polyline(self, s) -> np.ndarray:
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), self._spec.total_length)
        out = np.empty_like(s)
        done = np.zeros(s.shape, dtype=bool)
        for k, seg in enumerate(self._spec.segments):
            s0, s1 = self._spec.segment_arc_range(k)
            sel = ~done & (s >= s0) & (s <= s1)
            if not sel.any():
                continue
            if seg.kind == "wall":
                out[sel] = self._wall_const[k]
            else:
                out[sel] = self._open_splines[k](s[sel])
            done |= sel
        out[~done] = self._wall_const[self._spec.wall_segments()[0]] if not done.all() else 0.0
        return out

    def circle(self, theta) -> np.ndarray:
        theta = np.mod(np.atleast_1d(np.asarray(theta, dtype=float)), 2.0 * np.pi)
        return self._circle_spline(theta)


def boundary_profile(vector, spec: BoundarySpec) -> BoundaryProfile:
    """Build the boundary stream profile for a full control vector."""
    values = vector.values if isinstance(vector, OptimizationVector) else np.asarray(vector, float)
    opens, walls, circle_values = spec.layout.split(values)
    return BoundaryProfile(spec, opens, walls, circle_values)


def _curl_of_padded_stream(psi_pad: np.ndarray, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    h2 = 2.0 * grid.h
    u = (psi_pad[2:, 1:-1] - psi_pad[:-2, 1:-1]) / h2
    v = -(psi_pad[1:-1, 2:] - psi_pad[1:-1, :-2]) / h2
    return u, v


class _BoundedLaplace:
    """5-point Laplace solver for the bounded stream function.

    Dirichlet values are imposed at cell faces toward land and the outer
    pad (ghost elimination), which keeps straight-wall cases second-order.
    For the velocity curl, every non-sea pad position adjacent to the sea
    is filled with the mean of its face-ghost extrapolations so a single
    stream array feeds the central differences.
    """

    def __init__(self, spec: BoundarySpec, grid: Grid):
        self.spec = spec
        self.grid = grid
        ny, nx = grid.ny, grid.nx
        sea = grid.sea

        ring_closed = np.vstack([spec.ring, spec.ring[:1]])
        ring_poly = shapely.Polygon(ring_closed)
        if not ring_poly.is_valid:
            raise ConfigurationError("boundary ring polyline is self-intersecting")
        X, Y = grid.cell_centers()
        covered = shapely.contains_xy(ring_poly.buffer(1e-6), X[sea], Y[sea])
        if not covered.all():
            n_out = int((~covered).sum())
            raise ConfigurationError(
                f"{n_out} sea cell centers lie outside the boundary ring; "
                "the polyline is inconsistent with the grid mask"
            )
        ring_line = shapely.LineString(ring_closed)

        idx = -np.ones((ny, nx), dtype=int)
        idx[sea] = np.arange(int(sea.sum()))
        n = int(sea.sum())
        self.n_unknowns = n
        self._idx = idx

        rows, cols, vals = [], [], []
        diag = 4.0 * np.ones(n)
        # Dirichlet faces: (sea-cell unknown, pad j, pad i, arc position)
        face_cell = []
        face_pad = []
        face_xy = []
        jj, ii = np.nonzero(sea)
        xc = grid.origin[0] + (ii + 0.5) * grid.h
        yc = grid.origin[1] + (jj + 0.5) * grid.h
        for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nj, ni = jj + dj, ii + di
            in_grid = (nj >= 0) & (nj < ny) & (ni >= 0) & (ni < nx)
            nb_sea = np.zeros(len(jj), dtype=bool)
            nb_sea[in_grid] = sea[nj[in_grid], ni[in_grid]]
            both = nb_sea
            rows.append(idx[jj[both], ii[both]])
            cols.append(idx[nj[both], ni[both]])
            vals.append(-np.ones(int(both.sum())))
            ghost = ~nb_sea
            diag[idx[jj[ghost], ii[ghost]]] += 1.0
            face_cell.append(idx[jj[ghost], ii[ghost]])
            face_pad.append(((nj[ghost] + 1) * (nx + 2) + (ni[ghost] + 1)))
            face_xy.append(
                np.column_stack(
                    [xc[ghost] + di * grid.h / 2.0, yc[ghost] + dj * grid.h / 2.0]
                )
            )
        rows.append(np.arange(n))
        cols.append(np.arange(n))
        vals.append(diag)
        matrix = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        self._solver = CachedFactorSolver(matrix)

        self._face_cell = np.concatenate(face_cell)
        self._face_pad = np.concatenate(face_pad)
        xy = np.vstack(face_xy)
        pts = shapely.points(xy[:, 0], xy[:, 1])
        self._face_arc = shapely.line_locate_point(ring_line, pts)
        self._pad_counts = np.bincount(self._face_pad, minlength=(ny + 2) * (nx + 2))

    def solve(self, profile: BoundaryProfile) -> tuple[np.ndarray, np.ndarray]:
        g = profile.polyline(self._face_arc)
        rhs = np.zeros(self.n_unknowns)
        np.add.at(rhs, self._face_cell, 2.0 * g)
        psi = self._solver.solve(rhs)

        ny, nx = self.grid.ny, self.grid.nx
        psi_pad = np.zeros((ny + 2) * (nx + 2))
        grid_pad = np.zeros((ny + 2, nx + 2))
        grid_pad[1:-1, 1:-1][self.grid.sea] = psi
        psi_pad[:] = grid_pad.ravel()
        ghost = 2.0 * g - psi[self._face_cell]
        sums = np.bincount(self._face_pad, weights=ghost, minlength=len(psi_pad))
        filled = self._pad_counts > 0
        psi_pad[filled] = sums[filled] / self._pad_counts[filled]
        return _curl_of_padded_stream(psi_pad.reshape(ny + 2, nx + 2), self.grid)


class _DiskHarmonic:
    """Harmonic extension of the circle profile, evaluated spectrally.

    The periodic boundary profile is expanded in Fourier harmonics and the
    interior value is the Poisson-kernel series sum of (r/R)^k terms. The
    basis over padded cell centers is precomputed once per (spec, grid).
    """

    N_HARMONICS = 96
    N_SAMPLES = 1024

    def __init__(self, spec: BoundarySpec, grid: Grid):
        self.spec = spec
        self.grid = grid
        ny, nx = grid.ny, grid.nx
        cx, cy = spec.circle_center
        R = spec.circle_radius
        xs = grid.origin[0] + (np.arange(nx + 2) - 0.5) * grid.h
        ys = grid.origin[1] + (np.arange(ny + 2) - 0.5) * grid.h
        X, Y = np.meshgrid(xs, ys)
        r = np.hypot(X - cx, Y - cy)
        if r.max() > R:
            raise ConfigurationError(
                f"open-model circle (R={R:g} m) must contain the grid plus a "
                f"half-cell margin; needed radius {r.max():g} m"
            )
        theta = np.arctan2(Y - cy, X - cx)
        rho = (r / R).ravel()
        th = theta.ravel()
        k = np.arange(1, self.N_HARMONICS + 1)
        rho_k = rho[:, None] ** k[None, :]
        self._basis_cos = rho_k * np.cos(th[:, None] * k[None, :])
        self._basis_sin = rho_k * np.sin(th[:, None] * k[None, :])
        self._pad_shape = (ny + 2, nx + 2)

    def solve(self, profile: BoundaryProfile) -> tuple[np.ndarray, np.ndarray]:
        M = self.N_SAMPLES
        samples = profile.circle(2.0 * np.pi * np.arange(M) / M)
        F = np.fft.rfft(samples)
        a0 = F[0].real / M
        ak = 2.0 * F[1 : self.N_HARMONICS + 1].real / M
        bk = -2.0 * F[1 : self.N_HARMONICS + 1].imag / M
        psi = a0 + self._basis_cos @ ak + self._basis_sin @ bk
        return _curl_of_padded_stream(psi.reshape(self._pad_shape), self.grid)


@dataclass(frozen=True, eq=False)
class SurrogateFlow:
    """Fused flow product for one quasi-steady window."""

    w_bounded: VectorField
    w_open: VectorField
    w_fused: VectorField
    vector: np.ndarray
    fit_error: float | None = None
    valid_from: float | None = None
    valid_until: float | None = None


class SurrogateModel:
    """Caches both solvers for repeated evaluations on one (spec, grid)."""

    def __init__(self, spec: BoundarySpec, grid: Grid):
        self.spec = spec
        self.grid = grid
        self.layout = spec.layout
        self._bounded = _BoundedLaplace(spec, grid)
        self._disk = _DiskHarmonic(spec, grid)

    def bounded_field(self, b_part: np.ndarray) -> VectorField:
        opens, walls = self.layout.split_bounded(b_part)
        profile = BoundaryProfile(self.spec, opens, walls, np.zeros(self.spec.n_circle))
        u, v = self._bounded.solve(profile)
        return VectorField(self.grid, u, v)

    def open_field(self, circle_values: np.ndarray) -> VectorField:
        cv = np.asarray(circle_values, dtype=float)
        if cv.shape != (self.spec.n_circle,):
            raise ConfigurationError(
                f"circle values must have shape ({self.spec.n_circle},), got {cv.shape}"
            )
        cv = cv - cv.mean()  # zero-mean gauge; velocity is shift-invariant anyway
        profile = BoundaryProfile(
            self.spec,
            [np.zeros(n) for n in self.layout.open_free],
            np.zeros(self.layout.n_walls),
            cv,
        )
        u, v = self._disk.solve(profile)
        return VectorField(self.grid, u, v)

    def evaluate(self, vector) -> SurrogateFlow:
        values = (
            vector.values if isinstance(vector, OptimizationVector) else np.asarray(vector, float)
        )
        if values.shape != (self.layout.size,):
            raise ConfigurationError(
                f"control vector has shape {values.shape}, expected ({self.layout.size},)"
            )
        w_b = self.bounded_field(values[: self.layout.n_bounded])
        w_o = self.open_field(values[self.layout.n_bounded :])
        return SurrogateFlow(
            w_bounded=w_b, w_open=w_o, w_fused=fuse(w_b, w_o), vector=values.copy()
        )


def solve_bounded_flow(b_part: np.ndarray, spec: BoundarySpec, grid: Grid) -> VectorField:
    """One-shot bounded solve; build a SurrogateModel for repeated calls."""
    return SurrogateModel(spec, grid).bounded_field(b_part)


def solve_open_flow(circle_values: np.ndarray, spec: BoundarySpec, grid: Grid) -> VectorField:
    """One-shot open-circle solve sampled onto the grid."""
    return SurrogateModel(spec, grid).open_field(circle_values)


def fuse(w_bounded: VectorField, w_open: VectorField) -> VectorField:
    """Sum the two incompressible components on a shared grid."""
    if w_bounded.grid is not w_open.grid and not w_bounded.grid.compatible_with(w_open.grid):
        raise ConfigurationError("cannot fuse fields on different grids")
    return VectorField(
        w_bounded.grid, w_bounded.u + w_open.u, w_bounded.v + w_open.v
    )
