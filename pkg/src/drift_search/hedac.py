"""Potential-field guidance for the UAV team.

The belief density m is diffused into a smooth attraction potential u by
a screened Poisson equation,

    alpha * lap(u) - u + m = 0

with zero-gradient (reflecting) boundaries at land and the domain edge.
Each UAV climbs the normalized gradient of u at constant speed with a
saturated yaw rate, which spreads the team over the probability mass and
keeps refocusing it as sensing removes density.

The screening length sqrt(alpha) sets how far a probability blob is felt;
the default alpha spreads attraction over roughly 70 m of water per unit,
wide enough that a UAV several footprints away still feels it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from ._linalg import CachedFactorSolver
from .belief import ProbabilityField
from .errors import ConfigurationError, SolverError
from .geometry import Grid, ScalarField, sample_bilinear

__all__ = [
    "DEFAULT_ALPHA",
    "PotentialField",
    "UavState",
    "solve_potential",
    "guidance_direction",
    "uav_step",
]

DEFAULT_ALPHA = 5000.0

# gradient norms below this are treated as flat (keep current heading)
_DEGENERATE_GRADIENT = 1e-12

_solvers: dict = {}


@dataclass(frozen=True, eq=False)
class PotentialField:
    """Solved attraction potential with presampled gradient components."""

    u: ScalarField
    alpha: float
    residual: float
    grad_x: ScalarField
    grad_y: ScalarField

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass(frozen=True)
class UavState:
    """Kinematic state of one fixed-wing search aircraft."""

    uav_id: str
    position: tuple[float, float]
    heading: float
    speed: float = 8.0
    max_yaw_rate: float = 0.5
    battery_s: float = math.inf

    def __post_init__(self):
        if self.speed <= 0.0:
            raise ConfigurationError(f"speed must be positive, got {self.speed}")
        if self.max_yaw_rate <= 0.0:
            raise ConfigurationError(
                f"max yaw rate must be positive, got {self.max_yaw_rate}"
            )
        x, y = self.position
        object.__setattr__(self, "position", (float(x), float(y)))
        object.__setattr__(self, "heading", float(self.heading))


def _system_matrix(grid: Grid, alpha: float) -> sparse.coo_matrix:
    """Screened-Poisson operator over sea cells, reflecting at closed faces.

    Row c reads (1 + alpha*n_c/h^2) u_c - (alpha/h^2) sum(u_nb) = m_c with
    n_c the number of adjacent sea cells; mirrored ghost values cancel the
    missing neighbors, which is the discrete zero-flux condition.
    """
    ny, nx = grid.ny, grid.nx
    sea = grid.sea
    idx = -np.ones((ny, nx), dtype=np.int64)
    idx[sea] = np.arange(grid.n_sea)
    k = alpha / (grid.h * grid.h)

    rows, cols, vals = [], [], []
    diag = np.ones(grid.n_sea)
    for dj, di in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        src_j, src_i = np.nonzero(sea)
        nb_j, nb_i = src_j + dj, src_i + di
        ok = (nb_j >= 0) & (nb_j < ny) & (nb_i >= 0) & (nb_i < nx)
        ok[ok] &= sea[nb_j[ok], nb_i[ok]]
        diag[idx[src_j[ok], src_i[ok]]] += k
        rows.append(idx[src_j[ok], src_i[ok]])
        cols.append(idx[nb_j[ok], nb_i[ok]])
        vals.append(np.full(ok.sum(), -k))
    rows.append(np.arange(grid.n_sea))
    cols.append(np.arange(grid.n_sea))
    vals.append(diag)
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.n_sea, grid.n_sea),
    )


def _solver_for(grid: Grid, alpha: float) -> CachedFactorSolver:
    key = (grid, float(alpha))
    solver = _solvers.get(key)
    if solver is None:
        solver = CachedFactorSolver(_system_matrix(grid, alpha))
        _solvers[key] = solver
    return solver


def _masked_gradient(grid: Grid, u: np.ndarray):
    """Per-cell gradient of u over sea cells.

    Central differences where both neighbors are sea, one-sided where only
    one is, zero for isolated cells and on land. One-sided closure matches
    the reflecting boundary (the mirrored ghost makes the normal gradient
    vanish there, so falling back to the inside difference is consistent).
    """
    sea = grid.sea
    h = grid.h
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)

    has_w = np.zeros_like(sea)
    has_e = np.zeros_like(sea)
    has_w[:, 1:] = sea[:, 1:] & sea[:, :-1]
    has_e[:, :-1] = sea[:, :-1] & sea[:, 1:]
    u_w = np.zeros_like(u)
    u_e = np.zeros_like(u)
    u_w[:, 1:] = u[:, :-1]
    u_e[:, :-1] = u[:, 1:]
    both = has_w & has_e
    gx[both] = (u_e[both] - u_w[both]) / (2.0 * h)
    only_e = has_e & ~has_w
    gx[only_e] = (u_e[only_e] - u[only_e]) / h
    only_w = has_w & ~has_e
    gx[only_w] = (u[only_w] - u_w[only_w]) / h

    has_s = np.zeros_like(sea)
    has_n = np.zeros_like(sea)
    has_s[1:, :] = sea[1:, :] & sea[:-1, :]
    has_n[:-1, :] = sea[:-1, :] & sea[1:, :]
    u_s = np.zeros_like(u)
    u_n = np.zeros_like(u)
    u_s[1:, :] = u[:-1, :]
    u_n[:-1, :] = u[1:, :]
    both = has_s & has_n
    gy[both] = (u_n[both] - u_s[both]) / (2.0 * h)
    only_n = has_n & ~has_s
    gy[only_n] = (u_n[only_n] - u[only_n]) / h
    only_s = has_s & ~has_n
    gy[only_s] = (u[only_s] - u_s[only_s]) / h
    return gx, gy


def solve_potential(m, alpha: float = DEFAULT_ALPHA) -> PotentialField:
    """Solve the screened-Poisson attraction potential for a belief field.

    Accepts a ProbabilityField or a bare ScalarField. The factorized
    operator is cached per (grid, alpha), so per-tick solves cost one
    triangular pair. The discrete maximum principle (u between the
    extremes of m) is checked on every solve.
    """
    density = m.density if isinstance(m, ProbabilityField) else m
    if alpha <= 0.0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    grid = density.grid
    solver = _solver_for(grid, alpha)
    rhs = density.values[grid.sea]
    u_sea = solver.solve(rhs)

    lo, hi = float(rhs.min()), float(rhs.max())
    slack = 1e-9 * max(1.0, abs(lo), abs(hi))
    if u_sea.size and (u_sea.min() < lo - slack or u_sea.max() > hi + slack):
        raise SolverError(
            "potential violates the discrete maximum principle "
            f"(u in [{u_sea.min():.3e}, {u_sea.max():.3e}], "
            f"m in [{lo:.3e}, {hi:.3e}])"
        )

    u = np.zeros((grid.ny, grid.nx))
    u[grid.sea] = u_sea
    gx, gy = _masked_gradient(grid, u)
    return PotentialField(
        u=ScalarField(grid, u),
        alpha=float(alpha),
        residual=solver.last_residual,
        grad_x=ScalarField(grid, gx),
        grad_y=ScalarField(grid, gy),
    )


def guidance_direction(potential: PotentialField, position) -> tuple[np.ndarray, bool]:
    """Unit ascent direction of the potential at a point.

    Returns (direction, ok). When the sampled gradient is degenerate the
    direction is zero and ok is False; callers keep their current heading.
    """
    gx = float(sample_bilinear(potential.grad_x, position))
    gy = float(sample_bilinear(potential.grad_y, position))
    norm = math.hypot(gx, gy)
    if norm < _DEGENERATE_GRADIENT:
        return np.zeros(2), False
    return np.array([gx / norm, gy / norm]), True


def _wrap_angle(angle: float) -> float:
    """Map an angle to [-pi, pi)."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def uav_step(
    state: UavState,
    potential: PotentialField,
    dt: float,
    *,
    boundary_margin: float | None = None,
) -> UavState:
    """Advance one UAV by one control interval.

    The desired heading is the potential ascent direction, overridden by
    an inward push when the aircraft is within ``boundary_margin`` of the
    domain edge (default: one step length v*dt). Yaw rate saturates at
    the state's limit; speed never changes; position is clamped to the
    domain box as a last resort. Battery time counts down by dt.
    """
    if dt <= 0.0:
        raise ConfigurationError(f"control interval must be positive, got {dt}")
    margin = state.speed * dt if boundary_margin is None else boundary_margin
    grid = potential.grid
    xmin, ymin, xmax, ymax = grid.bbox
    x, y = state.position

    direction, ok = guidance_direction(potential, np.array([x, y], dtype=float))
    theta_des = math.atan2(direction[1], direction[0]) if ok else state.heading

    push = np.zeros(2)
    if x - xmin < margin:
        push[0] += 1.0
    if xmax - x < margin:
        push[0] -= 1.0
    if y - ymin < margin:
        push[1] += 1.0
    if ymax - y < margin:
        push[1] -= 1.0
    if push[0] != 0.0 or push[1] != 0.0:
        theta_des = math.atan2(push[1], push[0])

    omega = _wrap_angle(theta_des - state.heading) / dt
    omega = max(-state.max_yaw_rate, min(state.max_yaw_rate, omega))
    heading = _wrap_angle(state.heading + omega * dt)
    nx = x + state.speed * dt * math.cos(heading)
    ny = y + state.speed * dt * math.sin(heading)
    nx = min(max(nx, xmin), xmax)
    ny = min(max(ny, ymin), ymax)
    return replace(
        state,
        position=(nx, ny),
        heading=heading,
        battery_s=state.battery_s - dt,
    )
