"""Particle advection through reconstructed flow, and what the misfit buys.

Drifters and hypothetical targets are advected with RK4 through the fused
surrogate field. Comparing predicted positions against GPS tracks gives a
mean positional error, and treating that error as Brownian spread converts
it into the compensating diffusion coefficient used by the belief density:
``D = S^2 / (4 T)`` for a window of length ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, OutOfDomainError
from .geometry import VectorField, sample_bilinear

__all__ = [
    "DrifterObservation",
    "Trajectory",
    "advect",
    "advect_piecewise",
    "position_error",
    "adaptive_diffusion",
]

ROLES = ("fitting", "local", "validation")
MAX_PLAUSIBLE_SPEED = 5.0  # m/s, GPS velocity sanity gate


@dataclass(frozen=True)
class DrifterObservation:
    """One timestamped GPS sample from a drifter."""

    drifter_id: str
    t: float
    position: np.ndarray
    velocity: np.ndarray
    role: str = "fitting"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigurationError(
                f"drifter role must be one of {ROLES}, got {self.role!r}"
            )
        p = np.asarray(self.position, dtype=float)
        v = np.asarray(self.velocity, dtype=float)
        if p.shape != (2,) or v.shape != (2,):
            raise ConfigurationError("observation position/velocity must be 2-vectors")
        speed = float(np.hypot(*v))
        if not speed < MAX_PLAUSIBLE_SPEED:
            raise ConfigurationError(
                f"observed speed {speed:g} m/s fails the {MAX_PLAUSIBLE_SPEED} m/s sanity gate"
            )
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "velocity", v)


@dataclass(frozen=True)
class Trajectory:
    """Sampled path of one advected particle.

    ``frozen`` is set when the particle reached land or the domain edge;
    from that sample on the position repeats the last valid one.
    """

    times: np.ndarray
    positions: np.ndarray
    frozen: bool = False
    frozen_at: float | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        p = np.asarray(self.positions, dtype=float)
        if p.shape != (len(t), 2):
            raise ConfigurationError("trajectory positions must be (n, 2)")
        if len(t) > 1 and not np.all(np.diff(t) > 0.0):
            raise ConfigurationError("trajectory timestamps must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", p)

    @property
    def final_position(self) -> np.ndarray:
        return self.positions[-1]


def _rk4_step(w: VectorField, z: np.ndarray, dt: float):
    """One RK4 step; returns None when any stage leaves the water."""
    grid = w.grid

    def vel(p):
        if not grid.contains(p) or not grid.is_sea_at(p):
            return None
        return sample_bilinear(w, p)

    k1 = vel(z)
    if k1 is None:
        return None
    k2 = vel(z + 0.5 * dt * k1)
    if k2 is None:
        return None
    k3 = vel(z + 0.5 * dt * k2)
    if k3 is None:
        return None
    k4 = vel(z + dt * k3)
    if k4 is None:
        return None
    z_new = z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not grid.contains(z_new) or not grid.is_sea_at(z_new):
        return None
    return z_new


def advect(
    z0: np.ndarray,
    w: VectorField,
    duration: float,
    dt: float,
    t0: float = 0.0,
) -> Trajectory:
    """RK4 advection of a single particle through a steady field.

    Output samples run from ``t0`` to ``t0 + duration`` at spacing ``dt``
    (last step shortened to land exactly on the end time). When any RK4
    stage or the step target leaves the water the particle freezes at its
    last valid position and the remaining samples repeat it.
    """
    if dt <= 0.0:
        raise ConfigurationError(f"advection dt must be positive, got {dt}")
    if duration < 0.0:
        raise ConfigurationError(f"advection duration must be >= 0, got {duration}")
    z = np.asarray(z0, dtype=float)
    if not w.grid.contains(z):
        raise OutOfDomainError(f"start position {z} is outside the grid")
    n_full = int(duration // dt)
    rest = duration - n_full * dt
    steps = [dt] * n_full + ([rest] if rest > 1e-12 else [])
    times = [t0]
    positions = [z.copy()]
    frozen = False
    frozen_at = None
    t = t0
    for h in steps:
        t += h
        if not frozen:
            z_new = _rk4_step(w, z, h)
            if z_new is None:
                frozen = True
                frozen_at = t - h
            else:
                z = z_new
        times.append(t)
        positions.append(z.copy())
    return Trajectory(np.array(times), np.array(positions), frozen, frozen_at)


def advect_piecewise(
    z0: np.ndarray,
    windows: list[tuple[float, float, VectorField]],
    dt: float,
) -> Trajectory:
    """Advection through a piecewise-steady flow sequence.

    ``windows`` is an ordered list of (t_start, t_end, field) with matching
    ends; the particle is integrated window by window and the samples are
    concatenated.
    """
    if not windows:
        raise ConfigurationError("need at least one flow window")
    for (t0a, t1a, _), (t0b, _, _) in zip(windows, windows[1:]):
        if not math.isclose(t1a, t0b, abs_tol=1e-9):
            raise ConfigurationError("flow windows must be contiguous in time")
    z = np.asarray(z0, dtype=float)
    all_t = []
    all_p = []
    frozen = False
    frozen_at = None
    for t_start, t_end, field_w in windows:
        if frozen:
            # once beached, later windows only repeat the frozen position
            n = max(int(round((t_end - t_start) / dt)), 1)
            times = np.linspace(t_start, t_end, n + 1)[1:]
            all_t.append(times)
            all_p.append(np.tile(z, (len(times), 1)))
            continue
        traj = advect(z, field_w, t_end - t_start, dt, t0=t_start)
        if all_t:
            all_t.append(traj.times[1:])
            all_p.append(traj.positions[1:])
        else:
            all_t.append(traj.times)
            all_p.append(traj.positions)
        z = traj.final_position
        if traj.frozen:
            frozen = True
            frozen_at = traj.frozen_at
    return Trajectory(np.concatenate(all_t), np.vstack(all_p), frozen, frozen_at)


def _as_pairs(reference, simulated):
    if isinstance(reference, dict) or isinstance(simulated, dict):
        if not (isinstance(reference, dict) and isinstance(simulated, dict)):
            raise ValueError("reference and simulated must both be dicts or both arrays")
        if set(reference) != set(simulated):
            missing = set(reference) ^ set(simulated)
            raise ValueError(f"drifter ids do not pair up: {sorted(missing)}")
        keys = sorted(reference)
        ref = np.array([reference[k] for k in keys], dtype=float)
        sim = np.array([simulated[k] for k in keys], dtype=float)
    else:
        ref = np.atleast_2d(np.asarray(reference, dtype=float))
        sim = np.atleast_2d(np.asarray(simulated, dtype=float))
        if ref.shape != sim.shape:
            raise ValueError(
                f"position sets have different shapes {ref.shape} vs {sim.shape}"
            )
    if len(ref) < 1:
        raise ValueError("need at least one position pair")
    return ref, sim


def position_error(reference, simulated, reduce: str = "mean") -> float:
    """Average distance between paired reference and simulated positions.

    Inputs are either two (n, 2) arrays in matching order or two dicts keyed
    by drifter id. ``reduce='mean'`` is the plain average of distances;
    ``reduce='rms'`` is the root-mean-square alternative.
    """
    ref, sim = _as_pairs(reference, simulated)
    d = np.hypot(ref[:, 0] - sim[:, 0], ref[:, 1] - sim[:, 1])
    if reduce == "mean":
        return float(d.mean())
    if reduce == "rms":
        return float(np.sqrt((d**2).mean()))
    raise ValueError(f"reduce must be 'mean' or 'rms', got {reduce!r}")


def adaptive_diffusion(error: float, window: float) -> float:
    """Diffusion coefficient compensating a positional error over one window.

    Interprets the error as two-dimensional Brownian spread accumulated over
    ``window`` seconds: D = error^2 / (4 window).
    """
    if error < 0.0:
        raise ValueError(f"positional error must be >= 0, got {error}")
    if window <= 0.0:
        raise ValueError(f"window length must be positive, got {window}")
    return error * error / (4.0 * window)
