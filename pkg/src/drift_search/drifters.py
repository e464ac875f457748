"""Synthetic drifter fleet for twin experiments.

Real beacon tracks are not always at hand, so missions can generate
their own: drifters are deployed in a disc, advected through a hidden
"truth" surrogate flow, and report position plus a noisy velocity at the
beacon cadence. The fitting pipeline only ever sees the observations,
never the truth vector, which makes recovery measurable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .flow import BoundarySpec, SurrogateModel
from .geometry import Grid, VectorField, sample_bilinear
from .lagrangian import DrifterObservation, Trajectory, advect

__all__ = [
    "SyntheticDrifters",
    "deploy_positions",
    "synthesize_drifters",
]

BEACON_CADENCE = 10.0
VELOCITY_NOISE_SIGMA = 0.02


@dataclass(frozen=True, eq=False)
class SyntheticDrifters:
    """Generated fleet: per-drifter truth tracks and noisy observations."""

    observations: list
    trajectories: dict
    roles: dict
    truth: VectorField


def deploy_positions(
    rng: np.random.Generator, grid: Grid, center, radius: float, n: int
) -> np.ndarray:
    """n uniform positions in the disc, rejection-sampled onto sea cells."""
    if radius <= 0.0:
        raise ConfigurationError(f"deployment radius must be positive, got {radius}")
    cx, cy = float(center[0]), float(center[1])
    out = np.empty((n, 2))
    for k in range(n):
        for _ in range(10_000):
            r = radius * np.sqrt(rng.random())
            phi = 2.0 * np.pi * rng.random()
            p = np.array([cx + r * np.cos(phi), cy + r * np.sin(phi)])
            if grid.contains(p) and grid.is_sea_at(p):
                out[k] = p
                break
        else:
            raise ConfigurationError(
                "could not place a drifter on sea within the deployment disc"
            )
    return out


def synthesize_drifters(
    spec: BoundarySpec,
    grid: Grid,
    truth_vector,
    *,
    deploy_center,
    deploy_radius: float,
    duration: float,
    n_fitting: int = 4,
    n_local: int = 5,
    n_validation: int = 3,
    cadence: float = BEACON_CADENCE,
    noise_sigma: float = VELOCITY_NOISE_SIGMA,
    seed: int = 0,
    t0: float = 0.0,
    model: SurrogateModel | None = None,
) -> SyntheticDrifters:
    """Deploy, advect, and sample a synthetic drifter fleet.

    Positions are exact samples of the truth trajectory; reported
    velocities are the truth flow at the sampled position plus isotropic
    Gaussian noise. A beached drifter keeps reporting its resting
    position with zero current underneath.
    """
    if model is None:
        model = SurrogateModel(spec, grid)
    truth = model.evaluate(truth_vector).w_fused
    n = n_fitting + n_local + n_validation
    if n <= 0:
        raise ConfigurationError("fleet needs at least one drifter")
    rng = np.random.default_rng(seed)
    starts = deploy_positions(rng, grid, deploy_center, deploy_radius, n)
    roles = (
        ["fitting"] * n_fitting + ["local"] * n_local + ["validation"] * n_validation
    )

    observations = []
    trajectories: dict[str, Trajectory] = {}
    role_of: dict[str, str] = {}
    for k in range(n):
        drifter_id = f"d{k + 1:02d}"
        role_of[drifter_id] = roles[k]
        traj = advect(starts[k], truth, duration, cadence, t0=t0)
        trajectories[drifter_id] = traj
        noise = rng.normal(0.0, noise_sigma, size=(len(traj.times), 2))
        for i, (t, p) in enumerate(zip(traj.times, traj.positions)):
            if traj.frozen and traj.frozen_at is not None and t > traj.frozen_at:
                v = np.zeros(2)
            else:
                v = np.asarray(sample_bilinear(truth, p), dtype=float)
            observations.append(
                DrifterObservation(
                    drifter_id=drifter_id,
                    t=float(t),
                    position=p,
                    velocity=v + noise[i],
                    role=roles[k],
                )
            )
    return SyntheticDrifters(
        observations=observations,
        trajectories=trajectories,
        roles=role_of,
        truth=truth,
    )
