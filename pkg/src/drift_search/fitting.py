"""Fit the surrogate flow control vector to drifter velocity observations.

A window of drifter samples pins the fused field at a handful of points;
global-best particle swarm search over the bounded control box minimizes the
root-mean-square velocity misfit. One fit per quasi-steady window yields the
flow sequence the rest of the pipeline consumes.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, FitError, SolverError
from .flow import BoundarySpec, SurrogateModel
from .geometry import Grid, sample_bilinear
from .lagrangian import DrifterObservation

__all__ = [
    "FitProblem",
    "FitResult",
    "velocity_rms_error",
    "pso_fit",
    "schedule_fit_windows",
]

log = logging.getLogger(__name__)

SWARM_SIZE = 32
INERTIA = 0.72
COGNITIVE = 1.49
SOCIAL = 1.49
VELOCITY_CLAMP_FRAC = 0.2


@dataclass
class FitProblem:
    """Observations plus search box for one quasi-steady window."""

    positions: np.ndarray
    velocities: np.ndarray
    spec: BoundarySpec
    grid: Grid
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    time_budget: float | None = None
    max_iters: int | None = None
    rng_seed: int = 0
    warm_start: np.ndarray | None = None
    window: tuple[float, float] | None = None

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.positions, dtype=float))
        v = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        if p.shape != v.shape or p.shape[1] != 2 or len(p) < 1:
            raise ConfigurationError(
                "need matching (n, 2) observation positions and velocities, n >= 1"
            )
        inside = self.grid.contains(p)
        if not np.all(inside):
            k = int(np.argmin(inside))
            raise ConfigurationError(
                f"observation at ({p[k, 0]:g}, {p[k, 1]:g}) lies outside the grid"
            )
        self.positions = p
        self.velocities = v
        lay = self.spec.layout
        lo, hi = lay.default_bounds()
        self.lower = lo if self.lower is None else np.asarray(self.lower, float)
        self.upper = hi if self.upper is None else np.asarray(self.upper, float)
        if self.lower.shape != (lay.size,) or self.upper.shape != (lay.size,):
            raise ConfigurationError(f"bounds must have shape ({lay.size},)")
        if np.any(self.lower >= self.upper):
            raise ConfigurationError("lower bounds must be strictly below upper bounds")
        if self.time_budget is None and self.max_iters is None:
            raise ConfigurationError("need a time budget or an iteration budget")
        if self.time_budget is not None and self.time_budget <= 0.0:
            raise ConfigurationError(f"time budget must be positive, got {self.time_budget}")
        if self.max_iters is not None and self.max_iters < 1:
            raise ConfigurationError(f"iteration budget must be >= 1, got {self.max_iters}")
        if self.warm_start is not None:
            ws = np.asarray(self.warm_start, dtype=float)
            if ws.shape != (lay.size,):
                raise ConfigurationError(f"warm start must have shape ({lay.size},)")
            self.warm_start = np.clip(ws, self.lower, self.upper)

    @property
    def n_observations(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class FitResult:
    """Best control vector found for one window."""

    best_vector: np.ndarray
    best_error: float
    error_history: np.ndarray
    evaluations: int
    iterations: int
    wall_time: float
    window: tuple[float, float] | None = None


def velocity_rms_error(b, problem: FitProblem, model: SurrogateModel | None = None) -> float:
    """Root-mean-square magnitude of the velocity misfit at the observations."""
    b = np.asarray(b, dtype=float)
    if np.any(b < problem.lower) or np.any(b > problem.upper):
        raise ConfigurationError("control vector leaves the fit bounds")
    if model is None:
        model = SurrogateModel(problem.spec, problem.grid)
    flow = model.evaluate(b)
    w_s = sample_bilinear(flow.w_fused, problem.positions)
    resid = problem.velocities - w_s
    return float(np.sqrt(np.mean(np.sum(resid * resid, axis=1))))


def pso_fit(
    problem: FitProblem,
    *,
    swarm_size: int = SWARM_SIZE,
    inertia: float = INERTIA,
    cognitive: float = COGNITIVE,
    social: float = SOCIAL,
    velocity_clamp_frac: float = VELOCITY_CLAMP_FRAC,
    model: SurrogateModel | None = None,
    objective=None,
) -> FitResult:
    """Global-best PSO over the bounded control box.

    Terminates on the wall-clock budget when one is set, otherwise after
    ``max_iters`` swarm iterations; with iteration-count termination the
    whole run is bit-reproducible for a fixed ``rng_seed``. Reflective bound
    handling: a particle crossing a face is mirrored back inside and that
    velocity component flips sign. Evaluations that raise a solver error
    score +inf; if every evaluation of the run fails, a fit error is raised.
    """
    start = time.perf_counter()
    if model is None:
        model = SurrogateModel(problem.spec, problem.grid)
    if objective is None:
        def objective(b):
            return velocity_rms_error(b, problem, model)

    lo, hi = problem.lower, problem.upper
    width = hi - lo
    vmax = velocity_clamp_frac * width
    dim = len(lo)
    rng = np.random.default_rng(problem.rng_seed)

    x = lo + rng.uniform(0.0, 1.0, size=(swarm_size, dim)) * width
    if problem.warm_start is not None:
        x[0] = problem.warm_start
    vel = rng.uniform(-1.0, 1.0, size=(swarm_size, dim)) * vmax

    def evaluate(xp):
        nonlocal evals, failures
        evals += 1
        try:
            return objective(xp)
        except SolverError:
            failures += 1
            return np.inf

    evals = 0
    failures = 0
    cost = np.array([evaluate(x[k]) for k in range(swarm_size)])
    pbest = x.copy()
    pbest_cost = cost.copy()
    g = int(np.argmin(pbest_cost))
    gbest = pbest[g].copy()
    gbest_cost = float(pbest_cost[g])
    history = [gbest_cost]

    iteration = 0
    while True:
        if problem.time_budget is not None:
            if time.perf_counter() - start >= problem.time_budget:
                break
            if problem.max_iters is not None and iteration >= problem.max_iters:
                break
        elif iteration >= problem.max_iters:
            break
        iteration += 1
        r1 = rng.uniform(0.0, 1.0, size=(swarm_size, dim))
        r2 = rng.uniform(0.0, 1.0, size=(swarm_size, dim))
        vel = (
            inertia * vel
            + cognitive * r1 * (pbest - x)
            + social * r2 * (gbest[None, :] - x)
        )
        np.clip(vel, -vmax, vmax, out=vel)
        x = x + vel
        # reflect at the box faces; flip the offending velocity component
        for _ in range(2):
            low_hit = x < lo
            high_hit = x > hi
            if not (low_hit.any() or high_hit.any()):
                break
            x = np.where(low_hit, 2.0 * lo - x, x)
            x = np.where(high_hit, 2.0 * hi - x, x)
            vel = np.where(low_hit | high_hit, -vel, vel)
        np.clip(x, lo, hi, out=x)
        cost = np.array([evaluate(x[k]) for k in range(swarm_size)])
        improved = cost < pbest_cost
        pbest[improved] = x[improved]
        pbest_cost[improved] = cost[improved]
        g = int(np.argmin(pbest_cost))
        if pbest_cost[g] < gbest_cost:
            gbest = pbest[g].copy()
            gbest_cost = float(pbest_cost[g])
        history.append(gbest_cost)

    if not np.isfinite(gbest_cost):
        raise FitError(
            f"no successful objective evaluation in {evals} attempts ({failures} solver failures)"
        )
    return FitResult(
        best_vector=gbest,
        best_error=gbest_cost,
        error_history=np.array(history),
        evaluations=evals,
        iterations=iteration,
        wall_time=time.perf_counter() - start,
        window=problem.window,
    )


def schedule_fit_windows(
    observations: list[DrifterObservation],
    window_length: float,
    *,
    spec: BoundarySpec,
    grid: Grid,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    time_budget: float | None = None,
    max_iters: int | None = None,
    base_seed: int = 0,
    window_start: float | None = None,
) -> list[FitProblem]:
    """Partition an observation stream into per-window fit problems.

    Each window keeps the latest sample per drifter; validation-role
    drifters never enter a fit problem. Samples that have drifted outside
    the grid box are dropped with a warning, and a window left empty is
    skipped with a warning (callers keep the previous flow across the gap).
    Per-window seeds derive from ``base_seed`` plus the window index.
    """
    if window_length <= 0.0:
        raise ConfigurationError(f"window length must be positive, got {window_length}")
    usable = [o for o in observations if o.role != "validation"]
    if not usable:
        return []
    t0 = window_start if window_start is not None else min(o.t for o in usable)
    t_max = max(o.t for o in usable)
    n_windows = int(np.floor((t_max - t0) / window_length)) + 1
    problems = []
    for k in range(n_windows):
        w_lo = t0 + k * window_length
        w_hi = w_lo + window_length
        latest: dict[str, DrifterObservation] = {}
        for o in usable:
            if w_lo <= o.t < w_hi:
                prev = latest.get(o.drifter_id)
                if prev is None or o.t >= prev.t:
                    latest[o.drifter_id] = o
        picked = [latest[i] for i in sorted(latest)]
        in_grid = [o for o in picked if grid.contains(o.position)]
        dropped = len(picked) - len(in_grid)
        if dropped:
            log.warning(
                "window %d: dropped %d observation(s) outside the grid", k, dropped
            )
        if not in_grid:
            log.warning(
                "window %d [%g, %g) has no usable observations; previous flow carries over",
                k,
                w_lo,
                w_hi,
            )
            continue
        problems.append(
            FitProblem(
                positions=np.array([o.position for o in in_grid]),
                velocities=np.array([o.velocity for o in in_grid]),
                spec=spec,
                grid=grid,
                lower=lower,
                upper=upper,
                time_budget=time_budget,
                max_iters=max_iters,
                rng_seed=base_seed + k,
                window=(w_lo, w_hi),
            )
        )
    return problems
