"""The closed search loop: fit currents, drift the belief, steer, sense.

Timeline semantics, fixed here once for every caller:

  * Windows are [k*T, (k+1)*T). A window's observations are fitted at
    its closing boundary, so the fitted flow steers the NEXT window;
    the loop never looks ahead. Before the first fit completes the
    believed flow is zero.
  * At each closing boundary the validation drifters are re-advected
    across the just-finished window under the flow that was believed
    during it. The mean terminal error S becomes the compensating
    diffusivity D = S^2/(4T) for the following window; a configured D0
    covers the cold start.
  * Within a control tick: window bookkeeping, then image capture and
    sensing at the current poses, then the potential solve and UAV step,
    then belief transport to the next tick.

Everything downstream of the scenario seed is deterministic, so a rerun
with the same config reproduces the log byte for byte.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .belief import ProbabilityField, advance, apply_sensing, cover_counts, init_uniform_disc
from .config import MissionConfig
from .drifters import synthesize_drifters
from .errors import ConfigurationError, OutOfDomainError
from .fitting import FitResult, pso_fit, schedule_fit_windows
from .flow import SurrogateModel
from .geometry import VectorField
from .hedac import UavState, solve_potential, uav_step
from .io import fmt, read_drifter_csv, write_snapshot
from .lagrangian import adaptive_diffusion, advect
from .sensing import DetectionStreams, Target, capture

__all__ = [
    "MissionLog",
    "WindowRecord",
    "plus_pattern",
    "run_mission",
    "predict_targets",
    "metrics",
    "write_mission_log",
]

log = logging.getLogger(__name__)

MIN_SEPARATION_WARN = 50.0

METRICS_COLUMNS = (
    "t",
    "residual_mass",
    "s_estimate",
    "diffusivity",
    "window_index",
    "e_d_window",
    "detections_cum",
    "coverage_fraction",
)


@dataclass(frozen=True, eq=False)
class WindowRecord:
    """One completed fitting window and what it handed to the next one."""

    index: int
    t_start: float
    t_end: float
    fit_error: float
    evaluations: int
    s_estimate: float | None
    diffusivity_next: float
    best_vector: np.ndarray
    flow: VectorField


@dataclass(eq=False)
class MissionLog:
    """Everything a mission produced, in memory; see write_mission_log."""

    config: MissionConfig
    seed: int
    metrics_rows: list = field(default_factory=list)
    detections: list = field(default_factory=list)
    uav_rows: list = field(default_factory=list)
    drifter_rows: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    final_belief: ProbabilityField | None = None
    aborted: str | None = None


def plus_pattern(center, radius: float, count: int) -> list[Target]:
    """Four targets on the half-radius axis points; five adds the center."""
    if count not in (4, 5):
        raise ConfigurationError("the plus pattern supports 4 or 5 targets")
    cx, cy = float(center[0]), float(center[1])
    r = 0.5 * radius
    spots = [(cx + r, cy), (cx, cy + r), (cx - r, cy), (cx, cy - r)]
    if count == 5:
        spots.append((cx, cy))
    return [Target(f"t{i + 1}", p) for i, p in enumerate(spots)]


def _default_poses(config: MissionConfig):
    """Evenly spaced launch poses on the deployment circle, facing inward."""
    cx, cy = config.targets.center
    r = config.targets.radius
    poses = []
    for k in range(config.uavs.count):
        phi = 2.0 * math.pi * k / config.uavs.count
        x = cx + r * math.cos(phi)
        y = cy + r * math.sin(phi)
        heading = math.atan2(cy - y, cx - x)
        poses.append((x, y, heading))
    return poses


def _is_multiple(t: float, m: float) -> bool:
    if m <= 0.0:
        return False
    q = t / m
    return abs(q - round(q)) < 1e-9


def _validation_series(observations):
    """Per-drifter sorted sample arrays for the validation fleet."""
    series: dict[str, list] = {}
    for obs in observations:
        if obs.role == "validation":
            series.setdefault(obs.drifter_id, []).append(obs)
    out = {}
    for drifter_id, rows in series.items():
        rows.sort(key=lambda o: o.t)
        out[drifter_id] = (
            np.array([o.t for o in rows]),
            np.array([o.position for o in rows]),
        )
    return out


def _sample_at(times: np.ndarray, positions: np.ndarray, t: float, tol: float):
    i = int(np.argmin(np.abs(times - t)))
    if abs(times[i] - t) > tol:
        return None
    return positions[i]


def _estimate_s(validation, flow: VectorField, t0: float, t1: float, cadence: float):
    """Mean terminal advection error of the validation drifters over a window."""
    errors = []
    tol = 0.5 * cadence + 1e-9
    for drifter_id in sorted(validation):
        times, positions = validation[drifter_id]
        p0 = _sample_at(times, positions, t0, tol)
        p1 = _sample_at(times, positions, t1, tol)
        if p0 is None or p1 is None:
            continue
        try:
            traj = advect(p0, flow, t1 - t0, cadence)
        except OutOfDomainError:
            continue
        errors.append(float(np.hypot(*(traj.final_position - p1))))
    if not errors:
        return None
    return float(np.mean(errors))


def run_mission(config: MissionConfig, out_dir: Path | None = None) -> MissionLog:
    """Execute a scenario; on an internal error the partial log is still
    flushed to ``out_dir`` (when given) before the error propagates."""
    mission_log = MissionLog(config=config, seed=config.seed)
    try:
        _run(config, mission_log)
    except Exception as err:
        mission_log.aborted = f"{type(err).__name__}: {err}"
        if out_dir is not None:
            write_mission_log(mission_log, out_dir)
        raise
    if out_dir is not None:
        write_mission_log(mission_log, out_dir)
    return mission_log


def _run(config: MissionConfig, mission_log: MissionLog):
    grid = config.grid
    model = SurrogateModel(config.boundary, grid)
    dt = config.control_dt
    window = config.window

    truth = None
    if config.drifter_source == "synthetic":
        syn = config.synthetic
        fleet = synthesize_drifters(
            config.boundary,
            grid,
            syn.truth_vector,
            deploy_center=syn.deploy_center,
            deploy_radius=syn.deploy_radius,
            duration=config.duration,
            n_fitting=syn.n_fitting,
            n_local=syn.n_local,
            n_validation=syn.n_validation,
            cadence=syn.cadence,
            noise_sigma=syn.noise_sigma,
            seed=config.seed,
            model=model,
        )
        observations = fleet.observations
        truth = fleet.truth
        cadence = syn.cadence
        for drifter_id in sorted(fleet.trajectories):
            traj = fleet.trajectories[drifter_id]
            for t, p in zip(traj.times, traj.positions):
                frozen = traj.frozen and traj.frozen_at is not None and t > traj.frozen_at
                mission_log.drifter_rows.append(
                    (drifter_id, float(t), float(p[0]), float(p[1]), int(frozen))
                )
    else:
        observations, _ = read_drifter_csv(
            config.drifter_csv, config.projection, start=config.start
        )
        steps = sorted({round(b.t - a.t, 6) for a, b in zip(observations, observations[1:])
                        if b.drifter_id == a.drifter_id and b.t > a.t})
        cadence = float(steps[0]) if steps else 10.0
        for obs in sorted(observations, key=lambda o: (o.drifter_id, o.t)):
            mission_log.drifter_rows.append(
                (obs.drifter_id, float(obs.t), float(obs.position[0]), float(obs.position[1]), 0)
            )

    bound = abs(config.control_limit)
    size = config.boundary.layout.size
    problems = schedule_fit_windows(
        observations,
        window,
        spec=config.boundary,
        grid=grid,
        lower=np.full(size, -bound),
        upper=np.full(size, bound),
        time_budget=config.fit_budget_s,
        max_iters=config.fit_iterations,
        base_seed=config.seed,
        window_start=0.0,
    )
    by_window = {}
    for problem in problems:
        by_window[int(round(problem.window[0] / window))] = problem
    validation = _validation_series(observations)

    targets = plus_pattern(config.targets.center, config.targets.radius, config.targets.count)
    for target in targets:
        target.drifting = config.targets.drifting
    mission_log.targets = targets
    if config.targets.drifting and truth is None:
        raise ConfigurationError(
            "drifting targets need the synthetic truth flow; recorded-CSV "
            "missions support static targets only"
        )

    poses = config.uavs.start_poses or _default_poses(config)
    for x, y, _ in poses:
        if not grid.contains(np.array([x, y])):
            raise ConfigurationError(f"UAV start pose ({x:g}, {y:g}) is outside the grid")
    uav_states = [
        UavState(
            uav_id=f"u{k + 1}",
            position=(pose[0], pose[1]),
            heading=pose[2],
            speed=config.uavs.speed,
            max_yaw_rate=config.uavs.max_yaw_rate,
            battery_s=config.uavs.battery_s,
        )
        for k, pose in enumerate(poses)
    ]
    for state in uav_states:
        mission_log.uav_rows.append(
            (state.uav_id, 0.0, state.position[0], state.position[1], state.heading, 0.0)
        )

    streams = DetectionStreams(config.seed)
    belief = init_uniform_disc(config.belief_center, config.belief_radius, grid)
    zero_flow = VectorField(
        grid, np.zeros((grid.ny, grid.nx)), np.zeros((grid.ny, grid.nx))
    )
    flows_fitted: dict[int, VectorField] = {}
    current_flow = zero_flow
    current_fit: FitResult | None = None
    current_window = None
    warm = None
    diffusivity = config.d0
    s_last = None
    coverage = np.zeros((grid.ny, grid.nx), dtype=bool)
    detections_cum = 0

    def metrics_row(t):
        mission_log.metrics_rows.append(
            (
                float(t),
                belief.total_mass,
                s_last,
                diffusivity,
                None if current_window is None else current_window,
                None if current_fit is None else current_fit.best_error,
                detections_cum,
                float(coverage.sum()) / grid.n_sea,
            )
        )

    if config.snapshot_every > 0.0:
        mission_log.snapshots.append((0.0, belief.density))
    metrics_row(0.0)

    n_ticks = int(round(config.duration / dt))
    for k in range(n_ticks):
        t = k * dt

        if t > 0.0 and _is_multiple(t, window):
            j = int(round(t / window)) - 1
            believed = flows_fitted.get(j - 1, zero_flow) if j > 0 else zero_flow
            s_new = _estimate_s(validation, believed, t - window, t, cadence)
            if s_new is not None:
                s_last = s_new
                diffusivity = adaptive_diffusion(s_new, window)
            problem = by_window.get(j)
            if problem is not None:
                if warm is not None:
                    problem = replace(problem, warm_start=warm)
                result = pso_fit(problem, model=model)
                warm = result.best_vector
                flow_field = model.evaluate(result.best_vector).w_fused
                flows_fitted[j] = flow_field
                current_flow = flow_field
                current_fit = result
                current_window = j
                mission_log.windows.append(
                    WindowRecord(
                        index=j,
                        t_start=t - window,
                        t_end=t,
                        fit_error=result.best_error,
                        evaluations=result.evaluations,
                        s_estimate=s_new,
                        diffusivity_next=diffusivity,
                        best_vector=result.best_vector,
                        flow=flow_field,
                    )
                )

        active = t >= config.start_delay - 1e-9
        alive = [s for s in uav_states if s.battery_s > 0.0]
        if config.uavs.count > 0 and active and not alive:
            log.info("all aircraft exhausted their batteries at t=%g s", t)
            break

        if active and alive and _is_multiple(t, config.sensor.capture_interval):
            events, footprints = capture(alive, targets, config.sensor, t, streams)
            belief = apply_sensing(belief, footprints, config.sensor.recall)
            coverage |= cover_counts(grid, footprints) > 0
            for event in events:
                mission_log.detections.append(event)
                for target in targets:
                    if target.target_id == event.target_id:
                        target.events.append(event)
            detections_cum += len(events)

        if active and alive:
            potential = solve_potential(belief, config.alpha)
            stepped = []
            for state in uav_states:
                if state.battery_s > 0.0:
                    new_state = uav_step(state, potential, dt)
                    omega = (new_state.heading - state.heading + math.pi) % (
                        2.0 * math.pi
                    ) - math.pi
                    mission_log.uav_rows.append(
                        (
                            new_state.uav_id,
                            t + dt,
                            new_state.position[0],
                            new_state.position[1],
                            new_state.heading,
                            omega / dt,
                        )
                    )
                    stepped.append(new_state)
                else:
                    stepped.append(state)
            uav_states = stepped
            moving = [s for s in uav_states if s.battery_s > 0.0]
            for a in range(len(moving)):
                for b in range(a + 1, len(moving)):
                    dist = math.hypot(
                        moving[a].position[0] - moving[b].position[0],
                        moving[a].position[1] - moving[b].position[1],
                    )
                    if dist < MIN_SEPARATION_WARN:
                        log.warning(
                            "aircraft %s and %s closed to %.1f m at t=%g s",
                            moving[a].uav_id,
                            moving[b].uav_id,
                            dist,
                            t + dt,
                        )

        belief = advance(belief, current_flow, diffusivity, dt)

        if truth is not None:
            for target in targets:
                if target.drifting:
                    traj = advect(np.array(target.position), truth, dt, dt)
                    target.position = (
                        float(traj.final_position[0]),
                        float(traj.final_position[1]),
                    )

        if config.snapshot_every > 0.0 and _is_multiple(t + dt, config.snapshot_every):
            mission_log.snapshots.append((t + dt, belief.density))
        metrics_row(t + dt)

    mission_log.final_belief = belief


def predict_targets(config: MissionConfig, flow_windows, dt: float = 10.0) -> dict:
    """Advect the nominal target points through a piecewise flow sequence.

    ``flow_windows`` is a list of (t_start, t_end, VectorField) covering
    the prediction span, e.g. assembled from WindowRecord flows.
    """
    from .lagrangian import advect_piecewise

    targets = plus_pattern(config.targets.center, config.targets.radius, config.targets.count)
    out = {}
    for target in targets:
        out[target.target_id] = advect_piecewise(
            np.array(target.position), flow_windows, dt
        )
    return out


def metrics(mission_log: MissionLog) -> dict:
    """Summary numbers for a finished (or aborted) mission."""
    if not mission_log.metrics_rows:
        return {}
    first_seen: dict[str, float] = {}
    for event in mission_log.detections:
        first_seen.setdefault(event.target_id, event.t)
    latencies = {
        target.target_id: first_seen.get(target.target_id)
        for target in mission_log.targets
    }
    s_values = [row[2] for row in mission_log.metrics_rows if row[2] is not None]
    return {
        "residual_mass": [row[1] for row in mission_log.metrics_rows],
        "final_residual_mass": mission_log.metrics_rows[-1][1],
        "detection_latency": latencies,
        "n_detections": len(mission_log.detections),
        "mean_s": float(np.mean(s_values)) if s_values else None,
        "window_errors": [(w.index, w.fit_error) for w in mission_log.windows],
        "coverage_fraction": mission_log.metrics_rows[-1][7],
        "aborted": mission_log.aborted,
    }


def _write_csv(path: Path, header, rows):
    with Path(path).open("w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_mission_log(mission_log: MissionLog, out_dir: Path):
    """Persist a mission log as the stable directory layout.

    Floats are rendered with repr and all row orders are fixed, so two
    identical runs produce byte-identical directories.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    (out / "config.yaml").write_text(mission_log.config.raw_text)
    (out / "seed.txt").write_text(f"seed {mission_log.seed}\n")

    def opt(x):
        return "" if x is None else fmt(x)

    _write_csv(
        out / "metrics.csv",
        METRICS_COLUMNS,
        (
            (
                fmt(t),
                fmt(mass),
                opt(s),
                fmt(d),
                "" if widx is None else str(widx),
                opt(err),
                str(ndet),
                fmt(cov),
            )
            for t, mass, s, d, widx, err, ndet, cov in mission_log.metrics_rows
        ),
    )
    _write_csv(
        out / "detections.csv",
        ("uav_id", "target_id", "t", "x", "y"),
        (
            (e.uav_id, e.target_id, fmt(e.t), fmt(e.position[0]), fmt(e.position[1]))
            for e in mission_log.detections
        ),
    )
    _write_csv(
        out / "uav_tracks.csv",
        ("uav_id", "t", "x", "y", "theta", "omega"),
        (
            (uav_id, fmt(t), fmt(x), fmt(y), fmt(theta), fmt(omega))
            for uav_id, t, x, y, theta, omega in mission_log.uav_rows
        ),
    )
    _write_csv(
        out / "drifter_tracks.csv",
        ("drifter_id", "t", "x", "y", "frozen"),
        (
            (drifter_id, fmt(t), fmt(x), fmt(y), str(frozen))
            for drifter_id, t, x, y, frozen in mission_log.drifter_rows
        ),
    )
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for t, density in mission_log.snapshots:
        write_snapshot(snap_dir / f"belief_t{int(round(t)):06d}", density, t)
    if mission_log.aborted is not None:
        (out / "ABORTED.txt").write_text(mission_log.aborted + "\n")
