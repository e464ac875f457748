"""Scenario files: strict schema, defaults, and a built-in reference scenario.

A scenario is one YAML document. Parsing is deliberately rigid: unknown
keys are rejected with their dotted path, types are checked, and every
derived object (grid, boundary, sensor) is built eagerly so a bad
scenario fails before any output directory is touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigurationError
from .flow import DEFAULT_CONTROL_LIMIT, BoundarySegment, BoundarySpec
from .geometry import GeoProjection, Grid, make_grid
from .sensing import SensorModel

__all__ = [
    "MissionConfig",
    "SyntheticDrifterConfig",
    "TargetConfig",
    "UavRosterConfig",
    "parse_config",
    "load_config",
    "replica_config_text",
]


def _expect_mapping(node, path: str) -> dict:
    if node is None:
        return {}
    if not isinstance(node, dict):
        raise ConfigurationError(f"{path}: expected a mapping")
    return node


def _reject_unknown(node: dict, allowed, path: str):
    for key in node:
        if key not in allowed:
            raise ConfigurationError(f"{path}.{key}: unknown key")


def _get(node: dict, key: str, path: str, default=None, required=False):
    if key not in node or node[key] is None:
        if required:
            raise ConfigurationError(f"{path}.{key}: required key is missing")
        return default
    return node[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigurationError(f"{path}: expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
    return int(value)


def _boolean(value, path: str) -> bool:
    if not isinstance(value, bool):
        raise ConfigurationError(f"{path}: expected true/false, got {value!r}")
    return value


def _string(value, path: str) -> str:
    if not isinstance(value, str):
        raise ConfigurationError(f"{path}: expected a string, got {value!r}")
    return value


def _pair(value, path: str) -> tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise ConfigurationError(f"{path}: expected [x, y]")
    return (_number(value[0], f"{path}[0]"), _number(value[1], f"{path}[1]"))


def _points(value, path: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) < 2:
        raise ConfigurationError(f"{path}: expected a list of [x, y] points")
    return np.array([_pair(p, f"{path}[{i}]") for i, p in enumerate(value)])


@dataclass(frozen=True)
class SyntheticDrifterConfig:
    truth_vector: np.ndarray
    n_fitting: int = 4
    n_local: int = 5
    n_validation: int = 3
    deploy_center: tuple[float, float] = (0.0, 0.0)
    deploy_radius: float = 300.0
    cadence: float = 10.0
    noise_sigma: float = 0.02


@dataclass(frozen=True)
class TargetConfig:
    center: tuple[float, float]
    radius: float
    count: int = 4
    pattern: str = "plus"
    drifting: bool = False


@dataclass(frozen=True)
class UavRosterConfig:
    count: int = 2
    speed: float = 8.0
    max_yaw_rate: float = 0.5
    battery_s: float = 2400.0
    start_poses: tuple | None = None


@dataclass(frozen=True, eq=False)
class MissionConfig:
    """Fully validated scenario, ready to run."""

    name: str
    start: datetime
    duration: float
    control_dt: float
    window: float
    start_delay: float
    seed: int
    grid: Grid
    projection: GeoProjection
    boundary: BoundarySpec
    control_limit: float
    fit_iterations: int | None
    fit_budget_s: float | None
    drifter_source: str
    drifter_csv: Path | None
    synthetic: SyntheticDrifterConfig | None
    targets: TargetConfig
    uavs: UavRosterConfig
    sensor: SensorModel
    alpha: float
    beta: float
    d0: float
    belief_center: tuple[float, float]
    belief_radius: float
    snapshot_every: float
    raw_text: str


def _parse_boundary(node: dict, path: str) -> BoundarySpec:
    _reject_unknown(
        node, {"circle_center_m", "circle_radius_m", "n_circle", "segments"}, path
    )
    segments_node = _get(node, "segments", path, required=True)
    if not isinstance(segments_node, list) or not segments_node:
        raise ConfigurationError(f"{path}.segments: expected a non-empty list")
    segments = []
    for i, seg in enumerate(segments_node):
        seg_path = f"{path}.segments[{i}]"
        seg = _expect_mapping(seg, seg_path)
        _reject_unknown(seg, {"kind", "points", "n_control"}, seg_path)
        segments.append(
            BoundarySegment(
                kind=_string(_get(seg, "kind", seg_path, required=True), f"{seg_path}.kind"),
                points=_points(_get(seg, "points", seg_path, required=True), f"{seg_path}.points"),
                n_control=_integer(_get(seg, "n_control", seg_path, default=4), f"{seg_path}.n_control"),
            )
        )
    return BoundarySpec(
        segments=segments,
        circle_center=_pair(
            _get(node, "circle_center_m", path, required=True), f"{path}.circle_center_m"
        ),
        circle_radius=_number(
            _get(node, "circle_radius_m", path, required=True), f"{path}.circle_radius_m"
        ),
        n_circle=_integer(_get(node, "n_circle", path, default=8), f"{path}.n_circle"),
    )


def parse_config(text: str, base_dir: Path | None = None) -> MissionConfig:
    """Parse and validate a scenario document."""
    try:
        root = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigurationError(f"scenario is not valid YAML: {err}")
    root = _expect_mapping(root, "scenario")
    _reject_unknown(
        root,
        {
            "mission",
            "grid",
            "boundary",
            "flow",
            "drifters",
            "targets",
            "uavs",
            "sensor",
            "guidance",
            "belief",
            "output",
        },
        "scenario",
    )
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()

    mission = _expect_mapping(_get(root, "mission", "scenario", default={}), "mission")
    _reject_unknown(
        mission,
        {"name", "start", "duration_s", "control_dt_s", "window_s", "start_delay_s", "seed"},
        "mission",
    )
    name = _string(_get(mission, "name", "mission", default="unnamed"), "mission.name")
    start_text = _string(
        _get(mission, "start", "mission", default="2022-07-19T10:15:00"), "mission.start"
    )
    try:
        start = datetime.fromisoformat(start_text)
    except ValueError as err:
        raise ConfigurationError(f"mission.start: {err}")
    duration = _number(_get(mission, "duration_s", "mission", required=True), "mission.duration_s")
    control_dt = _number(
        _get(mission, "control_dt_s", "mission", default=3.0), "mission.control_dt_s"
    )
    window = _number(_get(mission, "window_s", "mission", default=600.0), "mission.window_s")
    start_delay = _number(
        _get(mission, "start_delay_s", "mission", default=0.0), "mission.start_delay_s"
    )
    seed = _integer(_get(mission, "seed", "mission", default=0), "mission.seed")
    if duration <= 0.0:
        raise ConfigurationError("mission.duration_s: must be positive")
    if control_dt <= 0.0:
        raise ConfigurationError("mission.control_dt_s: must be positive")
    if window <= 0.0 or abs(window / control_dt - round(window / control_dt)) > 1e-9:
        raise ConfigurationError(
            "mission.window_s: must be a positive multiple of control_dt_s"
        )
    if start_delay < 0.0:
        raise ConfigurationError("mission.start_delay_s: must be non-negative")

    grid_node = _expect_mapping(_get(root, "grid", "scenario", required=True), "grid")
    _reject_unknown(grid_node, {"extent_m", "h_m", "origin_m", "reference", "land"}, "grid")
    extent = _pair(_get(grid_node, "extent_m", "grid", required=True), "grid.extent_m")
    h = _number(_get(grid_node, "h_m", "grid", default=25.0), "grid.h_m")
    origin = _pair(_get(grid_node, "origin_m", "grid", default=[0.0, 0.0]), "grid.origin_m")
    ref = _expect_mapping(
        _get(grid_node, "reference", "grid", default={"lat": 45.0, "lon": 14.0}),
        "grid.reference",
    )
    _reject_unknown(ref, {"lat", "lon"}, "grid.reference")
    projection = GeoProjection(
        ref_lat=_number(_get(ref, "lat", "grid.reference", required=True), "grid.reference.lat"),
        ref_lon=_number(_get(ref, "lon", "grid.reference", required=True), "grid.reference.lon"),
    )
    land_node = _get(grid_node, "land", "grid", default=[])
    if not isinstance(land_node, list):
        raise ConfigurationError("grid.land: expected a list of polygons")
    land = [_points(ring, f"grid.land[{i}]") for i, ring in enumerate(land_node)]
    grid = make_grid(extent, h, land_polygons=land or None, origin=origin)

    boundary = _parse_boundary(
        _expect_mapping(_get(root, "boundary", "scenario", required=True), "boundary"),
        "boundary",
    )

    flow_node = _expect_mapping(_get(root, "flow", "scenario", default={}), "flow")
    _reject_unknown(flow_node, {"control_limit", "fit_iterations", "fit_budget_s"}, "flow")
    control_limit = _number(
        _get(flow_node, "control_limit", "flow", default=DEFAULT_CONTROL_LIMIT),
        "flow.control_limit",
    )
    fit_iterations = _get(flow_node, "fit_iterations", "flow", default=None)
    if fit_iterations is not None:
        fit_iterations = _integer(fit_iterations, "flow.fit_iterations")
        if fit_iterations <= 0:
            raise ConfigurationError("flow.fit_iterations: must be positive")
    fit_budget = _get(flow_node, "fit_budget_s", "flow", default=None)
    if fit_budget is not None:
        fit_budget = _number(fit_budget, "flow.fit_budget_s")
        if fit_budget <= 0.0:
            raise ConfigurationError("flow.fit_budget_s: must be positive")
    if fit_iterations is None and fit_budget is None:
        fit_iterations = 40

    drifters_node = _expect_mapping(
        _get(root, "drifters", "scenario", required=True), "drifters"
    )
    _reject_unknown(drifters_node, {"source", "csv_path", "synthetic"}, "drifters")
    source = _string(_get(drifters_node, "source", "drifters", required=True), "drifters.source")
    if source not in ("synthetic", "csv"):
        raise ConfigurationError("drifters.source: must be 'synthetic' or 'csv'")
    drifter_csv = None
    synthetic = None
    if source == "csv":
        csv_text = _string(
            _get(drifters_node, "csv_path", "drifters", required=True), "drifters.csv_path"
        )
        drifter_csv = (base_dir / csv_text).resolve()
        if not drifter_csv.exists():
            raise ConfigurationError(
                f"drifters.csv_path: file does not exist: {drifter_csv}"
            )
    else:
        syn = _expect_mapping(
            _get(drifters_node, "synthetic", "drifters", required=True), "drifters.synthetic"
        )
        _reject_unknown(
            syn,
            {
                "truth_vector",
                "n_fitting",
                "n_local",
                "n_validation",
                "deploy_center_m",
                "deploy_radius_m",
                "cadence_s",
                "noise_sigma_mps",
            },
            "drifters.synthetic",
        )
        tv_node = _get(syn, "truth_vector", "drifters.synthetic", required=True)
        if not isinstance(tv_node, list):
            raise ConfigurationError("drifters.synthetic.truth_vector: expected a list")
        truth_vector = np.array(
            [_number(v, f"drifters.synthetic.truth_vector[{i}]") for i, v in enumerate(tv_node)]
        )
        if truth_vector.shape != (boundary.layout.size,):
            raise ConfigurationError(
                "drifters.synthetic.truth_vector: expected "
                f"{boundary.layout.size} values for this boundary, got {truth_vector.size}"
            )
        synthetic = SyntheticDrifterConfig(
            truth_vector=truth_vector,
            n_fitting=_integer(
                _get(syn, "n_fitting", "drifters.synthetic", default=4),
                "drifters.synthetic.n_fitting",
            ),
            n_local=_integer(
                _get(syn, "n_local", "drifters.synthetic", default=5),
                "drifters.synthetic.n_local",
            ),
            n_validation=_integer(
                _get(syn, "n_validation", "drifters.synthetic", default=3),
                "drifters.synthetic.n_validation",
            ),
            deploy_center=_pair(
                _get(syn, "deploy_center_m", "drifters.synthetic", required=True),
                "drifters.synthetic.deploy_center_m",
            ),
            deploy_radius=_number(
                _get(syn, "deploy_radius_m", "drifters.synthetic", default=300.0),
                "drifters.synthetic.deploy_radius_m",
            ),
            cadence=_number(
                _get(syn, "cadence_s", "drifters.synthetic", default=10.0),
                "drifters.synthetic.cadence_s",
            ),
            noise_sigma=_number(
                _get(syn, "noise_sigma_mps", "drifters.synthetic", default=0.02),
                "drifters.synthetic.noise_sigma_mps",
            ),
        )

    targets_node = _expect_mapping(_get(root, "targets", "scenario", required=True), "targets")
    _reject_unknown(
        targets_node, {"center_m", "radius_m", "count", "pattern", "drifting"}, "targets"
    )
    targets = TargetConfig(
        center=_pair(_get(targets_node, "center_m", "targets", required=True), "targets.center_m"),
        radius=_number(_get(targets_node, "radius_m", "targets", default=300.0), "targets.radius_m"),
        count=_integer(_get(targets_node, "count", "targets", default=4), "targets.count"),
        pattern=_string(_get(targets_node, "pattern", "targets", default="plus"), "targets.pattern"),
        drifting=_boolean(
            _get(targets_node, "drifting", "targets", default=False), "targets.drifting"
        ),
    )
    if targets.pattern != "plus":
        raise ConfigurationError("targets.pattern: only 'plus' is supported")
    if targets.count not in (4, 5):
        raise ConfigurationError(
            "targets.count: the plus pattern supports 4 (arms) or 5 (arms + center)"
        )

    uavs_node = _expect_mapping(_get(root, "uavs", "scenario", default={}), "uavs")
    _reject_unknown(
        uavs_node,
        {"count", "speed_mps", "max_yaw_rate_rps", "battery_s", "start_poses"},
        "uavs",
    )
    poses_node = _get(uavs_node, "start_poses", "uavs", default=None)
    poses = None
    if poses_node is not None:
        if not isinstance(poses_node, list):
            raise ConfigurationError("uavs.start_poses: expected a list of [x, y, heading]")
        poses = []
        for i, pose in enumerate(poses_node):
            if not isinstance(pose, (list, tuple)) or len(pose) != 3:
                raise ConfigurationError(f"uavs.start_poses[{i}]: expected [x, y, heading]")
            poses.append(tuple(_number(v, f"uavs.start_poses[{i}][{j}]") for j, v in enumerate(pose)))
        poses = tuple(poses)
    uavs = UavRosterConfig(
        count=_integer(_get(uavs_node, "count", "uavs", default=2), "uavs.count"),
        speed=_number(_get(uavs_node, "speed_mps", "uavs", default=8.0), "uavs.speed_mps"),
        max_yaw_rate=_number(
            _get(uavs_node, "max_yaw_rate_rps", "uavs", default=0.5), "uavs.max_yaw_rate_rps"
        ),
        battery_s=_number(_get(uavs_node, "battery_s", "uavs", default=2400.0), "uavs.battery_s"),
        start_poses=poses,
    )
    if uavs.count < 0:
        raise ConfigurationError("uavs.count: must be non-negative")
    if poses is not None and len(poses) != uavs.count:
        raise ConfigurationError(
            f"uavs.start_poses: got {len(poses)} poses for {uavs.count} aircraft"
        )

    sensor_node = _expect_mapping(_get(root, "sensor", "scenario", default={}), "sensor")
    _reject_unknown(
        sensor_node,
        {
            "altitude_m",
            "reference_altitude_m",
            "footprint_length_m",
            "footprint_width_m",
            "capture_interval_s",
            "recall",
        },
        "sensor",
    )
    sensor = SensorModel(
        altitude=_number(_get(sensor_node, "altitude_m", "sensor", default=75.0), "sensor.altitude_m"),
        reference_altitude=_number(
            _get(sensor_node, "reference_altitude_m", "sensor", default=75.0),
            "sensor.reference_altitude_m",
        ),
        footprint_length=_number(
            _get(sensor_node, "footprint_length_m", "sensor", default=95.0),
            "sensor.footprint_length_m",
        ),
        footprint_width=_number(
            _get(sensor_node, "footprint_width_m", "sensor", default=53.4),
            "sensor.footprint_width_m",
        ),
        capture_interval=_number(
            _get(sensor_node, "capture_interval_s", "sensor", default=3.0),
            "sensor.capture_interval_s",
        ),
        recall=_number(_get(sensor_node, "recall", "sensor", default=0.68), "sensor.recall"),
    )
    ratio = sensor.capture_interval / control_dt
    if abs(ratio - round(ratio)) > 1e-9 or ratio < 1.0 - 1e-9:
        raise ConfigurationError(
            "sensor.capture_interval_s: must be a multiple of mission.control_dt_s"
        )

    guidance_node = _expect_mapping(_get(root, "guidance", "scenario", default={}), "guidance")
    _reject_unknown(guidance_node, {"alpha", "beta", "d0_m2ps"}, "guidance")
    alpha = _number(_get(guidance_node, "alpha", "guidance", default=5000.0), "guidance.alpha")
    # beta is accepted for compatibility with published parameter tables
    # but feeds no equation here; see the guidance module docstring
    beta = _number(_get(guidance_node, "beta", "guidance", default=0.1), "guidance.beta")
    d0 = _number(_get(guidance_node, "d0_m2ps", "guidance", default=1.0), "guidance.d0_m2ps")
    if d0 < 0.0:
        raise ConfigurationError("guidance.d0_m2ps: must be non-negative")

    belief_node = _expect_mapping(_get(root, "belief", "scenario", default={}), "belief")
    _reject_unknown(belief_node, {"center_m", "radius_m"}, "belief")
    belief_center = _pair(
        _get(belief_node, "center_m", "belief", default=list(targets.center)), "belief.center_m"
    )
    belief_radius = _number(
        _get(belief_node, "radius_m", "belief", default=targets.radius), "belief.radius_m"
    )

    output_node = _expect_mapping(_get(root, "output", "scenario", default={}), "output")
    _reject_unknown(output_node, {"snapshot_every_s"}, "output")
    snapshot_every = _number(
        _get(output_node, "snapshot_every_s", "output", default=0.0), "output.snapshot_every_s"
    )
    if snapshot_every < 0.0:
        raise ConfigurationError("output.snapshot_every_s: must be non-negative")

    return MissionConfig(
        name=name,
        start=start,
        duration=duration,
        control_dt=control_dt,
        window=window,
        start_delay=start_delay,
        seed=seed,
        grid=grid,
        projection=projection,
        boundary=boundary,
        control_limit=control_limit,
        fit_iterations=fit_iterations,
        fit_budget_s=fit_budget,
        drifter_source=source,
        drifter_csv=drifter_csv,
        synthetic=synthetic,
        targets=targets,
        uavs=uavs,
        sensor=sensor,
        alpha=alpha,
        beta=beta,
        d0=d0,
        belief_center=belief_center,
        belief_radius=belief_radius,
        snapshot_every=snapshot_every,
        raw_text=text,
    )


def load_config(path: Path) -> MissionConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"scenario file does not exist: {path}")
    return parse_config(path.read_text(), base_dir=path.parent)


def replica_config_text(
    seed: int = 7,
    duration: float = 1500.0,
    fit_iterations: int = 40,
    snapshot_every: float = 0.0,
) -> str:
    """Reference scenario: a 2 km all-sea channel with walls north and south,
    a 300 m deployment disc in the middle, two aircraft, four targets."""
    return f"""\
mission:
  name: reference-channel
  start: "2022-07-19T10:15:00"
  duration_s: {duration}
  control_dt_s: 3.0
  window_s: 600.0
  start_delay_s: 60.0
  seed: {seed}
grid:
  extent_m: [2000.0, 2000.0]
  h_m: 25.0
  origin_m: [0.0, 0.0]
  reference: {{lat: 44.9, lon: 14.35}}
boundary:
  circle_center_m: [1000.0, 1000.0]
  circle_radius_m: 4000.0
  n_circle: 8
  segments:
    - kind: wall
      points: [[0.0, 0.0], [2000.0, 0.0]]
      n_control: 4
    - kind: open
      points: [[2000.0, 0.0], [2000.0, 2000.0]]
      n_control: 4
    - kind: wall
      points: [[2000.0, 2000.0], [0.0, 2000.0]]
      n_control: 4
    - kind: open
      points: [[0.0, 2000.0], [0.0, 0.0]]
      n_control: 4
flow:
  control_limit: 50.0
  fit_iterations: {fit_iterations}
drifters:
  source: synthetic
  synthetic:
    truth_vector: [30.0, 18.0, 22.0, 12.0, 40.0, 6.0, -5.0, 3.0, -8.0, 4.0, -2.0, 7.0, -5.0]
    n_fitting: 4
    n_local: 5
    n_validation: 3
    deploy_center_m: [1000.0, 1000.0]
    deploy_radius_m: 300.0
targets:
  center_m: [1000.0, 1000.0]
  radius_m: 300.0
  count: 4
  pattern: plus
  drifting: false
uavs:
  count: 2
  battery_s: 2400.0
sensor:
  capture_interval_s: 3.0
  recall: 0.68
guidance:
  alpha: 5000.0
  beta: 0.1
  d0_m2ps: 1.0
output:
  snapshot_every_s: {snapshot_every}
"""
