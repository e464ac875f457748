"""Camera footprints and the probabilistic detection sensor.

The camera sees a rectangle on the sea surface, long axis along the
aircraft heading, sized by similar triangles from the reference-altitude
footprint. Detection inside a footprint is a Bernoulli trial at the
detector's recall; geometry decides who gets a trial, recall decides the
outcome. All randomness flows through per (UAV, capture-tick) child
generators derived from the scenario seed, so neither UAV ordering nor
parallel evaluation can reorder the draws.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .hedac import UavState

__all__ = [
    "SensorModel",
    "Target",
    "DetectionEvent",
    "DetectionStreams",
    "camera_footprint",
    "capture",
]


@dataclass(frozen=True)
class SensorModel:
    """Down-looking camera plus detector recall."""

    altitude: float = 75.0
    reference_altitude: float = 75.0
    footprint_length: float = 95.0
    footprint_width: float = 53.4
    capture_interval: float = 3.0
    recall: float = 0.68

    def __post_init__(self):
        if self.altitude <= 0.0 or self.reference_altitude <= 0.0:
            raise ConfigurationError("altitudes must be positive")
        if self.footprint_length <= 0.0 or self.footprint_width <= 0.0:
            raise ConfigurationError("footprint dimensions must be positive")
        if self.capture_interval <= 0.0:
            raise ConfigurationError(
                f"capture interval must be positive, got {self.capture_interval}"
            )
        if not 0.0 <= self.recall <= 1.0:
            raise ConfigurationError(f"recall must lie in [0, 1], got {self.recall}")

    @property
    def scale(self) -> float:
        return self.altitude / self.reference_altitude

    @property
    def length(self) -> float:
        """Footprint long axis on the surface at the operating altitude."""
        return self.footprint_length * self.scale

    @property
    def width(self) -> float:
        return self.footprint_width * self.scale

    def fov_angles(self) -> tuple[float, float]:
        """Full view angles (rad) across the long and short footprint axes."""
        return (
            2.0 * math.atan(0.5 * self.footprint_length / self.reference_altitude),
            2.0 * math.atan(0.5 * self.footprint_width / self.reference_altitude),
        )


@dataclass
class Target:
    """A floating search object, point-sized at grid resolution."""

    target_id: str
    position: tuple[float, float]
    drifting: bool = False
    events: list = field(default_factory=list)

    def __post_init__(self):
        x, y = self.position
        self.position = (float(x), float(y))


@dataclass(frozen=True)
class DetectionEvent:
    """One positive detector outcome for one target in one image."""

    uav_id: str
    target_id: str
    t: float
    position: tuple[float, float]


class DetectionStreams:
    """Deterministic per-(UAV, tick) random generators.

    The child seed mixes the scenario seed, a CRC32 of the UAV id, and
    the capture tick index, so any (uav, tick) pair owns the same bits
    regardless of evaluation order or platform.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def stream(self, uav_id: str, tick: int) -> np.random.Generator:
        key = zlib.crc32(uav_id.encode("utf-8"))
        return np.random.default_rng(
            np.random.SeedSequence((self.seed, key, int(tick)))
        )


def camera_footprint(state: UavState, sensor: SensorModel) -> np.ndarray:
    """Footprint rectangle corners (4, 2), long axis along the heading."""
    cx, cy = state.position
    ca, sa = math.cos(state.heading), math.sin(state.heading)
    hl = 0.5 * sensor.length
    hw = 0.5 * sensor.width
    along = np.array([ca, sa]) * hl
    cross = np.array([-sa, ca]) * hw
    center = np.array([cx, cy])
    return np.array(
        [
            center + along + cross,
            center - along + cross,
            center - along - cross,
            center + along - cross,
        ]
    )


def _inside_footprint(point, state: UavState, sensor: SensorModel) -> bool:
    dx = point[0] - state.position[0]
    dy = point[1] - state.position[1]
    ca, sa = math.cos(state.heading), math.sin(state.heading)
    along = dx * ca + dy * sa
    cross = -dx * sa + dy * ca
    return abs(along) <= 0.5 * sensor.length and abs(cross) <= 0.5 * sensor.width


def capture(
    states: list[UavState],
    targets: list[Target],
    sensor: SensorModel,
    t: float,
    streams: DetectionStreams,
) -> tuple[list[DetectionEvent], list[np.ndarray]]:
    """One synchronized image per UAV: footprints plus detection events.

    Every target inside a UAV's footprint receives an independent
    Bernoulli trial at the sensor recall. The tick index is t divided by
    the capture interval, so repeated captures at the same t reproduce
    the same draws.
    """
    tick = int(round(t / sensor.capture_interval))
    events: list[DetectionEvent] = []
    footprints: list[np.ndarray] = []
    for state in states:
        footprints.append(camera_footprint(state, sensor))
        rng = streams.stream(state.uav_id, tick)
        for target in targets:
            if not _inside_footprint(target.position, state, sensor):
                continue
            if rng.random() < sensor.recall:
                events.append(
                    DetectionEvent(
                        uav_id=state.uav_id,
                        target_id=target.target_id,
                        t=float(t),
                        position=target.position,
                    )
                )
    return events, footprints
