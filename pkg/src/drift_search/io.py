"""Serialization primitives: field snapshots, drifter CSV, output locking.

Everything written here is meant to be byte-reproducible: floats are
rendered with repr (shortest round-trip form), rows follow a fixed
order, and no wall-clock values leak into artifacts. Snapshots use a
raw little-endian float64 grid next to a small text sidecar so any
plotting stack can load them without this package.
"""

from __future__ import annotations

import os
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .geometry import GeoProjection, Grid, ScalarField
from .lagrangian import DrifterObservation

__all__ = [
    "fmt",
    "write_snapshot",
    "read_snapshot",
    "snapshot_to_csv",
    "write_drifter_csv",
    "read_drifter_csv",
    "OutputLock",
]

DRIFTER_COLUMNS = (
    "drifter_id",
    "iso_timestamp",
    "lat",
    "lon",
    "v_east_mps",
    "v_north_mps",
    "role",
)


def fmt(x) -> str:
    """Shortest exact decimal form of a float (integers stay integral)."""
    return repr(float(x))


def write_snapshot(base: Path, field: ScalarField, t: float) -> tuple[Path, Path]:
    """Write a scalar field as <base>.f64 plus a <base>.meta sidecar.

    The binary file is the row-major little-endian float64 cell matrix,
    southernmost row first. The sidecar carries dimensions, origin, cell
    size, and the simulation timestamp, one "key value" pair per line.
    """
    base = Path(base)
    grid = field.grid
    data_path = base.with_suffix(".f64")
    meta_path = base.with_suffix(".meta")
    data_path.write_bytes(field.values.astype("<f8").tobytes(order="C"))
    lines = [
        f"nx {grid.nx}",
        f"ny {grid.ny}",
        f"origin_x {fmt(grid.origin[0])}",
        f"origin_y {fmt(grid.origin[1])}",
        f"h {fmt(grid.h)}",
        f"t {fmt(t)}",
    ]
    meta_path.write_text("\n".join(lines) + "\n")
    return data_path, meta_path


def read_snapshot(base: Path) -> tuple[np.ndarray, dict]:
    """Load a snapshot written by write_snapshot: (values, metadata)."""
    base = Path(base)
    meta_path = base.with_suffix(".meta")
    data_path = base.with_suffix(".f64")
    if not meta_path.exists() or not data_path.exists():
        raise ConfigurationError(f"snapshot {base} is missing its .f64/.meta pair")
    meta: dict = {}
    for line in meta_path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        key, _, value = line.partition(" ")
        meta[key] = value
    try:
        nx, ny = int(meta["nx"]), int(meta["ny"])
        meta = {
            "nx": nx,
            "ny": ny,
            "origin_x": float(meta["origin_x"]),
            "origin_y": float(meta["origin_y"]),
            "h": float(meta["h"]),
            "t": float(meta["t"]),
        }
    except (KeyError, ValueError) as err:
        raise ConfigurationError(f"snapshot sidecar {meta_path} is malformed: {err}")
    values = np.frombuffer(data_path.read_bytes(), dtype="<f8")
    if values.size != nx * ny:
        raise ConfigurationError(
            f"snapshot {data_path} holds {values.size} values, expected {nx * ny}"
        )
    return values.reshape(ny, nx).copy(), meta


def snapshot_to_csv(base: Path, out_path: Path) -> Path:
    """Expand a snapshot to a dense CSV matrix (one grid row per line)."""
    values, _ = read_snapshot(base)
    out_path = Path(out_path)
    with out_path.open("w") as fh:
        for row in values:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return out_path


def write_drifter_csv(
    path: Path,
    observations: list[DrifterObservation],
    projection: GeoProjection,
    start: datetime,
) -> Path:
    """Write beacon samples in the interchange layout.

    Rows are ordered by (time, drifter id) so identical fleets serialize
    identically. Positions become lat/lon through the projection;
    velocities stay in local east/north m/s.
    """
    path = Path(path)
    rows = sorted(observations, key=lambda o: (o.t, o.drifter_id))
    with path.open("w") as fh:
        fh.write(",".join(DRIFTER_COLUMNS) + "\n")
        for obs in rows:
            lon, lat = projection.to_geo(obs.position[0], obs.position[1])
            stamp = (start + timedelta(seconds=float(obs.t))).isoformat()
            fh.write(
                ",".join(
                    (
                        obs.drifter_id,
                        stamp,
                        fmt(lat),
                        fmt(lon),
                        fmt(obs.velocity[0]),
                        fmt(obs.velocity[1]),
                        obs.role,
                    )
                )
                + "\n"
            )
    return path


def read_drifter_csv(
    path: Path,
    projection: GeoProjection,
    start: datetime | None = None,
) -> tuple[list[DrifterObservation], datetime]:
    """Parse a drifter CSV back into observations with relative seconds.

    ``start`` anchors t = 0; when omitted, the earliest timestamp in the
    file is used. Returns (observations, start).
    """
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"drifter file does not exist: {path}")
    lines = path.read_text().splitlines()
    if not lines:
        raise ConfigurationError(f"drifter file is empty: {path}")
    header = tuple(s.strip() for s in lines[0].split(","))
    if header != DRIFTER_COLUMNS:
        raise ConfigurationError(
            f"drifter file {path} has columns {header}, expected {DRIFTER_COLUMNS}"
        )
    parsed = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(DRIFTER_COLUMNS):
            raise ConfigurationError(
                f"{path}:{ln}: expected {len(DRIFTER_COLUMNS)} fields, got {len(parts)}"
            )
        try:
            stamp = datetime.fromisoformat(parts[1].strip())
            lat, lon = float(parts[2]), float(parts[3])
            ve, vn = float(parts[4]), float(parts[5])
        except ValueError as err:
            raise ConfigurationError(f"{path}:{ln}: {err}")
        parsed.append((parts[0].strip(), stamp, lat, lon, ve, vn, parts[6].strip()))
    if not parsed:
        raise ConfigurationError(f"drifter file has no data rows: {path}")
    if start is None:
        start = min(row[1] for row in parsed)
    observations = []
    for drifter_id, stamp, lat, lon, ve, vn, role in parsed:
        x, y = projection.to_local(lon, lat)
        observations.append(
            DrifterObservation(
                drifter_id=drifter_id,
                t=(stamp - start).total_seconds(),
                position=np.array([float(x), float(y)]),
                velocity=np.array([ve, vn]),
                role=role,
            )
        )
    return observations, start


class OutputLock:
    """Exclusive marker file guarding one output directory.

    Two commands writing the same directory would interleave partial
    logs; the second one should fail fast instead.
    """

    def __init__(self, directory: Path):
        self.path = Path(directory) / ".lock"
        self._fd: int | None = None

    def __enter__(self):
        Path(self.path.parent).mkdir(parents=True, exist_ok=True)
        try:
            self._fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RuntimeError(
                f"output directory is locked by another run: {self.path}"
            )
        os.write(self._fd, f"{os.getpid()}\n".encode())
        return self

    def __exit__(self, exc_type, exc, tb):
        if self._fd is not None:
            os.close(self._fd)
            self._fd = None
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass
        return False
