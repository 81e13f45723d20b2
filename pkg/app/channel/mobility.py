"""
Vehicle trajectories: CSV import/export and a synthetic highway generator.

Trace CSV format (UTF-8, LF, '.' decimals, SI units)::

    # roles: tx=v3 rx=v7 relays=v4,v5
    time,vehicle_id,x,y,speed,length
    0.0,v3,120.0,0.0,22.2,4.645
    ...

The ``# roles:`` comment line is optional; roles may be supplied by the
experiment configuration instead.
"""

from __future__ import annotations

import io
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from app.core.config import TraceRoles
from app.core.errors import ConfigError, TraceFormatError

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["time", "vehicle_id", "x", "y", "speed", "length"]
DEFAULT_VEHICLE_LENGTH = 4.645
_TIME_TOL = 1e-9
_ROLES_RE = re.compile(r"^#\s*roles:\s*(?P<body>.*)$")


# ── Domain types ───────────────────────────────────────────────────

@dataclass
class VehicleTrack:
    vehicle_id: str
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    speed: np.ndarray
    length: float = DEFAULT_VEHICLE_LENGTH

    def __post_init__(self) -> None:
        if self.length <= 0:
            raise ValueError(f"Vehicle {self.vehicle_id!r}: length must be positive")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError(f"Vehicle {self.vehicle_id!r}: timestamps must increase")

    def present(self, t: float) -> bool:
        if len(self.times) == 0:
            return False
        return self.times[0] - _TIME_TOL <= t <= self.times[-1] + _TIME_TOL

    def position(self, t: float) -> tuple[float, float]:
        """Linearly interpolated centre position at time *t*."""
        if not self.present(t):
            raise ValueError(
                f"Vehicle {self.vehicle_id!r} not present at t={t} "
                f"(trace covers {self.times[0]}..{self.times[-1]})"
            )
        if len(self.times) == 1:
            return float(self.x[0]), float(self.y[0])
        return float(np.interp(t, self.times, self.x)), float(np.interp(t, self.times, self.y))


@dataclass
class MobilityTrace:
    tracks: dict[str, VehicleTrack] = field(default_factory=dict)
    roles: TraceRoles | None = None

    @property
    def vehicle_ids(self) -> list[str]:
        return list(self.tracks)

    @property
    def blockers(self) -> list[str]:
        """Vehicles without a communication role."""
        if self.roles is None:
            return self.vehicle_ids
        taken = {self.roles.tx, self.roles.rx, *self.roles.relays}
        return [v for v in self.tracks if v not in taken]

    @property
    def end_time(self) -> float:
        ends = [tr.times[-1] for tr in self.tracks.values() if len(tr.times)]
        return float(min(ends)) if ends else 0.0

    def track(self, vehicle_id: str) -> VehicleTrack:
        if vehicle_id not in self.tracks:
            raise KeyError(f"Vehicle {vehicle_id!r} not in trace.")
        return self.tracks[vehicle_id]

    def with_roles(self, roles: TraceRoles) -> MobilityTrace:
        """Return the trace with *roles* assigned, validating that they exist."""
        missing = [
            v for v in (roles.tx, roles.rx, *roles.relays) if v not in self.tracks
        ]
        if missing:
            raise ConfigError(f"Role vehicles not in trace: {missing}")
        if roles.tx == roles.rx:
            raise ConfigError("Transmitter and receiver must differ")
        return MobilityTrace(tracks=self.tracks, roles=roles)

    def __len__(self) -> int:
        return len(self.tracks)


# ── CSV import / export ────────────────────────────────────────────

def _parse_roles(body: str, line: int) -> TraceRoles:
    fields: dict[str, str] = {}
    for token in body.split():
        key, sep, value = token.partition("=")
        if not sep:
            raise TraceFormatError(f"malformed roles token {token!r}", line)
        fields[key.strip()] = value.strip()
    if "tx" not in fields or "rx" not in fields:
        raise TraceFormatError("roles header needs tx= and rx=", line)
    relays = [r for r in fields.get("relays", "").split(",") if r]
    return TraceRoles(tx=fields["tx"], rx=fields["rx"], relays=relays)


def ingest_trajectories(
    path: str | Path, roles: TraceRoles | None = None
) -> MobilityTrace:
    """
    Load a trajectory CSV.

    Roles come from *roles* when given, otherwise from the ``# roles:``
    header.  A non-empty trace without roles raises ConfigError; any
    malformed row raises TraceFormatError carrying the file line number.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")

    header_roles: TraceRoles | None = None
    n_comments = 0
    for lineno, raw in enumerate(lines, start=1):
        if not raw.startswith("#"):
            break
        n_comments += 1
        match = _ROLES_RE.match(raw.strip())
        if match:
            header_roles = _parse_roles(match.group("body"), lineno)

    header_line = n_comments + 1
    try:
        frame = pd.read_csv(
            io.StringIO(text),
            skiprows=n_comments,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except pd.errors.EmptyDataError as exc:
        raise TraceFormatError("missing header", header_line) from exc
    except pd.errors.ParserError as exc:
        found = re.search(r"line (\d+)", str(exc))
        line = int(found.group(1)) if found else None
        raise TraceFormatError(f"unparseable row: {exc}", line) from exc

    if list(frame.columns) != TRACE_COLUMNS:
        raise TraceFormatError(
            f"expected header {','.join(TRACE_COLUMNS)}, got {','.join(map(str, frame.columns))}",
            header_line,
        )
    # blank lines stay as empty rows so the index maps onto file lines
    frame = frame.fillna("")
    frame = frame[~(frame == "").all(axis=1)]

    numeric = ["time", "x", "y", "speed", "length"]
    values = frame[numeric].apply(pd.to_numeric, errors="coerce")
    bad = values.isna().any(axis=1) | (frame["vehicle_id"] == "")
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise TraceFormatError(
            "non-numeric or missing field", header_line + 1 + int(frame.index[row])
        )
    bad_len = values["length"] <= 0
    if bad_len.any():
        row = int(np.flatnonzero(bad_len.to_numpy())[0])
        raise TraceFormatError(
            "vehicle length must be positive", header_line + 1 + int(frame.index[row])
        )

    tracks: dict[str, VehicleTrack] = {}
    data = values.assign(vehicle_id=frame["vehicle_id"])
    for vid, group in data.groupby("vehicle_id", sort=False):
        times = group["time"].to_numpy(dtype=np.float64)
        steps = np.diff(times)
        if np.any(steps <= 0):
            offending = int(group.index[int(np.flatnonzero(steps <= 0)[0]) + 1])
            raise TraceFormatError(
                f"timestamps not strictly increasing for vehicle {vid!r}",
                header_line + 1 + offending,
            )
        tracks[str(vid)] = VehicleTrack(
            vehicle_id=str(vid),
            times=times,
            x=group["x"].to_numpy(dtype=np.float64),
            y=group["y"].to_numpy(dtype=np.float64),
            speed=group["speed"].to_numpy(dtype=np.float64),
            length=float(group["length"].iloc[0]),
        )

    trace = MobilityTrace(tracks=tracks)
    chosen = roles or header_roles
    if tracks:
        if chosen is None:
            raise ConfigError(
                f"{path}: no role assignment (pass roles or add a '# roles:' header)"
            )
        trace = trace.with_roles(chosen)
    logger.info("Ingested %s: %d vehicles, %d rows", path, len(tracks), len(frame))
    return trace


def write_trajectories(trace: MobilityTrace, path: str | Path) -> None:
    """Write *trace* in the CSV format read by :func:`ingest_trajectories`."""
    path = Path(path)
    rows = [
        {
            "time": t,
            "vehicle_id": tr.vehicle_id,
            "x": tr.x[i],
            "y": tr.y[i],
            "speed": tr.speed[i],
            "length": tr.length,
        }
        for tr in trace.tracks.values()
        for i, t in enumerate(tr.times)
    ]
    frame = pd.DataFrame(rows, columns=TRACE_COLUMNS)
    if len(frame):
        frame = frame.sort_values(["time"], kind="stable")
    with path.open("w", encoding="utf-8", newline="") as fh:
        if trace.roles is not None:
            relays = ",".join(trace.roles.relays)
            fh.write(f"# roles: tx={trace.roles.tx} rx={trace.roles.rx} relays={relays}\n")
        frame.to_csv(fh, index=False, lineterminator="\n")


# ── Synthetic highway ──────────────────────────────────────────────

def assign_roles(
    trace: MobilityTrace, n_relays: int, link_distance: float, road_length: float
) -> TraceRoles | None:
    """
    Pick a transmitter near the first quarter of the road, the receiver
    about *link_distance* ahead of it, and the *n_relays* vehicles closest
    to their midpoint as relays.  Returns None when there are too few
    vehicles.
    """
    if len(trace) < 2 + n_relays:
        return None
    x0 = {vid: float(tr.x[0]) for vid, tr in trace.tracks.items()}
    tx = min(x0, key=lambda v: (abs(x0[v] - road_length / 4.0), v))
    rx = min(
        (v for v in x0 if v != tx),
        key=lambda v: (abs(x0[v] - (x0[tx] + link_distance)), v),
    )
    mid = 0.5 * (x0[tx] + x0[rx])
    others = sorted(
        (v for v in x0 if v not in (tx, rx)), key=lambda v: (abs(x0[v] - mid), v)
    )
    return TraceRoles(tx=tx, rx=rx, relays=others[:n_relays])


def synth_highway(
    density: float,
    speed_kmh: float,
    lanes: int,
    length: float,
    duration: float,
    rng: np.random.Generator,
    *,
    speed_spread: float = 0.1,
    lane_width: float = 3.7,
    vehicle_length: float = DEFAULT_VEHICLE_LENGTH,
    sample_period: float = 0.05,
    n_relays: int = 0,
    link_distance: float = 60.0,
) -> MobilityTrace:
    """
    Straight multi-lane highway with Poisson-placed vehicles.

    Each lane holds Poisson(density * length / 1000) vehicles at uniform
    positions; every vehicle keeps a constant speed drawn uniformly within
    ``speed_spread`` of the mean.  ``duration = 0`` yields one snapshot.
    """
    if lanes < 1:
        raise ValueError(f"Need at least one lane, got {lanes}")
    if density <= 0 or speed_kmh <= 0:
        raise ValueError("density and speed must be positive")
    if duration < 0:
        raise ValueError("duration must be non-negative")

    n_samples = int(np.ceil(duration / sample_period - _TIME_TOL)) + 1
    times = sample_period * np.arange(n_samples)
    mean_speed = speed_kmh / 3.6

    tracks: dict[str, VehicleTrack] = {}
    for lane in range(lanes):
        count = int(rng.poisson(density * length / 1000.0))
        starts = np.sort(rng.uniform(0.0, length, size=count))
        speeds = mean_speed * rng.uniform(1.0 - speed_spread, 1.0 + speed_spread, size=count)
        for x0, v in zip(starts, speeds):
            vid = f"v{len(tracks)}"
            tracks[vid] = VehicleTrack(
                vehicle_id=vid,
                times=times.copy(),
                x=x0 + v * times,
                y=np.full(n_samples, lane * lane_width),
                speed=np.full(n_samples, v),
                length=vehicle_length,
            )

    trace = MobilityTrace(tracks=tracks)
    roles = assign_roles(trace, n_relays, link_distance, length)
    if roles is not None:
        trace = trace.with_roles(roles)
    logger.debug(
        "Synthesised highway: %d vehicles over %d lanes, %d samples",
        len(tracks), lanes, n_samples,
    )
    return trace
