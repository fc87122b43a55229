"""Track data model and delimited-text IO.

A track file is UTF-8 CSV with the exact header::

    storm_id,time,lat,lon,v_obs,vp,chi,shear,h_m,gamma,u_t,z_override,over_land

``time`` is ISO-8601 at an expected 6-hour cadence; a larger spacing is
recorded as a gap flag on the later point rather than interpolated, and
learning operations skip windows that span gaps.  Empty cells mean a
missing optional field (``h_m``/``gamma``/``u_t`` may be omitted only
when ``z_override`` is present).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from . import env
from .errors import ValidationError

TRACK_COLUMNS = [
    "storm_id", "time", "lat", "lon", "v_obs", "vp", "chi", "shear",
    "h_m", "gamma", "u_t", "z_override", "over_land",
]

CADENCE = timedelta(hours=6)


@dataclass
class TrackPoint:
    time: datetime
    lat: float
    lon: float
    v_obs: float          # m/s
    vp: float             # potential intensity, m/s
    chi: float            # entropy deficit, J/(kg K)
    shear: float          # m/s
    h_m: float | None = None      # mixed-layer depth, pre-scaled units
    gamma: float | None = None    # sub-mixed-layer stratification, pre-scaled units
    u_t: float | None = None      # translation speed, m/s
    z_override: float | None = None
    over_land: bool = False
    gap_before: bool = False      # derived: cadence break between this point and the previous

    def validate(self, where: str = "") -> None:
        prefix = f"{where}: " if where else ""
        if not np.isfinite([self.lat, self.lon, self.v_obs, self.vp, self.chi, self.shear]).all():
            raise ValidationError(f"{prefix}non-finite required field")
        if self.v_obs < 0:
            raise ValidationError(f"{prefix}v_obs must be >= 0, got {self.v_obs}")
        if self.vp < 0:
            raise ValidationError(f"{prefix}vp must be >= 0, got {self.vp}")
        if self.shear < 0:
            raise ValidationError(f"{prefix}shear must be >= 0, got {self.shear}")
        if self.u_t is not None and self.u_t < 0:
            raise ValidationError(f"{prefix}u_t must be >= 0, got {self.u_t}")
        if self.z_override is None:
            if self.h_m is None or self.gamma is None or self.u_t is None:
                raise ValidationError(
                    f"{prefix}h_m, gamma and u_t are required when z_override is absent"
                )
            if self.h_m <= 0 or self.gamma <= 0 or self.vp <= 0:
                raise ValidationError(
                    f"{prefix}h_m, gamma and vp must be > 0 when z_override is absent"
                )
        elif self.z_override < 0:
            raise ValidationError(f"{prefix}z_override must be >= 0, got {self.z_override}")

    def z_value(self) -> float:
        """Dimensionless ocean heat content for this point."""
        if self.z_override is not None:
            return self.z_override
        return env.compute_z(self.gamma, self.h_m, self.u_t, self.vp)


@dataclass
class TrackSeries:
    """One storm: ordered track points at 6-hour cadence (gaps flagged)."""

    storm_id: str
    points: list[TrackPoint]

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValidationError(f"storm {self.storm_id}: needs at least 2 points")
        for i in range(1, len(self.points)):
            if self.points[i].time <= self.points[i - 1].time:
                raise ValidationError(
                    f"storm {self.storm_id}: non-monotone times at point {i}"
                )

    def __len__(self) -> int:
        return len(self.points)


@dataclass
class Forcing:
    """Array view of one storm's observations and environmental forcings."""

    times: np.ndarray      # datetime64[s]
    v_obs: np.ndarray      # m/s
    z: np.ndarray          # dimensionless
    vp: np.ndarray         # m/s
    chi: np.ndarray        # J/(kg K)
    shear: np.ndarray      # m/s
    lat: np.ndarray
    lon: np.ndarray
    gap_before: np.ndarray  # bool


def forcing_arrays(series: TrackSeries) -> Forcing:
    pts = series.points
    return Forcing(
        times=np.array([np.datetime64(p.time, "s") for p in pts]),
        v_obs=np.array([p.v_obs for p in pts]),
        z=np.array([p.z_value() for p in pts]),
        vp=np.array([p.vp for p in pts]),
        chi=np.array([p.chi for p in pts]),
        shear=np.array([p.shear for p in pts]),
        lat=np.array([p.lat for p in pts]),
        lon=np.array([p.lon for p in pts]),
        gap_before=np.array([p.gap_before for p in pts], dtype=bool),
    )


def valid_window_starts(series: TrackSeries, n_steps: int) -> np.ndarray:
    """Start indices of [start, start + n_steps] windows with no cadence gap inside."""
    gaps = np.array([p.gap_before for p in series.points], dtype=bool)
    n = len(series.points)
    starts = []
    for start in range(n - n_steps):
        if not gaps[start + 1 : start + n_steps + 1].any():
            starts.append(start)
    return np.array(starts, dtype=np.int64)


def _parse_optional(cell: str, row_no: int, name: str) -> float | None:
    if cell.strip() == "":
        return None
    try:
        return float(cell)
    except ValueError:
        raise ValidationError(f"row {row_no}: bad value for {name!r}: {cell!r}") from None


def _parse_required(cell: str, row_no: int, name: str) -> float:
    val = _parse_optional(cell, row_no, name)
    if val is None:
        raise ValidationError(f"row {row_no}: missing required column {name!r}")
    return val


def _parse_bool(cell: str, row_no: int) -> bool:
    c = cell.strip().lower()
    if c in ("", "0", "false"):
        return False
    if c in ("1", "true"):
        return True
    raise ValidationError(f"row {row_no}: bad value for 'over_land': {cell!r}")


def load_tracks(path) -> list[TrackSeries]:
    """Load and validate a track file; rows are grouped by storm and time-sorted."""
    storms: dict[str, list[tuple[int, TrackPoint]]] = {}
    order: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if [h.strip() for h in header] != TRACK_COLUMNS:
            raise ValidationError(
                f"{path}: bad header; expected {','.join(TRACK_COLUMNS)}"
            )
        for row_no, row in enumerate(reader, start=2):
            if not row or all(c.strip() == "" for c in row):
                continue
            if len(row) != len(TRACK_COLUMNS):
                raise ValidationError(
                    f"row {row_no}: expected {len(TRACK_COLUMNS)} fields, got {len(row)}"
                )
            storm_id = row[0].strip()
            if not storm_id:
                raise ValidationError(f"row {row_no}: empty storm_id")
            try:
                when = datetime.fromisoformat(row[1].strip())
            except ValueError:
                raise ValidationError(f"row {row_no}: bad ISO-8601 time: {row[1]!r}") from None
            point = TrackPoint(
                time=when,
                lat=_parse_required(row[2], row_no, "lat"),
                lon=_parse_required(row[3], row_no, "lon"),
                v_obs=_parse_required(row[4], row_no, "v_obs"),
                vp=_parse_required(row[5], row_no, "vp"),
                chi=_parse_required(row[6], row_no, "chi"),
                shear=_parse_required(row[7], row_no, "shear"),
                h_m=_parse_optional(row[8], row_no, "h_m"),
                gamma=_parse_optional(row[9], row_no, "gamma"),
                u_t=_parse_optional(row[10], row_no, "u_t"),
                z_override=_parse_optional(row[11], row_no, "z_override"),
                over_land=_parse_bool(row[12], row_no),
            )
            point.validate(where=f"row {row_no}")
            storms.setdefault(storm_id, [])
            if storm_id not in order:
                order.append(storm_id)
            storms[storm_id].append((row_no, point))

    out = []
    for storm_id in order:
        rows = sorted(storms[storm_id], key=lambda rp: rp[1].time)
        pts = [p for _, p in rows]
        for i in range(1, len(pts)):
            delta = pts[i].time - pts[i - 1].time
            if delta <= timedelta(0):
                raise ValidationError(
                    f"storm {storm_id}: non-monotone times near row {rows[i][0]}"
                )
            if delta != CADENCE:
                pts[i].gap_before = True
        out.append(TrackSeries(storm_id=storm_id, points=pts))
    return out


def save_tracks(tracks: list[TrackSeries], path) -> None:
    """Write tracks in the documented CSV format at full float precision."""

    def fmt(x) -> str:
        return "" if x is None else repr(float(x))

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACK_COLUMNS)
        for series in tracks:
            for p in series.points:
                writer.writerow([
                    series.storm_id,
                    p.time.isoformat(),
                    fmt(p.lat), fmt(p.lon), fmt(p.v_obs), fmt(p.vp),
                    fmt(p.chi), fmt(p.shear), fmt(p.h_m), fmt(p.gamma),
                    fmt(p.u_t), fmt(p.z_override),
                    "true" if p.over_land else "false",
                ])
