"""GPS trajectory handling: Geolife PLT parsing, resampling onto a fixed
time grid, and packing tracks into (lat, lon) completion matrices."""
import csv
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ._validation import check_count, check_mask, child_seeds, rng_from_seed
from .exceptions import DimensionError, DomainError, EmptyTrajectoryError, ParseError
from .matrix import rse

PLT_HEADER_LINES = 6


@dataclass(frozen=True)
class TrajectoryPoint:
    timestamp: float
    lat: float
    lon: float

    def __post_init__(self):
        if not np.isfinite(self.timestamp):
            raise DomainError("timestamp must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise DomainError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise DomainError(f"longitude {self.lon} outside [-180, 180]")


@dataclass
class SampledTrack:
    user_id: str
    t0: float
    dt: float
    lat: np.ndarray
    lon: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        self.lat = np.asarray(self.lat, dtype=float)
        self.lon = np.asarray(self.lon, dtype=float)
        self.observed = check_mask(self.observed, self.lat.shape, "observed")
        if self.lat.shape != self.lon.shape or self.lat.ndim != 1:
            raise DimensionError("lat and lon series must be 1-D and equally long")

    @property
    def n(self):
        return self.lat.size

    def slot_times(self):
        """Midpoint timestamp of every grid slot."""
        return self.t0 + (np.arange(self.n) + 0.5) * self.dt

    def to_points(self):
        t = self.slot_times()
        return [
            TrajectoryPoint(float(t[i]), float(self.lat[i]), float(self.lon[i]))
            for i in np.flatnonzero(self.observed)
        ]

    def __eq__(self, other):
        if not isinstance(other, SampledTrack):
            return NotImplemented
        return (
            self.user_id == other.user_id
            and self.t0 == other.t0
            and self.dt == other.dt
            and np.array_equal(self.lat, other.lat)
            and np.array_equal(self.lon, other.lon)
            and np.array_equal(self.observed, other.observed)
        )


@dataclass
class TrackMatrixPair:
    """Users as columns, grid slots as rows; both matrices share ``mask``."""

    lat_mat: np.ndarray
    lon_mat: np.ndarray
    mask: np.ndarray
    user_order: list
    t0: float = 0.0
    dt: float = 1.0

    def __post_init__(self):
        self.lat_mat = np.asarray(self.lat_mat, dtype=float)
        self.lon_mat = np.asarray(self.lon_mat, dtype=float)
        if self.lat_mat.ndim != 2 or self.lat_mat.shape != self.lon_mat.shape:
            raise DimensionError("lat and lon matrices must be 2-D with equal shapes")
        self.mask = check_mask(self.mask, self.lat_mat.shape)
        if len(self.user_order) != self.lat_mat.shape[1]:
            raise DimensionError("user_order length must equal the column count")

    @property
    def shape(self):
        return self.lat_mat.shape

    def stacked(self):
        return np.vstack([self.lat_mat, self.lon_mat])


def _parse_timestamp(date, clock, lineno):
    try:
        stamp = datetime.strptime(f"{date.strip()} {clock.strip()}", "%Y-%m-%d %H:%M:%S")
    except ValueError as exc:
        raise ParseError(f"bad date/time {date!r} {clock!r}", lineno) from exc
    return stamp.replace(tzinfo=timezone.utc).timestamp()


def parse_plt(content):
    """Parse the text of a Geolife ``.plt`` file into points in file order.

    The first six lines are header. Each record reads
    ``lat,lon,0,altitude,days,date,time``; times are taken as UTC.
    """
    points = []
    lines = content.splitlines()
    for lineno, line in enumerate(lines[PLT_HEADER_LINES:], start=PLT_HEADER_LINES + 1):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != 7:
            raise ParseError(f"expected 7 fields, got {len(fields)}", lineno)
        try:
            lat, lon = float(fields[0]), float(fields[1])
        except ValueError as exc:
            raise ParseError(f"bad coordinate in {line!r}", lineno) from exc
        ts = _parse_timestamp(fields[5], fields[6], lineno)
        try:
            points.append(TrajectoryPoint(ts, lat, lon))
        except DomainError as exc:
            raise ParseError(str(exc), lineno) from exc
    if not points:
        raise EmptyTrajectoryError("trajectory file holds no data records")
    return points


def read_plt(path):
    path = Path(path)
    try:
        return parse_plt(path.read_text())
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_geolife(data_dir, users=None):
    """Read ``DATA_DIR/<user_id>/Trajectory/*.plt``.

    Returns a dict mapping user id to a list of trajectories (one per file,
    files in name order).
    """
    data_dir = Path(data_dir)
    out = {}
    for user_dir in sorted(p for p in data_dir.iterdir() if p.is_dir()):
        if users is not None and user_dir.name not in users:
            continue
        files = sorted((user_dir / "Trajectory").glob("*.plt"))
        if files:
            out[user_dir.name] = [read_plt(f) for f in files]
    return out


def resample(points, t0, dt, n, user_id=""):
    """Sample a trajectory on the grid of ``n`` slots ``[t0 + i*dt, t0 + (i+1)*dt)``.

    A slot is observed when it contains at least one source point; its value
    is the linear interpolation of the bracketing points at the slot
    midpoint. Unobserved slots hold 0.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    n = check_count(n, "n")
    pts = sorted(points, key=lambda p: p.timestamp)
    times = np.array([p.timestamp for p in pts], dtype=float)
    lat = np.array([p.lat for p in pts], dtype=float)
    lon = np.array([p.lon for p in pts], dtype=float)
    # np.interp needs increasing abscissae; keep the first of duplicate stamps
    if times.size:
        keep = np.concatenate(([True], np.diff(times) > 0))
        times, lat, lon = times[keep], lat[keep], lon[keep]

    observed = np.zeros(n, dtype=bool)
    if times.size:
        slot = np.floor((times - t0) / dt).astype(np.int64)
        inside = (slot >= 0) & (slot < n)
        observed[slot[inside]] = True

    mid = t0 + (np.arange(n) + 0.5) * dt
    lat_s = np.zeros(n)
    lon_s = np.zeros(n)
    if observed.any():
        lat_s[observed] = np.interp(mid[observed], times, lat)
        lon_s[observed] = np.interp(mid[observed], times, lon)
    return SampledTrack(user_id, float(t0), float(dt), lat_s, lon_s, observed)


def assemble_matrices(tracks):
    if not tracks:
        raise DimensionError("need at least one track")
    first = tracks[0]
    for tr in tracks[1:]:
        if (tr.t0, tr.dt, tr.n) != (first.t0, first.dt, first.n):
            raise DimensionError(
                f"track {tr.user_id!r} grid (t0={tr.t0}, dt={tr.dt}, n={tr.n}) differs from "
                f"(t0={first.t0}, dt={first.dt}, n={first.n})"
            )
    return TrackMatrixPair(
        np.column_stack([tr.lat for tr in tracks]),
        np.column_stack([tr.lon for tr in tracks]),
        np.column_stack([tr.observed for tr in tracks]),
        [tr.user_id for tr in tracks],
        first.t0,
        first.dt,
    )


def disassemble(pair):
    return [
        SampledTrack(
            uid,
            pair.t0,
            pair.dt,
            pair.lat_mat[:, k].copy(),
            pair.lon_mat[:, k].copy(),
            pair.mask[:, k].copy(),
        )
        for k, uid in enumerate(pair.user_order)
    ]


def track_rse(recovered, truth):
    """Return ``(per_user, aggregate)`` RSE.

    ``per_user`` maps user id to the RSE of that user's stacked (lat, lon)
    column; ``aggregate`` is the RSE over the stacked lat/lon matrices.
    """
    if recovered.shape != truth.shape:
        raise DimensionError(f"shape mismatch {recovered.shape} vs {truth.shape}")
    rec, tru = recovered.stacked(), truth.stacked()
    per_user = {uid: rse(rec[:, [k]], tru[:, [k]]) for k, uid in enumerate(truth.user_order)}
    return per_user, rse(rec, tru)


def gen_smooth_tracks(
    n,
    users,
    rank,
    seed,
    dt=5.0,
    center=(39.98, 116.32),
    spread=0.01,
    noise=0.0,
):
    """Synthetic tracks whose lat and lon matrices each have rank <= ``rank``.

    Each coordinate is a per-user combination of ``rank`` shared basis
    signals: a constant plus low-frequency sinusoids over the window.
    ``noise`` adds i.i.d. Gaussian jitter in degrees, which breaks the exact
    rank bound. Every slot is observed.
    """
    n = check_count(n, "n")
    users = check_count(users, "users")
    rank = check_count(rank, "rank")
    if rank > min(n, users):
        raise DomainError(f"rank {rank} exceeds min(n, users) = {min(n, users)}")
    lat_seed, lon_seed, noise_seed = child_seeds(seed, 3)
    t = (np.arange(n) + 0.5) / n

    def coordinate(base, s):
        rng = rng_from_seed(s)
        basis = [np.ones(n)]
        for _ in range(rank - 1):
            freq = rng.uniform(0.25, 1.5)
            phase = rng.uniform(0.0, 2 * np.pi)
            basis.append(np.sin(2 * np.pi * freq * t + phase))
        basis = np.column_stack(basis)
        weights = rng.uniform(-spread, spread, size=(rank, users))
        weights[0] += base
        return basis @ weights

    lat = coordinate(center[0], lat_seed)
    lon = coordinate(center[1], lon_seed)
    if noise > 0:
        rng = rng_from_seed(noise_seed)
        lat = lat + noise * rng.standard_normal(lat.shape)
        lon = lon + noise * rng.standard_normal(lon.shape)
    return TrackMatrixPair(
        lat, lon, np.ones((n, users), dtype=bool), [f"{k:03d}" for k in range(users)], 0.0, dt
    )


def write_track_csv(path, track, lat=None, lon=None):
    """Write ``timestamp,lat,lon`` rows for every slot of ``track``."""
    lat = track.lat if lat is None else lat
    lon = track.lon if lon is None else lon
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "lat", "lon"])
        for ts, a, b in zip(track.slot_times(), lat, lon):
            writer.writerow([repr(float(ts)), repr(float(a)), repr(float(b))])


def select_complete_tracks(trajectories, n, dt, max_users=None):
    """Pick, per user, the first trajectory that covers all ``n`` slots from its start.

    ``trajectories`` maps user id to a list of point lists (as returned by
    :func:`load_geolife`). Tracks are re-based to ``t0 = 0`` so they share a
    grid; the returned dict maps user id to the original start time.
    """
    tracks, starts = [], {}
    for uid in sorted(trajectories):
        if max_users is not None and len(tracks) >= max_users:
            break
        for points in trajectories[uid]:
            t_start = min(p.timestamp for p in points)
            rebased = [TrajectoryPoint(p.timestamp - t_start, p.lat, p.lon) for p in points]
            track = resample(rebased, 0.0, dt, n, user_id=uid)
            if track.observed.all():
                tracks.append(track)
                starts[uid] = t_start
                break
    if not tracks:
        raise EmptyTrajectoryError(f"no trajectory covers {n} slots of {dt} s")
    return assemble_matrices(tracks), starts
