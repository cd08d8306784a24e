"""Flight paths: waypoint polylines and reflecting random walks."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..filtering import ArenaBounds

DEFAULT_TICK_RATE = 12.5


@dataclass(frozen=True, eq=False)
class Trajectory:
    positions: np.ndarray  # (n, 2) metres, one row per tick
    tick_rate: float = DEFAULT_TICK_RATE

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.float64, ndmin=2)
        if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) < 1:
            raise ValueError("trajectory needs at least one (x, y) position")
        if not np.all(np.isfinite(pos)):
            raise ValueError("trajectory positions must be finite")
        object.__setattr__(self, "positions", pos)

    def __len__(self):
        return len(self.positions)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Trajectory(self.positions[item], self.tick_rate)
        return self.positions[item]


def lawnmower_waypoints(bounds: ArenaBounds, lanes: int) -> np.ndarray:
    """Back-and-forth lanes along x, evenly spaced in y, covering ``bounds``."""
    if lanes < 1:
        raise ValueError("need at least one lane")
    ys = np.linspace(bounds.y_min, bounds.y_max, lanes) if lanes > 1 else [0.5 * (bounds.y_min + bounds.y_max)]
    points = []
    for i, y in enumerate(ys):
        xs = (bounds.x_min, bounds.x_max) if i % 2 == 0 else (bounds.x_max, bounds.x_min)
        points.extend([(xs[0], y), (xs[1], y)])
    return np.array(points)


def _along_polyline(waypoints: np.ndarray, arc: np.ndarray) -> np.ndarray:
    seg = np.diff(waypoints, axis=0)
    lengths = np.hypot(seg[:, 0], seg[:, 1])
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    out = np.empty((len(arc), 2))
    for d in range(2):
        out[:, d] = np.interp(arc, cum, waypoints[:, d])
    return out


def waypoint_path(waypoints, n_ticks: int, speed: float | None = None, closed: bool = True) -> np.ndarray:
    """Positions moving at ``speed`` m/tick along the waypoint polyline.

    With ``closed`` the path returns to the first waypoint and repeats.
    When ``speed`` is None the ticks are spread evenly from the first to the
    last waypoint of the open polyline.
    """
    wp = np.asarray(waypoints, dtype=np.float64).reshape(-1, 2)
    if len(wp) == 1:
        return np.repeat(wp, n_ticks, axis=0)
    if speed is None:
        seg = np.diff(wp, axis=0)
        total = np.hypot(seg[:, 0], seg[:, 1]).sum()
        return _along_polyline(wp, np.linspace(0.0, total, n_ticks))
    if closed:
        wp = np.vstack([wp, wp[:1]])
    seg = np.diff(wp, axis=0)
    total = np.hypot(seg[:, 0], seg[:, 1]).sum()
    arc = np.arange(n_ticks) * speed
    if total > 0:
        arc = np.mod(arc, total) if closed else np.minimum(arc, total)
    return _along_polyline(wp, arc)


def random_walk(bounds: ArenaBounds, n_ticks: int, speed: float, rng: np.random.Generator,
                turn_sigma: float = 1.0, start=None) -> np.ndarray:
    """Constant-speed walk with a diffusing heading, reflected at ``bounds``.

    ``turn_sigma`` (rad/tick) sets how quickly the heading decorrelates.  The
    default makes successive steps nearly independent, which is the motion
    the particle filter's noise-only model assumes.
    """
    if speed >= min(bounds.width, bounds.height):
        raise ValueError(f"speed {speed} m/tick is too large for {bounds.width}x{bounds.height} m bounds")
    if start is None:
        start = (rng.uniform(bounds.x_min, bounds.x_max), rng.uniform(bounds.y_min, bounds.y_max))
    heading = rng.uniform(0.0, 2 * np.pi)
    turns = rng.normal(0.0, turn_sigma, n_ticks)
    out = np.empty((n_ticks, 2))
    x, y = start
    for i in range(n_ticks):
        out[i] = x, y
        heading += turns[i]
        x += speed * np.cos(heading)
        y += speed * np.sin(heading)
        if x < bounds.x_min or x > bounds.x_max:
            x = 2 * bounds.x_min - x if x < bounds.x_min else 2 * bounds.x_max - x
            heading = np.pi - heading
        if y < bounds.y_min or y > bounds.y_max:
            y = 2 * bounds.y_min - y if y < bounds.y_min else 2 * bounds.y_max - y
            heading = -heading
    return out


def make_trajectory(kind: str, bounds: ArenaBounds, n_ticks: int, speed: float | None,
                    rng: np.random.Generator | None = None, waypoints=None,
                    tick_rate: float = DEFAULT_TICK_RATE, **kwargs) -> Trajectory:
    """Build a ``waypoints`` or ``random_walk`` trajectory inside ``bounds``.

    ``bounds`` should already be shrunk by half the camera footprint.  For
    ``waypoints`` without explicit points, a lawnmower pattern is used.
    """
    if n_ticks < 1:
        raise ValueError("n_ticks must be >= 1")
    if speed is not None and speed < 0:
        raise ValueError("speed must be non-negative")
    if kind == "random_walk":
        if speed is None:
            raise ValueError("random_walk needs a speed")
        rng = np.random.default_rng() if rng is None else rng
        pos = random_walk(bounds, n_ticks, speed, rng, **kwargs)
    elif kind == "waypoints":
        if waypoints is None:
            waypoints = lawnmower_waypoints(bounds, kwargs.pop("lanes", 8))
        wp = np.asarray(waypoints, dtype=float).reshape(-1, 2)
        if not bounds.contains(wp).all():
            raise ValueError("waypoints leave the trajectory bounds")
        pos = waypoint_path(wp, n_ticks, speed, **kwargs)
    else:
        raise ValueError(f"unknown trajectory kind {kind!r}")
    return Trajectory(pos, tick_rate)


def write_trajectory_csv(path, traj: Trajectory, header_lines=()) -> None:
    with open(Path(path), "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh)
        w.writerow(["tick", "x", "y"])
        for i, (x, y) in enumerate(traj.positions):
            w.writerow([i, repr(float(x)), repr(float(y))])


def read_trajectory_csv(path, tick_rate: float = DEFAULT_TICK_RATE) -> Trajectory:
    with open(Path(path), newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
    header, body = rows[0], rows[1:]
    ix, iy = header.index("x"), header.index("y")
    return Trajectory(np.array([[float(r[ix]), float(r[iy])] for r in body]), tick_rate)
