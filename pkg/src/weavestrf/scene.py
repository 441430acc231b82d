"""Vehicles, predicted trajectories and the weaving-segment road model."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Footprint, FrenetPoint

DEFAULT_LANE_WIDTH = 3.75


class Intent(str, enum.Enum):
    MERGE = "merge"      # on-ramp vehicle that must join the mainline
    EXIT = "exit"        # mainline vehicle that must leave by the off-ramp
    THROUGH = "through"


class LineKind(enum.IntEnum):
    BOUNDARY = 1   # impassable road edge
    SOLID = 2      # passable but prohibited by regulation
    DASHED = 3     # lane change permitted


@dataclass(frozen=True)
class VehicleState:
    pos: FrenetPoint
    yaw: float = 0.0
    v: float = 0.0
    a: float = 0.0
    mass: float = 1.0
    footprint: Footprint = Footprint(5.0, 2.0)
    intent: Intent = Intent.THROUGH
    v_d: float = 0.0

    def __post_init__(self):
        if self.v < 0:
            raise ValueError(f"speed must be nonnegative, got {self.v}")
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass}")


class PredictedTrajectory:
    """Time-stamped scatter set of an obstacle's predicted positions.

    Per-sample speed, acceleration and yaw are optional; when absent the
    obstacle's current state supplies the kinematics and the yaw is taken from
    the local heading of the scatter polyline.
    """

    def __init__(self, t, s, d, v=None, a=None, yaw=None):
        self.t = np.asarray(t, dtype=float)
        self.s = np.asarray(s, dtype=float)
        self.d = np.asarray(d, dtype=float)
        n = self.t.size
        if n == 0:
            raise ValueError("no prediction available")
        if self.s.shape != (n,) or self.d.shape != (n,):
            raise ValueError("trajectory arrays must share one length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("trajectory times must be strictly increasing")
        self.v = None if v is None else np.asarray(v, dtype=float)
        self.a = None if a is None else np.asarray(a, dtype=float)
        self.yaw = None if yaw is None else np.asarray(yaw, dtype=float)
        for name in ("v", "a", "yaw"):
            arr = getattr(self, name)
            if arr is not None and arr.shape != (n,):
                raise ValueError(f"trajectory {name} must have {n} entries")

    def __len__(self):
        return self.t.size

    @classmethod
    def from_rows(cls, rows) -> "PredictedTrajectory":
        """Build from ``[t, s, d, v, a, yaw]`` rows."""
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 6:
            raise ValueError("trajectory rows must be [t, s, d, v, a, yaw]")
        return cls(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5])

    @classmethod
    def constant_velocity(cls, start: FrenetPoint, v: float, yaw: float = 0.0, t0: float = 0.0,
                          horizon: float = 5.0, dt: float = 0.1, a: float = 0.0) -> "PredictedTrajectory":
        n = int(round(horizon / dt)) + 1
        tau = np.arange(n) * dt
        dist = v * tau + 0.5 * a * tau ** 2
        if a < 0 and v > 0:
            t_stop = v / -a
            dist = np.where(tau < t_stop, dist, v * t_stop / 2.0)
        speed = np.maximum(v + a * tau, 0.0)
        return cls(t0 + tau, start.s + dist * math.cos(yaw), start.d + dist * math.sin(yaw),
                   speed, np.full(n, a), np.full(n, yaw))

    def headings(self, fallback: float) -> np.ndarray:
        if self.yaw is not None:
            return self.yaw
        n = len(self)
        out = np.full(n, float(fallback))
        if n < 2:
            return out
        ds = np.diff(self.s)
        dd = np.diff(self.d)
        seg = np.arctan2(dd, ds)
        moving = np.hypot(ds, dd) > 1e-9
        seg = np.where(moving, seg, np.nan)
        # forward segment heading, last sample takes the final segment
        head = np.append(seg, seg[-1])
        return np.where(np.isnan(head), out, head)

    def speeds(self, fallback: float) -> np.ndarray:
        return self.v if self.v is not None else np.full(len(self), float(fallback))

    def accels(self, fallback: float) -> np.ndarray:
        return self.a if self.a is not None else np.full(len(self), float(fallback))

    def state_at(self, t: float):
        """Linear playback ``(s, d, v, a, yaw)`` at time ``t`` (clamped to the sampled span)."""
        s = float(np.interp(t, self.t, self.s))
        d = float(np.interp(t, self.t, self.d))
        v = float(np.interp(t, self.t, self.v)) if self.v is not None else None
        a = float(np.interp(t, self.t, self.a)) if self.a is not None else None
        yaw = float(np.interp(t, self.t, self.yaw)) if self.yaw is not None else None
        return s, d, v, a, yaw

    def rows(self) -> list:
        n = len(self)
        v = self.speeds(0.0)
        a = self.accels(0.0)
        yaw = self.headings(0.0)
        return [[float(self.t[i]), float(self.s[i]), float(self.d[i]), float(v[i]), float(a[i]), float(yaw[i])]
                for i in range(n)]


@dataclass(frozen=True)
class Obstacle:
    state: VehicleState
    prediction: PredictedTrajectory
    name: str = ""

    def state_at(self, t: float) -> VehicleState:
        s, d, v, a, yaw = self.prediction.state_at(t)
        st = self.state
        return VehicleState(
            FrenetPoint(s, d), st.yaw if yaw is None else yaw,
            st.v if v is None else max(v, 0.0), st.a if a is None else a,
            st.mass, st.footprint, st.intent,
        )


@dataclass(frozen=True)
class LaneLine:
    d: float
    kind: LineKind


@dataclass(frozen=True)
class RoadModel:
    """Straightened weaving segment.

    ``aux_lanes`` lists the lane indices (0 = outermost) forming the auxiliary
    acceleration/deceleration lane between on- and off-ramp; every other lane is
    mainline. The mandatory lane-change zone spans ``[zone_start, zone_end]``
    where ``zone_end`` is the start of the off-ramp.
    """

    lane_lines: tuple
    lane_width: float = DEFAULT_LANE_WIDTH
    zone_start: float = 0.0
    zone_end: float = 200.0
    aux_lanes: tuple = (0,)

    def __post_init__(self):
        if not self.zone_start < self.zone_end:
            raise ValueError("zone_start must be before zone_end")
        ds = [ln.d for ln in self.lane_lines]
        if len(ds) < 2 or any(b <= a for a, b in zip(ds, ds[1:])):
            raise ValueError("lane-line positions must be strictly increasing")
        if not self.lane_width > 0:
            raise ValueError("lane width must be positive")

    @classmethod
    def weaving(cls, n_lanes: int = 3, lane_width: float = DEFAULT_LANE_WIDTH,
                zone_start: float = 0.0, zone_end: float = 200.0, aux_lanes=(0,)) -> "RoadModel":
        lines = [LaneLine(0.0, LineKind.BOUNDARY)]
        for i in range(1, n_lanes):
            lines.append(LaneLine(i * lane_width, LineKind.DASHED))
        lines.append(LaneLine(n_lanes * lane_width, LineKind.BOUNDARY))
        return cls(tuple(lines), lane_width, zone_start, zone_end, tuple(aux_lanes))

    @property
    def d_min(self) -> float:
        return self.lane_lines[0].d

    @property
    def d_max(self) -> float:
        return self.lane_lines[-1].d

    @property
    def n_lanes(self) -> int:
        return int(round((self.d_max - self.d_min) / self.lane_width))

    def lane_index(self, d: float) -> int:
        idx = int(math.floor((d - self.d_min) / self.lane_width))
        return min(max(idx, 0), self.n_lanes - 1)

    def lane_center(self, index: int) -> float:
        return self.d_min + (index + 0.5) * self.lane_width

    def in_zone(self, s: float) -> bool:
        return self.zone_start <= s <= self.zone_end


@dataclass
class Scene:
    """Obstacles with predictions, the road, and the ego vehicle whose intent drives the geometry field."""

    road: RoadModel
    ego: VehicleState
    obstacles: list = field(default_factory=list)
