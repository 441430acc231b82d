"""Spatial-temporal risk occupancy map (STROM).

Each slice rasterizes the total risk field at one planning epoch. A cell takes
the risk of its center point and is occupied when that risk reaches the
threshold. Slices are built on first access so a planning run only pays for
the epochs the sampler actually reaches; build order never changes results.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._kernels import obstacle_field_points
from .errors import BlockedStation, OutsideStrom
from .field import geo_field_at, lane_field
from .geometry import FrenetPoint
from .params import FieldParams
from .scene import Scene

_EPS = 1e-9


@dataclass(frozen=True)
class Window:
    s_lo: float
    s_hi: float
    d_lo: float
    d_hi: float


def _edge_index(x, x0, h, n):
    """Cell index with points on a shared edge going to the lower-index cell."""
    idx = math.ceil((x - x0) / h - _EPS) - 1
    return min(max(idx, 0), n - 1)


class StromSlice:
    def __init__(self, epoch, s0, d0, h, risk, static_risk, threshold):
        self.epoch = float(epoch)
        self.s0 = float(s0)
        self.d0 = float(d0)
        self.h = float(h)
        self.risk = risk
        self.static_risk = static_risk
        self.threshold = float(threshold)
        self.occupied = risk >= threshold

    @property
    def shape(self):
        return self.risk.shape

    @property
    def s_centers(self):
        return self.s0 + (np.arange(self.risk.shape[0]) + 0.5) * self.h

    @property
    def d_centers(self):
        return self.d0 + (np.arange(self.risk.shape[1]) + 0.5) * self.h

    @property
    def s_hi(self):
        return self.s0 + self.risk.shape[0] * self.h

    @property
    def d_hi(self):
        return self.d0 + self.risk.shape[1] * self.h

    def contains(self, s, d):
        return (self.s0 - _EPS <= s <= self.s_hi + _EPS) and (self.d0 - _EPS <= d <= self.d_hi + _EPS)

    def cell(self, s, d):
        if not self.contains(s, d):
            raise OutsideStrom(s, d, self.epoch)
        ns, nd = self.risk.shape
        return _edge_index(s, self.s0, self.h, ns), _edge_index(d, self.d0, self.h, nd)

    def cells(self, s, d):
        """Vectorized :meth:`cell`; points outside the window map to -1."""
        s = np.asarray(s, dtype=float)
        d = np.asarray(d, dtype=float)
        ns, nd = self.risk.shape
        i = np.clip(np.ceil((s - self.s0) / self.h - _EPS).astype(np.int64) - 1, 0, ns - 1)
        j = np.clip(np.ceil((d - self.d0) / self.h - _EPS).astype(np.int64) - 1, 0, nd - 1)
        inside = ((s >= self.s0 - _EPS) & (s <= self.s_hi + _EPS)
                  & (d >= self.d0 - _EPS) & (d <= self.d_hi + _EPS))
        return np.where(inside, i, -1), np.where(inside, j, -1)

    def free_at(self, s, d) -> bool:
        i, j = self.cell(s, d)
        return not self.occupied[i, j]

    def free_points(self, s, d) -> np.ndarray:
        """Free mask for many points; points outside the window count as occupied."""
        i, j = self.cells(s, d)
        ok = i >= 0
        out = np.zeros(np.shape(i), dtype=bool)
        out[ok] = ~self.occupied[i[ok], j[ok]]
        return out


def build_slice(scene: Scene, params: FieldParams, epoch: float, window: Window, h: float,
                threshold: float) -> StromSlice:
    if not h > 0:
        raise ValueError("grid size must be positive")
    ns = max(1, math.ceil((window.s_hi - window.s_lo) / h - _EPS))
    nd = max(1, math.ceil((window.d_hi - window.d_lo) / h - _EPS))
    sc = window.s_lo + (np.arange(ns) + 0.5) * h
    dc = window.d_lo + (np.arange(nd) + 0.5) * h
    road = scene.road
    lane = np.array([lane_field(d, road, params) for d in dc])
    geo = np.empty((ns, nd))
    # the geometry term only depends on s and the lane the point lies in
    lane_rep = {}
    for j, d in enumerate(dc):
        idx = road.lane_index(d)
        if idx not in lane_rep:
            lane_rep[idx] = np.array([geo_field_at(FrenetPoint(s, d), scene.ego.intent, road, params) for s in sc])
        geo[:, j] = lane_rep[idx]
    static = geo + lane[None, :]
    ps = np.repeat(sc, nd)
    pd = np.tile(dc, ns)
    obs = np.zeros(ns * nd)
    for ob in scene.obstacles:
        obstacle_field_points(ps, pd, epoch, ob, params, out=obs)
    risk = (obs.reshape(ns, nd) + lane[None, :]) + geo
    return StromSlice(epoch, window.s_lo, window.d_lo, h, risk, static, threshold)


class Strom:
    """Ordered slices at epochs ``t0 + k * t_D``, k = 0 .. len(windows) - 1."""

    def __init__(self, scene: Scene, params: FieldParams, windows, h=0.5, t_D=0.5, threshold=None, t0=0.0):
        self.scene = scene
        self.params = params
        self.windows = list(windows)
        self.h = float(h)
        self.t_D = float(t_D)
        self.t0 = float(t0)
        self.threshold = float(params.R_max if threshold is None else threshold)
        self._slices = [None] * len(self.windows)
        self.build_seconds = 0.0

    def __len__(self):
        return len(self.windows)

    def epoch(self, k):
        return self.t0 + k * self.t_D

    def slice(self, k) -> StromSlice:
        if not 0 <= k < len(self.windows):
            raise IndexError(f"slice {k} outside STROM with {len(self.windows)} slices")
        sl = self._slices[k]
        if sl is None:
            start = time.perf_counter()
            sl = build_slice(self.scene, self.params, self.epoch(k), self.windows[k], self.h, self.threshold)
            self.build_seconds += time.perf_counter() - start
            self._slices[k] = sl
        return sl

    def built(self):
        return [k for k, sl in enumerate(self._slices) if sl is not None]

    def build_all(self) -> "Strom":
        for k in range(len(self)):
            self.slice(k)
        return self

    def slice_index(self, t) -> int:
        x = (t - self.t0) / self.t_D
        k = math.floor(x + _EPS)
        if k < 0 or k >= len(self.windows):
            raise OutsideStrom(None, None, t)
        return k


def build_strom(scene: Scene, params: FieldParams, windows, h=0.5, t_D=0.5, threshold=None, t0=0.0) -> Strom:
    """Eagerly build every slice."""
    return Strom(scene, params, windows, h, t_D, threshold, t0).build_all()


def is_free(strom: Strom, s: float, d: float, t: float) -> bool:
    try:
        k = strom.slice_index(t)
    except OutsideStrom:
        raise OutsideStrom(s, d, t) from None
    sl = strom.slice(k)
    if not sl.contains(s, d):
        raise OutsideStrom(s, d, t)
    return sl.free_at(s, d)


@dataclass(frozen=True)
class Corridor:
    lower: float
    upper: float
    # True when the bound comes from road-edge/geometry risk (or the grid edge)
    # rather than from an obstacle; such bounds apply to the vehicle center only
    lower_static: bool
    upper_static: bool


def corridor(strom: Strom, k: int, s: float, d_ref: float | None = None) -> Corridor:
    """Free lateral interval at station ``s`` of slice ``k`` around ``d_ref`` (widest run if None)."""
    return corridor_span(strom, [k], s, s, d_ref)


def corridor_span(strom: Strom, ks, s_lo: float, s_hi: float, d_ref: float | None = None) -> Corridor:
    """Like :func:`corridor` but a cell counts as occupied if it is occupied in any
    of the slices ``ks`` for any column covering ``[s_lo, s_hi]``."""
    occ = None
    stat = None
    first = None
    for k in ks:
        sl = strom.slice(k)
        if not (sl.contains(s_lo, sl.d0) and sl.contains(s_hi, sl.d0)):
            raise OutsideStrom(s_lo, d_ref, sl.epoch)
        i0, _ = sl.cell(s_lo, sl.d0)
        i1, _ = sl.cell(s_hi, sl.d0)
        o = sl.occupied[i0:i1 + 1].any(axis=0)
        st = (sl.static_risk[i0:i1 + 1] >= sl.threshold).any(axis=0)
        if first is None:
            first, occ, stat = sl, o.copy(), st.copy()
        else:
            if sl.d0 != first.d0 or sl.h != first.h or o.size != occ.size:
                raise ValueError("slices must share one lateral grid")
            occ |= o
            stat |= st
    sl = first
    free = np.flatnonzero(~occ)
    if free.size == 0:
        raise BlockedStation(s_lo, ks[0])
    nd = occ.size
    if d_ref is None:
        runs = _runs(~occ)
        j0, j1 = max(runs, key=lambda r: (r[1] - r[0], -r[0]))
    else:
        jr = _edge_index(min(max(d_ref, sl.d0), sl.d_hi), sl.d0, sl.h, nd)
        if occ[jr]:
            jr = int(free[np.argmin(np.abs(free - jr))])
        j0 = jr
        while j0 > 0 and not occ[j0 - 1]:
            j0 -= 1
        j1 = jr
        while j1 < nd - 1 and not occ[j1 + 1]:
            j1 += 1
    lower_static = j0 == 0 or bool(stat[j0 - 1])
    upper_static = j1 == nd - 1 or bool(stat[j1 + 1])
    return Corridor(sl.d0 + j0 * sl.h, sl.d0 + (j1 + 1) * sl.h, lower_static, upper_static)


def corridor_bounds(strom: Strom, k: int, s: float, d_ref: float | None = None):
    c = corridor(strom, k, s, d_ref)
    return c.lower, c.upper


def _runs(mask):
    runs = []
    start = None
    for j, m in enumerate(mask):
        if m and start is None:
            start = j
        elif not m and start is not None:
            runs.append((start, j - 1))
            start = None
    if start is not None:
        runs.append((start, len(mask) - 1))
    return runs


def write_heatmaps(strom: Strom, out_dir, only_built=True) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    ks = strom.built() if only_built else range(len(strom))
    for k in ks:
        sl = strom.slice(k)
        path = out / f"strom_slice_{k:03d}.csv"
        with path.open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["s", "d", "risk", "occupied"])
            for i, s in enumerate(sl.s_centers):
                for j, d in enumerate(sl.d_centers):
                    w.writerow([f"{s:.3f}", f"{d:.3f}", repr(float(sl.risk[i, j])), int(sl.occupied[i, j])])
        paths.append(path)
    return paths
