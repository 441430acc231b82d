"""Dynamic iterative sampling of the layered lane-change candidate graph.

Layer ``t`` holds sample points reached after ``t`` planning steps of length
``t_D``. Each parent spans a kinematic reach rectangle; the union of the
rectangles is sampled on one lattice (global sampling) and every kept point is
attached to each parent whose rectangle contains it (hierarchical attribution),
provided the straight segment between them stays in free STROM cells.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .config import PlannerConfig
from .errors import LayerStarved, NoFeasibleLaneChange, PlanningError
from .geometry import Footprint
from .strom import Strom, StromSlice, _edge_index

_TOL = 1e-9


@dataclass
class SampleNode:
    layer: int
    s: float
    d: float
    v_s: float          # mean longitudinal speed over the step into this node
    v_d: float
    parents: list = field(default_factory=list)
    nearest: int = -1   # index of the nearest parent, which supplies the mean speeds


@dataclass(frozen=True)
class Rect:
    s_lo: float
    s_hi: float
    d_lo: float
    d_hi: float

    def contains(self, s, d, tol=_TOL):
        return (self.s_lo - tol <= s <= self.s_hi + tol) and (self.d_lo - tol <= d <= self.d_hi + tol)


@dataclass
class CandidateGraph:
    layers: list
    d_tgt: float
    t_D: float
    terminal: int = 0

    @property
    def terminal_nodes(self):
        return self.layers[self.terminal]

    def n_paths(self) -> int:
        counts = [1] * len(self.layers[0])
        for layer in self.layers[1:]:
            counts = [sum(counts[p] for p in node.parents) for node in layer]
        return sum(counts)

    def to_json(self) -> str:
        return json.dumps({
            "d_tgt": self.d_tgt, "t_D": self.t_D, "terminal": self.terminal,
            "layers": [[{"s": n.s, "d": n.d, "v_s": n.v_s, "v_d": n.v_d, "parents": list(n.parents)}
                        for n in layer] for layer in self.layers],
        }, indent=1)


def reach_bounds(node: SampleNode, t_D: float, acc_max: float, dec_max: float, a_d: float) -> Rect:
    """Rectangle reachable from ``node`` in one step, from its mean speeds.

    Longitudinal displacement never goes negative (no reverse motion).
    """
    s_max = node.v_s * t_D + 0.5 * acc_max * t_D ** 2
    s_min = max(0.0, node.v_s * t_D - 0.5 * dec_max * t_D ** 2)
    d_max = node.v_d * t_D + 0.5 * a_d * t_D ** 2
    d_min = node.v_d * t_D - 0.5 * a_d * t_D ** 2
    return Rect(node.s + s_min, node.s + s_max, node.d + d_min, node.d + d_max)


def lateral_lattice(lo: float, hi: float, n: int, d_tgt: float) -> np.ndarray:
    """``n`` points on [lo, hi] with quadratic crowding toward ``d_tgt``."""
    if n == 1 or hi - lo <= _TOL:
        return np.array([min(max(d_tgt, lo), hi)])
    u = np.linspace(0.0, 1.0, n)
    c = (min(max(d_tgt, lo), hi) - lo) / (hi - lo)
    below = u < c
    phi = np.empty_like(u)
    if c > 0:
        phi[below] = c - (c - u[below]) ** 2 / c
    if c < 1:
        phi[~below] = c + (u[~below] - c) ** 2 / (1 - c)
    else:
        phi[~below] = 1.0
    return lo + (hi - lo) * phi


@njit(cache=True)
def _edge_cell(x, n):
    idx = math.ceil(x - 1e-9) - 1
    if idx < 0:
        idx = 0
    if idx > n - 1:
        idx = n - 1
    return idx


@njit(cache=True)
def _segment_free(occ, s0, d0, h, a_s, a_d, b_s, b_d):
    ns, nd = occ.shape
    eps = 1e-9
    for (ps, pd) in ((a_s, a_d), (b_s, b_d)):
        if ps < s0 - eps or ps > s0 + ns * h + eps or pd < d0 - eps or pd > d0 + nd * h + eps:
            return False
    u0 = (a_s - s0) / h
    w0 = (a_d - d0) / h
    u1 = (b_s - s0) / h
    w1 = (b_d - d0) / h
    if occ[_edge_cell(u0, ns), _edge_cell(w0, nd)] or occ[_edge_cell(u1, ns), _edge_cell(w1, nd)]:
        return False
    du = u1 - u0
    dw = w1 - w0
    lam = [0.0, 1.0]
    if du != 0.0:
        lo = min(u0, u1)
        hi = max(u0, u1)
        k = math.floor(lo) + 1
        while k < hi:
            lam.append((k - u0) / du)
            k += 1
    if dw != 0.0:
        lo = min(w0, w1)
        hi = max(w0, w1)
        k = math.floor(lo) + 1
        while k < hi:
            lam.append((k - w0) / dw)
            k += 1
    lam.sort()
    for q in range(len(lam) - 1):
        m = 0.5 * (lam[q] + lam[q + 1])
        if occ[_edge_cell(u0 + m * du, ns), _edge_cell(w0 + m * dw, nd)]:
            return False
    return True


def segment_risk_check(parent, child, sl: StromSlice) -> bool:
    """True iff every cell the straight segment parent->child passes through is free in ``sl``."""
    return bool(_segment_free(sl.occupied, sl.s0, sl.d0, sl.h,
                              float(parent.s), float(parent.d), float(child.s), float(child.d)))


def body_clearance(sl: StromSlice, s: float, d: float, eps: float):
    """Free lateral run around ``(s, d)`` over stations ``[s - eps, s + eps]`` of one slice.

    Returns ``(lower, upper, lower_static, upper_static)``; a static side is
    bounded by road-edge risk or the grid edge and constrains the center only.
    """
    lo = max(s - eps, sl.s0)
    hi = min(s + eps, sl.s_hi - 1e-9)
    i0 = _edge_index(lo, sl.s0, sl.h, sl.occupied.shape[0])
    i1 = _edge_index(hi, sl.s0, sl.h, sl.occupied.shape[0])
    occ = sl.occupied[i0:i1 + 1].any(axis=0)
    nd = occ.size
    j = _edge_index(d, sl.d0, sl.h, nd)
    if occ[j]:
        return d, d, False, False
    j0 = j
    while j0 > 0 and not occ[j0 - 1]:
        j0 -= 1
    j1 = j
    while j1 < nd - 1 and not occ[j1 + 1]:
        j1 += 1
    stat = sl.static_risk[i0:i1 + 1] >= sl.threshold
    lower_static = j0 == 0 or bool(stat[:, j0 - 1].any())
    upper_static = j1 == nd - 1 or bool(stat[:, j1 + 1].any())
    return sl.d0 + j0 * sl.h, sl.d0 + (j1 + 1) * sl.h, lower_static, upper_static


def global_sample_layer(parents: list, sl: StromSlice, layer: int, cfg: PlannerConfig, d_tgt: float,
                        d_bounds=None, footprint: Footprint | None = None) -> tuple:
    """Sample layer ``layer`` from ``parents``; returns ``(nodes, rects)``.

    A K_s x K_d lattice spans the bounding box of the parent rectangles. Once
    the spread of the parents makes the lattice coarser than a rectangle, some
    parents would get no child at all; each such parent then adds one point of
    its own rectangle (its constant-speed continuation first, then points
    nearest the target lateral position), shared with every parent whose
    rectangle contains it like any lattice point.

    With a ``footprint``, a parent only claims a point when the body, widened
    by the edge heading, fits the point's free lateral run.
    """
    if not parents:
        raise LayerStarved(layer)
    rects = [reach_bounds(p, cfg.t_D, cfg.acc_max, cfg.dec_max, cfg.a_d) for p in parents]
    s_lo = min(r.s_lo for r in rects)
    s_hi = max(r.s_hi for r in rects)
    d_lo = min(r.d_lo for r in rects)
    d_hi = max(r.d_hi for r in rects)
    lo_clip, hi_clip = d_bounds if d_bounds is not None else (sl.d0, sl.d_hi)
    d_lo, d_hi = max(d_lo, lo_clip), min(d_hi, hi_clip)
    s_lo, s_hi = max(s_lo, sl.s0), min(s_hi, sl.s_hi)
    if d_lo > d_hi or s_lo > s_hi:
        raise LayerStarved(layer)
    rs = np.array([[r.s_lo, r.s_hi, r.d_lo, r.d_hi] for r in rects])
    s_vals = np.linspace(s_lo, s_hi, cfg.K_s) if cfg.K_s > 1 else np.array([0.5 * (s_lo + s_hi)])
    s_vals = np.unique(s_vals)
    d_vals = np.unique(lateral_lattice(d_lo, d_hi, cfg.K_d, d_tgt))
    S, D = np.meshgrid(s_vals, d_vals, indexing="ij")
    S = S.ravel()
    D = D.ravel()
    free = sl.free_points(S, D)
    ps = np.array([p.s for p in parents])
    pdd = np.array([p.d for p in parents])
    v_cap = cfg.v_max * cfg.t_D + _TOL
    slope = math.tan(cfg.max_heading)
    nodes = []
    has_child = np.zeros(len(parents), dtype=bool)

    def attach(s, d):
        inside = ((rs[:, 0] - _TOL <= s) & (s <= rs[:, 1] + _TOL)
                  & (rs[:, 2] - _TOL <= d) & (d <= rs[:, 3] + _TOL)
                  & (s - ps <= v_cap) & (np.abs(d - pdd) <= slope * (s - ps) + _TOL))
        claim = [int(k) for k in np.flatnonzero(inside)
                 if _segment_free(sl.occupied, sl.s0, sl.d0, sl.h, ps[k], pdd[k], s, d)]
        if footprint is not None and claim:
            lo, hi, lo_st, hi_st = body_clearance(sl, s, d, cfg.eps_s)
            fits = []
            for k in claim:
                ds = s - ps[k]
                half = 0.5 * footprint.width + 0.5 * footprint.length * (abs(d - pdd[k]) / ds if ds > 0 else 0.0)
                if (lo_st or d - half >= lo - _TOL) and (hi_st or d + half <= hi + _TOL):
                    fits.append(k)
            claim = fits
        if not claim:
            return False
        dist = [(s - ps[k]) ** 2 + (d - pdd[k]) ** 2 for k in claim]
        near = claim[int(np.argmin(dist))]
        nodes.append(SampleNode(layer, float(s), float(d),
                                (float(s) - ps[near]) / cfg.t_D, (float(d) - pdd[near]) / cfg.t_D,
                                claim, near))
        has_child[claim] = True
        return True

    for s, d, ok in zip(S, D, free):
        if ok:
            attach(s, d)
    for k in range(len(parents)):
        if has_child[k]:
            continue
        for s, d in _fallback_points(rs[k], parents[k], cfg, d_tgt, (s_lo, s_hi, d_lo, d_hi)):
            if sl.free_points(np.array([s]), np.array([d]))[0] and attach(s, d):
                break
    if not nodes:
        raise LayerStarved(layer)
    return nodes, rects


def _fallback_points(r, parent, cfg, d_tgt, box):
    """3 x 3 points of one rectangle (clipped to ``box``): continuation first, then nearest the target."""
    s0, s1 = max(r[0], box[0]), min(r[1], box[1], parent.s + cfg.v_max * cfg.t_D)
    d0, d1 = max(r[2], box[2]), min(r[3], box[3])
    if s0 > s1 or d0 > d1:
        return []
    sc = min(max(parent.s + parent.v_s * cfg.t_D, s0), s1)
    reach = math.tan(cfg.max_heading) * (sc - parent.s)
    dc = min(max(parent.d + parent.v_d * cfg.t_D, d0, parent.d - reach), d1, parent.d + reach)
    pts = [(sc, dc)]
    rest = [(s, d) for s in (s0, sc, s1) for d in (d0, dc, d1) if (s, d) != (sc, dc)]
    rest.sort(key=lambda p: (abs(p[1] - d_tgt), abs(p[0] - sc)))
    return pts + rest


def _prune(layers: list, terminal_idx: list) -> list:
    """Keep only nodes on some path from layer 0 to the given terminal nodes."""
    keep = [None] * len(layers)
    keep[-1] = sorted(terminal_idx)
    for t in range(len(layers) - 1, 0, -1):
        needed = set()
        for i in keep[t]:
            needed.update(layers[t][i].parents)
        keep[t - 1] = sorted(needed)
    out = []
    remap_prev = None
    for t, layer in enumerate(layers):
        remap = {old: new for new, old in enumerate(keep[t])}
        new_layer = []
        for old in keep[t]:
            n = layer[old]
            if remap_prev is not None:
                n = replace(n, parents=[remap_prev[p] for p in n.parents if p in remap_prev],
                            nearest=remap_prev.get(n.nearest, -1))
            new_layer.append(n)
        out.append(new_layer)
        remap_prev = remap
    return out


class CandidateSampler:
    """Layer generator that keeps every layer it has grown.

    Layers do not depend on the termination rule, so asking again with a larger
    ``min_layers`` only grows the missing layers.
    """

    def __init__(self, s0: float, d0: float, v_s0: float, v_d0: float, strom: Strom, cfg: PlannerConfig,
                 d_tgt: float, d_bounds=None, footprint: Footprint | None = None):
        sl0 = strom.slice(0)
        if not sl0.contains(s0, d0) or not sl0.free_at(s0, d0):
            raise PlanningError("start cell occupied")
        self.strom = strom
        self.cfg = cfg
        self.d_tgt = float(d_tgt)
        self.d_bounds = d_bounds
        self.footprint = footprint
        self.layers = [[SampleNode(0, float(s0), float(d0), float(v_s0), float(v_d0))]]
        self.m_max = min(cfg.M_max, len(strom) - 1)

    def _terminal(self, t):
        return [i for i, n in enumerate(self.layers[t]) if abs(self.d_tgt - n.d) <= self.cfg.delta]

    def graph(self, min_layers: int = 0) -> CandidateGraph:
        """Graph ending at the first layer ``t >= min_layers`` holding a terminal node."""
        t = max(min_layers, 0)
        while t <= self.m_max:
            while len(self.layers) <= t:
                k = len(self.layers)
                try:
                    nodes, _ = global_sample_layer(self.layers[-1], self.strom.slice(k), k, self.cfg,
                                                   self.d_tgt, self.d_bounds, self.footprint)
                except LayerStarved as exc:
                    raise NoFeasibleLaneChange(f"no feasible lane change ({exc})", layers_attempted=k) from exc
                self.layers.append(nodes)
            term = self._terminal(t)
            if term:
                return CandidateGraph(_prune(self.layers[: t + 1], term), self.d_tgt, self.cfg.t_D, t)
            t += 1
        raise NoFeasibleLaneChange(layers_attempted=self.m_max)


def generate_candidates(s0: float, d0: float, v_s0: float, v_d0: float, strom: Strom, cfg: PlannerConfig,
                        d_tgt: float, min_layers: int = 0, d_bounds=None,
                        footprint: Footprint | None = None) -> CandidateGraph:
    """Grow layers until one holds a point within ``delta`` of the target lateral position."""
    return CandidateSampler(s0, d0, v_s0, v_d0, strom, cfg, d_tgt, d_bounds, footprint).graph(min_layers)


def reach_windows(s0: float, v_s0: float, d_lo: float, d_hi: float, cfg: PlannerConfig, n_slices: int,
                  margin: float) -> list:
    """Per-slice raster windows covering every point the sampler can reach.

    The extreme mean-speed sequences of the reach recursion bound the
    longitudinal span of layer ``k``. Slice ``k`` also covers layer ``k - 1`` so
    parent-to-child segments can be checked in it; ``margin`` pads both ends.
    """
    from .strom import Window
    step = cfg.t_D
    lo = hi = float(s0)
    v_lo = v_hi = float(v_s0)
    wins = []
    for k in range(n_slices):
        prev_lo = lo
        if k > 0:
            dlo = max(0.0, v_lo * step - 0.5 * cfg.dec_max * step ** 2)
            dhi = min(v_hi * step + 0.5 * cfg.acc_max * step ** 2, cfg.v_max * step)
            lo, hi = lo + dlo, hi + max(dhi, dlo)
            v_lo, v_hi = dlo / step, max(dhi, dlo) / step
        wins.append(Window(prev_lo - margin, hi + margin, d_lo, d_hi))
    return wins
