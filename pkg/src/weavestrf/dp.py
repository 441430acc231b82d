"""Rough-path selection over the candidate graph by dynamic programming.

The cost of a path with knots p_0..p_m is

    J = w_eff * m + sum_i [w_dyn * kappa(p_{i-2}, p_{i-1}, p_i) + w_smo * (second difference of d)^2]

and any knot whose three-point curvature exceeds ``kappa_max`` rejects the path.
Both per-stage terms look two knots back, so the DP state is the pair
(previous node, current node).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NoDynamicallyFeasiblePath
from .sampler import CandidateGraph


@dataclass(frozen=True)
class PathCostWeights:
    w_eff: float = 1.0
    w_dyn: float = 0.5
    w_smo: float = 2.0
    kappa_max: float = 2.0

    def __post_init__(self):
        if min(self.w_eff, self.w_dyn, self.w_smo) < 0:
            raise ValueError("cost weights must be nonnegative")
        if not self.kappa_max > 0:
            raise ValueError("kappa_max must be positive")

    @classmethod
    def from_config(cls, cfg) -> "PathCostWeights":
        return cls(cfg.w_eff, cfg.w_dyn, cfg.w_smo, cfg.kappa_max)


@dataclass
class RoughPath:
    t: np.ndarray
    s: np.ndarray
    d: np.ndarray
    cost: float = 0.0
    nodes: tuple = ()   # node index per layer

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.s = np.asarray(self.s, dtype=float)
        self.d = np.asarray(self.d, dtype=float)

    @property
    def m(self) -> int:
        return len(self.t) - 1

    def __len__(self):
        return len(self.t)


def discrete_curvature(p0, p1, p2) -> float:
    """Reciprocal circumradius of three (s, d) points; 0 when collinear or degenerate."""
    ax, ay = p1[0] - p0[0], p1[1] - p0[1]
    bx, by = p2[0] - p0[0], p2[1] - p0[1]
    cross = abs(ax * by - ay * bx)
    a = math.hypot(ax, ay)
    b = math.hypot(bx, by)
    c = math.hypot(p2[0] - p1[0], p2[1] - p1[1])
    if cross == 0.0 or a * b * c == 0.0:
        return 0.0
    # 4 * area / (a b c) with area = cross / 2
    return 2.0 * cross / (a * b * c)


def _curvature_vec(s0, d0, s1, d1, s2, d2):
    ax, ay = s1 - s0, d1 - d0
    bx, by = s2 - s0, d2 - d0
    cross = np.abs(ax * by - ay * bx)
    den = np.hypot(ax, ay) * np.hypot(bx, by) * np.hypot(s2 - s1, d2 - d1)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where((cross == 0) | (den == 0), 0.0, 2.0 * cross / den)
    return k


def _stage_cost(s0, d0, s1, d1, s2, d2, w: PathCostWeights):
    k = _curvature_vec(s0, d0, s1, d1, s2, d2)
    sd = (d2 - d1) - (d1 - d0)
    cost = w.w_dyn * k + w.w_smo * sd * sd
    return np.where(k > w.kappa_max, np.inf, cost)


def path_cost(path: RoughPath, weights: PathCostWeights) -> float:
    """Cost of a knot sequence; ``inf`` when any knot breaks the curvature limit."""
    s, d = path.s, path.d
    J = weights.w_eff * path.m
    for i in range(2, len(s)):
        J = J + float(_stage_cost(s[i - 2], d[i - 2], s[i - 1], d[i - 1], s[i], d[i], weights))
    return J


def _path_from_nodes(graph: CandidateGraph, idx, cost, t0=0.0) -> RoughPath:
    nodes = [graph.layers[t][i] for t, i in enumerate(idx)]
    t = t0 + graph.t_D * np.arange(len(nodes))
    return RoughPath(t, [n.s for n in nodes], [n.d for n in nodes], cost, tuple(idx))


def dp_optimal_path(graph: CandidateGraph, weights: PathCostWeights, t0: float = 0.0) -> RoughPath:
    layers = graph.layers[: graph.terminal + 1]
    m = len(layers) - 1
    base = weights.w_eff * m
    d_tgt = graph.d_tgt
    if m == 0:
        return _path_from_nodes(graph, [0], base, t0)
    S = [np.array([n.s for n in layer]) for layer in layers]
    D = [np.array([n.d for n in layer]) for layer in layers]
    # tie-break order: closer to the target lane first, then lower index
    prefs = [np.lexsort((np.arange(len(layer)), np.abs(D[t] - d_tgt))) for t, layer in enumerate(layers)]

    # C[p, c]: best cost of a partial path ending with edge p -> c; B[p, c] the node before p
    n0, n1 = len(layers[0]), len(layers[1])
    C = np.full((n0, n1), np.inf)
    for c, node in enumerate(layers[1]):
        for p in node.parents:
            C[p, c] = base
    back = [None, None]
    for t in range(2, m + 1):
        prev_n, cur_n = len(layers[t - 1]), len(layers[t])
        Cn = np.full((prev_n, cur_n), np.inf)
        Bn = np.full((prev_n, cur_n), -1, dtype=np.int64)
        order = prefs[t - 2]
        sp, dp_ = S[t - 2][order], D[t - 2][order]
        for c, node in enumerate(layers[t]):
            P = np.asarray(node.parents, dtype=np.int64)
            stage = _stage_cost(sp[:, None], dp_[:, None], S[t - 1][P][None, :], D[t - 1][P][None, :],
                                S[t][c], D[t][c], weights)
            tot = C[order][:, P] + stage
            k = np.argmin(tot, axis=0)
            best = tot[k, np.arange(P.size)]
            Cn[P, c] = best
            Bn[P, c] = np.where(np.isfinite(best), order[k], -1)
        C = Cn
        back.append(Bn)

    # terminal: minimum cost, then closest to target, then lowest indices
    cand = []
    for c in range(len(layers[m])):
        for p in range(len(layers[m - 1])):
            if np.isfinite(C[p, c]):
                cand.append((C[p, c], abs(D[m][c] - d_tgt), c, abs(D[m - 1][p] - d_tgt), p))
    if not cand:
        raise NoDynamicallyFeasiblePath()
    cost, _, c, _, p = min(cand)
    idx = [c, p]
    for t in range(m, 1, -1):
        pp = int(back[t][p, c])
        idx.append(pp)
        c, p = p, pp
    idx.reverse()
    return _path_from_nodes(graph, idx, float(cost), t0)


def enumerate_paths(graph: CandidateGraph):
    """Every layered root-to-terminal node-index sequence (small graphs only)."""
    layers = graph.layers[: graph.terminal + 1]

    def rec(t, i):
        if t == 0:
            yield [i]
            return
        for p in layers[t][i].parents:
            for head in rec(t - 1, p):
                yield head + [i]

    for i in range(len(layers[-1])):
        yield from rec(len(layers) - 1, i)
