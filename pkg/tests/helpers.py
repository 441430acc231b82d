from __future__ import annotations

import numpy as np

from weavestrf.config import PlannerConfig
from weavestrf.field import total_field
from weavestrf.geometry import FrenetPoint
from weavestrf.params import FieldParams
from weavestrf.sampler import reach_windows
from weavestrf.scene import Intent, Obstacle, PredictedTrajectory, RoadModel, Scene, VehicleState
from weavestrf.sim import Scenario
from weavestrf.strom import Strom

ROAD = RoadModel.weaving(3)


def car(name, s, lane, v, a=0.0, horizon=12.0, road=ROAD):
    p = FrenetPoint(s, road.lane_center(lane))
    return Obstacle(VehicleState(p, v=v, a=a), PredictedTrajectory.constant_velocity(p, v, horizon=horizon, a=a), name)


def scenario(s0, lane, v, target, obstacles, intent=Intent.MERGE, name="case", kind="on-ramp/simple", **knobs):
    ego = VehicleState(FrenetPoint(s0, ROAD.lane_center(lane)), v=v, intent=intent)
    return Scenario(ROAD, ego, target, list(obstacles), planner=PlannerConfig(**knobs), name=name, kind=kind)


def random_scenario(rng, max_obstacles=5):
    lane = int(rng.integers(0, 3))
    target = lane + 1 if lane == 0 else lane - 1
    v = float(rng.uniform(10, 20))
    s0 = float(rng.uniform(10, 60))
    obs = []
    for i in range(int(rng.integers(0, max_obstacles + 1))):
        obs.append(car(f"v{i}", s0 + float(rng.uniform(-60, 80)), int(rng.integers(0, 3)), float(rng.uniform(8, 22))))
    return scenario(s0, lane, v, target, obs, Intent(rng.choice(["merge", "exit", "through"])))


def strom_for(sc: Scenario, threshold=None, n_slices=None) -> Strom:
    cfg = sc.planner
    margin = sc.ego.footprint.length + cfg.h
    n = cfg.M_max + 1 if n_slices is None else n_slices
    wins = reach_windows(sc.ego.pos.s, sc.ego.v, sc.road.d_min, sc.road.d_max, cfg, n, margin)
    return Strom(sc.scene(), sc.params, wins, cfg.h, cfg.t_D, sc.params.R_max if threshold is None else threshold)


def point_risk(sc: Scenario, s, d, t, params: FieldParams | None = None) -> float:
    """Total field from the reference (non-compiled) field functions."""
    return total_field(FrenetPoint(float(s), float(d)), float(t), sc.obstacles, sc.road, sc.ego.intent,
                       params or sc.params)


def cell_center(sl, i, j):
    return sl.s0 + (i + 0.5) * sl.h, sl.d0 + (j + 0.5) * sl.h


def oracle_cell_free(sc, sl, i, j, cache):
    key = (sl.epoch, i, j)
    if key not in cache:
        s, d = cell_center(sl, i, j)
        cache[key] = point_risk(sc, s, d, sl.epoch) < sl.threshold
    return cache[key]


def constant_velocity_rows(s0, d0, v, horizon=12.0, dt=0.1):
    t = np.arange(int(round(horizon / dt)) + 1) * dt
    return [[float(x), float(s0 + v * x), float(d0), float(v), 0.0, 0.0] for x in t]


def sampler_violations(sc, layers, strom, cfg, cache):
    """Re-verify grown sampler layers with the reference oracles; returns a list of problems."""
    from oracles import supercover_cells
    from weavestrf.sampler import reach_bounds

    bad = []
    for t in range(1, len(layers)):
        sl = strom.slice(t)
        for n in layers[t]:
            i, j = sl.cell(n.s, n.d)
            if not oracle_cell_free(sc, sl, i, j, cache):
                bad.append(f"layer {t}: node ({n.s:.3f}, {n.d:.3f}) in an occupied cell")
            near = layers[t - 1][n.nearest]
            if n.v_s != (n.s - near.s) / cfg.t_D or n.v_d != (n.d - near.d) / cfg.t_D:
                bad.append(f"layer {t}: mean speed differs from the nearest-parent displacement")
            for k in n.parents:
                p = layers[t - 1][k]
                if not reach_bounds(p, cfg.t_D, cfg.acc_max, cfg.dec_max, cfg.a_d).contains(n.s, n.d):
                    bad.append(f"layer {t}: node outside a parent rectangle")
                for ci, cj in supercover_cells(sl.s0, sl.d0, sl.h, (p.s, p.d), (n.s, n.d)):
                    if not oracle_cell_free(sc, sl, ci, cj, cache):
                        bad.append(f"layer {t}: edge crosses occupied cell ({ci}, {cj})")
                        break
    return bad


def random_graph(rng, max_paths=10_000):
    """Layered candidate graph with random geometry and random parent sets."""
    from weavestrf.sampler import CandidateGraph, SampleNode

    while True:
        n_layers = int(rng.integers(2, 7))
        layers = [[SampleNode(0, 0.0, float(rng.uniform(0, 3)), 0.0, 0.0)]]
        for t in range(1, n_layers):
            width = int(rng.integers(1, 6))
            layer = []
            for _ in range(width):
                k = int(rng.integers(1, len(layers[-1]) + 1))
                parents = sorted(rng.choice(len(layers[-1]), size=k, replace=False).tolist())
                s = t * float(rng.uniform(0.4, 3.0)) + float(rng.uniform(-0.2, 0.2))
                layer.append(SampleNode(t, s, float(rng.uniform(0, 3)), 0.0, 0.0, parents, parents[0]))
            layers.append(layer)
        g = CandidateGraph(layers, float(rng.uniform(0, 3)), 0.5, n_layers - 1)
        if g.n_paths() <= max_paths:
            return g
