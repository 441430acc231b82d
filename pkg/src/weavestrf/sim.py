"""Scenario playback: run the full planner on one scenario and collect metrics."""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ._kernels import obstacle_field_points
from .config import PlannerConfig
from .dp import PathCostWeights, RoughPath, dp_optimal_path
from .errors import NoFeasibleLaneChange, PlanningError
from .params import FieldParams
from .sampler import CandidateGraph, CandidateSampler, reach_windows
from .scene import Obstacle, PredictedTrajectory, RoadModel, Scene, VehicleState
from .smoothing import LAT_BUDGET, SPEED_SUBSTEPS, PlannedTrajectory, plan_parallel
from .strom import Strom

TIMING_KEYS = ("strom_build_ms", "sampling_ms", "path_evaluation_ms", "path_smoothing_ms",
               "speed_smoothing_ms", "parallel_smoothing_ms", "total_ms")
EXPOSURE_SUBSTEPS = SPEED_SUBSTEPS


@dataclass
class Scenario:
    road: RoadModel
    ego: VehicleState
    target_lane: int
    obstacles: list = field(default_factory=list)
    params: FieldParams = field(default_factory=FieldParams)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    name: str = ""
    kind: str = ""

    def __post_init__(self):
        if not 0 <= self.target_lane < self.road.n_lanes:
            raise ValueError(f"target lane {self.target_lane} outside road with {self.road.n_lanes} lanes")

    @property
    def d_tgt(self) -> float:
        return self.road.lane_center(self.target_lane)

    def scene(self) -> Scene:
        return Scene(self.road, self.ego, list(self.obstacles))


@dataclass
class RunMetrics:
    completion_time: float
    mean_speed: float
    acc_min: float
    acc_max: float
    max_lat_acc: float
    accel_profile: list
    exposure_t: list
    exposure: list
    timings: dict
    layers: int
    attempts: int
    R_max: float
    R_min: float

    def to_dict(self) -> dict:
        return {
            "completion_time": self.completion_time, "mean_speed": self.mean_speed,
            "acc_min": self.acc_min, "acc_max": self.acc_max, "max_lat_acc": self.max_lat_acc,
            "max_exposure": max(self.exposure) if self.exposure else 0.0,
            "accel_profile": self.accel_profile, "timings": self.timings, "layers": self.layers,
            "attempts": self.attempts, "R_max": self.R_max, "R_min": self.R_min,
        }


@dataclass
class PlanResult:
    trajectory: PlannedTrajectory
    rough: RoughPath
    graph: CandidateGraph
    strom: Strom
    timings: dict
    attempts: int


def noisy_obstacles(obstacles, rng: np.random.Generator, sigma_s: float, sigma_d: float) -> list:
    """Predictions perturbed by independent Gaussian position noise (playback unchanged)."""
    if sigma_s == 0 and sigma_d == 0:
        return list(obstacles)
    out = []
    for ob in obstacles:
        p = ob.prediction
        n = len(p)
        pred = PredictedTrajectory(p.t, p.s + rng.normal(0.0, sigma_s, n), p.d + rng.normal(0.0, sigma_d, n),
                                   p.v, p.a, p.yaw)
        out.append(Obstacle(ob.state, pred, ob.name))
    return out


def min_layers_hint(ego: VehicleState, d_tgt: float, cfg: PlannerConfig) -> int:
    """Layers needed for a rest-to-rest lateral move within the smoothed lateral-acceleration budget."""
    gap = abs(d_tgt - ego.pos.d) - cfg.delta
    if gap <= 0:
        return 0
    return math.ceil(2.0 * math.sqrt(gap / (LAT_BUDGET * cfg.a_lat_max)) / cfg.t_D)


def exposure_trace(traj: PlannedTrajectory, obstacles, params: FieldParams, dt: float):
    """Obstacle field at the planned pose with obstacles played back to the same time."""
    n = int(round(traj.t[-1] / dt)) if len(traj.t) > 1 else 0
    ts = traj.t[0] + dt * np.arange(n + 1)
    s, d = traj.sample(ts)[:2]
    risk = np.zeros(ts.size)
    for k, tau in enumerate(ts):
        buf = np.zeros(1)
        for ob in obstacles:
            obstacle_field_points(s[k:k + 1], d[k:k + 1], float(tau), ob, params, out=buf)
        risk[k] = buf[0]
    return ts, risk


def _check(traj: PlannedTrajectory, obstacles, params, cfg, threshold):
    """Reason the merged trajectory is unusable, or None."""
    dt = cfg.t_D / EXPOSURE_SUBSTEPS
    ts = traj.t[0] + dt * np.arange(int(round((traj.t[-1] - traj.t[0]) / dt)) + 1)
    s, d, sd, dd, sdd, ddd = traj.sample(ts)
    if np.abs(ddd).max(initial=0.0) > cfg.a_lat_max:
        return f"lateral acceleration {np.abs(ddd).max():.3f} exceeds {cfg.a_lat_max}"
    if sd.min(initial=0.0) < -1e-9 or sd.max(initial=0.0) > cfg.v_max + 1e-9:
        return "speed leaves [0, v_max] between knots"
    _, risk = exposure_trace(traj, obstacles, params, dt)
    if risk.size and risk.max() >= threshold:
        return f"exposure {risk.max():.3f} reaches threshold {threshold}"
    return None


def plan(scenario: Scenario, seed: int = 0, threshold: float | None = None, threads: int | None = None) -> PlanResult:
    cfg = scenario.planner
    params = scenario.params
    thr = params.R_max if threshold is None else float(threshold)
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    obstacles = noisy_obstacles(scenario.obstacles, rng, cfg.pred_noise_s, cfg.pred_noise_d)
    scene = Scene(scenario.road, scenario.ego, obstacles)
    ego = scenario.ego
    road = scenario.road
    margin = cfg.margin if cfg.margin is not None else ego.footprint.length + cfg.h
    windows = reach_windows(ego.pos.s, ego.v, road.d_min, road.d_max, cfg, cfg.M_max + 1, margin)
    strom = Strom(scene, params, windows, cfg.h, cfg.t_D, thr)
    d_tgt = scenario.d_tgt
    weights = PathCostWeights.from_config(cfg)
    dp0 = ego.v_d / ego.v if ego.v > 0 else 0.0
    timings = dict.fromkeys(TIMING_KEYS, 0.0)
    min_layers = min_layers_hint(ego, d_tgt, cfg)
    last_err = None
    b0 = strom.build_seconds
    t0 = time.perf_counter()
    try:
        sampler = CandidateSampler(ego.pos.s, ego.pos.d, ego.v, ego.v_d, strom, cfg, d_tgt, footprint=ego.footprint)
    except PlanningError as exc:
        raise _with_timings(exc, timings, start)
    timings["strom_build_ms"] += 1e3 * (strom.build_seconds - b0)
    timings["sampling_ms"] += 1e3 * (time.perf_counter() - t0 - (strom.build_seconds - b0))
    for attempt in range(1, cfg.resample_attempts + 1):
        if min_layers > cfg.M_max:
            break
        b0 = strom.build_seconds
        t0 = time.perf_counter()
        try:
            graph = sampler.graph(min_layers)
        except PlanningError as exc:
            raise _with_timings(exc, timings, start)
        timings["strom_build_ms"] += 1e3 * (strom.build_seconds - b0)
        timings["sampling_ms"] += 1e3 * (time.perf_counter() - t0 - (strom.build_seconds - b0))
        t0 = time.perf_counter()
        try:
            rough = dp_optimal_path(graph, weights, t0=0.0)
        except PlanningError as exc:
            timings["path_evaluation_ms"] += 1e3 * (time.perf_counter() - t0)
            last_err = exc
            min_layers = graph.terminal + 1
            continue
        timings["path_evaluation_ms"] += 1e3 * (time.perf_counter() - t0)
        b0 = strom.build_seconds
        try:
            traj = plan_parallel(rough, strom, cfg, d_tgt, ego.v, ego.footprint, dp0, threads)
            reason = _check(traj, obstacles, params, cfg, thr)
        except PlanningError as exc:
            traj, reason = None, None
            last_err = exc
        timings["strom_build_ms"] += 1e3 * (strom.build_seconds - b0)
        if traj is not None:
            timings["path_smoothing_ms"] = traj.timings["path"]
            timings["speed_smoothing_ms"] = traj.timings["speed"]
            timings["parallel_smoothing_ms"] = traj.timings["parallel"]
            if reason is None:
                timings["total_ms"] = 1e3 * (time.perf_counter() - start)
                return PlanResult(traj, rough, graph, strom, timings, attempt)
            last_err = PlanningError(f"smoothed trajectory rejected: {reason}")
        min_layers = graph.terminal + 1
    if last_err is None:
        last_err = NoFeasibleLaneChange(layers_attempted=cfg.M_max)
    raise _with_timings(last_err, timings, start)


def _with_timings(exc: PlanningError, timings: dict, start: float) -> PlanningError:
    timings["total_ms"] = 1e3 * (time.perf_counter() - start)
    exc.timings = timings
    return exc


def completion_time(traj: PlannedTrajectory, d_tgt: float, delta: float) -> float:
    hit = np.flatnonzero(np.abs(traj.d - d_tgt) <= delta)
    return float(traj.t[hit[0]]) if hit.size else math.inf


def collect_metrics(result: PlanResult, scenario: Scenario, threshold: float | None = None) -> RunMetrics:
    traj = result.trajectory
    cfg = scenario.planner
    dt = cfg.t_D / EXPOSURE_SUBSTEPS
    ts, risk = exposure_trace(traj, scenario.obstacles, scenario.params, dt)
    _, _, sd, _, sdd, ddd = traj.sample(ts)
    return RunMetrics(
        completion_time=completion_time(traj, scenario.d_tgt, cfg.delta),
        mean_speed=float(np.mean(traj.s_dot)),
        acc_min=float(min(sdd.min(), traj.s_ddot.min())),
        acc_max=float(max(sdd.max(), traj.s_ddot.max())),
        max_lat_acc=float(np.abs(ddd).max()),
        accel_profile=[float(a) for a in traj.s_ddot],
        exposure_t=[float(t) for t in ts],
        exposure=[float(r) for r in risk],
        timings=dict(result.timings),
        layers=result.rough.m,
        attempts=result.attempts,
        R_max=scenario.params.R_max if threshold is None else float(threshold),
        R_min=scenario.params.R_min,
    )


def run_scenario(scenario: Scenario, seed: int = 0, threshold: float | None = None, threads: int | None = None):
    """Plan one scenario; returns ``(trajectory, metrics)``."""
    try:
        result = plan(scenario, seed, threshold, threads)
    except PlanningError as exc:
        exc.scenario = scenario.name
        if scenario.name and exc.args and not str(exc.args[0]).startswith(scenario.name):
            exc.args = (f"{scenario.name}: {exc.args[0]}",) + exc.args[1:]
        raise
    return result.trajectory, collect_metrics(result, scenario, threshold)


def write_outputs(out_dir, traj: PlannedTrajectory, metrics: RunMetrics) -> list:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [traj.to_csv(out / "trajectory.csv")]
    p = out / "metrics.json"
    p.write_text(json.dumps(metrics.to_dict(), indent=2, sort_keys=True) + "\n")
    paths.append(p)
    p = out / "exposure.csv"
    with p.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "risk", "R_max", "R_min"])
        for t, r in zip(metrics.exposure_t, metrics.exposure):
            w.writerow([repr(t), repr(r), repr(metrics.R_max), repr(metrics.R_min)])
    paths.append(p)
    return paths


def sensitivity_sweep(scenario: Scenario, values, seed: int = 0) -> list:
    """Rerun the scenario with the STROM threshold at each value; failures become rows too."""
    values = [float(v) for v in values]
    if len(set(values)) != len(values):
        raise ValueError("R_max values must be distinct")
    rows = []
    for v in values:
        try:
            _, m = run_scenario(scenario, seed, threshold=v)
            rows.append({"R_max": v, "status": "ok", "completion_time": m.completion_time,
                         "acc_min": m.acc_min, "acc_max": m.acc_max, "max_lat_acc": m.max_lat_acc,
                         "max_exposure": max(m.exposure), "error": ""})
        except PlanningError as exc:
            rows.append({"R_max": v, "status": "failed", "completion_time": math.inf, "acc_min": math.nan,
                         "acc_max": math.nan, "max_lat_acc": math.nan, "max_exposure": math.nan,
                         "error": str(exc)})
    return rows


def with_threshold(scenario: Scenario, r_max: float) -> Scenario:
    return replace(scenario, params=scenario.params.with_(R_max=r_max))
