"""Scenario JSON files: sections road / ego / obstacles / planner.

Obstacle trajectories are arrays of ``[t, s, d, v, a, yaw]`` rows and serve both
as playback and as the planner's prediction.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .config import PlannerConfig
from .errors import ScenarioError
from .geometry import Footprint, FrenetPoint
from .params import FieldParams
from .scene import (DEFAULT_LANE_WIDTH, Intent, LaneLine, LineKind, Obstacle, PredictedTrajectory, RoadModel,
                    VehicleState)
from .sim import Scenario


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LaneLineModel(_Model):
    d: float
    kind: Literal["boundary", "solid", "dashed"]


class RoadModelFile(_Model):
    n_lanes: int = Field(3, ge=1)
    lane_width: float = Field(DEFAULT_LANE_WIDTH, gt=0)
    zone_start: float = 0.0
    zone_end: float = 200.0
    aux_lanes: list[int] = [0]
    lane_lines: list[LaneLineModel] | None = None


class EgoModel(_Model):
    s: float = 0.0
    d: float
    v: float = Field(ge=0)
    a: float = 0.0
    yaw: float = 0.0
    v_d: float = 0.0
    length: float = Field(5.0, gt=0)
    width: float = Field(2.0, gt=0)
    mass: float = Field(1.0, gt=0)
    intent: Literal["merge", "exit", "through"] = "through"
    target_lane: int = Field(ge=0)


class ObstacleModel(_Model):
    name: str = ""
    length: float = Field(5.0, gt=0)
    width: float = Field(2.0, gt=0)
    mass: float = Field(1.0, gt=0)
    trajectory: list[list[float]]

    @field_validator("trajectory")
    @classmethod
    def _rows(cls, rows):
        if not rows:
            raise ValueError("trajectory needs at least one row")
        for i, r in enumerate(rows):
            if len(r) != 6:
                raise ValueError(f"row {i} must be [t, s, d, v, a, yaw]")
        for i in range(1, len(rows)):
            if not rows[i][0] > rows[i - 1][0]:
                raise ValueError(f"row {i}: times must be strictly increasing")
        return rows


class PlannerModel(_Model):
    model_config = ConfigDict(extra="allow")
    field_params: Union[dict, str, None] = None


class ScenarioFile(_Model):
    name: str = ""
    kind: str = ""
    road: RoadModelFile = RoadModelFile()
    ego: EgoModel
    obstacles: list[ObstacleModel] = []
    planner: PlannerModel = PlannerModel()


def _road(m: RoadModelFile) -> RoadModel:
    if m.lane_lines is None:
        return RoadModel.weaving(m.n_lanes, m.lane_width, m.zone_start, m.zone_end, tuple(m.aux_lanes))
    lines = tuple(LaneLine(ln.d, LineKind[ln.kind.upper()]) for ln in m.lane_lines)
    return RoadModel(lines, m.lane_width, m.zone_start, m.zone_end, tuple(m.aux_lanes))


def scenario_from_dict(data: dict, base_dir=None) -> Scenario:
    try:
        m = ScenarioFile.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"])
        raise ScenarioError(f"field {loc}: {err['msg']}") from exc
    try:
        road = _road(m.road)
        e = m.ego
        ego = VehicleState(FrenetPoint(e.s, e.d), e.yaw, e.v, e.a, e.mass, Footprint(e.length, e.width),
                           Intent(e.intent), e.v_d)
        obstacles = []
        for i, o in enumerate(m.obstacles):
            traj = PredictedTrajectory.from_rows(o.trajectory)
            r0 = o.trajectory[0]
            st = VehicleState(FrenetPoint(r0[1], r0[2]), r0[5], max(r0[3], 0.0), r0[4], o.mass,
                              Footprint(o.length, o.width))
            obstacles.append(Obstacle(st, traj, o.name or f"obstacle{i}"))
        knobs = dict(m.planner.model_extra or {})
        fp = m.planner.field_params
        if isinstance(fp, str):
            path = Path(fp) if base_dir is None else Path(base_dir) / fp
            params = FieldParams.load(path)
        else:
            params = FieldParams.from_dict(fp or {})
        cfg = PlannerConfig.from_dict(knobs)
        horizon = cfg.M_max * cfg.t_D
        for ob in obstacles:
            if ob.prediction.t[-1] < horizon - 1e-9:
                raise ScenarioError(f"obstacle {ob.name!r}: trajectory ends at t={ob.prediction.t[-1]:g} "
                                    f"before the planning horizon {horizon:g} s")
        return Scenario(road, ego, e.target_lane, obstacles, params, cfg, m.name, m.kind)
    except ScenarioError:
        raise
    except (ValueError, TypeError, KeyError, OSError) as exc:
        raise ScenarioError(str(exc)) from exc


def scenario_to_dict(sc: Scenario) -> dict:
    road = sc.road
    e = sc.ego
    planner = sc.planner.to_dict()
    planner["field_params"] = sc.params.to_dict()
    return {
        "name": sc.name,
        "kind": sc.kind,
        "road": {
            "n_lanes": road.n_lanes, "lane_width": road.lane_width,
            "zone_start": road.zone_start, "zone_end": road.zone_end, "aux_lanes": list(road.aux_lanes),
            "lane_lines": [{"d": ln.d, "kind": ln.kind.name.lower()} for ln in road.lane_lines],
        },
        "ego": {
            "s": e.pos.s, "d": e.pos.d, "v": e.v, "a": e.a, "yaw": e.yaw, "v_d": e.v_d,
            "length": e.footprint.length, "width": e.footprint.width, "mass": e.mass,
            "intent": e.intent.value, "target_lane": sc.target_lane,
        },
        "obstacles": [
            {"name": ob.name, "length": ob.state.footprint.length, "width": ob.state.footprint.width,
             "mass": ob.state.mass, "trajectory": ob.prediction.rows()}
            for ob in sc.obstacles
        ],
        "planner": planner,
    }


def loads_scenario(text: str, base_dir=None) -> Scenario:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    return scenario_from_dict(data, base_dir)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {str(path)!r}: {exc.strerror}") from exc
    try:
        return loads_scenario(text, path.parent)
    except ScenarioError as exc:
        raise ScenarioError(f"{path.name}: {exc}") from exc


def dumps_scenario(sc: Scenario) -> str:
    return json.dumps(scenario_to_dict(sc), indent=1) + "\n"


def save_scenario(sc: Scenario, path) -> None:
    Path(path).write_text(dumps_scenario(sc))
