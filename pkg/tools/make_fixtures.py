"""Regenerate the scenario fixtures under tests/fixtures/scenarios."""
from __future__ import annotations

import sys
from pathlib import Path

from weavestrf.geometry import FrenetPoint
from weavestrf.scene import Intent, Obstacle, PredictedTrajectory, RoadModel, VehicleState
from weavestrf.scenario_io import save_scenario
from weavestrf.sim import Scenario

ROAD = RoadModel.weaving(3)
HORIZON = 12.0


def car(name, s, lane, v, a=0.0):
    p = FrenetPoint(s, ROAD.lane_center(lane))
    st = VehicleState(p, v=v, a=a)
    return Obstacle(st, PredictedTrajectory.constant_velocity(p, v, horizon=HORIZON, a=a), name)


def scenario(name, kind, s0, lane, v, target, obstacles):
    intent = Intent.MERGE if kind.startswith("on-ramp") else Intent.EXIT
    ego = VehicleState(FrenetPoint(s0, ROAD.lane_center(lane)), v=v, intent=intent)
    return Scenario(ROAD, ego, target, obstacles, name=name, kind=kind)


# (name, kind, ego s, ego lane, ego v, target lane, obstacles as (s offset, lane, v))
SPECS = [
    ("on_simple_empty", "on-ramp/simple", 20, 0, 15, 1, []),
    ("on_simple_lead", "on-ramp/simple", 20, 0, 15, 1, [(30, 0, 10)]),
    ("on_simple_gap", "on-ramp/simple", 30, 0, 14, 1, [(40, 1, 16), (-35, 1, 14)]),
    ("on_simple_fast", "on-ramp/simple", 40, 0, 18, 1, [(45, 0, 15), (60, 1, 19)]),
    ("on_simple_squeeze", "on-ramp/simple", 40, 0, 15, 1, [(26, 0, 12.5), (-45, 1, 15)]),
    ("on_cong_a", "on-ramp/congested", 20, 0, 15, 1, [(20, 0, 10), (-15, 1, 15), (40, 1, 15), (10, 2, 18), (60, 2, 17)]),
    ("on_cong_b", "on-ramp/congested", 34.6, 0, 16.4, 1, [(50.0, 0, 14.6), (-46.5, 1, 15.9), (36.9, 1, 18.4), (1.6, 2, 19.8), (61.2, 2, 18.3)]),
    ("on_cong_c", "on-ramp/congested", 39.8, 0, 13.8, 1, [(54.0, 0, 11.7), (-50.8, 1, 13.6), (44.5, 1, 14.8), (-19.3, 2, 16.3), (78.9, 2, 14.7)]),
    ("on_cong_d", "on-ramp/congested", 39.0, 0, 15.0, 1, [(38.6, 0, 11.2), (-60.6, 1, 14.9), (55.7, 1, 15.9), (2.0, 2, 16.1), (70.1, 2, 16.7)]),
    ("off_simple_empty", "off-ramp/simple", 20, 1, 15, 0, []),
    ("off_simple_lead", "off-ramp/simple", 20, 1, 15, 0, [(35, 1, 11)]),
    ("off_simple_gap", "off-ramp/simple", 30, 1, 15, 0, [(45, 0, 16), (-40, 0, 15)]),
    ("off_simple_fast", "off-ramp/simple", 40, 1, 18, 0, [(50, 1, 16), (-30, 2, 20)]),
    ("off_cong_a", "off-ramp/congested", 22.4, 1, 14.6, 0, [(46.3, 1, 11.1), (-64.8, 0, 15.2), (59.9, 0, 14.7), (-3.1, 2, 17.8), (69.3, 2, 15.5)]),
    ("off_cong_b", "off-ramp/congested", 31.9, 1, 15.1, 0, [(56.6, 1, 12.8), (-43.2, 0, 15.3), (55.7, 0, 16.1), (7.7, 2, 17.1), (60.9, 2, 15.7)]),
    ("off_cong_c", "off-ramp/congested", 38.5, 1, 14.3, 0, [(46.8, 1, 11.2), (-66.8, 0, 13.5), (40.0, 0, 16.0), (7.2, 2, 17.8), (65.8, 2, 15.5)]),
    ("off_cong_d", "off-ramp/congested", 25.9, 1, 13.1, 0, [(35.2, 1, 9.6), (-66.7, 0, 12.2), (59.5, 0, 13.9), (-7.3, 2, 14.2), (55.6, 2, 14.1)]),
]


def build():
    out = []
    for name, kind, s0, lane, v, target, obs in SPECS:
        cars = [car(f"v{i}", s0 + ds, ln, vo) for i, (ds, ln, vo) in enumerate(obs)]
        out.append(scenario(name, kind, s0, lane, v, target, cars))
    return out


def main(dest=None):
    dest = Path(dest or Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "scenarios")
    dest.mkdir(parents=True, exist_ok=True)
    for sc in build():
        save_scenario(sc, dest / f"{sc.name}.json")
    return 0


if __name__ == "__main__":
    sys.exit(main(*sys.argv[1:]))
