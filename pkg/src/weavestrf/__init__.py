"""Spatial-temporal risk field and lane-change planner for expressway weaving segments."""
from .config import PlannerConfig
from .geometry import BodyPoint, Footprint, FrenetPoint, footprint_distance, from_body_frame, to_body_frame
from .params import FieldParams
from .scene import Intent, LineKind, Obstacle, PredictedTrajectory, RoadModel, Scene, VehicleState
from .sim import RunMetrics, Scenario, run_scenario, sensitivity_sweep

__all__ = [
    "BodyPoint", "FieldParams", "Footprint", "FrenetPoint", "Intent", "LineKind", "Obstacle",
    "PlannerConfig", "PredictedTrajectory", "RoadModel", "RunMetrics", "Scenario", "Scene",
    "VehicleState", "footprint_distance", "from_body_frame", "run_scenario", "sensitivity_sweep",
    "to_body_frame",
]
