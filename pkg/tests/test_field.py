import math

import numpy as np
import pytest

from oracles import scatter_minimum
from weavestrf._kernels import obstacle_field_points
from weavestrf.field import (E_CAP, StaticObstacle, anisotropy, charge, equivalent_time_distance, geo_field_at,
                             lane_field, mu, obstacle_field, obstacles_field, spatiotemporal_distance, total_field)
from weavestrf.geometry import BodyPoint, Footprint, FrenetPoint
from weavestrf.params import FieldParams
from weavestrf.scene import Intent, LineKind, Obstacle, PredictedTrajectory, RoadModel, VehicleState

P = FieldParams()
ROAD = RoadModel.weaving(3)


def moving(s=0.0, d=5.625, v=15.0, a=0.0, yaw=0.0, horizon=5.0):
    p = FrenetPoint(s, d)
    return Obstacle(VehicleState(p, yaw=yaw, v=v, a=a), PredictedTrajectory.constant_velocity(p, v, yaw, a=a,
                                                                                             horizon=horizon), "ob")


def test_mu_value():
    assert mu(20) == pytest.approx(0.05476, abs=1e-9)


def test_time_distance_examples():
    fp = Footprint(5, 2)
    assert equivalent_time_distance(BodyPoint(25, 0), fp, 15) == pytest.approx(1.5, abs=1e-12)
    assert equivalent_time_distance(BodyPoint(0, 3), fp, 20) == pytest.approx(2 / (0.05476 * 20), abs=1e-9)
    assert equivalent_time_distance(BodyPoint(1, 0.5), fp, 7) == 0.0


def test_time_distance_static_signals_fallback():
    with pytest.raises(StaticObstacle):
        equivalent_time_distance(BodyPoint(10, 0), Footprint(5, 2), 0.0)


def test_spatiotemporal_single_sample():
    ob = VehicleState(FrenetPoint(0, 0), v=15.0)
    traj = PredictedTrajectory([0.0], [0.0], [0.0], [15.0], [0.0], [0.0])
    assert spatiotemporal_distance(FrenetPoint(25, 0), traj, ob, 0.0, P.alpha) == pytest.approx(1.5, abs=1e-12)


def test_spatiotemporal_two_samples():
    # T* = 1.5 at dt = 0 and 0.2 at dt = 1
    ob = VehicleState(FrenetPoint(0, 0), v=15.0)
    traj = PredictedTrajectory([0.0, 1.0], [0.0, 19.5], [0.0, 0.0], [15.0, 15.0], [0, 0], [0, 0])
    r = spatiotemporal_distance(FrenetPoint(25, 0), traj, ob, 0.0, 1.72)
    assert r == pytest.approx(min(1.5, math.sqrt(0.04 + 1.72)), abs=1e-12)
    assert r == pytest.approx(1.32665, abs=1e-5)


def test_spatiotemporal_empty_prediction():
    with pytest.raises(ValueError, match="no prediction available"):
        PredictedTrajectory([], [], [])


def test_spatiotemporal_random_equals_scatter_minimum():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n = 50
        t = np.cumsum(rng.uniform(0.05, 0.2, n))
        v = rng.uniform(0, 25, n)
        v[rng.random(n) < 0.1] = 0.0
        traj = PredictedTrajectory(t, rng.uniform(-20, 20, n), rng.uniform(0, 10, n), v,
                                   rng.uniform(-3, 3, n), rng.uniform(-0.3, 0.3, n))
        ob = VehicleState(FrenetPoint(0, 0), v=5.0, footprint=Footprint(rng.uniform(3, 6), rng.uniform(1.5, 2.5)))
        A = FrenetPoint(*rng.uniform(-25, 25, 2))
        t_obs = float(rng.uniform(0, t[-1]))
        assert spatiotemporal_distance(A, traj, ob, t_obs, P.alpha) == scatter_minimum(A, traj, ob, t_obs, P.alpha)


def test_charge_examples():
    assert charge(1, 0, P) == 1.0
    assert charge(1, 15, P) == pytest.approx(1.26107, abs=1e-5)
    assert charge(2, 15, P) == 2 * charge(1, 15, P)


def test_anisotropy_examples():
    assert anisotropy(math.pi / 2, 15, 3, P) == pytest.approx(1.0, abs=1e-15)
    assert anisotropy(0.0, 15, 0, P) == pytest.approx(math.exp(0.56 * 1.05), abs=1e-12)
    assert anisotropy(0.0, 15, 0, P) == pytest.approx(1.800384, abs=1e-6)


def test_obstacle_field_composition():
    # A straight ahead at T* = 1.5 s with a single scatter sample at t_obs
    ob = VehicleState(FrenetPoint(0, 0), v=15.0)
    traj = PredictedTrajectory([0.0], [0.0], [0.0], [15.0], [0.0], [0.0])
    E = obstacle_field(FrenetPoint(25, 0), ob, traj, 0.0, P)
    assert E == pytest.approx(math.exp(0.56 * 1.05) * charge(1, 15, P) / 1.5, rel=1e-12)
    assert E == pytest.approx(1.800384 * 1.261068 / 1.5, abs=1e-5)


def test_obstacle_field_inverse_distance():
    ob = VehicleState(FrenetPoint(0, 0), v=15.0)
    traj = PredictedTrajectory([0.0], [0.0], [0.0], [15.0], [0.0], [0.0])
    e1 = obstacle_field(FrenetPoint(2.5 + 15, 0), ob, traj, 0.0, P)
    e2 = obstacle_field(FrenetPoint(2.5 + 30, 0), ob, traj, 0.0, P)
    assert e2 == pytest.approx(e1 / 2, rel=1e-12)


def test_obstacle_field_static_isotropic():
    ob = VehicleState(FrenetPoint(0, 0), v=0.0)
    traj = PredictedTrajectory([0.0], [0.0], [0.0], [0.0], [0.0], [0.0])
    a = obstacle_field(FrenetPoint(2.5 + 4, 0), ob, traj, 0.0, P)
    b = obstacle_field(FrenetPoint(0, 1 + 4), ob, traj, 0.0, P)
    assert a == b > 0


def test_obstacle_field_capped_inside():
    ob = VehicleState(FrenetPoint(0, 0), v=10.0)
    traj = PredictedTrajectory([0.0], [0.0], [0.0], [10.0], [0.0], [0.0])
    assert obstacle_field(FrenetPoint(0.5, 0.2), ob, traj, 0.0, P) == E_CAP


def test_kernel_matches_reference_field():
    rng = np.random.default_rng(2)
    for _ in range(10):
        ob = moving(s=rng.uniform(0, 40), d=rng.uniform(1, 10), v=rng.uniform(0, 20), a=rng.uniform(-2, 2),
                    yaw=rng.uniform(-0.1, 0.1))
        ps = rng.uniform(-20, 80, 200)
        pd = rng.uniform(0, 11.25, 200)
        tau = float(rng.uniform(0, 4))
        fast = obstacle_field_points(ps, pd, tau, ob, P)
        ref = np.array([obstacle_field(FrenetPoint(a, b), ob.state_at(tau), ob.prediction, tau, P)
                        for a, b in zip(ps, pd)])
        np.testing.assert_allclose(fast, ref, rtol=1e-12, atol=0)


def test_lane_field_examples():
    d3 = ROAD.lane_lines[1].d
    assert ROAD.lane_lines[1].kind == LineKind.DASHED
    assert lane_field(d3, ROAD, P) == pytest.approx(2.05, abs=1e-9)
    # only the dashed term is active at the lane center
    centre = d3 + ROAD.lane_width / 2
    assert lane_field(centre, ROAD, P) == pytest.approx(0.0, abs=1e-12)
    boundary = ROAD.lane_lines[0]
    assert boundary.kind == LineKind.BOUNDARY
    assert lane_field(boundary.d, ROAD, P) == pytest.approx(2.02 * (math.exp(1.875) - 1), abs=1e-12)
    assert lane_field(boundary.d, ROAD, P) == pytest.approx(11.15205, abs=1e-5)


def test_geo_field_examples():
    eligible = Intent.MERGE
    d_aux = ROAD.lane_center(ROAD.aux_lanes[0])
    assert geo_field_at(FrenetPoint(ROAD.zone_start, d_aux), eligible, ROAD, P) == 0.0
    assert geo_field_at(FrenetPoint(ROAD.zone_end, d_aux), eligible, ROAD, P) == pytest.approx(9.55, abs=1e-3)
    for s in (0.0, 50.0, 199.0):
        assert geo_field_at(FrenetPoint(s, d_aux), Intent.THROUGH, ROAD, P) == 0.0


def test_total_field_superposition():
    rng = np.random.default_rng(9)
    obs = [moving(s=rng.uniform(0, 40), d=ROAD.lane_center(int(rng.integers(0, 3))), v=rng.uniform(5, 20))
           for _ in range(4)]
    A = FrenetPoint(20.0, 4.0)
    tau = 1.0
    single = sum(obstacles_field(A, tau, [o], P) for o in obs)
    total = total_field(A, tau, obs, ROAD, Intent.MERGE, P)
    expected = single + lane_field(A.d, ROAD, P) + geo_field_at(A, Intent.MERGE, ROAD, P)
    assert total == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_total_field_empty_world_is_lane_field():
    A = FrenetPoint(50.0, ROAD.lane_center(1))
    assert total_field(A, 0.0, [], ROAD, Intent.THROUGH, P) == lane_field(A.d, ROAD, P)
