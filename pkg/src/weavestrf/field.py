"""Spatial-temporal risk field: obstacle, lane-line and weaving-geometry components.

Field strength is in dimensionless risk units with obstacle mass normalized to
1.0 per passenger car. All functions are pure.
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import BodyPoint, Footprint, FrenetPoint
from .params import FieldParams
from .scene import Intent, LineKind, Obstacle, PredictedTrajectory, RoadModel, VehicleState

# static obstacles: footprint distance divided by this speed stands in for T*
V_REF = 1.0
# field value assigned when the spatial-temporal distance vanishes
E_CAP = 1.0e6


class StaticObstacle(ValueError):
    """Raised by :func:`equivalent_time_distance` for a zero-speed obstacle."""


def mu(v_obs: float) -> float:
    """Lateral-to-longitudinal equivalence factor of the time-based distance."""
    return 0.01476 + 0.8 / v_obs


def equivalent_time_distance(bp: BodyPoint, fp: Footprint, v_obs: float) -> float:
    if not v_obs > 0:
        raise StaticObstacle("equivalent time distance undefined at zero speed; use the static fallback")
    hl, hw = fp.length / 2.0, fp.width / 2.0
    x, y = bp.x, bp.y
    ax, ay = abs(x), abs(y)
    if ax <= hl and ay <= hw:
        return 0.0
    m = mu(v_obs)
    if ay <= hw:
        return (ax - hl) / v_obs
    if ax <= hl:
        return (ay - hw) / (m * v_obs)
    corners = (
        math.sqrt(m * m * (x - hl) * (x - hl) + (y - hw) * (y - hw)),
        math.sqrt(m * m * (x - hl) * (x - hl) + (y + hw) * (y + hw)),
        math.sqrt(m * m * (x + hl) * (x + hl) + (y - hw) * (y - hw)),
        math.sqrt(m * m * (x + hl) * (x + hl) + (y + hw) * (y + hw)),
    )
    return min(corners) / (m * v_obs)


def _time_distance(x, y, hl, hw, v):
    """Vectorized T* over body-frame coordinates with the static fallback."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    v = np.broadcast_to(np.asarray(v, dtype=float), x.shape)
    ax, ay = np.abs(x), np.abs(y)
    moving = v > 0
    vs = np.where(moving, v, 1.0)
    m = 0.01476 + 0.8 / vs
    corner = np.minimum.reduce([
        np.sqrt(m * m * (x - hl) * (x - hl) + (y - hw) * (y - hw)),
        np.sqrt(m * m * (x - hl) * (x - hl) + (y + hw) * (y + hw)),
        np.sqrt(m * m * (x + hl) * (x + hl) + (y - hw) * (y - hw)),
        np.sqrt(m * m * (x + hl) * (x + hl) + (y + hw) * (y + hw)),
    ]) / (m * vs)
    front = (ax - hl) / vs
    side = (ay - hw) / (m * vs)
    tstar = np.where(ay <= hw, front, np.where(ax <= hl, side, corner))
    inside = (ax <= hl) & (ay <= hw)
    tstar = np.where(inside, 0.0, tstar)
    # static fallback: Euclidean footprint distance at the reference speed
    dist = np.where(ay <= hw, ax - hl, np.where(ax <= hl, ay - hw, 0.0))
    dist = np.where(inside, 0.0, dist)
    # math.hypot, as in footprint_distance; np.hypot can differ by an ulp
    for i in np.flatnonzero(~moving & (ax > hl) & (ay > hw)):
        dist.flat[i] = math.hypot(ax.flat[i] - hl, ay.flat[i] - hw)
    return np.where(moving, tstar, dist / V_REF)


def _scatter_terms(A: FrenetPoint, traj: PredictedTrajectory, obstacle: VehicleState, t_obs: float, alpha: float):
    yaw = traj.headings(obstacle.yaw)
    v = traj.speeds(obstacle.v)
    ds = A.s - traj.s
    dd = A.d - traj.d
    c, sn = np.cos(yaw), np.sin(yaw)
    x = c * ds + sn * dd
    y = -sn * ds + c * dd
    fp = obstacle.footprint
    tstar = _time_distance(x, y, fp.length / 2.0, fp.width / 2.0, v)
    dt = traj.t - t_obs
    r = np.sqrt(tstar * tstar + alpha * (dt * dt))
    return r, x, y


def spatiotemporal_distance(A: FrenetPoint, traj: PredictedTrajectory, obstacle: VehicleState,
                            t_obs: float, alpha: float) -> float:
    """Minimum over the scatter set of sqrt(T*^2 + alpha*(t_n - t_obs)^2)."""
    if len(traj) == 0:
        raise ValueError("no prediction available")
    r, _, _ = _scatter_terms(A, traj, obstacle, t_obs, alpha)
    return float(r.min())


def charge(m_obs: float, v_obs: float, params: FieldParams) -> float:
    return m_obs * math.exp(v_obs * params.gamma_1 * params.T_r / (params.gamma_2 * params.a_max))


def anisotropy(psi: float, v_obs: float, a_obs: float, params: FieldParams) -> float:
    return math.exp(params.k * math.cos(psi) * (params.beta_1 * v_obs + params.beta_2 * a_obs))


def dielectric(eta: float, params: FieldParams) -> float:
    return 1.0 / (eta * params.G)


def obstacle_field(A: FrenetPoint, obstacle: VehicleState, traj: PredictedTrajectory, t_obs: float,
                   params: FieldParams) -> float:
    """Field of one obstacle at ``A`` observed at ``t_obs``.

    Every scatter sample contributes, including samples earlier than ``t_obs``
    (they are penalized by the time term). Anisotropy and charge use the
    kinematics at the minimizing sample; ``psi`` is the angle between its heading
    and the vector from its center to ``A``.
    """
    r, x, y = _scatter_terms(A, traj, obstacle, t_obs, params.alpha)
    n = int(np.argmin(r))
    rn = float(r[n])
    v = float(traj.speeds(obstacle.v)[n])
    a = float(traj.accels(obstacle.a)[n])
    rho = math.hypot(x[n], y[n])
    cos_psi = float(x[n]) / rho if rho > 0 else 0.0
    if v > 0:
        eta = math.exp(params.k * cos_psi * (params.beta_1 * v + params.beta_2 * a))
    else:
        eta = 1.0
    numer = params.G * eta * charge(obstacle.mass, v, params)
    if rn <= 0.0:
        return E_CAP
    return min(numer / rn, E_CAP)


def lane_field(d_A: float, road: RoadModel, params: FieldParams) -> float:
    half = road.lane_width / 2.0
    total = 0.0
    for line in road.lane_lines:
        off = d_A - line.d
        if abs(off) > half:
            continue
        if line.kind == LineKind.DASHED:
            total += params.partial_3 * math.cos(math.pi / road.lane_width * off)
        else:
            coef = params.partial_1 if line.kind == LineKind.BOUNDARY else params.partial_2
            total += coef * (math.exp(half - abs(off)) - 1.0)
    return total


def geo_field_at(A: FrenetPoint, intent: Intent, road: RoadModel, params: FieldParams) -> float:
    """Weaving-geometry field felt by a vehicle of the given intent at ``A``."""
    if intent == Intent.THROUGH or not road.in_zone(A.s):
        return 0.0
    on_aux = road.lane_index(A.d) in road.aux_lanes
    if (intent == Intent.MERGE and on_aux) or (intent == Intent.EXIT and not on_aux):
        return params.sigma_1 * (math.exp(params.sigma_2 * (road.zone_end - A.s))
                                 - math.exp(params.sigma_2 * (road.zone_end - road.zone_start)))
    return 0.0


def weaving_geo_field(ego: VehicleState, road: RoadModel, params: FieldParams) -> float:
    return geo_field_at(ego.pos, ego.intent, road, params)


def obstacles_field(A: FrenetPoint, t_obs: float, obstacles, params: FieldParams) -> float:
    """Summed obstacle field; each obstacle's state is played back at ``t_obs``."""
    total = 0.0
    for ob in obstacles:
        total += obstacle_field(A, ob.state_at(t_obs), ob.prediction, t_obs, params)
    return total


def total_field(A: FrenetPoint, t_obs: float, obstacles, road: RoadModel, intent: Intent,
                params: FieldParams) -> float:
    return (obstacles_field(A, t_obs, obstacles, params)
            + lane_field(A.d, road, params)
            + geo_field_at(A, intent, road, params))


__all__ = [
    "E_CAP", "V_REF", "StaticObstacle", "mu", "equivalent_time_distance", "spatiotemporal_distance",
    "charge", "anisotropy", "dielectric", "obstacle_field", "lane_field", "geo_field_at",
    "weaving_geo_field", "obstacles_field", "total_field", "Obstacle",
]
