"""Compiled batch evaluation of the obstacle field over many observation points."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

from .field import E_CAP, V_REF


@njit(cache=True)
def _obstacle_field_points(ps, pd, tau, t, s, d, v, a, yaw, order, hl, hw, mass,
                           alpha, k, beta_1, beta_2, gamma_1, gamma_2, T_r, a_max, G, out):
    """Accumulate one obstacle's field at points ``(ps[i], pd[i])`` into ``out``.

    ``order`` lists sample indices by increasing |t - tau|; the scan stops once the
    time term alone exceeds the best distance found, which cannot change the minimum.
    """
    n = t.size
    sqrt_alpha_dt = np.empty(n)
    for j in range(n):
        dt = t[order[j]] - tau
        sqrt_alpha_dt[j] = math.sqrt(alpha * (dt * dt))
    cos_y = np.cos(yaw)
    sin_y = np.sin(yaw)
    for i in range(ps.size):
        best = np.inf
        best_idx = -1
        best_x = 0.0
        best_y = 0.0
        for j in range(n):
            if sqrt_alpha_dt[j] > best:
                break
            m = order[j]
            dss = ps[i] - s[m]
            ddd = pd[i] - d[m]
            x = cos_y[m] * dss + sin_y[m] * ddd
            y = -sin_y[m] * dss + cos_y[m] * ddd
            ax = abs(x)
            ay = abs(y)
            vm = v[m]
            if ax <= hl and ay <= hw:
                ts = 0.0
            elif vm > 0:
                mu = 0.01476 + 0.8 / vm
                if ay <= hw:
                    ts = (ax - hl) / vm
                elif ax <= hl:
                    ts = (ay - hw) / (mu * vm)
                else:
                    c1 = math.sqrt(mu * mu * (x - hl) * (x - hl) + (y - hw) * (y - hw))
                    c2 = math.sqrt(mu * mu * (x - hl) * (x - hl) + (y + hw) * (y + hw))
                    c3 = math.sqrt(mu * mu * (x + hl) * (x + hl) + (y - hw) * (y - hw))
                    c4 = math.sqrt(mu * mu * (x + hl) * (x + hl) + (y + hw) * (y + hw))
                    ts = min(min(c1, c2), min(c3, c4)) / (mu * vm)
            else:
                if ay <= hw:
                    dist = ax - hl
                elif ax <= hl:
                    dist = ay - hw
                else:
                    dist = math.hypot(ax - hl, ay - hw)
                ts = dist / V_REF
            dt = t[m] - tau
            r = math.sqrt(ts * ts + alpha * (dt * dt))
            if r < best or (r == best and m < best_idx):
                best = r
                best_idx = m
                best_x = x
                best_y = y
        vb = v[best_idx]
        if vb > 0:
            rho = math.hypot(best_x, best_y)
            cos_psi = best_x / rho if rho > 0 else 0.0
            eta = math.exp(k * cos_psi * (beta_1 * vb + beta_2 * a[best_idx]))
        else:
            eta = 1.0
        q = mass * math.exp(vb * gamma_1 * T_r / (gamma_2 * a_max))
        numer = G * eta * q
        if best <= 0.0:
            e = E_CAP
        else:
            e = min(numer / best, E_CAP)
        out[i] += e


def obstacle_field_points(ps, pd, tau, obstacle, params, out=None):
    """Field of one :class:`~weavestrf.scene.Obstacle` at many points, observed at ``tau``."""
    ps = np.ascontiguousarray(ps, dtype=float)
    pd = np.ascontiguousarray(pd, dtype=float)
    if out is None:
        out = np.zeros(ps.size)
    state = obstacle.state_at(tau)
    traj = obstacle.prediction
    t = traj.t
    order = np.argsort(np.abs(t - tau), kind="stable")
    _obstacle_field_points(
        ps, pd, float(tau), t, traj.s, traj.d,
        np.ascontiguousarray(traj.speeds(state.v)), np.ascontiguousarray(traj.accels(state.a)),
        np.ascontiguousarray(traj.headings(state.yaw)), order,
        state.footprint.length / 2.0, state.footprint.width / 2.0, state.mass,
        params.alpha, params.k, params.beta_1, params.beta_2, params.gamma_1, params.gamma_2,
        params.T_r, params.a_max, params.G, out,
    )
    return out
