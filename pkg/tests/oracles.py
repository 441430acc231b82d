"""Brute-force reference implementations used by the tests.

Each oracle is written from the defining formula, independently of the
package's fast paths.
"""
from __future__ import annotations

import math

import numpy as np


def footprint_boundary_distance(x, y, length, width, n=10_000):
    """Distance from (x, y) to the rectangle, by sampling ``n`` boundary points (0 inside)."""
    hl, hw = length / 2.0, width / 2.0
    if abs(x) <= hl and abs(y) <= hw:
        return 0.0
    per = 2 * (length + width)
    u = np.arange(n) * per / n
    bx = np.empty(n)
    by = np.empty(n)
    a = u < length
    bx[a], by[a] = -hl + u[a], -hw
    b = (u >= length) & (u < length + width)
    bx[b], by[b] = hl, -hw + (u[b] - length)
    c = (u >= length + width) & (u < 2 * length + width)
    bx[c], by[c] = hl - (u[c] - length - width), hw
    d = u >= 2 * length + width
    bx[d], by[d] = -hl, hw - (u[d] - 2 * length - width)
    return float(np.min(np.hypot(bx - x, by - y)))


def scatter_minimum(A, traj, obstacle, t_obs, alpha):
    """Plain loop over the scatter set using the scalar T* definition."""
    from weavestrf.field import V_REF, equivalent_time_distance
    from weavestrf.geometry import FrenetPoint, footprint_distance, to_body_frame

    yaw = traj.headings(obstacle.yaw)
    v = traj.speeds(obstacle.v)
    best = math.inf
    for n in range(len(traj)):
        bp = to_body_frame(A, FrenetPoint(float(traj.s[n]), float(traj.d[n])), float(yaw[n]))
        if v[n] > 0:
            ts = equivalent_time_distance(bp, obstacle.footprint, float(v[n]))
        else:
            ts = footprint_distance(bp, obstacle.footprint) / V_REF
        dt = float(traj.t[n]) - t_obs
        best = min(best, math.sqrt(ts * ts + alpha * (dt * dt)))
    return best


def supercover_cells(s0, d0, h, a, b):
    """Cells touched by the closed segment a->b, by dense sampling plus exact vertex handling.

    Points on a shared cell edge belong to the lower-index cell, so the oracle
    walks the segment at a stride far below the cell size and maps each sample
    with the same edge rule; crossing parameters are added explicitly so no
    cell is skipped between samples.
    """
    (as_, ad), (bs, bd) = a, b
    lam = set(np.linspace(0.0, 1.0, 2001).tolist())
    for x0, dx in ((as_ - s0, bs - as_), (ad - d0, bd - ad)):
        if dx != 0:
            lo, hi = sorted((x0 / h, (x0 + dx) / h))
            for k in range(math.floor(lo) + 1, math.ceil(hi)):
                lc = (k * h - x0) / dx
                lam.update((lc - 1e-7, lc + 1e-7))
    cells = set()
    for t in sorted(lam):
        if not 0.0 <= t <= 1.0:
            continue
        s = as_ + t * (bs - as_)
        d = ad + t * (bd - ad)
        cells.add((math.ceil((s - s0) / h - 1e-9) - 1, math.ceil((d - d0) / h - 1e-9) - 1))
    return cells


def circumcircle_curvature(p0, p1, p2):
    """Curvature from the circle through three points, solved as a linear system."""
    (x0, y0), (x1, y1), (x2, y2) = p0, p1, p2
    A = np.array([[2 * (x1 - x0), 2 * (y1 - y0)], [2 * (x2 - x0), 2 * (y2 - y0)]])
    rhs = np.array([x1 ** 2 - x0 ** 2 + y1 ** 2 - y0 ** 2, x2 ** 2 - x0 ** 2 + y2 ** 2 - y0 ** 2])
    if abs(np.linalg.det(A)) < 1e-12:
        return 0.0
    cx, cy = np.linalg.solve(A, rhs)
    return 1.0 / math.hypot(x0 - cx, y0 - cy)


def random_feasible_perturbations(problem, x, rng, count=100, scale=1.0, tries=20_000):
    """Feasible points of the QP near ``x``.

    Each step keeps the equalities, moves inward off a random subset of the
    active inequalities and along the face of the rest, and is then halved
    until the inactive inequalities also hold.
    """
    from scipy.linalg import null_space

    A, lb, ub = problem.A_in, problem.lb, problem.ub
    Ae = problem.A_eq
    ax = A @ x
    tol = 1e-7 * (1.0 + np.abs(ax))
    at_lo = np.isfinite(lb) & (ax - lb <= tol)
    at_hi = np.isfinite(ub) & (ub - ax <= tol)
    act = np.flatnonzero(at_lo | at_hi)
    eq_tol = 1e-9 + np.abs(Ae @ x - problem.b_eq).max(initial=0.0)
    out = []
    for _ in range(tries):
        if len(out) == count:
            break
        lift = rng.random(act.size) < 0.5
        target = np.where(at_lo[act], 1.0, -1.0) * rng.random(act.size) * lift
        M = np.vstack([Ae, A[act]])
        rhs = np.concatenate([np.zeros(Ae.shape[0]), target])
        base = np.linalg.lstsq(M, rhs, rcond=None)[0] if M.shape[0] else np.zeros(problem.n)
        Z = null_space(M) if M.shape[0] else np.eye(problem.n)
        step = base + (Z @ rng.normal(size=Z.shape[1]) if Z.shape[1] else 0.0)
        norm = np.abs(step).max()
        if norm == 0:
            continue
        step *= scale / norm
        for _ in range(50):
            y = x + step
            ay = A @ y
            eq_ok = np.abs(Ae @ y - problem.b_eq).max(initial=0.0) <= eq_tol
            if eq_ok and np.all(ay >= lb - 1e-9) and np.all(ay <= ub + 1e-9):
                out.append(y)
                break
            step *= 0.5
    return out
