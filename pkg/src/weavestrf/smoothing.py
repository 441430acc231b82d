"""Piecewise-jerk smoothing of the rough path (lateral, over s) and speed (over t).

Both problems share the model: between knots the third derivative is constant,
so each interval ties (x, x', x'') at its ends by two linear equalities. The path
QP runs on the rough-path stations plus ``n_sub - 1`` intermediate stations per
interval so corridor constraints also hold between knots.
"""
from __future__ import annotations

import atexit
import csv
import multiprocessing as mp
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import PlannerConfig
from .dp import RoughPath
from .errors import (BlockedStation, OutsideStrom, QpInfeasible, QpUnbounded, SmoothingCorridorEmpty,
                     SpeedCorridorInfeasible)
from .geometry import Footprint
from .qp import QpProblem, solve_qp
from .strom import Strom, corridor_span

# share of the lateral acceleration budget given to the d'' s'^2 term; the rest covers d' s''
LAT_BUDGET = 0.85
TERMINAL_EPS = 1e-6


def pj_eval(x, v, dv, ddv, q):
    """Value, first and second derivative of a piecewise-jerk curve at ``q``.

    Before the first knot the curve is clamped; past the last knot it continues
    with constant first derivative.
    """
    x = np.asarray(x, dtype=float)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    n = x.size
    if n == 1:
        tau = np.maximum(q - x[0], 0.0)
        return v[0] + dv[0] * tau, np.full(q.shape, dv[0]), np.zeros(q.shape)
    i = np.clip(np.searchsorted(x, q, side="right") - 1, 0, n - 2)
    h = x[i + 1] - x[i]
    tau = np.clip(q - x[i], 0.0, h)
    with np.errstate(divide="ignore", invalid="ignore"):
        jerk = np.where(h > 0, (ddv[i + 1] - ddv[i]) / h, 0.0)
    val = v[i] + dv[i] * tau + 0.5 * ddv[i] * tau ** 2 + jerk * tau ** 3 / 6.0
    d1 = dv[i] + ddv[i] * tau + 0.5 * jerk * tau ** 2
    d2 = ddv[i] + jerk * tau
    past = q > x[-1]
    if np.any(past):
        extra = q[past] - x[-1]
        val[past] = v[-1] + dv[-1] * extra
        d1[past] = dv[-1]
        d2[past] = 0.0
    return val, d1, d2


@dataclass
class SmoothPath:
    s: np.ndarray
    d: np.ndarray
    dp: np.ndarray
    ddp: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None
    ddp_bound: np.ndarray = None

    def at(self, s):
        return pj_eval(self.s, self.d, self.dp, self.ddp, s)


@dataclass
class SpeedProfile:
    t: np.ndarray
    s: np.ndarray
    sp: np.ndarray
    spp: np.ndarray

    def at(self, t):
        return pj_eval(self.t, self.s, self.sp, self.spp, t)


CSV_COLUMNS = ("t", "s", "d", "s_dot", "d_dot", "s_ddot", "d_ddot")


@dataclass
class PlannedTrajectory:
    t: np.ndarray
    s: np.ndarray
    d: np.ndarray
    s_dot: np.ndarray
    d_dot: np.ndarray
    s_ddot: np.ndarray
    d_ddot: np.ndarray
    path: SmoothPath = None
    speed: SpeedProfile = None
    timings: dict = field(default_factory=dict)

    def sample(self, t):
        """Merged state at arbitrary times: ``(s, d, s_dot, d_dot, s_ddot, d_ddot)``."""
        s, sd, sdd = self.speed.at(t)
        d, dp, ddp = self.path.at(s)
        return s, d, sd, dp * sd, sdd, ddp * sd ** 2 + dp * sdd

    def rows(self):
        return [[float(getattr(self, c)[i]) for c in CSV_COLUMNS] for i in range(len(self.t))]

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([repr(v) for v in row])
        return path


def merge(path: SmoothPath, speed: SpeedProfile) -> PlannedTrajectory:
    t = speed.t.copy()
    s, sd, sdd = speed.s, speed.sp, speed.spp
    d, dp, ddp = path.at(s)
    return PlannedTrajectory(t, s.copy(), d, sd.copy(), dp * sd, sdd.copy(), ddp * sd ** 2 + dp * sdd,
                             path, speed)


def _stations(rough: RoughPath, n_sub: int, eps_s: float):
    """Stations with their slice sets, reference d, and reference slope."""
    s, d = rough.s, rough.d
    out = []
    m = rough.m
    for i in range(m):
        ds = s[i + 1] - s[i]
        slope = (d[i + 1] - d[i]) / ds if ds > 0 else 0.0
        for k in range(n_sub):
            frac = k / n_sub
            out.append((s[i] + frac * ds, d[i] + frac * (d[i + 1] - d[i]), slope, i, k == 0))
    if m > 0 and s[m] - eps_s > out[-1][0]:
        # extra station so the terminal band also covers the speed profile's end tolerance
        ds = s[m] - s[m - 1]
        frac = (ds - eps_s) / ds
        out.append((s[m] - eps_s, d[m - 1] + frac * (d[m] - d[m - 1]), out[-1][2], m - 1, False))
    out.append((s[m], d[m], 0.0, m, True))
    return out


def build_path_problem(rough: RoughPath, strom: Strom, cfg: PlannerConfig, d_tgt: float,
                       footprint: Footprint = Footprint(5.0, 2.0), dp0: float = 0.0, n_sub: int = 2):
    """Assemble the lateral QP; returns ``(problem, stations, lower, upper, ddp_bound)``."""
    m = rough.m
    st = _stations(rough, n_sub, cfg.eps_s)
    N = len(st)
    s_st = np.array([x[0] for x in st])
    vbar = np.diff(rough.s) / cfg.t_D if m > 0 else np.array([0.0])
    lower = np.full(N, -np.inf)
    upper = np.full(N, np.inf)
    bound = np.full(N, np.inf)
    for j, (s, dref, slope, i, is_knot) in enumerate(st):
        if j == 0:
            continue
        if is_knot:
            ks = [i]
            s_lo, s_hi = s - cfg.eps_s, s + cfg.eps_s
            slope_ref = 0.5 * (slope + ((rough.d[i] - rough.d[i - 1]) / (rough.s[i] - rough.s[i - 1])
                                        if rough.s[i] > rough.s[i - 1] else 0.0))
        else:
            # the segment into knot i + 1 was checked in slice i + 1, which also covers knot i
            ks = [i + 1]
            s_lo = s_hi = s
            slope_ref = slope
        try:
            c = corridor_span(strom, ks, s_lo, s_hi, dref)
        except (BlockedStation, OutsideStrom) as exc:
            raise SmoothingCorridorEmpty(f"smoothing corridor empty ({exc})") from exc
        w_eff = footprint.width + footprint.length * abs(slope_ref)
        lower[j] = c.lower if c.lower_static else c.lower + 0.5 * w_eff
        upper[j] = c.upper if c.upper_static else c.upper - 0.5 * w_eff
        if lower[j] > upper[j]:
            raise SmoothingCorridorEmpty(f"smoothing corridor empty at s={s:.2f}")
        v_ref = max(vbar[max(i - 1, 0)], vbar[min(i, len(vbar) - 1)]) + 0.5 * cfg.acc_max * cfg.t_D
        kappa_b = cfg.kappa_max * (1.0 + slope_ref ** 2) ** 1.5
        bound[j] = min(kappa_b, LAT_BUDGET * cfg.a_lat_max / max(v_ref, 1e-6) ** 2)

    n = 3 * N
    H = np.zeros((n, n))
    for j in range(1, N):
        H[3 * j + 1, 3 * j + 1] += 2 * cfg.w_dl
        H[3 * j + 2, 3 * j + 2] += 2 * cfg.w_ddl
    for j in range(N - 1):
        a, b = 3 * j + 2, 3 * (j + 1) + 2
        H[a, a] += 2 * cfg.w_dddl
        H[b, b] += 2 * cfg.w_dddl
        H[a, b] -= 2 * cfg.w_dddl
        H[b, a] -= 2 * cfg.w_dddl
    f = np.zeros(n)

    Aeq, beq = [], []

    def row(entries):
        r = np.zeros(n)
        for idx, val in entries:
            r[idx] += val
        return r

    Aeq += [row([(0, 1.0)]), row([(1, 1.0)]), row([(2, 1.0)])]
    beq += [rough.d[0], dp0, 0.0]
    for j in range(N - 1):
        h = s_st[j + 1] - s_st[j]
        Aeq.append(row([(3 * j, 1.0), (3 * j + 1, h), (3 * j + 2, h * h / 3.0),
                        (3 * j + 3, -1.0), (3 * j + 5, h * h / 6.0)]))
        beq.append(0.0)
        Aeq.append(row([(3 * j + 1, 1.0), (3 * j + 2, 0.5 * h), (3 * j + 4, -1.0), (3 * j + 5, 0.5 * h)]))
        beq.append(0.0)
    Aeq.append(row([(3 * (N - 1) + 1, 1.0)]))
    beq.append(0.0)

    Ain, lb, ub = [], [], []
    for j in range(1, N):
        Ain.append(row([(3 * j, 1.0)]))
        lb.append(lower[j])
        ub.append(upper[j])
        Ain.append(row([(3 * j + 2, 1.0)]))
        lb.append(-bound[j])
        ub.append(bound[j])
    band = cfg.delta - TERMINAL_EPS
    for j in range(1, N):
        if s_st[j] >= s_st[-1] - cfg.eps_s - 1e-12:
            Ain.append(row([(3 * j, 1.0)]))
            lb.append(d_tgt - band)
            ub.append(d_tgt + band)
    prob = QpProblem(H, f, np.array(Aeq), np.array(beq), np.array(Ain).reshape(-1, n), np.array(lb), np.array(ub))
    return prob, s_st, lower, upper, bound


def path_from_solution(x, s_st, lower=None, upper=None, bound=None) -> SmoothPath:
    x = np.asarray(x)
    return SmoothPath(np.asarray(s_st, dtype=float), x[0::3].copy(), x[1::3].copy(), x[2::3].copy(),
                      lower, upper, bound)


def smooth_path(rough: RoughPath, strom: Strom, cfg: PlannerConfig, d_tgt: float,
                footprint: Footprint = Footprint(5.0, 2.0), dp0: float = 0.0, n_sub: int = 2) -> SmoothPath:
    prob, s_st, lo, hi, bd = build_path_problem(rough, strom, cfg, d_tgt, footprint, dp0, n_sub)
    try:
        res = solve_qp(prob)
    except (QpInfeasible, QpUnbounded) as exc:
        raise SmoothingCorridorEmpty(f"smoothing corridor empty ({exc})") from exc
    return path_from_solution(res.x, s_st, lo, hi, bd)


SPEED_SUBSTEPS = 5


def build_speed_problem(rough: RoughPath, cfg: PlannerConfig, v0: float) -> QpProblem:
    M = len(rough)
    n = 3 * M
    dt = cfg.t_D
    H = np.zeros((n, n))
    for i in range(1, M):
        H[3 * i + 1, 3 * i + 1] += 2 * cfg.w_ds
        H[3 * i + 2, 3 * i + 2] += 2 * cfg.w_dds
    for i in range(M - 1):
        a, b = 3 * i + 2, 3 * (i + 1) + 2
        H[a, a] += 2 * cfg.w_ddds
        H[b, b] += 2 * cfg.w_ddds
        H[a, b] -= 2 * cfg.w_ddds
        H[b, a] -= 2 * cfg.w_ddds
    f = np.zeros(n)
    Aeq, beq = [], []

    def row(entries):
        r = np.zeros(n)
        for idx, val in entries:
            r[idx] += val
        return r

    Aeq += [row([(0, 1.0)]), row([(1, 1.0)])]
    beq += [rough.s[0], v0]
    for i in range(M - 1):
        Aeq.append(row([(3 * i, 1.0), (3 * i + 1, dt), (3 * i + 2, dt * dt / 3.0),
                        (3 * i + 3, -1.0), (3 * i + 5, dt * dt / 6.0)]))
        beq.append(0.0)
        Aeq.append(row([(3 * i + 1, 1.0), (3 * i + 2, 0.5 * dt), (3 * i + 4, -1.0), (3 * i + 5, 0.5 * dt)]))
        beq.append(0.0)
    Ain, lb, ub = [], [], []
    for i in range(M):
        if i > 0:
            Ain.append(row([(3 * i, 1.0)]))
            lb.append(rough.s[i] - cfg.eps_s)
            ub.append(rough.s[i] + cfg.eps_s)
            Ain.append(row([(3 * i + 1, 1.0)]))
            lb.append(0.0)
            ub.append(cfg.v_max)
            Ain.append(row([(3 * i, 1.0), (3 * i - 3, -1.0)]))
            lb.append(0.0)
            ub.append(np.inf)
        Ain.append(row([(3 * i + 2, 1.0)]))
        lb.append(-cfg.dec_max)
        ub.append(cfg.acc_max)
    # speed is quadratic inside an interval; bound it at the sub-epochs the output is sampled on
    for i in range(M - 1):
        for k in range(1, SPEED_SUBSTEPS):
            tau = dt * k / SPEED_SUBSTEPS
            c = tau * tau / (2.0 * dt)
            Ain.append(row([(3 * i + 1, 1.0), (3 * i + 2, tau - c), (3 * i + 5, c)]))
            lb.append(0.0)
            ub.append(cfg.v_max)
    return QpProblem(H, f, np.array(Aeq), np.array(beq), np.array(Ain).reshape(-1, n), np.array(lb), np.array(ub))


def speed_from_solution(x, t) -> SpeedProfile:
    x = np.asarray(x)
    return SpeedProfile(np.asarray(t, dtype=float), x[0::3].copy(), x[1::3].copy(), x[2::3].copy())


def smooth_speed(rough: RoughPath, cfg: PlannerConfig, v0: float) -> SpeedProfile:
    prob = build_speed_problem(rough, cfg, v0)
    try:
        res = solve_qp(prob)
    except (QpInfeasible, QpUnbounded) as exc:
        raise SpeedCorridorInfeasible(f"speed corridor infeasible ({exc})") from exc
    return speed_from_solution(res.x, rough.t)


def _worker_loop(conn):
    while True:
        msg = conn.recv()
        if msg is None:
            break
        start = time.perf_counter()
        try:
            res = solve_qp(msg)
            conn.send(("ok", res.x, time.perf_counter() - start))
        except (QpInfeasible, QpUnbounded) as exc:
            conn.send(("infeasible", str(exc), time.perf_counter() - start))
        except Exception as exc:  # surfaced in the parent
            conn.send(("error", repr(exc), time.perf_counter() - start))


class _Worker:
    """One persistent helper process solving QPs sent over a pipe."""

    def __init__(self):
        methods = mp.get_all_start_methods()
        ctx = mp.get_context("fork" if "fork" in methods else "spawn")
        self.conn, child = ctx.Pipe()
        self.proc = ctx.Process(target=_worker_loop, args=(child,), daemon=True)
        self.proc.start()
        child.close()

    def submit(self, problem):
        self.conn.send(problem)

    def result(self):
        return self.conn.recv()

    def close(self):
        try:
            self.conn.send(None)
        except (BrokenPipeError, OSError):
            pass
        self.proc.join(timeout=1.0)


_WORKER = None


def _worker() -> _Worker:
    global _WORKER
    if _WORKER is None or not _WORKER.proc.is_alive():
        _WORKER = _Worker()
    return _WORKER


@atexit.register
def shutdown_worker():
    global _WORKER
    if _WORKER is not None:
        _WORKER.close()
        _WORKER = None


def plan_parallel(rough: RoughPath, strom: Strom, cfg: PlannerConfig, d_tgt: float, v0: float,
                  footprint: Footprint = Footprint(5.0, 2.0), dp0: float = 0.0,
                  threads: int | None = None) -> PlannedTrajectory:
    """Smooth path and speed, concurrently when more than one thread is allowed.

    Timings (ms) land in ``trajectory.timings``: ``path``/``speed`` are each
    side's own time and ``parallel`` the wall time of the combined stage.
    """
    threads = cfg.effective_threads() if threads is None else threads
    wall0 = time.perf_counter()
    t0 = time.perf_counter()
    pprob, s_st, lo, hi, bd = build_path_problem(rough, strom, cfg, d_tgt, footprint, dp0)
    build_path = time.perf_counter() - t0
    if threads >= 2:
        w = _worker()
        w.submit(pprob)
        t1 = time.perf_counter()
        speed = smooth_speed(rough, cfg, v0)
        speed_s = time.perf_counter() - t1
        status, payload, solve_path = w.result()
        if status != "ok":
            if status == "infeasible":
                raise SmoothingCorridorEmpty(f"smoothing corridor empty ({payload})")
            raise RuntimeError(f"path worker failed: {payload}")
        path = path_from_solution(payload, s_st, lo, hi, bd)
    else:
        t1 = time.perf_counter()
        try:
            res = solve_qp(pprob)
        except (QpInfeasible, QpUnbounded) as exc:
            raise SmoothingCorridorEmpty(f"smoothing corridor empty ({exc})") from exc
        solve_path = time.perf_counter() - t1
        path = path_from_solution(res.x, s_st, lo, hi, bd)
        t2 = time.perf_counter()
        speed = smooth_speed(rough, cfg, v0)
        speed_s = time.perf_counter() - t2
    traj = merge(path, speed)
    traj.timings = {"path": 1e3 * (build_path + solve_path), "speed": 1e3 * speed_s,
                    "parallel": 1e3 * (time.perf_counter() - wall0)}
    return traj

