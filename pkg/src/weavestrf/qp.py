"""Small dense convex QP solver.

Solves  min 1/2 x'Hx + f'x  s.t.  A_eq x = b_eq,  lb <= A_in x <= ub
with a primal active-set method on the null space of the working constraints.
Equalities touching a single variable are fixed exactly in a presolve, so pinned
values come back bit-exact. A zero-objective LP (HiGHS) supplies the feasible
starting point and detects infeasibility.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, lsq_linear

from .errors import QpInfeasible, QpUnbounded

FEAS_TOL = 1e-9
_RANK_TOL = 1e-10


@dataclass
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_in: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = self.H.shape[0]
        self.f = np.asarray(self.f, dtype=float).reshape(n)
        if self.H.shape != (n, n):
            raise ValueError("H must be square")
        if not np.allclose(self.H, self.H.T, atol=1e-12):
            raise ValueError("H must be symmetric")
        if self.A_eq is None:
            self.A_eq, self.b_eq = np.zeros((0, n)), np.zeros(0)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(self.A_eq.shape[0])
        if self.A_in is None:
            self.A_in, self.lb, self.ub = np.zeros((0, n)), np.zeros(0), np.zeros(0)
        self.A_in = np.asarray(self.A_in, dtype=float).reshape(-1, n)
        k = self.A_in.shape[0]
        self.lb = np.full(k, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float).reshape(k)
        self.ub = np.full(k, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float).reshape(k)

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.H @ x + self.f @ x)


@dataclass
class QpResult:
    x: np.ndarray
    objective: float
    iterations: int


def _presolve(p: QpProblem):
    """Fix variables pinned by single-variable equality rows."""
    fixed = {}
    keep_rows = []
    for r in range(p.A_eq.shape[0]):
        nz = np.flatnonzero(p.A_eq[r])
        if nz.size == 1:
            j = int(nz[0])
            val = p.b_eq[r] / p.A_eq[r, j]
            if j in fixed:
                if abs(fixed[j] - val) > FEAS_TOL * max(1.0, abs(val)):
                    raise QpInfeasible(f"conflicting fixed values for variable {j}")
                continue
            fixed[j] = val
        elif nz.size == 0:
            if abs(p.b_eq[r]) > FEAS_TOL:
                raise QpInfeasible("inconsistent empty equality row")
        else:
            keep_rows.append(r)
    return fixed, keep_rows


def solve_qp(p: QpProblem, max_iter: int | None = None) -> QpResult:
    fixed, eq_rows = _presolve(p)
    n = p.n
    fix_idx = np.array(sorted(fixed), dtype=np.int64)
    free_idx = np.array([j for j in range(n) if j not in fixed], dtype=np.int64)
    x_fix = np.array([fixed[j] for j in fix_idx])

    H = p.H[np.ix_(free_idx, free_idx)]
    f = p.f[free_idx] + (p.H[np.ix_(free_idx, fix_idx)] @ x_fix if fix_idx.size else 0.0)
    Ae = p.A_eq[np.ix_(eq_rows, free_idx)]
    be = p.b_eq[eq_rows] - (p.A_eq[np.ix_(eq_rows, fix_idx)] @ x_fix if fix_idx.size else 0.0)
    Ai = p.A_in[:, free_idx]
    shift = p.A_in[:, fix_idx] @ x_fix if fix_idx.size else np.zeros(p.A_in.shape[0])
    lb = p.lb - shift
    ub = p.ub - shift

    # rows with no free variable are checked, then dropped
    empty = ~np.any(Ai != 0, axis=1)
    if np.any(empty & ((lb > FEAS_TOL) | (ub < -FEAS_TOL))):
        raise QpInfeasible("inequality violated by fixed variables")
    # one-sided form G x >= c
    G_rows, c_rows = [], []
    for r in np.flatnonzero(~empty):
        if np.isfinite(lb[r]):
            G_rows.append(Ai[r])
            c_rows.append(lb[r])
        if np.isfinite(ub[r]):
            G_rows.append(-Ai[r])
            c_rows.append(-ub[r])
    nf = free_idx.size
    G = np.array(G_rows, dtype=float).reshape(len(G_rows), nf)
    c = np.array(c_rows, dtype=float)

    if nf == 0:
        x = np.zeros(n)
        x[fix_idx] = x_fix
        return QpResult(x, p.objective(x), 0)

    # eliminate the remaining equalities once: x = x_p + Z y
    if Ae.shape[0]:
        x_p = np.linalg.lstsq(Ae, be, rcond=None)[0]
        if np.abs(Ae @ x_p - be).max() > FEAS_TOL * max(1.0, np.abs(be).max()):
            raise QpInfeasible("equality constraints are inconsistent")
        Z = _null_space(Ae, nf)
    else:
        x_p = np.zeros(nf)
        Z = np.eye(nf)
    if Z.shape[1] == 0:
        xf, it = x_p, 0
        if G.size and np.any(G @ xf - c < -FEAS_TOL * (1.0 + np.abs(c))):
            raise QpInfeasible("equality solution violates the inequalities")
    else:
        Hr = Z.T @ H @ Z
        fr = Z.T @ (H @ x_p + f)
        Gr = G @ Z if G.size else G.reshape(0, Z.shape[1])
        cr = c - G @ x_p if G.size else c
        y, it = _active_set(0.5 * (Hr + Hr.T), fr, np.zeros((0, Z.shape[1])), np.zeros(0), Gr, cr,
                            max_iter or 50 * (Z.shape[1] + G.shape[0] + 10))
        xf = x_p + Z @ y
    x = np.empty(n)
    x[fix_idx] = x_fix
    x[free_idx] = xf
    return QpResult(x, p.objective(x), it)


def _feasible_start(Ae, be, G, c, n):
    res = linprog(np.zeros(n), A_ub=-G if G.size else None, b_ub=-c if G.size else None,
                  A_eq=Ae if Ae.size else None, b_eq=be if Ae.size else None,
                  bounds=[(None, None)] * n, method="highs")
    if res.status == 2:
        raise QpInfeasible("no point satisfies the constraints")
    if res.status != 0:
        raise QpInfeasible(f"feasibility search failed: {res.message}")
    return np.asarray(res.x, dtype=float)


def _independent(rows, cand):
    """Greedily extend ``rows`` by candidates that keep them linearly independent."""
    out = list(rows)
    M = np.array(out).reshape(len(out), -1) if out else None
    chosen = []
    for idx, r in cand:
        trial = r[None, :] if M is None else np.vstack([M, r])
        if np.linalg.matrix_rank(trial, tol=_RANK_TOL * max(1.0, np.abs(trial).max())) == trial.shape[0]:
            M = trial
            chosen.append(idx)
    return chosen


def _null_space(A, n):
    if A.shape[0] == 0:
        return np.eye(n)
    _, sv, vt = np.linalg.svd(A)
    rank = int(np.sum(sv > _RANK_TOL * max(1.0, sv[0])))
    return vt[rank:].T


def _active_set(H, f, Ae, be, G, c, max_iter):
    n = H.shape[0]
    x = _feasible_start(Ae, be, G, c, n)
    slack = G @ x - c if G.size else np.zeros(0)
    scale = 1.0 + np.abs(c) if G.size else np.zeros(0)
    eq_list = [(None, r) for r in Ae]
    # drop dependent equality rows (consistent by phase I)
    eq_keep = _independent([], [(i, r) for i, (_, r) in enumerate(eq_list)])
    Ae_i = Ae[eq_keep] if len(eq_keep) else np.zeros((0, n))
    be_i = be[eq_keep] if len(eq_keep) else np.zeros(0)
    active = [int(j) for j in np.argsort(slack) if slack[j] <= 1e-7 * scale[j]] if G.size else []
    W = _independent(list(Ae_i), [(j, G[j]) for j in active])

    def polish(x, W):
        A = np.vstack([Ae_i, G[W]]) if W else Ae_i
        b = np.concatenate([be_i, c[W]]) if W else be_i
        if A.shape[0] == 0:
            return x
        r = b - A @ x
        return x + np.linalg.lstsq(A, r, rcond=None)[0]

    x = polish(x, W)
    for it in range(1, max_iter + 1):
        A_W = np.vstack([Ae_i, G[W]]) if W else Ae_i
        Z = _null_space(A_W, n)
        g = H @ x + f
        p = np.zeros(n)
        ray = False
        if Z.shape[1]:
            Hz = Z.T @ H @ Z
            gz = Z.T @ g
            w, V = np.linalg.eigh(0.5 * (Hz + Hz.T))
            hscale = max(1.0, np.abs(w).max())
            flat = w <= 1e-10 * hscale
            gv = V.T @ gz
            gnorm = max(1.0, np.abs(g).max())
            if np.any(flat & (np.abs(gv) > 1e-10 * gnorm)):
                # descent along a zero-curvature direction
                u = -(V[:, flat] @ gv[flat])
                p = Z @ u
                ray = True
            else:
                inv = np.where(flat, 0.0, 1.0 / np.where(flat, 1.0, w))
                u = -(V @ (inv * gv))
                p = Z @ u
        if not ray and np.abs(p).max() <= 1e-12 * max(1.0, np.abs(x).max()):
            if not W:
                return x, it
            lam = np.linalg.lstsq(A_W.T, g, rcond=None)[0]
            lam_in = lam[Ae_i.shape[0]:]
            j = int(np.argmin(lam_in))
            if lam_in[j] >= -1e-9 * max(1.0, np.abs(g).max()):
                return x, it
            W.pop(j)
            continue
        alpha = np.inf if ray else 1.0
        block = -1
        if G.size:
            Gp = G @ p
            cand = np.flatnonzero(Gp < -1e-14 * np.abs(G).max(axis=1).clip(1.0) * np.abs(p).max())
            cand = [j for j in cand if j not in W]
            for j in cand:
                step = max(0.0, (c[j] - G[j] @ x) / Gp[j])
                if step < alpha or (step == alpha and block >= 0 and j < block):
                    alpha, block = step, j
        if not np.isfinite(alpha):
            raise QpUnbounded("objective unbounded below on the feasible set")
        x = x + alpha * p
        if block >= 0:
            W.append(int(block))
            x = polish(x, W)
    raise RuntimeError("active-set iteration limit reached")


@dataclass
class KktReport:
    eq_residual: float
    bound_violation: float
    stationarity: float

    def ok(self, eq_tol=1e-6, bound_tol=1e-6, kkt_tol=1e-5) -> bool:
        return self.eq_residual <= eq_tol and self.bound_violation <= bound_tol and self.stationarity <= kkt_tol


def certify(p: QpProblem, x, active_tol: float = 1e-7) -> KktReport:
    """Independent KKT check: residuals plus the best sign-constrained multiplier fit."""
    x = np.asarray(x, dtype=float)
    eq = float(np.abs(p.A_eq @ x - p.b_eq).max()) if p.A_eq.shape[0] else 0.0
    ax = p.A_in @ x
    viol = 0.0
    if p.A_in.shape[0]:
        viol = float(max(np.max(np.where(np.isfinite(p.lb), p.lb - ax, -np.inf), initial=0.0),
                         np.max(np.where(np.isfinite(p.ub), ax - p.ub, -np.inf), initial=0.0), 0.0))
    g = p.H @ x + p.f
    cols, lo, hi = [], [], []
    for r in p.A_eq:
        cols.append(r)
        lo.append(-np.inf)
        hi.append(np.inf)
    for r in range(p.A_in.shape[0]):
        tol = active_tol * (1.0 + abs(ax[r]))
        at_lo = np.isfinite(p.lb[r]) and ax[r] - p.lb[r] <= tol
        at_hi = np.isfinite(p.ub[r]) and p.ub[r] - ax[r] <= tol
        if at_lo and at_hi:
            cols.append(p.A_in[r]); lo.append(-np.inf); hi.append(np.inf)
        elif at_lo:
            cols.append(p.A_in[r]); lo.append(0.0); hi.append(np.inf)
        elif at_hi:
            cols.append(p.A_in[r]); lo.append(-np.inf); hi.append(0.0)
    if cols:
        A = np.array(cols).T
        sol = lsq_linear(A, g, bounds=(np.array(lo), np.array(hi)), method="bvls", tol=1e-14)
        stat = float(np.abs(A @ sol.x - g).max())
    else:
        stat = float(np.abs(g).max())
    return KktReport(eq, viol, stat)
