"""Dynamic-risk-balance calibration of the obstacle field coefficients.

Episodes are classified by time-to-collision into high-risk, low-risk and
decision sets. For a candidate coefficient vector the risk band comes from the
high- and low-risk sets (smallest high-risk peak, mean low-risk level) and the
objective is the RMSE of the decision set's post-decision risk outside the band.
A seeded genetic search with variable-neighbourhood refinement minimizes it in
log-coefficient space.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from ._kernels import obstacle_field_points
from .errors import DegenerateBand, InsufficientData, ScenarioError
from .field import E_CAP, V_REF
from .geometry import Footprint, FrenetPoint
from .params import FieldParams
from .scene import DEFAULT_LANE_WIDTH, Obstacle, PredictedTrajectory, VehicleState

TTC_THRESHOLD = 3.0
SPIKE_ACCEL = 2.5       # m/s^2
SPIKE_DURATION = 0.3    # s
DECISION_OFFSET = 1.0   # s after the decision epoch at which R_n is read

HIGH, LOW, DECISION = "high-risk", "low-risk", "decision"
CLASSES = (HIGH, LOW, DECISION)

# coefficients that shape the obstacle field, the only ones the objective sees
OBSTACLE_KEYS = ("alpha", "beta_1", "beta_2", "k", "gamma_1", "gamma_2")


def ttc(gap: float, closing: float):
    """Time to collision, or ``None`` when the gap is not closing."""
    if gap < 0:
        raise ValueError("gap must be nonnegative")
    if closing <= 0:
        return None
    return gap / closing


@dataclass
class Episode:
    ego: PredictedTrajectory
    vehicles: list                     # Obstacle list, same timestamps as the ego
    ego_footprint: Footprint = Footprint(5.0, 2.0)
    lane_width: float = DEFAULT_LANE_WIDTH
    label: str | None = None
    decision_epoch: float | None = None
    name: str = ""

    def __post_init__(self):
        for ob in self.vehicles:
            t = ob.prediction.t
            if t.shape != self.ego.t.shape or not np.allclose(t, self.ego.t, atol=1e-9):
                raise ScenarioError(f"episode {self.name!r}: trajectories are not synchronized")

    @property
    def t(self) -> np.ndarray:
        return self.ego.t

    def lane_indices(self, d) -> np.ndarray:
        return np.floor(np.asarray(d) / self.lane_width).astype(np.int64)

    def min_ttc(self) -> float:
        """Smallest TTC to the nearest same-lane leader over all epochs (inf if never closing)."""
        ego_lane = self.lane_indices(self.ego.d)
        v_ego = self.ego.speeds(0.0)
        best = math.inf
        for ob in self.vehicles:
            tr = ob.prediction
            lane = self.lane_indices(tr.d)
            half = 0.5 * (ob.state.footprint.length + self.ego_footprint.length)
            v_ob = tr.speeds(ob.state.v)
            for i in range(len(tr)):
                if lane[i] != ego_lane[i] or tr.s[i] <= self.ego.s[i]:
                    continue
                val = ttc(max(tr.s[i] - self.ego.s[i] - half, 0.0), v_ego[i] - v_ob[i])
                if val is not None and val < best:
                    best = val
        return best

    def decision_time(self):
        """First lane-index change or sustained acceleration spike, else ``None``."""
        t = self.t
        lane = self.lane_indices(self.ego.d)
        cand = []
        change = np.flatnonzero(lane[1:] != lane[:-1])
        if change.size:
            cand.append(float(t[change[0] + 1]))
        spike = np.abs(self.ego.accels(0.0)) > SPIKE_ACCEL
        start = None
        for i in range(t.size):
            if spike[i]:
                if start is None:
                    start = i
                if t[i] - t[start] >= SPIKE_DURATION - 1e-9:
                    cand.append(float(t[start]))
                    break
            else:
                start = None
        return min(cand) if cand else None


def classify_episode(ep: Episode):
    """Return ``(class, decision epoch or None)`` by the TTC rule."""
    if ep.min_ttc() < TTC_THRESHOLD:
        return HIGH, None
    t_dec = ep.decision_time()
    if t_dec is not None:
        return DECISION, t_dec
    return LOW, None


@dataclass(frozen=True)
class RiskBand:
    R_max: float
    R_best: float
    R_min: float

    def distance(self, r):
        """Distance of risk values to the band, zero inside."""
        r = np.asarray(r, dtype=float)
        return np.where(r > self.R_max, r - self.R_max, np.where(r < self.R_min, self.R_min - r, 0.0))


def band_from_values(high_peaks, low_levels) -> RiskBand:
    high_peaks = np.asarray(high_peaks, dtype=float)
    low_levels = np.asarray(low_levels, dtype=float)
    if high_peaks.size == 0 or low_levels.size == 0:
        raise InsufficientData()
    r_max = float(high_peaks.min())
    r_best = float(np.mean(low_levels))
    r_min = 2.0 * r_best - r_max
    if not r_min < r_max:
        raise DegenerateBand(r_max, r_min)
    # restate the midpoint from the stored ends so the identity holds bit-exactly
    return RiskBand(r_max, 0.5 * (r_max + r_min), r_min)


def rmse_from_values(values, band: RiskBand) -> float:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise InsufficientData()
    dist = band.distance(values)
    return float(math.sqrt(float(np.sum(dist * dist)) / values.size))


def ego_risk(ep: Episode, params: FieldParams, times=None) -> np.ndarray:
    """Summed obstacle field at the ego position, obstacles played back to the same epoch."""
    times = ep.t if times is None else np.atleast_1d(np.asarray(times, dtype=float))
    s = np.interp(times, ep.t, ep.ego.s)
    d = np.interp(times, ep.t, ep.ego.d)
    out = np.zeros(times.size)
    for k, tau in enumerate(times):
        buf = np.zeros(1)
        for ob in ep.vehicles:
            obstacle_field_points(s[k:k + 1], d[k:k + 1], float(tau), ob, params, out=buf)
        out[k] = buf[0]
    return out


def _decision_epoch(ep: Episode) -> float:
    if ep.decision_epoch is not None:
        return ep.decision_epoch
    label, t_dec = classify_episode(ep)
    if t_dec is None:
        raise ValueError(f"episode {ep.name!r} has no decision epoch")
    return t_dec


def risk_band(high, low, params: FieldParams) -> RiskBand:
    peaks = [float(ego_risk(ep, params).max()) for ep in high]
    levels = [float(ego_risk(ep, params).mean()) for ep in low]
    return band_from_values(peaks, levels)


def rmse_objective(decision, params: FieldParams, band: RiskBand, offset: float = DECISION_OFFSET) -> float:
    vals = [float(ego_risk(ep, params, [_decision_epoch(ep) + offset])[0]) for ep in decision]
    return rmse_from_values(vals, band)


# --- fast re-evaluation for the search -------------------------------------

@njit(cache=True)
def _pair_fields(start, ts, dt2, cos_psi, v, a, idx, mass, alpha, k, beta_1, beta_2,
                 gamma_1, gamma_2, T_r, a_max, G, out):
    """Field of each (point, obstacle) pair from its precomputed scatter terms.

    Samples of pair ``p`` occupy ``start[p]:start[p+1]`` sorted by |t - tau|.
    """
    for p in range(start.size - 1):
        best = np.inf
        bi = -1
        for j in range(start[p], start[p + 1]):
            if math.sqrt(alpha * dt2[j]) > best:
                break
            r = math.sqrt(ts[j] * ts[j] + alpha * dt2[j])
            if r < best or (r == best and idx[j] < idx[bi]):
                best = r
                bi = j
        vb = v[bi]
        if vb > 0:
            eta = math.exp(k * cos_psi[bi] * (beta_1 * vb + beta_2 * a[bi]))
        else:
            eta = 1.0
        q = mass[p] * math.exp(vb * gamma_1 * T_r / (gamma_2 * a_max))
        if best <= 0.0:
            out[p] = E_CAP
        else:
            out[p] = min(G * eta * q / best, E_CAP)


class _Evaluator:
    """Scatter geometry of every (evaluation point, obstacle) pair, fixed across candidates."""

    def __init__(self, points):
        # points: list of (s, d, tau, vehicles)
        start = [0]
        cols = {name: [] for name in ("ts", "dt2", "cos", "v", "a", "idx")}
        mass, owner = [], []
        for pi, (ps, pd, tau, vehicles) in enumerate(points):
            for ob in vehicles:
                st = ob.state_at(tau)
                tr = ob.prediction
                order = np.argsort(np.abs(tr.t - tau), kind="stable")
                yaw = tr.headings(st.yaw)[order]
                dss = ps - tr.s[order]
                ddd = pd - tr.d[order]
                x = np.cos(yaw) * dss + np.sin(yaw) * ddd
                y = -np.sin(yaw) * dss + np.cos(yaw) * ddd
                v = tr.speeds(st.v)[order]
                hl, hw = st.footprint.length / 2.0, st.footprint.width / 2.0
                cols["ts"].append(_tstar(x, y, hl, hw, v))
                cols["dt2"].append(np.square(tr.t[order] - tau))
                rho = np.hypot(x, y)
                cols["cos"].append(np.where(rho > 0, x / np.where(rho > 0, rho, 1.0), 0.0))
                cols["v"].append(v)
                cols["a"].append(tr.accels(st.a)[order])
                cols["idx"].append(order.astype(np.int64))
                mass.append(st.mass)
                owner.append(pi)
                start.append(start[-1] + order.size)
        self.start = np.array(start, dtype=np.int64)
        cat = lambda xs, dt=float: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dtype=dt)
        self.ts, self.dt2, self.cos = cat(cols["ts"]), cat(cols["dt2"]), cat(cols["cos"])
        self.v, self.a, self.idx = cat(cols["v"]), cat(cols["a"]), cat(cols["idx"], np.int64)
        self.mass = np.array(mass, dtype=float)
        self.owner = np.array(owner, dtype=np.int64)
        self.n_points = len(points)

    def __call__(self, p: FieldParams) -> np.ndarray:
        pair = np.zeros(self.mass.size)
        if pair.size:
            _pair_fields(self.start, self.ts, self.dt2, self.cos, self.v, self.a, self.idx, self.mass,
                         p.alpha, p.k, p.beta_1, p.beta_2, p.gamma_1, p.gamma_2, p.T_r, p.a_max, p.G, pair)
        return np.bincount(self.owner, weights=pair, minlength=self.n_points)


def _tstar(x, y, hl, hw, v):
    ax, ay = np.abs(x), np.abs(y)
    inside = (ax <= hl) & (ay <= hw)
    moving = v > 0
    vs = np.where(moving, v, 1.0)
    m = 0.01476 + 0.8 / vs
    corner = np.minimum(np.minimum(np.sqrt(m * m * (x - hl) * (x - hl) + (y - hw) * (y - hw)),
                                   np.sqrt(m * m * (x - hl) * (x - hl) + (y + hw) * (y + hw))),
                        np.minimum(np.sqrt(m * m * (x + hl) * (x + hl) + (y - hw) * (y - hw)),
                                   np.sqrt(m * m * (x + hl) * (x + hl) + (y + hw) * (y + hw)))) / (m * vs)
    moving_t = np.where(ay <= hw, (ax - hl) / vs, np.where(ax <= hl, (ay - hw) / (m * vs), corner))
    dist = np.where(ay <= hw, ax - hl, np.where(ax <= hl, ay - hw, np.hypot(ax - hl, ay - hw)))
    return np.where(inside, 0.0, np.where(moving, moving_t, dist / V_REF))


class CalibrationProblem:
    """Band + RMSE objective over a fixed episode set."""

    def __init__(self, episodes, offset: float = DECISION_OFFSET):
        sets = split_classes(episodes)
        self.high, self.low, self.decision = sets[HIGH], sets[LOW], sets[DECISION]
        pts, self.high_slices, self.low_slices = [], [], []
        for group, slices in ((self.high, self.high_slices), (self.low, self.low_slices)):
            for ep in group:
                a = len(pts)
                pts.extend((float(ep.ego.s[i]), float(ep.ego.d[i]), float(ep.t[i]), ep.vehicles)
                           for i in range(ep.t.size))
                slices.append((a, len(pts)))
        self.dec_start = len(pts)
        for ep in self.decision:
            tau = _decision_epoch(ep) + offset
            pts.append((float(np.interp(tau, ep.t, ep.ego.s)), float(np.interp(tau, ep.t, ep.ego.d)),
                        tau, ep.vehicles))
        self.evaluate = _Evaluator(pts)

    def band_and_values(self, params: FieldParams):
        risk = self.evaluate(params)
        peaks = [risk[a:b].max() for a, b in self.high_slices]
        levels = [risk[a:b].mean() for a, b in self.low_slices]
        return band_from_values(peaks, levels), risk[self.dec_start:]

    def objective(self, params: FieldParams) -> float:
        try:
            band, vals = self.band_and_values(params)
        except DegenerateBand:
            return math.inf
        return rmse_from_values(vals, band)


def split_classes(episodes) -> dict:
    sets = {c: [] for c in CLASSES}
    for ep in episodes:
        label = ep.label
        if label is None:
            label, t_dec = classify_episode(ep)
            if t_dec is not None and ep.decision_epoch is None:
                ep.decision_epoch = t_dec
        if label not in sets:
            raise ScenarioError(f"episode {ep.name!r}: unknown class {label!r}")
        sets[label].append(ep)
    missing = [c for c in CLASSES if not sets[c]]
    if missing:
        raise InsufficientData(f"insufficient data: no {', '.join(missing)} episodes")
    return sets


# --- search -----------------------------------------------------------------

@dataclass(frozen=True)
class SearchConfig:
    keys: tuple = OBSTACLE_KEYS
    decades: float = 1.0         # box half-width in orders of magnitude around the base value
    population: int = 24
    generations: int = 200
    elite: int = 2
    crossover_rate: float = 0.9
    mutation_rate: float = 0.2
    mutation_scale: float = 0.15  # std of a mutation step, in decades
    vns_levels: int = 3
    vns_tries: int = 4
    offset: float = DECISION_OFFSET

    def boxes(self, base: FieldParams) -> dict:
        out = {}
        for key in self.keys:
            v = getattr(base, key)
            if v == 0:
                raise ValueError(f"cannot build a log box around zero for {key}")
            a, b = v * 10.0 ** -self.decades, v * 10.0 ** self.decades
            out[key] = (min(a, b), max(a, b))
        return out


@dataclass
class CalibrationResult:
    params: FieldParams
    band: RiskBand
    rmse: float
    trace: list                  # best RMSE after each generation
    seed: int
    boxes: dict
    evaluations: int = 0
    counts: dict = field(default_factory=dict)

    def report(self) -> dict:
        return {
            "seed": self.seed,
            "rmse": self.rmse,
            "band": {"R_max": self.band.R_max, "R_best": self.band.R_best, "R_min": self.band.R_min},
            "generations": len(self.trace),
            "evaluations": self.evaluations,
            "episodes": self.counts,
            "boxes": {k: list(v) for k, v in self.boxes.items()},
            "params": self.params.to_dict(),
        }

    def write(self, out_dir) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        self.params.save(out / "field_params.json")
        with open(out / "calibration_trace.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "best_rmse"])
            for g, r in enumerate(self.trace):
                w.writerow([g, repr(float(r))])
        (out / "calibration_report.json").write_text(json.dumps(self.report(), indent=2) + "\n")
        return [out / "field_params.json", out / "calibration_trace.csv", out / "calibration_report.json"]


def calibrate(episodes, search: SearchConfig | None = None, seed: int = 0,
              base: FieldParams | None = None) -> CalibrationResult:
    search = search or SearchConfig()
    base = base or FieldParams()
    problem = CalibrationProblem(episodes, search.offset)
    boxes = search.boxes(base)
    keys = search.keys
    signs = np.array([math.copysign(1.0, getattr(base, k)) for k in keys])
    lo = np.array([math.log10(abs(boxes[k][0 if s > 0 else 1])) for k, s in zip(keys, signs)])
    hi = np.array([math.log10(abs(boxes[k][1 if s > 0 else 0])) for k, s in zip(keys, signs)])
    rng = np.random.default_rng(seed)
    n = len(keys)
    evals = 0

    def decode(z):
        # clamp to the box so the log round trip cannot leave it by an ulp
        vals = {k: min(max(float(sg * 10.0 ** zi), boxes[k][0]), boxes[k][1]) for k, sg, zi in zip(keys, signs, z)}
        return base.with_(**vals)

    def score(z):
        nonlocal evals
        evals += 1
        return problem.objective(decode(z))

    z0 = np.array([math.log10(abs(getattr(base, k))) for k in keys])
    pop = np.vstack([z0, rng.uniform(lo, hi, size=(search.population - 1, n))])
    fit = np.array([score(z) for z in pop])
    trace = []
    for _ in range(search.generations):
        order = np.lexsort((np.arange(len(fit)), fit))
        pop, fit = pop[order], fit[order]
        children = [pop[i].copy() for i in range(search.elite)]
        child_fit = [fit[i] for i in range(search.elite)]
        while len(children) < search.population:
            pa = _tournament(rng, fit)
            pb = _tournament(rng, fit)
            a, b = pop[pa], pop[pb]
            if rng.random() < search.crossover_rate:
                # blend crossover in log space
                u = rng.uniform(-0.25, 1.25, size=n)
                c = a + u * (b - a)
            else:
                c = a.copy()
            mut = rng.random(n) < search.mutation_rate
            c = c + mut * rng.normal(0.0, search.mutation_scale, size=n)
            c = np.clip(c, lo, hi)
            children.append(c)
            child_fit.append(score(c))
        pop = np.array(children)
        fit = np.array(child_fit)
        # variable-neighbourhood refinement of the incumbent
        b = int(np.lexsort((np.arange(len(fit)), fit))[0])
        z, fz = pop[b].copy(), fit[b]
        level = 1
        while level <= search.vns_levels and fz > 0.0:
            improved = False
            step = search.mutation_scale * 0.5 ** (search.vns_levels - level)
            for _ in range(search.vns_tries):
                cand = np.clip(z + rng.normal(0.0, step, size=n) * (rng.random(n) < 0.5), lo, hi)
                fc = score(cand)
                if fc < fz:
                    z, fz, improved = cand, fc, True
                    break
            level = 1 if improved else level + 1
        pop[b], fit[b] = z, fz
        trace.append(float(fit.min()))
        if trace[-1] == 0.0:
            break
    b = int(np.lexsort((np.arange(len(fit)), fit))[0])
    best = decode(pop[b])
    if not math.isfinite(fit[b]):
        raise DegenerateBand(math.nan, math.nan)
    band, _ = problem.band_and_values(best)
    best = best.with_(R_max=band.R_max, R_min=band.R_min)
    counts = {HIGH: len(problem.high), LOW: len(problem.low), DECISION: len(problem.decision)}
    return CalibrationResult(best, band, float(fit[b]), trace, seed, boxes, evals, counts)


def _tournament(rng, fit, size=2) -> int:
    idx = rng.integers(0, len(fit), size=size)
    return int(min(idx, key=lambda i: (fit[i], i)))


# --- episode files ----------------------------------------------------------

def _vehicle_from_json(obj, where) -> tuple:
    try:
        rows = obj["trajectory"]
        fp = Footprint(float(obj.get("length", 5.0)), float(obj.get("width", 2.0)))
        mass = float(obj.get("mass", 1.0))
        traj = PredictedTrajectory.from_rows(rows)
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: {exc}") from exc
    return traj, fp, mass


def episode_from_dict(data: dict, name: str = "") -> Episode:
    name = data.get("name", name)
    if "ego" not in data:
        raise ScenarioError(f"episode {name!r}: missing 'ego'")
    ego, fp, _ = _vehicle_from_json(data["ego"], f"episode {name!r} ego")
    vehicles = []
    for i, obj in enumerate(data.get("vehicles", [])):
        traj, vfp, mass = _vehicle_from_json(obj, f"episode {name!r} vehicles[{i}]")
        st = VehicleState(FrenetPoint(float(traj.s[0]), float(traj.d[0])), float(traj.yaw[0]),
                          max(float(traj.v[0]), 0.0), float(traj.a[0]), mass, vfp)
        vehicles.append(Obstacle(st, traj, obj.get("name", f"v{i}")))
    label = data.get("class")
    if label is not None and label not in CLASSES:
        raise ScenarioError(f"episode {name!r}: unknown class {label!r}")
    t_dec = data.get("decision_epoch")
    return Episode(ego, vehicles, fp, float(data.get("lane_width", DEFAULT_LANE_WIDTH)), label,
                   None if t_dec is None else float(t_dec), name)


def episode_to_dict(ep: Episode) -> dict:
    out = {
        "name": ep.name,
        "lane_width": ep.lane_width,
        "ego": {"length": ep.ego_footprint.length, "width": ep.ego_footprint.width, "trajectory": ep.ego.rows()},
        "vehicles": [
            {"name": ob.name, "length": ob.state.footprint.length, "width": ob.state.footprint.width,
             "mass": ob.state.mass, "trajectory": ob.prediction.rows()}
            for ob in ep.vehicles
        ],
    }
    if ep.label is not None:
        out["class"] = ep.label
    if ep.decision_epoch is not None:
        out["decision_epoch"] = ep.decision_epoch
    return out


def load_episodes(directory) -> list:
    root = Path(directory)
    if not root.is_dir():
        raise ScenarioError(f"episode directory {str(root)!r} does not exist")
    files = sorted(root.glob("*.json"))
    if not files:
        raise ScenarioError(f"no episode files in {str(root)!r}")
    out = []
    for f in files:
        try:
            data = json.loads(f.read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{f.name}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        out.append(episode_from_dict(data, f.stem))
    return out


def save_episodes(episodes, directory) -> None:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    for i, ep in enumerate(episodes):
        name = ep.name or f"episode_{i:03d}"
        (root / f"{name}.json").write_text(json.dumps(episode_to_dict(ep)) + "\n")


# --- synthetic episodes -----------------------------------------------------

def _track(t, s0, d0, v, d_of_t=None):
    v = np.maximum(np.broadcast_to(np.asarray(v, dtype=float), t.shape), 0.0)
    s = s0 + np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * np.diff(t))])
    d = np.full(t.size, d0) if d_of_t is None else d_of_t
    acc = np.gradient(v, t)
    if d_of_t is None:
        yaw = np.zeros(t.size)
    else:
        yaw = np.arctan2(np.gradient(d, t), np.maximum(v, 1e-6))
    return PredictedTrajectory(t, s, d, v, acc, yaw)


def _vehicle(traj, name):
    st = VehicleState(FrenetPoint(float(traj.s[0]), float(traj.d[0])), float(traj.yaw[0]),
                      float(traj.v[0]), float(traj.a[0]))
    return Obstacle(st, traj, name)


def synthetic_episodes(theta: FieldParams, seed: int = 0, n_high: int = 6, n_low: int = 6,
                       n_decision: int = 12, inside_fraction: float = 0.75, duration: float = 6.0,
                       dt: float = 0.1, lane_width: float = DEFAULT_LANE_WIDTH, max_tries: int = 2000):
    """Episodes whose decision outcomes are balanced with respect to ``theta``.

    High- and low-risk episodes fix the band under ``theta``; decision episodes
    are drawn until about ``inside_fraction`` of them settle inside that band.
    Labels are assigned by :func:`classify_episode`.
    """
    rng = np.random.default_rng(seed)
    t = np.round(np.arange(int(round(duration / dt)) + 1) * dt, 10)
    c0, c1 = 0.5 * lane_width, 1.5 * lane_width

    def high():
        # closing on a slower leader, braking late to match its speed
        v = rng.uniform(12, 18)
        dv = rng.uniform(4, 6)
        t_b = rng.uniform(0.5, 1.5)
        v_ego = np.where(t < t_b, v, np.maximum(v - 3.0 * (t - t_b), v - dv))
        lead = _track(t, rng.uniform(14, 20) + 5.0, c1, v - dv)
        side = _track(t, rng.uniform(-20, 20), c0, v + rng.uniform(-2, 2))
        return Episode(_track(t, 0.0, c1, v_ego), [_vehicle(lead, "lead"), _vehicle(side, "side")],
                       lane_width=lane_width)

    def low():
        v = rng.uniform(12, 18)
        lead = _track(t, rng.uniform(30, 50), c1, v + rng.uniform(0, 2))
        side = _track(t, rng.uniform(-30, 30), c0, v + rng.uniform(-1, 1))
        return Episode(_track(t, 0.0, c1, v), [_vehicle(lead, "lead"), _vehicle(side, "side")], lane_width=lane_width)

    def decision():
        v = rng.uniform(12, 18)
        t0 = rng.uniform(1.0, 2.5)
        tau = np.clip((t - t0) / 3.0, 0.0, 1.0)
        d = c1 + (c0 - c1) * (0.5 - 0.5 * np.cos(math.pi * tau))
        ego = _track(t, 0.0, c1, v, d_of_t=d)
        lead = _track(t, rng.uniform(35, 55), c1, v + rng.uniform(0, 2))
        other = _track(t, rng.uniform(-35, -8), c0, v + rng.uniform(-3, 3))
        return Episode(ego, [_vehicle(lead, "lead"), _vehicle(other, "target")], lane_width=lane_width)

    def draw(maker, label, count):
        out = []
        for _ in range(max_tries):
            if len(out) == count:
                break
            ep = maker()
            got, t_dec = classify_episode(ep)
            if got == label:
                ep.label, ep.decision_epoch = got, t_dec
                out.append(ep)
        if len(out) < count:
            raise RuntimeError(f"could not draw {count} {label} episodes")
        return out

    highs = draw(high, HIGH, n_high)
    lows = draw(low, LOW, n_low)
    band = risk_band(highs, lows, theta)
    n_in = int(round(inside_fraction * n_decision))
    inside, outside = [], []
    for _ in range(max_tries):
        if len(inside) >= n_in and len(outside) >= n_decision - n_in:
            break
        ep = draw(decision, DECISION, 1)[0]
        r = float(ego_risk(ep, theta, [ep.decision_epoch + DECISION_OFFSET])[0])
        ok = band.R_min <= r <= band.R_max
        (inside if ok else outside).append(ep)
    decisions = inside[:n_in] + outside[:n_decision - n_in]
    if len(decisions) < n_decision:
        raise RuntimeError("could not balance decision episodes")
    eps = highs + lows + decisions
    for i, ep in enumerate(eps):
        ep.name = f"{ep.label.split('-')[0]}_{i:03d}"
    return eps
