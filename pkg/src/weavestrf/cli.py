"""Command-line entry points: plan, field, calibrate, sweep."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from ._kernels import obstacle_field_points
from .calibration import SearchConfig, calibrate, load_episodes
from .config import PlannerConfig
from .errors import DegenerateBand, InsufficientData, PlanningError, ScenarioError
from .field import geo_field_at, lane_field
from .geometry import FrenetPoint
from .params import FieldParams
from .scenario_io import load_scenario
from .sim import collect_metrics, plan, run_scenario, sensitivity_sweep, write_outputs
from .strom import write_heatmaps

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_USAGE = 64
EXIT_INTERNAL = 70


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="weavestrf", description="Risk-field lane-change planner for weaving segments.")
    p.add_argument("--print-config", action="store_true", help="print default field and planner settings as JSON")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("plan", help="plan one scenario and write trajectory, metrics and exposure files")
    a.add_argument("--scenario", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--threads", type=int, default=None, help="overrides WEAVE_THREADS")
    a.add_argument("--r-max", type=_positive_float, default=None, help="STROM occupancy threshold")
    a.add_argument("--heatmaps", action="store_true", help="also dump the STROM slices")

    a = sub.add_parser("field", help="dump the total field on a grid")
    a.add_argument("--scenario", required=True)
    a.add_argument("--out", default=".")
    a.add_argument("--time", type=float, action="append", required=True)
    a.add_argument("--grid", type=_positive_float, default=0.5)
    a.add_argument("--s-range", type=float, nargs=2, default=None, metavar=("S_LO", "S_HI"))

    a = sub.add_parser("calibrate", help="fit field coefficients to classified episodes")
    a.add_argument("--episodes", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--generations", type=int, default=SearchConfig.generations)
    a.add_argument("--population", type=int, default=SearchConfig.population)

    a = sub.add_parser("sweep", help="rerun a scenario across STROM thresholds")
    a.add_argument("--scenario", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--r-max", type=_positive_float, nargs="+", default=[3.0, 4.0, 6.0])
    a.add_argument("--seed", type=int, default=0)
    return p


def default_config() -> dict:
    return {"field_params": FieldParams().to_dict(), "planner": PlannerConfig().to_dict()}


def _with_threads(scenario, threads):
    if threads is None:
        return scenario
    if threads < 0:
        raise UsageError("--threads must be nonnegative")
    scenario.planner = scenario.planner.with_(threads=threads)
    return scenario


def cmd_plan(args) -> int:
    sc = _with_threads(load_scenario(args.scenario), args.threads)
    if args.heatmaps:
        result = plan(sc, args.seed, args.r_max)
        traj, metrics = result.trajectory, collect_metrics(result, sc, args.r_max)
    else:
        traj, metrics = run_scenario(sc, args.seed, threshold=args.r_max)
    paths = write_outputs(args.out, traj, metrics)
    if args.heatmaps:
        paths += write_heatmaps(result.strom, Path(args.out) / "strom")
    print(f"completion_time={metrics.completion_time:g} s, max_exposure={max(metrics.exposure):.4f}, "
          f"total={metrics.timings['total_ms']:.1f} ms")
    return EXIT_OK


def field_grid(sc, tau: float, grid: float, s_range=None):
    """Total field (obstacles, lane lines, weaving geometry) on a regular grid at ``tau``."""
    road = sc.road
    if s_range is None:
        s_range = (sc.ego.pos.s - 30.0, sc.ego.pos.s + 120.0)
    s = np.arange(s_range[0], s_range[1] + 0.5 * grid, grid)
    d = np.arange(road.d_min, road.d_max + 0.5 * grid, grid)
    S, D = np.meshgrid(s, d, indexing="ij")
    ps, pd = S.ravel(), D.ravel()
    risk = np.zeros(ps.size)
    for ob in sc.obstacles:
        obstacle_field_points(ps, pd, tau, ob, sc.params, out=risk)
    lane = np.array([lane_field(float(x), road, sc.params) for x in d])
    risk += np.tile(lane, s.size)
    risk += np.array([geo_field_at(FrenetPoint(float(a), float(b)), sc.ego.intent, road, sc.params)
                      for a, b in zip(ps, pd)])
    return ps, pd, risk


def cmd_field(args) -> int:
    sc = load_scenario(args.scenario)
    horizon = sc.planner.M_max * sc.planner.t_D
    for tau in args.time:
        if not 0.0 <= tau <= horizon:
            raise ScenarioError(f"epoch {tau:g} outside the planning window [0, {horizon:g}] s")
    if args.s_range is not None and not args.s_range[0] < args.s_range[1]:
        raise UsageError("--s-range needs S_LO < S_HI")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for tau in args.time:
        ps, pd, risk = field_grid(sc, tau, args.grid, args.s_range)
        path = out / f"field_t{tau:.2f}.csv"
        with path.open("w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["s", "d", "risk"])
            for a, b, r in zip(ps, pd, risk):
                w.writerow([f"{a:.4f}", f"{b:.4f}", repr(float(r))])
        print(path)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if args.generations < 1 or args.population < 3:
        raise UsageError("need --generations >= 1 and --population >= 3")
    episodes = load_episodes(args.episodes)
    search = SearchConfig(generations=args.generations, population=args.population)
    result = calibrate(episodes, search, seed=args.seed)
    result.write(args.out)
    print(f"rmse={result.rmse!r}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if len(set(args.r_max)) != len(args.r_max):
        raise UsageError("--r-max values must be distinct")
    sc = load_scenario(args.scenario)
    rows = sensitivity_sweep(sc, args.r_max, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    keys = list(rows[0])
    with (out / "sweep.csv").open("w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=keys)
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"R_max={r['R_max']:g} {r['status']} completion={r['completion_time']:g}")
    return EXIT_OK


COMMANDS = {"plan": cmd_plan, "field": cmd_field, "calibrate": cmd_calibrate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.print_config:
            print(json.dumps(default_config(), indent=2))
            return EXIT_OK
        if args.command is None:
            raise UsageError("a command is required")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"weavestrf: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"weavestrf: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PlanningError, InsufficientData, DegenerateBand) as exc:
        print(f"weavestrf: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except Exception as exc:  # noqa: BLE001
        print(f"weavestrf: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
