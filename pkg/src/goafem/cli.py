"""Benchmark runner: CSV emission, parameter sweeps, rate regression.

Config file (INI) keys mirror the module config keys; command line
flags override the file.  Exit codes: 0 on success, 2 when a sweep
contains NaN cells, 1 on error.
"""

import argparse
import configparser
import csv
import math
import sys

import numpy as np

from .assemble import assemble, goal_value, solve_direct
from .benchmarks import BENCHMARKS, get_benchmark
from .driver import AdaptiveParams, run
from .mesh import uniform_refine
from .space import build_space

CSV_HEADER = ("ndofs,nElems,primalEstimator,dualEstimator,estimatorProduct,"
              "goalValue,goalError,cumWork,cumTime,stepsPrimal,stepsDual")


def records_to_rows(records, exact_goal=None):
    """CSV rows (list of dicts) from the driver history."""
    rows = []
    for r in records:
        err = "" if exact_goal is None else f"{abs(r.goal - exact_goal):.12e}"
        rows.append({
            "ndofs": r.ndofs,
            "nElems": r.n_elems,
            "primalEstimator": f"{r.eta:.12e}",
            "dualEstimator": f"{r.zeta:.12e}",
            "estimatorProduct": f"{r.est_product:.12e}",
            "goalValue": f"{r.goal:.12e}",
            "goalError": err,
            "cumWork": f"{r.cum_cost:.12e}",
            "cumTime": f"{r.cum_time:.6e}",
            "stepsPrimal": r.steps_primal,
            "stepsDual": r.steps_dual,
        })
    return rows


def run_benchmark(spec, params, out=None):
    """Run one benchmark and optionally write its convergence CSV.

    With diagnostics enabled and an output path, the per-step quasi-error
    protocol goes to ``<out>.diag.csv``.
    """
    result = run(spec.problem, params)
    if spec.exact_goal is not None:
        for rec in result.records:
            rec.goal_error = abs(rec.goal - spec.exact_goal)
    rows = records_to_rows(result.records, spec.exact_goal)
    if out is not None:
        write_csv(rows, out)
        if params.diagnostics and result.diagnostics:
            with open(f"{out}.diag.csv", "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["level", "k", "j", "H", "Z", "HZ"])
                for level, k, j, h, z in result.diagnostics:
                    writer.writerow([level, k, j, f"{h:.12e}", f"{z:.12e}", f"{h * z:.12e}"])
    return result, rows


def reference_goal(spec, mesh, p):
    """Goal value from direct solves on a one-level-finer uniform
    refinement; a trend reference, not the exact value."""
    fine = uniform_refine(mesh)
    space = build_space(fine, p)
    system = assemble(space, spec.problem)
    u = solve_direct(system, "primal")
    z = solve_direct(system, "dual")
    return goal_value(system, u, z)


def write_csv(rows, out):
    names = CSV_HEADER.split(",")
    with open(out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=names)
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def rate_regression(rows, y, x, window=0.5):
    """Least-squares slope of log y against log x over the trailing rows.

    ``rows`` is a CSV path or a list of row dicts; ``window`` is the
    trailing fraction of rows used (at least 5 points are required).
    """
    if isinstance(rows, str):
        rows = read_csv(rows)
    xs, ys = [], []
    for row in rows:
        try:
            xv = float(row[x])
            yv = float(row[y])
        except (KeyError, TypeError, ValueError):
            continue
        if xv > 0.0 and yv > 0.0:
            xs.append(xv)
            ys.append(yv)
    n = len(xs)
    k = max(int(math.ceil(window * n)), 0)
    if k < 5:
        raise ValueError(f"rate regression needs at least 5 points in the window, got {k}")
    lx = np.log(np.asarray(xs[n - k:]))
    ly = np.log(np.asarray(ys[n - k:]))
    return float(np.polyfit(lx, ly, 1)[0])


def parameter_sweep(problem_id, thetas, lambda_syms, lambda_algs, stop_threshold,
                    p=2, delta=0.5, max_levels=60, max_cost=None, out=None):
    """Weighted cost estimatorProduct * cumTime^p over a parameter grid.

    Each cell runs until the estimator product drops below the
    threshold; unreachable cells record NaN.  Row minima are taken over
    lambda_sym and column minima over lambda_alg within each theta.
    """
    spec = get_benchmark(problem_id)
    cells = []
    for theta in thetas:
        for la in lambda_algs:
            for ls in lambda_syms:
                params = AdaptiveParams(theta=theta, delta=delta, lambda_sym=ls,
                                        lambda_alg=la, p=p, tol=stop_threshold,
                                        max_levels=max_levels, max_cost=max_cost)
                weighted = float("nan")
                try:
                    result = run(spec.problem, params)
                    rec = result.records[-1]
                    if rec.est_product < stop_threshold:
                        weighted = rec.est_product * rec.cum_time ** p
                except Exception:
                    pass
                cells.append({"theta": theta, "lambda_sym": ls, "lambda_alg": la,
                              "weightedCost": weighted})

    for cell in cells:
        same_row = [c["weightedCost"] for c in cells
                    if c["theta"] == cell["theta"] and c["lambda_alg"] == cell["lambda_alg"]
                    and not math.isnan(c["weightedCost"])]
        same_col = [c["weightedCost"] for c in cells
                    if c["theta"] == cell["theta"] and c["lambda_sym"] == cell["lambda_sym"]
                    and not math.isnan(c["weightedCost"])]
        w = cell["weightedCost"]
        cell["rowMin"] = int(bool(same_row) and not math.isnan(w) and w <= min(same_row))
        cell["colMin"] = int(bool(same_col) and not math.isnan(w) and w <= min(same_col))

    if out is not None:
        names = ["theta", "lambda_sym", "lambda_alg", "weightedCost", "rowMin", "colMin"]
        with open(out, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=names)
            writer.writeheader()
            writer.writerows(cells)
    return cells


def _parse_sweep(text):
    grid = {"theta": [0.5], "lambda-sym": [0.7], "lambda-alg": [0.7]}
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        key, _, vals = part.partition("=")
        key = key.strip().replace("_", "-")
        if key not in grid:
            raise ValueError(f"unknown sweep key {key!r}")
        grid[key] = [float(v) for v in vals.split(",") if v.strip()]
    return grid


def _load_config(path):
    cfg = configparser.ConfigParser()
    with open(path) as fh:
        cfg.read_file(fh)
    out = {}
    if cfg.has_section("run"):
        sec = cfg["run"]
        for key in ("problem", "out"):
            if key in sec:
                out[key] = sec.get(key)
        for key, cast in (("p", int), ("tol", float), ("max_cost", float),
                          ("max_levels", int)):
            if key in sec:
                out[key.replace("_", "-")] = cast(sec.get(key))
        if "diagnostics" in sec:
            out["diagnostics"] = sec.getboolean("diagnostics")
    if cfg.has_section("adaptive"):
        sec = cfg["adaptive"]
        for key in ("theta", "lambda_sym", "lambda_alg"):
            if key in sec:
                out[key.replace("_", "-")] = sec.getfloat(key)
    if cfg.has_section("zarantonello") and "delta" in cfg["zarantonello"]:
        out["delta"] = cfg["zarantonello"].getfloat("delta")
    if cfg.has_section("solver"):
        sec = cfg["solver"]
        if "kind" in sec:
            out["solver-kind"] = sec.get("kind")
        if "omega" in sec:
            out["omega"] = sec.getfloat("omega")
    return out


def build_parser():
    ap = argparse.ArgumentParser(prog="goafem",
                                 description="Goal-oriented adaptive FEM benchmarks")
    ap.add_argument("--config", help="INI config file; flags override it")
    ap.add_argument("--problem", choices=BENCHMARKS)
    ap.add_argument("--p", type=int)
    ap.add_argument("--theta", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--lambda-sym", type=float)
    ap.add_argument("--lambda-alg", type=float)
    ap.add_argument("--tol", type=float, help="estimator-product stopping threshold")
    ap.add_argument("--max-cost", type=float, help="cumulative cost bound")
    ap.add_argument("--max-levels", type=int)
    ap.add_argument("--out", help="output CSV path")
    ap.add_argument("--diagnostics", action="store_true", default=None)
    ap.add_argument("--reference-goal", action="store_true", default=None,
                    help="report a direct-solve goal value on a one-level-finer "
                         "uniform refinement (trend reference, not truth)")
    ap.add_argument("--solver-kind", choices=("vcycle", "psd"))
    ap.add_argument("--omega", type=float)
    ap.add_argument("--sweep", help="grid, e.g. 'theta=0.3,0.5;lambda-sym=0.5,0.7;lambda-alg=0.7'")
    return ap


_DEFAULTS = {
    "problem": "goal-singularity", "p": 1, "theta": 0.5, "delta": 0.5,
    "lambda-sym": 0.7, "lambda-alg": 0.7, "tol": None, "max-cost": None,
    "max-levels": None, "out": None, "diagnostics": False,
    "reference-goal": False, "solver-kind": "vcycle", "omega": 0.5, "sweep": None,
}


def main(argv=None):
    ap = build_parser()
    ns = ap.parse_args(argv)
    opts = dict(_DEFAULTS)
    try:
        if ns.config:
            opts.update(_load_config(ns.config))
        for key in _DEFAULTS:
            val = getattr(ns, key.replace("-", "_"), None)
            if val is not None:
                opts[key] = val

        if opts["tol"] is None and opts["max-cost"] is None and opts["max-levels"] is None:
            opts["max-cost"] = 1e5

        if opts["sweep"]:
            grid = _parse_sweep(opts["sweep"])
            threshold = opts["tol"] if opts["tol"] is not None else 1e-6
            cells = parameter_sweep(
                opts["problem"], grid["theta"], grid["lambda-sym"], grid["lambda-alg"],
                threshold, p=opts["p"], delta=opts["delta"],
                max_levels=opts["max-levels"] or 60, max_cost=opts["max-cost"],
                out=opts["out"])
            for c in cells:
                print(f"theta={c['theta']} lambda_sym={c['lambda_sym']} "
                      f"lambda_alg={c['lambda_alg']} weightedCost={c['weightedCost']:.6e}"
                      f"{' [row-min]' if c['rowMin'] else ''}"
                      f"{' [col-min]' if c['colMin'] else ''}")
            if any(math.isnan(c["weightedCost"]) for c in cells):
                return 2
            return 0

        spec = get_benchmark(opts["problem"])
        params = AdaptiveParams(
            theta=opts["theta"], delta=opts["delta"], lambda_sym=opts["lambda-sym"],
            lambda_alg=opts["lambda-alg"], p=opts["p"], tol=opts["tol"],
            max_cost=opts["max-cost"], max_levels=opts["max-levels"],
            solver_kind=opts["solver-kind"], omega=opts["omega"],
            diagnostics=opts["diagnostics"])
        result, rows = run_benchmark(spec, params, out=opts["out"])
        rec = result.records[-1]
        print(f"{opts['problem']}: {len(result.records)} levels, "
              f"ndofs {rec.ndofs}, estimator product {rec.est_product:.6e}, "
              f"cumulative cost {rec.cum_cost:.4e}")
        if spec.exact_goal is not None:
            print(f"goal value {rec.goal:.10f} (error {abs(rec.goal - spec.exact_goal):.3e})")
        if opts["reference-goal"]:
            ref = reference_goal(spec, result.hierarchy.finest, opts["p"])
            print(f"reference goal value {ref:.10f} "
                  f"(direct solve on uniform refinement; reference, not truth)")
        return 0
    except Exception as exc:  # pragma: no cover - defensive CLI surface
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
