"""``stiffhs`` command line: one run directory per (scenario hash, command).

Exit status 0 on success, 2 when the configuration or arguments are invalid,
3 when a solver fails.  A failed run leaves no directory behind.
"""

from __future__ import annotations

import argparse
import logging
import math
import shutil
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__, kernels
from .barriers import (make_decay_supersolution, make_expanding_subbarrier, make_WT, verify_barrier,
                       wt_identities)
from .config import load_config, scenario_from_dict, scenario_hash, scenario_to_dict
from .errors import (BarrierConstructionError, ConfigurationError, DomainError, FrontLogicError,
                     NumericalError, ScenarioError, SolverError)
from .front import FRONT_COLUMNS, run_front
from .grid import sphere_area
from .harness import ERROR_COLUMNS, comparison_check, l1_contraction_check, m_sweep, perimeter_series
from .io import RunManifest, write_csv, write_json
from .pme import DIAGNOSTIC_COLUMNS, SolverConfig, matched_initial_density, run, run_lockstep

log = logging.getLogger("stiffhs")

COMMANDS = ("pme-run", "front-run", "sweep", "barriers", "contraction", "perimeter")
EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3

VALIDATION_ERRORS = (ScenarioError, DomainError, ConfigurationError, BarrierConstructionError,
                     FileNotFoundError, yaml.YAMLError, ValueError)
NUMERICAL_ERRORS = (NumericalError, SolverError, FrontLogicError, FloatingPointError)


def _m_label(m):
    return f"{m:g}"


def _trim(rho_list):
    """Index one past the last cell that is nonzero in any snapshot."""
    last = 0
    for rho in rho_list:
        nz = np.flatnonzero(rho)
        if nz.size:
            last = max(last, int(nz[-1]) + 1)
    return last


def _snapshot_rows(traj):
    grid = traj.grid
    rows = []
    if grid.kind == "box2d":
        x, y = grid.mesh
        for k, t in enumerate(traj.times):
            rho = traj.rho[k]
            p = traj.pressure(k)
            for i, j in zip(*np.nonzero(rho)):
                rows.append([t, int(i), int(j), x[i, j], y[i, j], rho[i, j], p[i, j]])
        return ["t", "i", "j", "x", "y", "rho", "p"], rows
    # trailing cells that never carry mass are left out
    stop = _trim(traj.rho)
    coord = grid.centers
    for k, t in enumerate(traj.times):
        rho = traj.rho[k]
        p = traj.pressure(k)
        for i in range(stop):
            rows.append([t, i, coord[i], rho[i], p[i]])
    return ["t", "cell", "r" if grid.kind == "radial" else "x", "rho", "p"], rows


MASS_COLUMNS = ["m", "mass0", "massT", "source", "source_trapezoid", "flux", "defect",
                "defect_trapezoid", "steps", "dt_min", "dt_max", "clamped"]


def _pme_one(scenario, m):
    return run(scenario, m)


def _map(fn, scenario, ms, threads):
    if threads and threads > 1 and len(ms) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, [scenario] * len(ms), ms))
    return [fn(scenario, m) for m in ms]


def cmd_pme_run(scenario, out, args):
    trajs = _map(_pme_one, scenario, list(scenario.m_list), args.threads)
    mass_rows = []
    for m, traj in zip(scenario.m_list, trajs):
        header, rows = _snapshot_rows(traj)
        write_csv(out / f"snapshots_m{_m_label(m)}.csv", header, rows)
        write_csv(out / f"diagnostics_m{_m_label(m)}.csv", DIAGNOSTIC_COLUMNS,
                  [d.row() for d in traj.diagnostics])
        mb = traj.mass_balance()
        mass_rows.append([m, mb["mass0"], mb["massT"], mb["source"], mb["source_trapezoid"],
                          mb["flux"], mb["defect"], mb["defect_trapezoid"], traj.steps,
                          traj.dt_min, traj.dt_max, traj.clamped])
    write_csv(out / "mass_balance.csv", MASS_COLUMNS, mass_rows)


def cmd_front_run(scenario, out, args):
    traj = run_front(scenario)
    traj.to_csv(out / "front.csv")
    write_json(out / "front_summary.json", {
        "times": traj.times, "radius": traj.radii, "saturated_at": traj.saturated_at,
        "columns": FRONT_COLUMNS,
    })


def cmd_sweep(scenario, out, args):
    report = m_sweep(scenario, threads=args.threads, scenario_hash=args.hash)
    write_json(out / "sweep_report.json", report.as_dict())
    write_csv(out / "errors.csv", ERROR_COLUMNS, report.csv_rows())


def _barrier_checks(scenario):
    n = scenario.dimension
    law = scenario.growth
    g0 = law.rate_at_zero
    checks, controls = {}, {}
    if g0 > 0:
        wt = make_WT(scenario.omega0.bounding_radius or 1.0, scenario.horizon or 1.0, n, g0)
        checks["WT_super"] = verify_barrier(wt, "super")
        checks["WT_super"]["identities"] = wt_identities(wt)
        controls["WT_sub"] = verify_barrier(wt, "sub")
        sub = make_expanding_subbarrier(0.5, (0.0,) * n, law)
        checks["expanding_sub"] = verify_barrier(sub, "sub")
        controls["expanding_super"] = verify_barrier(sub, "super")
    if law.form == "linear":
        m = max(scenario.m_list)
        top = max(2.0 * law.p_max, 1.0 / law.p_max)
        cap = make_decay_supersolution(m, top, law, strict=True, n=n)
        checks["decay_super"] = verify_barrier(cap, "super")
        controls["decay_sub"] = verify_barrier(cap, "sub")
    return checks, controls


def cmd_barriers(scenario, out, args):
    checks, controls = _barrier_checks(scenario)
    ok = all(c["pass"] for c in checks.values())
    controls_fail = all(not c["pass"] for c in controls.values())
    write_json(out / "barrier_report.json", {
        "checks": checks, "negative_controls": controls,
        "all_pass": ok, "negative_controls_fail": controls_fail,
        "growth_derivative_at_zero": float(scenario.growth.derivative(0.0)),
    })
    if not (ok and controls_fail):
        raise NumericalError("barrier verification failed")


CONTRACTION_COLUMNS = ["m", "t", "l1_difference", "ratio", "ordering_violation"]


def _contraction_one(scenario, m):
    grid = scenario.grid()
    rho0 = matched_initial_density(m, scenario.omega0, scenario.exterior, scenario.growth, grid).values
    lower = rho0 * (1.0 - scenario.perturbation)
    config = SolverConfig(scenario.cfl_safety, scenario.dt_cap)
    a, b = run_lockstep([lower, rho0], grid, m, scenario.growth, scenario.exterior_density,
                        scenario.times(), config)
    contraction = l1_contraction_check(a, b)
    ordered, worst = comparison_check(a, b)
    violations = [max(float(np.max(x - y)), 0.0) for x, y in zip(a.rho, b.rho)]
    return contraction, ordered, worst, violations


def cmd_contraction(scenario, out, args):
    results = _map(_contraction_one, scenario, list(scenario.m_list), args.threads)
    rows, doc = [], {}
    for m, (con, ordered, worst, viol) in zip(scenario.m_list, results):
        for t, d, ratio, v in zip(con["times"], con["l1"], con["ratio"], viol):
            rows.append([m, t, d, ratio, v])
        doc[_m_label(m)] = {"max_ratio": con["max_ratio"], "flagged": con["flagged"],
                            "ordered": ordered, "worst_violation": worst}
    write_csv(out / "contraction.csv", CONTRACTION_COLUMNS, rows)
    write_json(out / "contraction_report.json", {"per_m": doc, "perturbation": scenario.perturbation})


PERIMETER_COLUMNS = ["m", "t", "perimeter", "reference_perimeter", "band_area"]


def _reference_perimeter(scenario):
    """Sphere areas of the radial front reference at the output times."""
    n = scenario.dimension
    radial = replace(scenario, geometry="radial", n=n)
    if scenario.geometry == "box2d":
        radial = replace(radial, outer_radius=scenario.outer_radius * math.sqrt(2))
    front = run_front(radial)
    return perimeter_series(front)["perimeter"]


def _perimeter_one(scenario, m):
    return perimeter_series(run(scenario, m))


def cmd_perimeter(scenario, out, args):
    if scenario.geometry == "slab":
        raise DomainError("perimeter needs a radial or box2d scenario")
    reference = _reference_perimeter(scenario)
    results = _map(_perimeter_one, scenario, list(scenario.m_list), args.threads)
    rows, doc = [], {}
    for m, res in zip(scenario.m_list, results):
        for t, per, ref, band in zip(res["times"], res["perimeter"], reference, res["band_area"]):
            rows.append([m, t, per, ref, band])
        doc[_m_label(m)] = {"band_measure": res["band_measure"], "eps": res["eps"]}
    write_csv(out / "perimeter.csv", PERIMETER_COLUMNS, rows)
    write_json(out / "perimeter_report.json", {"per_m": doc, "unit_sphere_area": sphere_area(scenario.dimension)})


HANDLERS = {
    "pme-run": cmd_pme_run, "front-run": cmd_front_run, "sweep": cmd_sweep,
    "barriers": cmd_barriers, "contraction": cmd_contraction, "perimeter": cmd_perimeter,
}


def _m_list(text):
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad m list {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty m list")
    return values


def build_parser():
    ap = argparse.ArgumentParser(prog="stiffhs", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--m-list", type=_m_list, default=None, help="comma separated, e.g. 10,20,40,80")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _load(args):
    data = load_config(args.config)
    if isinstance(data, dict) and args.m_list is not None:
        data = dict(data, m_list=list(args.m_list))
    return scenario_from_dict(data)


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            scenario = _load(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    args.hash = scenario_hash(scenario)
    run_dir = args.out / f"{args.hash}-{args.command}"
    if run_dir.exists():
        shutil.rmtree(run_dir)
    run_dir.mkdir(parents=True)
    manifest = RunManifest(args.hash, __version__, args.command, kernels.BACKEND)
    status = EXIT_OK
    try:
        write_json(run_dir / "scenario.json", scenario_to_dict(scenario))
        start = time.perf_counter()
        HANDLERS[args.command](scenario, run_dir, args)
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - start)
        manifest.finish(run_dir)
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERICAL
    except VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        status = EXIT_INVALID
    except BaseException:
        shutil.rmtree(run_dir, ignore_errors=True)
        raise
    if status != EXIT_OK:
        shutil.rmtree(run_dir, ignore_errors=True)
        return status
    print(run_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
