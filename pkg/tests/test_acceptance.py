"""Acceptance criteria, one test each.  Every test prints a single PASS/FAIL line."""

import math
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from stiffhs import cli
from stiffhs.barriers import (make_decay_supersolution, make_expanding_subbarrier, make_WT,
                              verify_barrier, wt_identities)
from stiffhs.config import parse_scenario
from stiffhs.front import FrontSetup, initial_state, integrate, run_front
from stiffhs.harness import (comparison_check, front_speed, l1_contraction_check, m_sweep,
                             perimeter_series, time_monotonicity)
from stiffhs.model import ExteriorDensity, GrowthLaw, RadialShape
from stiffhs.pme import SolverConfig, barenblatt_exact, matched_initial_density, run, run_lockstep

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def load(name):
    return parse_scenario(SCENARIOS / f"{name}.yaml")


@pytest.fixture
def report(capsys):
    def emit(number, label, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:>2}] {'PASS' if ok else 'FAIL'} {label}: {detail}")
        return ok
    return emit


def _lockstep_pair(scenario, m, factor):
    grid = scenario.grid()
    rho0 = matched_initial_density(m, scenario.omega0, scenario.exterior, scenario.growth, grid).values
    config = SolverConfig(scenario.cfl_safety, scenario.dt_cap)
    return run_lockstep([rho0 * factor, rho0], grid, m, scenario.growth, scenario.exterior_density,
                        scenario.times(), config)


def test_1_barenblatt(report):
    sc = load("barenblatt_1d")
    grid = sc.grid()
    start = time.perf_counter()
    traj = run(sc, 2.0)
    elapsed = time.perf_counter() - start
    worst = 0.0
    for k, t in enumerate(traj.times):
        exact = barenblatt_exact(grid.radius, t, 2.0, sc.total_mass, 1)
        err = np.sum(grid.volumes * np.abs(traj.rho[k] - exact)) / np.sum(grid.volumes * exact)
        worst = max(worst, float(err))
    ok = grid.cells == 400 and worst < 0.01 and elapsed < 10
    report(1, "Barenblatt oracle", ok, f"cells={grid.cells} rel L1={worst:.2e} time={elapsed:.2f}s")
    assert grid.cells == 400
    assert worst < 0.01
    assert elapsed < 10


def test_2_mass_balance(report):
    sc = load("standard_radial")
    start = time.perf_counter()
    defects = {m: run(sc, m).mass_balance()["defect"] for m in sc.m_list}
    elapsed = time.perf_counter() - start
    worst = max(abs(d) for d in defects.values())
    ok = worst < 1e-3 and elapsed < 30
    report(2, "mass balance", ok, f"max |defect|={worst:.2e} time={elapsed:.2f}s")
    assert worst < 1e-3
    assert elapsed < 30


def test_3_monotonicity(report):
    sc = load("standard_radial")
    mins = {m: time_monotonicity(run(sc, m)) for m in (40.0, 80.0)}
    worst = min(mins.values())
    ok = worst >= -1e-10
    report(3, "time monotonicity", ok, ", ".join(f"m={m:g}: {v:.2e}" for m, v in mins.items()))
    assert worst >= -1e-10


def test_4_contraction(report):
    sc = load("standard_radial")
    a, b = _lockstep_pair(sc, 40.0, 1.0 - sc.perturbation)
    ratio = l1_contraction_check(a, b)["max_ratio"]
    ok = ratio <= 1.01
    report(4, "L1 contraction", ok, f"max ratio={ratio:.6f}")
    assert ratio <= 1.01


def test_5_aronson_benilan(report):
    sc = load("aronson_benilan")
    g0 = sc.growth.g0
    margins = {}
    for m in (40.0, 80.0):
        traj = run(sc, m)
        worst = math.inf
        for d in traj.diagnostics:
            if d.t >= 0.1 - 1e-12:
                worst = min(worst, d.ab_min + 1.0 / ((m - 1.0) * d.t) + 0.1 * g0)
        margins[m] = worst
    ok = all(v >= 0 for v in margins.values())
    report(5, "Aronson-Benilan bound", ok, ", ".join(f"m={m:g}: margin={v:+.4f}" for m, v in margins.items()))
    assert ok


def test_6_front_closed_form(report):
    sc = load("front_closed_form")
    start = time.perf_counter()
    traj = run_front(sc, dt=1e-3)
    elapsed = time.perf_counter() - start
    t = traj.times[-1]
    exact = sc.omega0.radius * math.exp(sc.growth.g0 * t / sc.n)
    err = abs(traj.radii[-1] - exact) / exact
    ok = t == pytest.approx(1.0) and err < 5e-3 and elapsed < 5
    report(6, "front closed form", ok, f"R(1)={traj.radii[-1]:.6f} rel err={err:.2e} time={elapsed:.2f}s")
    assert t == pytest.approx(1.0)
    assert err < 5e-3
    assert elapsed < 5


def test_7_stiff_limit(report):
    sc = load("stiff_sweep")
    start = time.perf_counter()
    rep = m_sweep(sc)
    elapsed = time.perf_counter() - start
    support = [rep.table("support_error", 0.5)[m] for m in sc.m_list]
    inner = rep.table("density_inner_error", 0.5)[80.0]
    outer = rep.table("density_outer_error", 0.5)[80.0]
    trend = support[-1] <= support[-2] <= support[-3]
    ok = trend and support[-1] < 0.05 and inner < 0.02 and outer < 0.05 and elapsed < 300
    report(7, "stiff-limit convergence", ok,
           f"support errors={[round(v, 4) for v in support]} inner={inner:.2e} outer={outer:.2e} "
           f"time={elapsed:.1f}s")
    assert trend
    assert support[-1] < 0.05
    assert inner < 0.02
    assert outer < 0.05
    assert elapsed < 300


def test_8_velocity_acceleration(report):
    dense = load("velocity_dense")
    empty = load("velocity_empty")
    speeds = [front_speed(run(sc, 80.0)) for sc in (dense, empty)]
    ratio = speeds[0] / speeds[1]
    ok = 1.8 <= ratio <= 2.2
    report(8, "velocity acceleration", ok, f"speeds={speeds[0]:.4f}/{speeds[1]:.4f} ratio={ratio:.3f}")
    assert 1.8 <= ratio <= 2.2


def test_9_nucleation(report):
    ext = ExteriorDensity(RadialShape.plateau(0.95), g0=1.0)
    setup = FrontSetup(2, GrowthLaw(1.0, 1.0, "constant-test"), ext, 3.0, 65)
    dt = 1e-3
    times = [0.01 * k for k in range(11)]
    traj = integrate(initial_state([], setup), setup, times, dt)
    t_star = math.log(1 / 0.95)
    lag = traj.saturated_at - t_star if traj.saturated_at is not None else math.inf
    r = np.linspace(0.0, setup.outer, 2001)
    invariant = True
    for s in traj.states:
        over = ext.at_radius(r, s.t) >= 1.0
        invariant &= bool(np.all(s.contains(r[over])))
    absorbed = traj.states[-1].saturated and traj.states[-1].radius == pytest.approx(setup.outer)
    ok = 0 <= lag <= dt and invariant and absorbed
    report(9, "nucleation", ok, f"t*={t_star:.6f} absorbed at {traj.saturated_at:.6f} invariant={invariant}")
    assert 0 <= lag <= dt
    assert absorbed
    assert invariant


def test_10_barriers(report):
    law = GrowthLaw(1.0, 1.0, "linear")
    ident = wt_identities(make_WT(1.0, 0.2, 2, law.g0), sample_count=10_000)
    sub = make_expanding_subbarrier(0.5, (0.0, 0.0), law)
    cap = make_decay_supersolution(40, 2.0, law)
    sub_rep = verify_barrier(sub, "sub", 10_000)
    cap_rep = verify_barrier(cap, "super", 10_000)
    negatives = [verify_barrier(sub, "super", 10_000)["pass"], verify_barrier(cap, "sub", 10_000)["pass"]]
    ok = (ident["laplacian_error"] < 1e-9 and ident["ratio_error"] < 1e-9
          and sub_rep["pass"] and sub_rep["interior_margin"] > 0 and sub_rep["boundary_margin"] > 0
          and cap_rep["pass"] and cap_rep["interior_margin"] > 0 and not any(negatives))
    report(10, "barrier identities", ok,
           f"lap err={ident['laplacian_error']:.1e} ratio err={ident['ratio_error']:.1e} "
           f"sub margin={sub_rep['interior_margin']:.3g} cap margin={cap_rep['interior_margin']:.3g} "
           f"negative controls pass={negatives}")
    assert ident["laplacian_error"] < 1e-9
    assert ident["ratio_error"] < 1e-9
    assert sub_rep["pass"] and sub_rep["interior_margin"] > 0 and sub_rep["boundary_margin"] > 0
    assert cap_rep["pass"] and cap_rep["interior_margin"] > 0
    assert not any(negatives)


def test_11_comparison(report):
    sc = load("standard_radial")
    a, b = _lockstep_pair(sc, 40.0, 0.9)
    ordered, worst = comparison_check(a, b)
    report(11, "discrete comparison", ordered, f"worst violation={worst:.2e}")
    assert ordered and worst <= 1e-12


def test_12_perimeter(report):
    coarse = load("perimeter_2d")
    fine = replace(coarse, dx=coarse.dx / 2, eps_supp=coarse.support_threshold / 2)
    ref = cli._reference_perimeter(coarse)
    series = [perimeter_series(run(sc, 40.0)) for sc in (coarse, fine)]
    worst = max(abs(p - r) / r for p, r in zip(series[0]["perimeter"], ref))
    factor = series[0]["band_measure"] / series[1]["band_measure"]
    ok = worst < 0.1 and factor >= 1.5
    report(12, "perimeter diagnostic", ok, f"max rel err={worst:.3f} band factor={factor:.3f}")
    assert worst < 0.1
    assert factor >= 1.5


def test_13_determinism(report, tmp_path):
    cfg = SCENARIOS / "standard_radial.yaml"
    codes = [cli.main(["pme-run", "--config", str(cfg), "--out", str(tmp_path / d), "--m-list", "40"])
             for d in ("a", "b")]
    (da,), (db,) = [list((tmp_path / d).iterdir()) for d in ("a", "b")]
    files = sorted(f.name for f in da.glob("*.csv"))
    same = all((da / f).read_bytes() == (db / f).read_bytes() for f in files)
    ok = codes == [0, 0] and bool(files) and same
    report(13, "determinism", ok, f"{len(files)} CSV files byte-identical={same}")
    assert codes == [0, 0]
    assert files and same
