"""Time the compiled and numpy step kernels on the same inputs.

    python3 benchmarks/bench_kernels.py [--cells 512] [--box 256] [--repeat 5]

Prints microseconds per step for each backend and the speedup, and checks
that both backends return the same update.
"""

import argparse
import timeit

import numpy as np

from stiffhs.grid import make_grid
from stiffhs.kernels import backends
from stiffhs.model import GrowthLaw, Omega0, RadialShape
from stiffhs.pme import matched_initial_density


def radial_case(cells, m):
    dx = 2.0 / cells
    grid = make_grid("radial", 2, dx, 2.0)
    law = GrowthLaw(1.0, 1.0, "linear")
    rho = matched_initial_density(m, Omega0("ball", 1.0), RadialShape.zero(), law, grid).values
    cp, cm = grid.coefficients
    dt = 0.4 * dx * dx / (4 * m)
    args = (cp, cm, grid.volumes, m, dt, law.form_code, law.g0, law.p_max, 0, cells, 0.0, 0.0)
    return rho, args


def box_case(cells, m):
    dx = 2.0 / cells
    law = GrowthLaw(1.0, 1.0, "linear")
    x = -1.0 + (np.arange(cells) + 0.5) * dx
    r = np.hypot(*np.meshgrid(x, x, indexing="ij"))
    rho = np.where(r < 0.5, 1.0 + 0.01 * (0.25 - r * r), 0.0)
    dt = 0.4 * dx * dx / (8 * m)
    args = (m, dt, 1.0 / dx ** 2, dx * dx, law.form_code, law.g0, law.p_max, 0, cells, 0, cells)
    return rho, args


def bench(fn, rho, args, repeat, number):
    out = rho.copy()
    u = np.zeros_like(rho)
    t = min(timeit.repeat(lambda: fn(rho, out, u, *args), repeat=repeat, number=number))
    return 1e6 * t / number, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cells", type=int, default=512)
    ap.add_argument("--box", type=int, default=256)
    ap.add_argument("--m", type=float, default=40.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    mods = backends()
    if "cython" not in mods:
        print("compiled extension not built; only the numpy kernels are available")
    cases = {
        f"radial {args.cells}": ("step_1d", radial_case(args.cells, args.m), 2000),
        f"box {args.box}^2": ("step_2d", box_case(args.box, args.m), 50),
    }
    print(f"{'case':<14}{'backend':<9}{'us/step':>12}{'speedup':>10}")
    for label, (name, (rho, extra), number) in cases.items():
        timings, outs = {}, {}
        for backend, mod in mods.items():
            timings[backend], outs[backend] = bench(getattr(mod, name), rho, extra, args.repeat, number)
        base = timings["python"]
        for backend, us in timings.items():
            print(f"{label:<14}{backend:<9}{us:>12.1f}{base / us:>10.1f}")
        if len(outs) == 2:
            diff = float(np.max(np.abs(outs["python"] - outs["cython"])))
            print(f"{label:<14}max |python - cython| = {diff:.2e}")


if __name__ == "__main__":
    main()
