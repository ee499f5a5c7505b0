import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import iv

from stiffhs.elliptic import (DomainMask, boundary_gradient, solve_cartesian_2d, solve_cell_problem,
                              solve_radial)
from stiffhs.errors import DomainError, SolverError
from stiffhs.grid import make_grid
from stiffhs.model import GrowthLaw

UNIT = GrowthLaw(1.0, 1.0, "constant-test")


def test_interval_parabola():
    # -p'' = 1 on (0, 1), p = 0 at both ends: p = x (1 - x) / 2
    prof = solve_radial(1, 0.0, 1.0, 0.0, 0.0, UNIT, 65)
    assert prof(0.5) == pytest.approx(0.125, abs=1e-12)
    assert boundary_gradient(prof, "outer") == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ball_constant_growth(n):
    # p = (R^2 - r^2) / (2n), |p_r(R)| = R / n
    prof = solve_radial(n, 0.0, 1.0, None, 0.0, UNIT, 129)
    exact = (1 - prof.r ** 2) / (2 * n)
    assert np.max(np.abs(prof.samples - exact)) < 1e-10
    assert boundary_gradient(prof, "outer") == pytest.approx(1.0 / n, abs=1e-10)


def test_linear_growth_bessel():
    # -Lap p = 1 - p in the unit disc: p = 1 - I0(r) / I0(1)
    law = GrowthLaw(1.0, 1.0, "linear")
    prof = solve_radial(2, 0.0, 1.0, None, 0.0, law, 257)
    exact = 1 - iv(0, prof.r) / iv(0, 1.0)
    assert np.max(np.abs(prof.samples - exact)) < 1e-6
    assert boundary_gradient(prof, "outer") == pytest.approx(iv(1, 1.0) / iv(0, 1.0), abs=1e-5)


def test_annulus_constant_growth():
    # p = -r^2/4 + A ln r + B with p(1) = p(2) = 0
    a, b = 1.0, 2.0
    A = (b * b - a * a) / (4 * math.log(b / a))
    B = a * a / 4 - A * math.log(a)
    prof = solve_radial(2, a, b, 0.0, 0.0, UNIT, 257)
    exact = -prof.r ** 2 / 4 + A * np.log(prof.r) + B
    assert np.max(np.abs(prof.samples - exact)) < 1e-5


def test_second_order_convergence():
    law = GrowthLaw(1.0, 1.0, "linear")
    errs = []
    for N in (33, 65, 129):
        prof = solve_radial(2, 0.0, 1.0, None, 0.0, law, N)
        errs.append(np.max(np.abs(prof.samples - (1 - iv(0, prof.r) / iv(0, 1.0)))))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    assert all(3.5 < q < 4.5 for q in ratios)


def test_dirichlet_data_and_newton_count():
    prof = solve_radial(2, 0.5, 1.5, 0.3, 0.0, GrowthLaw(1.0, 1.0, "linear"), 65)
    assert prof.samples[0] == 0.3 and prof.samples[-1] == 0.0
    assert prof.iterations <= 3


@given(st.floats(0.05, 3.0), st.integers(1, 3))
def test_linear_profile_bounded_by_homeostatic(R, n):
    # maximum principle: 0 <= p <= p_max for the linear law
    prof = solve_radial(n, 0.0, R, None, 0.0, GrowthLaw(2.0, 0.7, "linear"), 33)
    assert prof.samples.min() >= -1e-12
    assert prof.samples.max() <= 0.7 + 1e-12


def test_radial_errors():
    with pytest.raises(DomainError):
        solve_radial(2, 1.0, 0.5, 0.0, 0.0, UNIT, 33)
    with pytest.raises(DomainError):
        solve_radial(2, 0.0, 1.0, None, 0.0, UNIT, 4)
    with pytest.raises(DomainError):
        solve_radial(2, 0.5, 1.0, None, 0.0, UNIT, 33)
    with pytest.raises(DomainError):
        solve_radial(2, 0.0, 1.0, 0.0, -1.0, UNIT, 33)
    with pytest.raises(SolverError):
        solve_radial(2, 0.0, 1.0, None, 0.0, GrowthLaw(1.0, 1.0, "linear"), 33, tol=1e-30, max_iter=0)


def test_cell_problem_radial_matches_node_solver():
    grid = make_grid("radial", 2, 0.01, 2.0)
    mask = grid.radius < 1.0
    p = solve_cell_problem(grid, mask, UNIT)
    exact = (1 - grid.radius ** 2) / 4
    # cell faces at r = 1 put the zero level half a cell beyond the last cell
    assert np.max(np.abs(p[mask] - exact[mask])) < 2e-2
    assert np.all(p[~mask] == 0)


def test_disc_2d():
    grid = make_grid("box2d", 2, 0.02, 1.2)
    sol = solve_cartesian_2d(DomainMask.disc(grid, 1.0), UNIT)
    assert sol.values.max() == pytest.approx(0.25, rel=0.03)
    assert DomainMask.annulus(grid, 0.4, 0.9).components == 1
    empty = solve_cartesian_2d(DomainMask.disc(grid, 0.0), UNIT)
    assert not empty.values.any()
