import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from stiffhs.errors import DomainError
from stiffhs.model import (INFINITE, ExteriorDensity, GrowthLaw, Omega0, RadialShape,
                           density_from_pressure, exterior_density_at, growth_rate,
                           pressure_from_density, velocity_coefficient)

stiffness = st.floats(1.05, 200.0)


def test_pressure_at_unit_density():
    # m/(m-1) at rho = 1
    assert pressure_from_density(1.0, 2.0) == 2.0
    assert pressure_from_density(1.0, 40.0) == pytest.approx(40 / 39, rel=1e-15)
    assert pressure_from_density(0.0, 3.0) == 0.0


@pytest.mark.parametrize("m", [1.0, 0.5, math.inf, math.nan])
def test_stiffness_domain(m):
    with pytest.raises(DomainError):
        pressure_from_density(0.5, m)


def test_negative_density_rejected():
    with pytest.raises(DomainError):
        pressure_from_density(np.array([0.1, -1e-3]), 2.0)
    with pytest.raises(DomainError):
        density_from_pressure(-1.0, 2.0)


@given(stiffness, st.floats(1e-3, 1.5))
def test_pressure_roundtrip(m, rho):
    # subnormal pressures carry too few bits to invert
    assume(pressure_from_density(rho, m) > 1e-290)
    back = density_from_pressure(pressure_from_density(rho, m), m)
    assert back == pytest.approx(rho, rel=1e-9, abs=1e-12)


@given(stiffness, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_pressure_monotone(m, a, b):
    lo, hi = sorted((a, b))
    assert pressure_from_density(lo, m) <= pressure_from_density(hi, m)


def test_growth_forms():
    lin = GrowthLaw(2.0, 4.0, "linear")
    assert lin(0.0) == 2.0
    assert lin(4.0) == 0.0
    assert lin(6.0) == -1.0  # same formula above p_max
    assert lin.derivative(1.0) == -0.5
    const = GrowthLaw(3.0, 1.0, "constant-test")
    assert np.all(growth_rate(const, np.array([0.0, 5.0])) == 3.0)
    assert GrowthLaw(0.0, 1.0, "off")(1.0) == 0.0
    assert lin.satisfies_monotone_hypothesis and not const.satisfies_monotone_hypothesis


def test_growth_validation():
    with pytest.raises(DomainError):
        GrowthLaw(1.0, 1.0, "quadratic")
    with pytest.raises(DomainError):
        GrowthLaw(-1.0, 1.0, "linear")
    with pytest.raises(DomainError):
        GrowthLaw(1.0, 0.0, "linear")


@given(st.floats(0.01, 5.0), st.floats(0.01, 5.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
def test_linear_growth_strictly_decreasing(g0, pmax, a, b):
    law = GrowthLaw(g0, pmax, "linear")
    if b - a > 1e-6:
        assert law(a) > law(b)
    assert law.derivative(a) == -g0 / pmax


def test_exterior_growth_and_velocity():
    ext = ExteriorDensity(RadialShape.plateau(0.5), g0=1.0)
    assert exterior_density_at(ext, 0.3, 0.0) == 0.5
    assert exterior_density_at(ext, 0.3, math.log(1.5)) == pytest.approx(0.75, rel=1e-14)
    assert velocity_coefficient(ext, 0.0, 0.0) == pytest.approx(2.0)
    # threshold time ln(1/0.5)
    assert velocity_coefficient(ext, 0.0, math.log(2.0) + 1e-12) is INFINITE
    assert float(ext.threshold_time(np.array(0.2))) == pytest.approx(math.log(2.0))
    zero = ExteriorDensity(RadialShape.zero(), g0=1.0)
    assert velocity_coefficient(zero, 1.0, 10.0) == 1.0
    assert np.isinf(zero.threshold_time(np.array([1.0]))).all()


def test_velocity_coefficient_vector_point():
    ext = ExteriorDensity(RadialShape(0.2, 0.0, 1.0), g0=1.0, center=(1.0, 0.0))
    assert velocity_coefficient(ext, np.array([1.5, 0.0]), 0.0) == pytest.approx(1.25)
    assert velocity_coefficient(ext, np.array([3.0, 0.0]), 0.0) == 1.0


@given(st.floats(0.0, 0.99), st.floats(0.0, 0.5), st.floats(0.0, 3.0))
def test_velocity_coefficient_at_least_one(v, t, r):
    ext = ExteriorDensity(RadialShape.plateau(v, 2.0, 0.5), g0=1.0)
    g = velocity_coefficient(ext, r, t)
    assert g is INFINITE or g >= 1.0


def test_shape_taper_and_levels():
    s = RadialShape.plateau(0.8, 1.0, 0.5)
    assert s(np.array(0.5)) == 0.8
    assert float(s(np.array(1.25))) == pytest.approx(0.4)
    assert float(s(np.array(1.6))) == 0.0
    assert s.radius_at_least(0.4) == pytest.approx(1.25)
    assert s.radius_at_least(0.9) == 0.0
    assert RadialShape.plateau(0.7).radius_at_least(0.5) == math.inf


def test_omega0_sets():
    ring = Omega0("annulus", 2.0, 1.0)
    assert ring.intervals() == [(1.0, 2.0)]
    assert list(ring.contains(np.array([0.5, 1.5, 2.5]))) == [False, True, False]
    assert Omega0("empty").intervals() == []
